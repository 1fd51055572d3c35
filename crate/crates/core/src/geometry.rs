//! Flat model geometries, Picard coordinates and the lattice action.
//!
//! Spinors and forms are stored as Fourier coefficients on a cover torus with
//! side lengths [`ModelGeometry::cover_lengths`]. For the flat torus bundle the
//! cover is the double cover `R/2Z x T^2` and only deck-invariant fields are
//! physical.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{mat_vec, scale, sigma_dot, C64, ONE};

pub type Mode = [i64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("expected a vector of length {expected}, got {got}")]
    InvalidDimension { expected: usize, got: usize },
    #[error("invalid mode index {0:?}")]
    InvalidMode(Vec<i64>),
    #[error("geometry {0} has no spectral model")]
    UnsupportedGeometry(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeometryKind {
    T3,
    FlatTorusBundle,
    SphereBundle { d: i64, g: i64 },
    S3Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpinData {
    /// Spin-structure shift, one entry in `{0, 1/2}` per torus direction
    /// (three on `T^3`, two fiber directions on the torus bundle).
    Shift(Vec<f64>),
    /// Torsion class `q mod d` of a sphere bundle.
    Torsion(i64),
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelGeometry {
    pub kind: GeometryKind,
    pub metric_scale: f64,
    pub spin: SpinData,
}

impl ModelGeometry {
    pub fn new(
        kind: GeometryKind,
        metric_scale: f64,
        spin: SpinData,
    ) -> Result<Self, GeometryError> {
        if !(metric_scale > 0.0 && metric_scale.is_finite()) {
            return Err(GeometryError::InvalidGeometry(format!(
                "metric_scale must be positive, got {metric_scale}"
            )));
        }
        let shift_ok = |v: &Vec<f64>, n: usize| {
            v.len() == n && v.iter().all(|&x| x == 0.0 || x == 0.5)
        };
        match (kind, &spin) {
            (GeometryKind::T3, SpinData::Shift(v)) if shift_ok(v, 3) => {}
            (GeometryKind::FlatTorusBundle, SpinData::Shift(v)) if shift_ok(v, 2) => {}
            (GeometryKind::SphereBundle { d, g }, SpinData::Torsion(q)) => {
                if !(0 < g && g < d && g <= *q && *q < d) {
                    return Err(GeometryError::InvalidGeometry(format!(
                        "sphere bundle needs 0 < g < d and g <= q < d (d={d}, g={g}, q={q})"
                    )));
                }
            }
            (GeometryKind::S3Stub, SpinData::None) => {}
            _ => {
                return Err(GeometryError::InvalidGeometry(format!(
                    "spin data {spin:?} does not fit {kind:?}"
                )))
            }
        }
        Ok(Self { kind, metric_scale, spin })
    }

    pub fn t3(xi: [f64; 3]) -> Self {
        Self::new(GeometryKind::T3, 1.0, SpinData::Shift(xi.to_vec())).expect("valid T3 shift")
    }

    /// Flat torus bundle with spin structure `s_j`, `j = 0..=3`.
    pub fn flat_torus_bundle(j: usize) -> Self {
        let shift = match j {
            0 => vec![0.0, 0.0],
            1 => vec![0.5, 0.0],
            2 => vec![0.0, 0.5],
            3 => vec![0.5, 0.5],
            _ => panic!("spin structure index must be 0..=3"),
        };
        Self::new(GeometryKind::FlatTorusBundle, 1.0, SpinData::Shift(shift))
            .expect("valid bundle shift")
    }

    pub fn sphere_bundle(d: i64, g: i64, q: i64) -> Result<Self, GeometryError> {
        Self::new(GeometryKind::SphereBundle { d, g }, 1.0, SpinData::Torsion(q))
    }

    pub fn s3_stub() -> Self {
        Self::new(GeometryKind::S3Stub, 1.0, SpinData::None).expect("valid stub")
    }

    pub fn name(&self) -> String {
        match self.kind {
            GeometryKind::T3 => "T3".into(),
            GeometryKind::FlatTorusBundle => "FlatTorusBundle".into(),
            GeometryKind::SphereBundle { d, g } => format!("SphereBundle(d={d},g={g})"),
            GeometryKind::S3Stub => "S3stub".into(),
        }
    }

    pub fn has_spectral_model(&self) -> bool {
        matches!(self.kind, GeometryKind::T3 | GeometryKind::FlatTorusBundle)
    }

    pub fn require_spectral(&self) -> Result<(), GeometryError> {
        if self.has_spectral_model() {
            Ok(())
        } else {
            Err(GeometryError::UnsupportedGeometry(self.name()))
        }
    }

    pub fn b1(&self) -> usize {
        match self.kind {
            GeometryKind::T3 => 3,
            GeometryKind::FlatTorusBundle => 1,
            _ => 0,
        }
    }

    pub fn cover_lengths(&self) -> [f64; 3] {
        match self.kind {
            GeometryKind::FlatTorusBundle => [2.0, 1.0, 1.0],
            _ => [1.0, 1.0, 1.0],
        }
    }

    /// Spinor shift on the cover. The torus bundle carries a half shift along
    /// the base circle of the double cover.
    pub fn spinor_shift(&self) -> [f64; 3] {
        match (&self.kind, &self.spin) {
            (GeometryKind::T3, SpinData::Shift(v)) => [v[0], v[1], v[2]],
            (GeometryKind::FlatTorusBundle, SpinData::Shift(v)) => [0.5, v[0], v[1]],
            _ => [0.0; 3],
        }
    }

    /// Fiber shift `xi` of the torus bundle (zero for other kinds).
    pub fn fiber_shift(&self) -> [f64; 2] {
        match (&self.kind, &self.spin) {
            (GeometryKind::FlatTorusBundle, SpinData::Shift(v)) => [v[0], v[1]],
            _ => [0.0; 2],
        }
    }

    /// Embeds Picard coordinates into a constant 3-vector.
    pub fn embed_picard(&self, c: &[f64]) -> [f64; 3] {
        match self.kind {
            GeometryKind::FlatTorusBundle => [c[0], 0.0, 0.0],
            _ => [c[0], c[1], c[2]],
        }
    }

    /// Physical momentum of a spinor cover mode at Picard coordinates `c`.
    pub fn spinor_momentum(&self, m: Mode, c: &[f64]) -> [f64; 3] {
        let l = self.cover_lengths();
        let xi = self.spinor_shift();
        let e = self.embed_picard(c);
        let s = 2.0 * PI * self.metric_scale;
        [
            s * ((m[0] as f64 + xi[0]) / l[0] + e[0]),
            s * ((m[1] as f64 + xi[1]) / l[1] + e[1]),
            s * ((m[2] as f64 + xi[2]) / l[2] + e[2]),
        ]
    }

    /// Physical momentum of a form cover mode.
    pub fn form_momentum(&self, m: Mode) -> [f64; 3] {
        let l = self.cover_lengths();
        let s = 2.0 * PI * self.metric_scale;
        [s * m[0] as f64 / l[0], s * m[1] as f64 / l[1], s * m[2] as f64 / l[2]]
    }

    /// Cover-mode shift implementing multiplication by `exp(2 pi i h.x)`.
    pub fn lattice_mode_shift(&self, h: &[i64]) -> Mode {
        match self.kind {
            GeometryKind::FlatTorusBundle => [2 * h[0], 0, 0],
            _ => [h[0], h[1], h[2]],
        }
    }

    fn check_len(&self, n: usize) -> Result<(), GeometryError> {
        if n != self.b1() {
            return Err(GeometryError::InvalidDimension { expected: self.b1(), got: n });
        }
        Ok(())
    }
}

/// Point of the Picard torus in the fundamental domain `[0,1)^b1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardPoint {
    pub coords: Vec<f64>,
}

impl PicardPoint {
    pub fn origin(b1: usize) -> Self {
        Self { coords: vec![0.0; b1] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeElement {
    pub h: Vec<i64>,
}

pub fn reduce_mod_lattice(
    geom: &ModelGeometry,
    a_raw: &[f64],
) -> Result<(PicardPoint, LatticeElement), GeometryError> {
    geom.check_len(a_raw.len())?;
    let mut coords = Vec::with_capacity(a_raw.len());
    let mut h = Vec::with_capacity(a_raw.len());
    for &a in a_raw {
        let mut f = a.floor();
        let mut r = a - f;
        // a tiny negative input can round a - floor(a) up to exactly 1.0
        if r >= 1.0 {
            f += 1.0;
            r = 0.0;
        }
        coords.push(r);
        h.push(f as i64);
    }
    Ok((PicardPoint { coords }, LatticeElement { h }))
}

/// Spinor field on the cover as mode-indexed coefficient vectors.
pub type ModeVector = BTreeMap<Vec<i64>, [C64; 2]>;

/// Applies `h.(a, phi) = (a - h, u_h phi)`. The returned coordinates are the
/// unreduced lift `a - h`.
pub fn lattice_act(
    geom: &ModelGeometry,
    h: &LatticeElement,
    a: &[f64],
    phi: &ModeVector,
) -> Result<(Vec<f64>, ModeVector), GeometryError> {
    geom.require_spectral()?;
    geom.check_len(h.h.len())?;
    geom.check_len(a.len())?;
    let shift = geom.lattice_mode_shift(&h.h);
    let mut out = ModeVector::new();
    for (m, v) in phi {
        if m.len() != 3 {
            return Err(GeometryError::InvalidMode(m.clone()));
        }
        let key = vec![m[0] + shift[0], m[1] + shift[1], m[2] + shift[2]];
        out.insert(key, *v);
    }
    let lifted = a.iter().zip(&h.h).map(|(x, k)| x - *k as f64).collect();
    Ok((lifted, out))
}

/// Applies `D_a` mode by mode at (possibly unreduced) Picard coordinates.
pub fn apply_dirac(
    geom: &ModelGeometry,
    c: &[f64],
    phi: &ModeVector,
) -> Result<ModeVector, GeometryError> {
    geom.require_spectral()?;
    geom.check_len(c.len())?;
    let mut out = ModeVector::new();
    for (m, v) in phi {
        if m.len() != 3 {
            return Err(GeometryError::InvalidMode(m.clone()));
        }
        let k = geom.spinor_momentum([m[0], m[1], m[2]], c);
        let symbol = scale(&sigma_dot(k), -ONE);
        out.insert(m.clone(), mat_vec(&symbol, v));
    }
    Ok(out)
}

pub fn l2_norm(phi: &ModeVector) -> f64 {
    phi.values().map(|v| v[0].norm_sqr() + v[1].norm_sqr()).sum::<f64>().sqrt()
}

/// Constant 1-form, a tangent direction of the Picard torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicForm {
    pub label: String,
    pub direction: [f64; 3],
}

impl HarmonicForm {
    /// Fourier data: a single zero-mode coefficient.
    pub fn modes(&self) -> Vec<(Mode, [C64; 3])> {
        let d = self.direction;
        vec![([0, 0, 0], [C64::new(d[0], 0.0), C64::new(d[1], 0.0), C64::new(d[2], 0.0)])]
    }
}

pub fn harmonic_basis(geom: &ModelGeometry) -> Result<Vec<HarmonicForm>, GeometryError> {
    match geom.kind {
        GeometryKind::T3 => Ok((0..3)
            .map(|j| {
                let mut d = [0.0; 3];
                d[j] = 1.0;
                HarmonicForm { label: format!("dx{}", j + 1), direction: d }
            })
            .collect()),
        GeometryKind::FlatTorusBundle => {
            Ok(vec![HarmonicForm { label: "dx".into(), direction: [1.0, 0.0, 0.0] }])
        }
        _ => Err(GeometryError::UnsupportedGeometry(geom.name())),
    }
}

/// Fourier coefficient of `d w` (as the vector `i k x w`) for a 1-form mode.
pub fn form_d(k: [f64; 3], w: [C64; 3]) -> [C64; 3] {
    let ik = [C64::new(0.0, k[0]), C64::new(0.0, k[1]), C64::new(0.0, k[2])];
    crate::linalg::cross(ik, w)
}

/// Fourier coefficient of `d* w = -i k . w` for a 1-form mode.
pub fn form_codifferential(k: [f64; 3], w: [C64; 3]) -> C64 {
    -(C64::new(0.0, k[0]) * w[0] + C64::new(0.0, k[1]) * w[1] + C64::new(0.0, k[2]) * w[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_examples() {
        let g = ModelGeometry::t3([0.0; 3]);
        let (p, h) = reduce_mod_lattice(&g, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.coords, vec![0.0, 0.0, 0.0]);
        assert_eq!(h.h, vec![0, 0, 0]);
        let (p, h) = reduce_mod_lattice(&g, &[1.25, -0.5, 3.0]).unwrap();
        assert_eq!(p.coords, vec![0.25, 0.5, 0.0]);
        assert_eq!(h.h, vec![1, -1, 3]);
        let (p, h) = reduce_mod_lattice(&g, &[0.999999999, 0.0, 0.0]).unwrap();
        assert_eq!(p.coords, vec![0.999999999, 0.0, 0.0]);
        assert_eq!(h.h, vec![0, 0, 0]);
        assert_eq!(
            reduce_mod_lattice(&g, &[0.1]),
            Err(GeometryError::InvalidDimension { expected: 3, got: 1 })
        );
    }

    #[test]
    fn reduce_tiny_negative_stays_in_domain() {
        let g = ModelGeometry::flat_torus_bundle(1);
        let (p, h) = reduce_mod_lattice(&g, &[-1e-18]).unwrap();
        assert!(p.coords[0] >= 0.0 && p.coords[0] < 1.0);
        assert_eq!(p.coords[0] + h.h[0] as f64, 0.0);
    }

    #[test]
    fn lattice_act_identity_and_inverse() {
        let g = ModelGeometry::t3([0.5, 0.0, 0.5]);
        let mut phi = ModeVector::new();
        phi.insert(vec![0, 1, -2], [C64::new(1.0, 2.0), C64::new(-0.5, 0.0)]);
        phi.insert(vec![3, 0, 0], [C64::new(0.0, 1.0), C64::new(0.25, -1.0)]);
        let a = [0.1, 0.2, 0.3];
        let zero = LatticeElement { h: vec![0, 0, 0] };
        let (a0, p0) = lattice_act(&g, &zero, &a, &phi).unwrap();
        assert_eq!(a0, a.to_vec());
        assert_eq!(p0, phi);
        let h = LatticeElement { h: vec![1, -2, 0] };
        let minus = LatticeElement { h: vec![-1, 2, 0] };
        let (a1, p1) = lattice_act(&g, &h, &a, &phi).unwrap();
        let (a2, p2) = lattice_act(&g, &minus, &a1, &p1).unwrap();
        assert_eq!(p2, phi);
        for (x, y) in a2.iter().zip(a) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!((l2_norm(&p1) - l2_norm(&phi)).abs() < 1e-15);
        let mut bad = ModeVector::new();
        bad.insert(vec![1, 2], [C64::new(1.0, 0.0); 2]);
        assert!(matches!(lattice_act(&g, &h, &a, &bad), Err(GeometryError::InvalidMode(_))));
    }

    #[test]
    fn lattice_action_conjugates_dirac() {
        for g in [ModelGeometry::t3([0.5, 0.0, 0.5]), ModelGeometry::flat_torus_bundle(2)] {
            let b1 = g.b1();
            let mut phi = ModeVector::new();
            let mut t = 0.0f64;
            'fill: for m0 in -2i64..=2 {
                for m1 in -2i64..=2 {
                    for m2 in -1i64..=1 {
                        if phi.len() == 50 {
                            break 'fill;
                        }
                        t += 0.37;
                        phi.insert(vec![m0, m1, m2], [C64::new(t.sin(), t.cos()), C64::new(0.3 * t, -1.0)]);
                    }
                }
            }
            let a: Vec<f64> = [0.21, 0.64, 0.93][..b1].to_vec();
            let h = LatticeElement { h: [2, -1, 3][..b1].to_vec() };
            let (ah, uphi) = lattice_act(&g, &h, &a, &phi).unwrap();
            let lhs = apply_dirac(&g, &ah, &uphi).unwrap();
            let (_, rhs) = lattice_act(&g, &h, &a, &apply_dirac(&g, &a, &phi).unwrap()).unwrap();
            assert_eq!(lhs.len(), 50);
            for (m, v) in &lhs {
                let w = rhs[m];
                assert!((v[0] - w[0]).norm() < 1e-12 && (v[1] - w[1]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn harmonic_basis_is_orthonormal_and_closed() {
        for g in [ModelGeometry::t3([0.0; 3]), ModelGeometry::flat_torus_bundle(1)] {
            let basis = harmonic_basis(&g).unwrap();
            assert_eq!(basis.len(), g.b1());
            for (i, a) in basis.iter().enumerate() {
                for (j, b) in basis.iter().enumerate() {
                    let ip: f64 = (0..3).map(|t| a.direction[t] * b.direction[t]).sum();
                    assert_eq!(ip, if i == j { 1.0 } else { 0.0 });
                }
                for (m, w) in a.modes() {
                    let k = g.form_momentum(m);
                    assert!(form_d(k, w).iter().all(|z| *z == C64::new(0.0, 0.0)));
                    assert_eq!(form_codifferential(k, w), C64::new(0.0, 0.0));
                }
            }
        }
        assert!(harmonic_basis(&ModelGeometry::s3_stub()).is_err());
    }

    #[test]
    fn sphere_bundle_hypotheses() {
        assert!(ModelGeometry::sphere_bundle(2, 1, 1).is_ok());
        assert!(ModelGeometry::sphere_bundle(2, 1, 2).is_err());
        assert!(ModelGeometry::sphere_bundle(3, 0, 1).is_err());
        assert!(ModelGeometry::sphere_bundle(4, 2, 1).is_err());
    }
}
