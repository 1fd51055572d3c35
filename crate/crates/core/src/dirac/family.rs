//! Block decomposition of the Dirac family on the flat models.
//!
//! On `T^3` every Fourier mode is a 2-dimensional block with symbol
//! `-sigma . k`. On the torus bundle the deck map pairs cover modes
//! `(m_x, n)` and `(m_x, iota(n))`; a pair spans one 2-dimensional invariant
//! block, and a mode fixed by `iota` spans a 1-dimensional block.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::geometry::{GeometryKind, ModelGeometry, Mode};
use crate::linalg::{
    dirac_symbol_eigen, norm3, scale, sigma_dot, Mat2, Vec2, C64, I, ONE, ZERO,
};

use super::DiracError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// A single cover mode (`T^3`).
    Free,
    /// Two cover modes exchanged by the deck map.
    Pair,
    /// A cover mode fixed by the deck map; one invariant direction.
    Fixed,
}

/// One invariant block of `D_c` at a fixed base point.
#[derive(Debug, Clone)]
pub struct SpinorBlock {
    pub label: Mode,
    pub kind: BlockKind,
    /// Physical momentum of the labelling cover mode.
    pub k: [f64; 3],
    /// Metric scale; `dk/da_r = scale`.
    scale: f64,
    partner: Option<Mode>,
}

/// Eigenpair of a block in block coordinates.
#[derive(Debug, Clone, Copy)]
pub struct BlockEigen {
    pub branch: Branch,
    pub eigenvalue: f64,
    pub vector: Vec2,
}

impl SpinorBlock {
    pub fn dim(&self) -> usize {
        match self.kind {
            BlockKind::Fixed => 1,
            _ => 2,
        }
    }

    fn fixed_parity(&self) -> f64 {
        if self.label[0].rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Block Hamiltonian in block coordinates. A fixed block uses only the
    /// first coordinate.
    pub fn hamiltonian(&self) -> Mat2 {
        match self.kind {
            BlockKind::Fixed => {
                let eta = -self.k[0] * self.fixed_parity();
                [[C64::new(eta, 0.0), ZERO], [ZERO, ZERO]]
            }
            _ => scale(&sigma_dot(self.k), -ONE),
        }
    }

    /// Derivative of the block Hamiltonian along a harmonic direction `v`
    /// (in harmonic-form units `a_r = 2 pi c`, embedded in 3-space).
    pub fn d_hamiltonian(&self, v: [f64; 3]) -> Mat2 {
        let sv = [self.scale * v[0], self.scale * v[1], self.scale * v[2]];
        match self.kind {
            BlockKind::Fixed => {
                [[C64::new(-sv[0] * self.fixed_parity(), 0.0), ZERO], [ZERO, ZERO]]
            }
            _ => scale(&sigma_dot(sv), -ONE),
        }
    }

    pub fn eigen(&self) -> Vec<BlockEigen> {
        match self.kind {
            BlockKind::Fixed => {
                let eta = -self.k[0] * self.fixed_parity();
                vec![BlockEigen {
                    branch: self.fixed_nominal_branch(),
                    eigenvalue: eta,
                    vector: [ONE, ZERO],
                }]
            }
            _ => {
                let [(ep, vp), (em, vm)] = dirac_symbol_eigen(self.k);
                vec![
                    BlockEigen { branch: Branch::Plus, eigenvalue: ep, vector: vp },
                    BlockEigen { branch: Branch::Minus, eigenvalue: em, vector: vm },
                ]
            }
        }
    }

    /// Branch label of a fixed block: the sign of its eigenvalue at `c = 0`.
    /// The eigenvalue moves linearly in `c`, so the label is a continuous
    /// choice over the whole Picard circle.
    fn fixed_nominal_branch(&self) -> Branch {
        let p = (self.label[0] as f64 + 0.5) / 2.0;
        if -p * self.fixed_parity() > 0.0 {
            Branch::Plus
        } else {
            Branch::Minus
        }
    }

    /// Isometric embedding of block coordinates into cover coefficients.
    pub fn embedding(&self) -> Vec<(Mode, Mat2)> {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        match self.kind {
            BlockKind::Free => vec![(self.label, crate::linalg::identity())],
            BlockKind::Pair => {
                let phase = C64::from_polar(1.0, PI * (self.label[0] as f64 + 0.5));
                // eps * M^{-1} with M = i sigma_1
                let m_inv = [[ZERO, -I], [-I, ZERO]];
                vec![
                    (self.label, [[h, ZERO], [ZERO, h]]),
                    (self.partner.expect("pair partner"), scale(&m_inv, phase * h)),
                ]
            }
            BlockKind::Fixed => {
                let s = C64::new(self.fixed_parity() * FRAC_1_SQRT_2, 0.0);
                vec![(self.label, [[h, ZERO], [s, ZERO]])]
            }
        }
    }

    /// |k| for 2-dimensional blocks, |eigenvalue| for fixed blocks.
    pub fn radius(&self) -> f64 {
        match self.kind {
            BlockKind::Fixed => self.k[0].abs(),
            _ => norm3(self.k),
        }
    }
}

/// Involution of fiber indices induced by the deck map.
pub fn fiber_involution(geom: &ModelGeometry, n: [i64; 2]) -> [i64; 2] {
    let xi = geom.fiber_shift();
    [-n[0] - (2.0 * xi[0]) as i64, -n[1] - (2.0 * xi[1]) as i64]
}

/// The Dirac family of a flat model geometry, truncated to `|mode| <= cap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiracFamily {
    pub geom: ModelGeometry,
    pub cap: i64,
}

impl DiracFamily {
    pub fn new(geom: &ModelGeometry, cap: i64) -> Result<Self, DiracError> {
        geom.require_spectral()?;
        Ok(Self { geom: geom.clone(), cap })
    }

    fn unit(&self) -> f64 {
        2.0 * PI * self.geom.metric_scale
    }

    /// Largest |eigenvalue| for which the truncation is complete.
    pub fn max_radius(&self) -> f64 {
        self.unit() * (self.cap as f64 - 1.0)
    }

    pub fn check_radius(&self, r: f64) -> Result<(), DiracError> {
        if !(r <= self.max_radius()) {
            return Err(DiracError::WindowTooLarge { requested: r, limit: self.max_radius() });
        }
        Ok(())
    }

    /// Block with the given label at Picard coordinates `c` (unreduced lifts
    /// allowed).
    pub fn block(&self, label: Mode, c: &[f64]) -> SpinorBlock {
        let k = self.geom.spinor_momentum(label, c);
        let (kind, partner) = match self.geom.kind {
            GeometryKind::FlatTorusBundle => {
                let n = [label[1], label[2]];
                let p = fiber_involution(&self.geom, n);
                if p == n {
                    (BlockKind::Fixed, None)
                } else {
                    (BlockKind::Pair, Some([label[0], p[0], p[1]]))
                }
            }
            _ => (BlockKind::Free, None),
        };
        SpinorBlock { label, kind, k, scale: self.geom.metric_scale, partner }
    }

    /// Whether `label` is the canonical representative of its block.
    pub fn is_block_label(&self, label: Mode) -> bool {
        match self.geom.kind {
            GeometryKind::FlatTorusBundle => {
                let n = [label[1], label[2]];
                n >= fiber_involution(&self.geom, n)
            }
            _ => true,
        }
    }

    /// Visits every block whose radius lies in `[rlo, rhi]`.
    pub fn for_each_block_in_shell(
        &self,
        c: &[f64],
        rlo: f64,
        rhi: f64,
        mut f: impl FnMut(SpinorBlock),
    ) {
        let u = self.unit();
        let t = rhi / u;
        let xi = self.geom.spinor_shift();
        let e = self.geom.embed_picard(c);
        match self.geom.kind {
            GeometryKind::FlatTorusBundle => {
                for n1 in int_range(xi[1], t) {
                    let y1 = n1 as f64 + xi[1];
                    let t1 = (t * t - y1 * y1).max(0.0).sqrt();
                    for n2 in int_range(xi[2], t1) {
                        let n = [n1, n2];
                        if n < fiber_involution(&self.geom, n) {
                            continue;
                        }
                        let y2 = n2 as f64 + xi[2];
                        let t2 = (t1 * t1 - y2 * y2).max(0.0).sqrt();
                        // x momentum (m_x + 1/2)/2 + c
                        let lo = (2.0 * (-t2 - e[0]) - 0.5).floor() as i64 - 1;
                        let hi = (2.0 * (t2 - e[0]) - 0.5).ceil() as i64 + 1;
                        for mx in lo..=hi {
                            let b = self.block([mx, n1, n2], c);
                            let r = b.radius();
                            if r >= rlo && r <= rhi {
                                f(b);
                            }
                        }
                    }
                }
            }
            _ => {
                for m1 in int_range(xi[0] + e[0], t) {
                    let x1 = m1 as f64 + xi[0] + e[0];
                    let t1 = (t * t - x1 * x1).max(0.0).sqrt();
                    for m2 in int_range(xi[1] + e[1], t1) {
                        let x2 = m2 as f64 + xi[1] + e[1];
                        let rem = t * t - x1 * x1 - x2 * x2;
                        let t2 = rem.max(0.0).sqrt();
                        let off = xi[2] + e[2];
                        let inner = (rlo / u).powi(2) - x1 * x1 - x2 * x2;
                        let skip = if inner > 0.0 {
                            let ri = inner.sqrt();
                            Some(((-ri - off).ceil() as i64 + 1, (ri - off).floor() as i64 - 1))
                        } else {
                            None
                        };
                        for m3 in int_range(off, t2) {
                            if let Some((a, b)) = skip {
                                if m3 >= a && m3 <= b {
                                    continue;
                                }
                            }
                            let blk = self.block([m1, m2, m3], c);
                            let r = blk.radius();
                            if r >= rlo && r <= rhi {
                                f(blk);
                            }
                        }
                    }
                }
            }
        }
    }

    /// All `(block, eigenpair)` with eigenvalue in `[lo, hi]`.
    pub fn eigen_in_window(
        &self,
        c: &[f64],
        lo: f64,
        hi: f64,
    ) -> Result<Vec<(SpinorBlock, BlockEigen)>, DiracError> {
        let rhi = lo.abs().max(hi.abs());
        self.check_radius(rhi)?;
        let rlo = if lo > 0.0 {
            lo
        } else if hi < 0.0 {
            -hi
        } else {
            0.0
        };
        let mut out = Vec::new();
        self.for_each_block_in_shell(c, rlo, rhi, |b| {
            for e in b.eigen() {
                if e.eigenvalue >= lo && e.eigenvalue <= hi {
                    out.push((b.clone(), e));
                }
            }
        });
        Ok(out)
    }

    /// Signed count `#{plus items <= cut} - #{minus items > cut}`.
    ///
    /// At a fixed cut this is locally constant in `c` exactly when no
    /// eigenvalue crosses the cut, which is what makes a family of cuts with a
    /// common count a continuous spectral section.
    pub fn nu(&self, c: &[f64], cut: f64) -> Result<i64, DiracError> {
        let r = cut.abs();
        self.check_radius(r + self.unit())?;
        let mut count = 0i64;
        let u = self.unit();
        // fixed blocks are affine in c and may sit on either side of zero
        let fixed_margin = u;
        self.for_each_block_in_shell(c, 0.0, r + fixed_margin, |b| {
            match b.kind {
                BlockKind::Fixed => {
                    for e in b.eigen() {
                        match e.branch {
                            Branch::Plus if e.eigenvalue <= cut => count += 1,
                            Branch::Minus if e.eigenvalue > cut => count -= 1,
                            _ => {}
                        }
                    }
                }
                _ => {
                    let rad = b.radius();
                    if cut >= 0.0 && rad <= cut {
                        count += 1;
                    } else if cut < 0.0 && rad < -cut {
                        count -= 1;
                    }
                }
            }
        });
        Ok(count)
    }
}

/// Integers `m` with `|m + off| <= t`, padded by one on each side; callers
/// filter exactly.
fn int_range(off: f64, t: f64) -> std::ops::RangeInclusive<i64> {
    let lo = (-t - off).floor() as i64 - 1;
    let hi = (t - off).ceil() as i64 + 1;
    lo..=hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{mat_vec, norm_sqr};

    #[test]
    fn block_eigenvectors_diagonalize_hamiltonian() {
        for geom in [ModelGeometry::t3([0.5, 0.0, 0.5]), ModelGeometry::flat_torus_bundle(0)] {
            let fam = DiracFamily::new(&geom, 8).unwrap();
            fam.for_each_block_in_shell(&[0.3, 0.1, 0.7][..geom.b1()], 0.0, 20.0, |b| {
                let h = b.hamiltonian();
                for e in b.eigen() {
                    let hv = mat_vec(&h, &e.vector);
                    for i in 0..b.dim() {
                        assert!((hv[i] - e.vector[i] * e.eigenvalue).norm() < 1e-12);
                    }
                    assert!((norm_sqr(&e.vector) - 1.0).abs() < 1e-14);
                }
            });
        }
    }

    #[test]
    fn shell_enumeration_matches_brute_force() {
        let geom = ModelGeometry::t3([0.5, 0.5, 0.0]);
        let fam = DiracFamily::new(&geom, 12).unwrap();
        let c = [0.37, 0.81, 0.05];
        let (rlo, rhi) = (13.0, 29.0);
        let mut fast = Vec::new();
        fam.for_each_block_in_shell(&c, rlo, rhi, |b| fast.push(b.label));
        let mut slow = Vec::new();
        for m1 in -12..=12 {
            for m2 in -12..=12 {
                for m3 in -12..=12 {
                    let r = norm3(geom.spinor_momentum([m1, m2, m3], &c));
                    if r >= rlo && r <= rhi {
                        slow.push([m1, m2, m3]);
                    }
                }
            }
        }
        fast.sort();
        slow.sort();
        assert_eq!(fast, slow);
    }

    #[test]
    fn nu_counts_signed_items() {
        let geom = ModelGeometry::t3([0.0; 3]);
        let fam = DiracFamily::new(&geom, 10).unwrap();
        assert_eq!(fam.nu(&[0.0; 3], 0.5).unwrap(), 1);
        assert_eq!(fam.nu(&[0.0; 3], -0.5).unwrap(), -1);
        assert_eq!(fam.nu(&[0.1, 0.0, 0.0], 0.1).unwrap(), 0);
        assert_eq!(fam.nu(&[0.0; 3], 6.5).unwrap(), 7);
    }
}
