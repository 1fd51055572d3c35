//! Spectral data of the Dirac family `D_a` and of `*d` on coexact forms.

pub mod curl;
pub mod family;
pub mod gap;
pub mod projection;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, ModelGeometry, PicardPoint};

pub use curl::{curl_modes, CurlMode};
pub use family::{Branch, BlockKind, DiracFamily, SpinorBlock};
pub use gap::{density_weyl_report, find_gap_in_sorted, find_spectral_gap, DensityReport, GapResult};
pub use projection::{
    commutator_norm, projection_derivative, projection_mask, EigenMatrix, ProjectionSpec,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiracError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("window radius {requested} exceeds the truncation limit {limit}; raise the mode cap")]
    WindowTooLarge { requested: f64, limit: f64 },
    #[error("eigenvalue {eigenvalue} lies within tolerance of the cut {cut}")]
    EigenvalueOnCut { cut: f64, eigenvalue: f64 },
    #[error("no spectral gap found; densest interval [{}, {}] holds {count} eigenvalues", densest.0, densest.1)]
    NoGapFound { densest: (f64, f64), count: usize },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

/// Truncation and tolerance settings shared by the spectral operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSettings {
    pub cap: i64,
    pub gap_tol_rel: f64,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        Self { cap: 24, gap_tol_rel: 1e-9 }
    }
}

impl SpectralSettings {
    pub fn with_cap(cap: i64) -> Self {
        Self { cap, ..Self::default() }
    }

    pub fn gap_tol(&self, cut: f64) -> f64 {
        self.gap_tol_rel * cut.abs().max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenItem {
    pub eigenvalue: f64,
    pub mode: Vec<i64>,
    pub branch: Branch,
    pub multiplicity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSlice {
    pub base: Option<PicardPoint>,
    pub window: (f64, f64),
    pub items: Vec<EigenItem>,
}

impl SpectrumSlice {
    pub fn total_multiplicity(&self) -> u64 {
        self.items.iter().map(|i| i.multiplicity as u64).sum()
    }

    /// Eigenvalues with multiplicities, merging values closer than `tol`.
    pub fn grouped(&self, tol: f64) -> Vec<(f64, u32)> {
        let mut out: Vec<(f64, u32)> = Vec::new();
        for it in &self.items {
            match out.last_mut() {
                Some((v, m)) if (it.eigenvalue - *v).abs() <= tol => *m += it.multiplicity,
                _ => out.push((it.eigenvalue, it.multiplicity)),
            }
        }
        out
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for it in &self.items {
            for _ in 0..it.multiplicity {
                v.push(it.eigenvalue);
            }
        }
        v
    }
}

pub(crate) fn sort_items(items: &mut [EigenItem]) {
    items.sort_by(|a, b| {
        a.eigenvalue
            .total_cmp(&b.eigenvalue)
            .then_with(|| a.mode.cmp(&b.mode))
            .then(a.branch.cmp(&b.branch))
    });
}

/// Spectrum of `D_c` in the closed window `[lo, hi]`.
pub fn dirac_spectrum(
    geom: &ModelGeometry,
    a: &PicardPoint,
    window: (f64, f64),
    settings: &SpectralSettings,
) -> Result<SpectrumSlice, DiracError> {
    let fam = DiracFamily::new(geom, settings.cap)?;
    dirac_spectrum_at(&fam, &a.coords, window).map(|mut s| {
        s.base = Some(a.clone());
        s
    })
}

/// Same as [`dirac_spectrum`] for unreduced coordinates.
pub fn dirac_spectrum_at(
    fam: &DiracFamily,
    c: &[f64],
    window: (f64, f64),
) -> Result<SpectrumSlice, DiracError> {
    if c.len() != fam.geom.b1() {
        return Err(GeometryError::InvalidDimension { expected: fam.geom.b1(), got: c.len() }.into());
    }
    let (lo, hi) = window;
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(DiracError::InvalidParameters(format!("bad window [{lo}, {hi}]")));
    }
    let mut items: Vec<EigenItem> = fam
        .eigen_in_window(c, lo, hi)?
        .into_iter()
        .map(|(b, e)| EigenItem {
            eigenvalue: e.eigenvalue,
            mode: b.label.to_vec(),
            branch: e.branch,
            multiplicity: 1,
        })
        .collect();
    sort_items(&mut items);
    Ok(SpectrumSlice { base: None, window, items })
}

/// Spectrum of `*d` on coexact forms in `[lo, hi]` (base independent).
pub fn curl_spectrum(
    geom: &ModelGeometry,
    window: (f64, f64),
    settings: &SpectralSettings,
) -> Result<SpectrumSlice, DiracError> {
    let (lo, hi) = window;
    if !(lo <= hi) {
        return Err(DiracError::InvalidParameters(format!("bad window [{lo}, {hi}]")));
    }
    let mut items: Vec<EigenItem> = curl_modes(geom, lo, hi, settings.cap)?
        .into_iter()
        .map(|m| EigenItem { eigenvalue: m.eigenvalue, mode: m.label, branch: m.branch, multiplicity: 1 })
        .collect();
    sort_items(&mut items);
    Ok(SpectrumSlice { base: None, window, items })
}

/// Selection of eigenmodes with eigenvalue in `(lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionMask {
    pub base: PicardPoint,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub selected: BTreeSet<(Vec<i64>, Branch)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn t3_kernel_and_first_shell() {
        let g = ModelGeometry::t3([0.0; 3]);
        let s = SpectralSettings::default();
        let a = PicardPoint::origin(3);
        let sl = dirac_spectrum(&g, &a, (-0.1, 0.1), &s).unwrap();
        assert_eq!(sl.grouped(1e-12), vec![(0.0, 2)]);
        assert!(sl.items.iter().all(|i| i.mode == vec![0, 0, 0]));
        let sl = dirac_spectrum(&g, &a, (6.0, 6.5), &s).unwrap();
        let gr = sl.grouped(1e-12);
        assert_eq!(gr.len(), 1);
        assert!((gr[0].0 - 2.0 * PI).abs() < 1e-12);
        assert_eq!(gr[0].1, 6);
        assert!(sl.items.iter().all(|i| i.branch == Branch::Plus));
    }

    #[test]
    fn t3_half_shift_lowest() {
        let g = ModelGeometry::t3([0.5; 3]);
        let s = SpectralSettings::default();
        let sl = dirac_spectrum(&g, &PicardPoint::origin(3), (0.0, 6.0), &s).unwrap();
        let gr = sl.grouped(1e-12);
        assert!((gr[0].0 - PI * 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(gr[0].1, 8);
    }

    #[test]
    fn curl_examples() {
        let g = ModelGeometry::t3([0.0; 3]);
        let s = SpectralSettings::default();
        let sl = curl_spectrum(&g, (6.0, 6.5), &s).unwrap();
        assert_eq!(sl.total_multiplicity(), 6);
        assert!(curl_spectrum(&g, (0.0, 1.0), &s).unwrap().items.is_empty());
        let full = curl_spectrum(&g, (-20.0, 20.0), &s).unwrap();
        let pos = full.grouped(1e-9).into_iter().filter(|x| x.0 > 0.0).collect::<Vec<_>>();
        let neg = full.grouped(1e-9).into_iter().filter(|x| x.0 < 0.0).collect::<Vec<_>>();
        assert_eq!(pos.len(), neg.len());
        for (p, n) in pos.iter().zip(neg.iter().rev()) {
            assert!((p.0 + n.0).abs() < 1e-9);
            assert_eq!(p.1, n.1);
        }
    }

    #[test]
    fn window_cap_enforced() {
        let g = ModelGeometry::t3([0.0; 3]);
        let s = SpectralSettings::with_cap(4);
        let r = dirac_spectrum(&g, &PicardPoint::origin(3), (0.0, 100.0), &s);
        assert!(matches!(r, Err(DiracError::WindowTooLarge { .. })));
        let r = dirac_spectrum(&ModelGeometry::s3_stub(), &PicardPoint::origin(0), (0.0, 1.0), &s);
        assert!(matches!(r, Err(DiracError::Geometry(GeometryError::UnsupportedGeometry(_)))));
    }

    #[test]
    fn lattice_invariance_of_spectrum() {
        let g = ModelGeometry::t3([0.5, 0.0, 0.5]);
        let fam = DiracFamily::new(&g, 12).unwrap();
        let c = [0.3, 0.6, 0.9];
        let a = dirac_spectrum_at(&fam, &c, (-30.0, 30.0)).unwrap().eigenvalues();
        let b = dirac_spectrum_at(&fam, &[c[0] - 1.0, c[1] + 2.0, c[2]], (-30.0, 30.0))
            .unwrap()
            .eigenvalues();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
