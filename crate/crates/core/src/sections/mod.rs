//! Spectral sections realised as gap-aligned spectral cuts, the kernel-free
//! perturbation `D'`, the truncation bundles `F_n`, `W_n` and the dimension
//! ledger of a spectral system.
//!
//! A cut is placed independently at every base point, but always in the gap
//! with the same ordinal (the signed count `nu`). Two cuts with equal ordinal
//! at nearby points bound the same number of eigenvalues, so the family of
//! projections is continuous wherever the chosen gap stays open.

mod cut;
mod perturbed;
mod system;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dirac::DiracError;

pub use cut::{
    build_cut_section, gap_options, intersect_bundles, intersect_forms, BundleMode, CutRule, FiniteBundle,
    FormBundle, SpectralCutSection, SpectralOperator,
};
pub use perturbed::{build_perturbed_dirac, PerturbationCuts, PerturbedDirac};
pub use system::{
    build_spectral_system, default_ladder_targets, kclass_difference, ledger_from_dims,
    system_ledger, EtaMap, KClassDifference, LadderTargets, LedgerEntry, SpectralSystem,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SectionError {
    #[error(transparent)]
    Dirac(#[from] DiracError),
    #[error("no global gap for {kind} cut near {target}: {reason} (worst base point {worst_base:?})")]
    NoGlobalGap { kind: String, target: f64, worst_base: Vec<f64>, reason: String },
    #[error("rank jumps from {rank_a} at {a:?} to {rank_b} at {b:?}")]
    RankJump { a: Vec<f64>, b: Vec<f64>, rank_a: usize, rank_b: usize },
    #[error("query ({i1}, {i2}) lies below the ladder floor ({}, {})", floor.0, floor.1)]
    BelowLadder { i1: i64, i2: i64, floor: (i64, i64) },
    #[error("ladder {ladder} violates the spacing conditions at level {level}: {detail}")]
    LadderViolation { ladder: String, level: usize, detail: String },
    #[error("spinor sections need the perturbed operator D'")]
    MissingPerturbation,
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SectionKind {
    /// Section of `D'`.
    P,
    /// Section of `-D'`.
    Q,
    /// Section of `*d` on coexact forms.
    WP,
    /// Section of `-*d`.
    WQ,
}

impl SectionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SectionKind::P => "P",
            SectionKind::Q => "Q",
            SectionKind::WP => "WP",
            SectionKind::WQ => "WQ",
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            SectionKind::P | SectionKind::WP => 1.0,
            SectionKind::Q | SectionKind::WQ => -1.0,
        }
    }

    pub fn is_spinor(self) -> bool {
        matches!(self, SectionKind::P | SectionKind::Q)
    }
}

/// Sample points of the Picard torus in Picard coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseGrid {
    pub b1: usize,
    /// Points per axis; the points are stored in row-major order.
    pub shape: Vec<usize>,
    /// Whether the last point on each axis neighbours the first.
    pub periodic: bool,
    pub points: Vec<Vec<f64>>,
}

impl BaseGrid {
    /// `n^b1` points `i / n`.
    pub fn regular(b1: usize, n: usize) -> Self {
        let axis: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        Self::product(b1, &axis, true)
    }

    /// `n^b1` points `(i + 1/2) / n`, avoiding the symmetric points where
    /// eigenvalues of distinct blocks coincide.
    pub fn staggered(b1: usize, n: usize) -> Self {
        let axis: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        Self::product(b1, &axis, true)
    }

    /// `n^b1` points evenly spaced in `[-radius, radius]` around the origin,
    /// reduced into `[0, 1)`.
    pub fn concentrated(b1: usize, n: usize, radius: f64) -> Self {
        let axis: Vec<f64> = (0..n)
            .map(|i| {
                let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.5 };
                (-radius + 2.0 * radius * t).rem_euclid(1.0)
            })
            .collect();
        Self::product(b1, &axis, false)
    }

    pub fn single(point: Vec<f64>) -> Self {
        Self { b1: point.len(), shape: vec![1; point.len()], periodic: false, points: vec![point] }
    }

    /// Arbitrary sample points, neighbouring in the given order.
    pub fn scattered(b1: usize, points: Vec<Vec<f64>>) -> Self {
        Self { b1, shape: vec![points.len()], periodic: false, points }
    }

    fn product(b1: usize, axis: &[f64], periodic: bool) -> Self {
        let mut points = vec![Vec::new()];
        for _ in 0..b1 {
            let mut next = Vec::with_capacity(points.len() * axis.len());
            for p in &points {
                for &x in axis {
                    let mut q = p.clone();
                    q.push(x);
                    next.push(q);
                }
            }
            points = next;
        }
        Self { b1, shape: vec![axis.len(); b1], periodic, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index pairs of grid neighbours along each axis.
    pub fn neighbours(&self) -> Vec<(usize, usize)> {
        if self.shape.iter().product::<usize>() != self.points.len() {
            return (1..self.points.len()).map(|i| (i - 1, i)).collect();
        }
        let mut out = Vec::new();
        let mut stride = 1;
        for axis in (0..self.shape.len()).rev() {
            let n = self.shape[axis];
            for i in 0..self.points.len() {
                let pos = (i / stride) % n;
                if pos + 1 < n {
                    out.push((i, i + stride));
                } else if self.periodic && n > 2 {
                    out.push((i, i - pos * stride));
                }
            }
            stride *= n;
        }
        out
    }
}

/// Tuning of the section constructions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionSettings {
    /// Width of the window a cut may move in.
    pub delta: f64,
    pub spectral: crate::dirac::SpectralSettings,
}

impl Default for SectionSettings {
    fn default() -> Self {
        Self { delta: 1.0, spectral: Default::default() }
    }
}

impl SectionSettings {
    /// Certified half-widths must exceed the eigenvalue-on-cut tolerance.
    pub fn min_half_width(&self, target: f64) -> f64 {
        self.spectral.gap_tol(target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shapes_and_neighbours() {
        let g = BaseGrid::regular(2, 4);
        assert_eq!(g.len(), 16);
        assert_eq!(g.points[5], vec![0.25, 0.25]);
        let nb = g.neighbours();
        assert_eq!(nb.len(), 32);
        assert!(nb.contains(&(3, 0)));
        let c = BaseGrid::concentrated(1, 5, 0.1);
        assert!(c.points.iter().all(|p| p[0] >= 0.0 && p[0] < 1.0));
        assert_eq!(c.neighbours().len(), 4);
        let s = BaseGrid::regular(0, 8);
        assert_eq!(s.points, vec![Vec::<f64>::new()]);
    }
}
