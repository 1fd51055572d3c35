use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirac::family::BlockEigen;
use crate::dirac::{DiracFamily, SpinorBlock};
use crate::geometry::ModelGeometry;

use super::{BaseGrid, CutRule, SectionError, SectionSettings, SpectralOperator};

/// Cuts `q in (-2s, -s)`, `p0 in (-s, s)`, `r in (s, 2s)` of `D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationCuts {
    pub q: CutRule,
    pub p0: CutRule,
    pub r: CutRule,
}

/// `D' = D + A` with `A` diagonal in the eigenbasis of `D`: eigenvalues in
/// `(q, p0]` move to `-s`, eigenvalues in `(p0, r]` move to `+s`, all others
/// are kept. `cuts = None` is the identity perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedDirac {
    pub family: DiracFamily,
    pub s: f64,
    pub cuts: Option<PerturbationCuts>,
}

impl PerturbedDirac {
    pub fn identity(family: DiracFamily, s: f64) -> Self {
        Self { family, s, cuts: None }
    }

    pub fn is_identity(&self) -> bool {
        self.cuts.is_none()
    }

    /// `(q, p0, r)` at `c`.
    pub fn cuts_at(&self, c: &[f64]) -> Result<Option<[f64; 3]>, SectionError> {
        let Some(k) = &self.cuts else { return Ok(None) };
        let op = SpectralOperator::Dirac(self.family.clone());
        let q = k.q.evaluate(&op, 1.0, c)?.0;
        let p0 = k.p0.evaluate(&op, 1.0, c)?.0;
        let r = k.r.evaluate(&op, 1.0, c)?.0;
        Ok(Some([q, p0, r]))
    }

    /// Eigenvalue of `D'` on the eigenvector of `D` with eigenvalue `eta`.
    pub fn modify(&self, cuts: Option<[f64; 3]>, eta: f64) -> f64 {
        match cuts {
            Some([q, p0, r]) if eta > q && eta <= r => {
                if eta <= p0 {
                    -self.s
                } else {
                    self.s
                }
            }
            _ => eta,
        }
    }

    /// Eigenpairs of `D'` with eigenvalue in `[lo, hi]`; the vectors are the
    /// eigenvectors of `D`.
    pub fn eigen_in_window(
        &self,
        c: &[f64],
        lo: f64,
        hi: f64,
    ) -> Result<Vec<(SpinorBlock, BlockEigen)>, SectionError> {
        let cuts = self.cuts_at(c)?;
        let Some([q, _, r]) = cuts else {
            return Ok(self.family.eigen_in_window(c, lo, hi)?);
        };
        let moved = |e: f64| e > q && e <= r;
        let mut out: Vec<(SpinorBlock, BlockEigen)> = self
            .family
            .eigen_in_window(c, lo, hi)?
            .into_iter()
            .filter(|(_, e)| !moved(e.eigenvalue))
            .collect();
        let s = self.s;
        if (lo <= -s && -s <= hi) || (lo <= s && s <= hi) {
            for (b, mut e) in self.family.eigen_in_window(c, q, r)? {
                if !moved(e.eigenvalue) {
                    continue;
                }
                e.eigenvalue = self.modify(cuts, e.eigenvalue);
                if e.eigenvalue >= lo && e.eigenvalue <= hi {
                    out.push((b, e));
                }
            }
        }
        Ok(out)
    }

    /// Signed count of `D'` at `x`, in the normalisation of
    /// [`DiracFamily::nu`].
    pub fn nu(&self, c: &[f64], x: f64) -> Result<i64, SectionError> {
        let s = self.s;
        if self.is_identity() || x.abs() > 2.0 * s {
            // eigenvalues never cross +-2s under the perturbation
            return Ok(self.family.nu(c, x)?);
        }
        let l = -3.0 * s;
        let above = self
            .eigen_in_window(c, l, x)?
            .into_iter()
            .filter(|(_, e)| e.eigenvalue > l)
            .count() as i64;
        Ok(self.family.nu(c, l)? + above)
    }

    /// Smallest `|eigenvalue|` of `D'` at `c`.
    pub fn min_abs_eigenvalue(&self, c: &[f64]) -> Result<f64, SectionError> {
        let mut w = self.s;
        loop {
            let e = self.eigen_in_window(c, -w, w)?;
            if let Some(m) = e.iter().map(|(_, e)| e.eigenvalue.abs()).min_by(f64::total_cmp) {
                return Ok(m);
            }
            if w >= self.family.max_radius() {
                return Ok(f64::INFINITY);
            }
            w = (2.0 * w).min(self.family.max_radius());
        }
    }
}

/// Builds the kernel-free perturbation of `D` on `grid` with parameter `s`.
///
/// When `D` has no eigenvalue in `[-s, s]` at any grid point the identity
/// perturbation is returned; otherwise the three cuts are fitted with common
/// ordinals over the grid.
pub fn build_perturbed_dirac(
    geom: &ModelGeometry,
    grid: &BaseGrid,
    s: f64,
    settings: &SectionSettings,
) -> Result<PerturbedDirac, SectionError> {
    if !(s > 0.0) {
        return Err(SectionError::InvalidParameters(format!("s must be positive, got {s}")));
    }
    let family = DiracFamily::new(geom, settings.spectral.cap)?;
    if grid.b1 != geom.b1() {
        return Err(SectionError::InvalidParameters(format!(
            "grid dimension {} does not match b1 = {}",
            grid.b1,
            geom.b1()
        )));
    }
    family.check_radius(3.0 * s)?;
    let clear: Vec<bool> = grid
        .points
        .par_iter()
        .map(|c| family.eigen_in_window(c, -s, s).map(|v| v.is_empty()))
        .collect::<Result<_, _>>()?;
    if clear.iter().all(|&x| x) {
        return Ok(PerturbedDirac::identity(family, s));
    }
    let op = SpectralOperator::Dirac(family.clone());
    let tol = settings.min_half_width(2.0 * s);
    let fit = |lo: f64, hi: f64, label: &str| CutRule::fit(&op, 1.0, grid, lo, hi, tol, label).map(|r| r.0);
    let q = fit(-2.0 * s, -s, "D' q")?;
    let p0 = fit(-s, s, "D' p0")?;
    let r = fit(s, 2.0 * s, "D' r")?;
    Ok(PerturbedDirac { family, s, cuts: Some(PerturbationCuts { q, p0, r }) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_spin_structures_need_no_perturbation() {
        let st = SectionSettings::default();
        for j in 1..4 {
            let g = ModelGeometry::flat_torus_bundle(j);
            let pd = build_perturbed_dirac(&g, &BaseGrid::regular(1, 64), 1.0, &st).unwrap();
            assert!(pd.is_identity());
        }
    }

    #[test]
    fn bundle_s0_has_no_cut_perturbation() {
        let g = ModelGeometry::flat_torus_bundle(0);
        let r = build_perturbed_dirac(&g, &BaseGrid::regular(1, 64), 1.0, &SectionSettings::default());
        assert!(matches!(r, Err(SectionError::NoGlobalGap { .. })));
    }

    #[test]
    fn t3_untwisted_needs_perturbation() {
        let g = ModelGeometry::t3([0.0; 3]);
        let st = SectionSettings::default();
        let s = 1.0;
        let full = build_perturbed_dirac(&g, &BaseGrid::regular(3, 8), s, &st);
        assert!(matches!(full, Err(SectionError::NoGlobalGap { .. })));
        let grid = BaseGrid::concentrated(3, 5, 0.05);
        let pd = build_perturbed_dirac(&g, &grid, s, &st).unwrap();
        assert!(!pd.is_identity());
        for c in &grid.points {
            assert!(pd.min_abs_eigenvalue(c).unwrap() >= 0.5 * s);
            // D' = D beyond 2s
            let d: Vec<f64> = pd.family.eigen_in_window(c, 2.0 * s + 1e-9, 20.0).unwrap().iter().map(|x| x.1.eigenvalue).collect();
            let dp: Vec<f64> = pd.eigen_in_window(c, 2.0 * s + 1e-9, 20.0).unwrap().iter().map(|x| x.1.eigenvalue).collect();
            assert_eq!(d, dp);
        }
    }

    #[test]
    fn nu_of_perturbed_matches_counting() {
        let g = ModelGeometry::t3([0.0; 3]);
        let st = SectionSettings::default();
        let grid = BaseGrid::concentrated(3, 3, 0.05);
        let pd = build_perturbed_dirac(&g, &grid, 1.0, &st).unwrap();
        let c = &grid.points[4];
        // crossing +s adds the moved eigenvalues sitting there
        let at = pd.eigen_in_window(c, 0.5, 1.5).unwrap().len() as i64;
        assert_eq!(pd.nu(c, 1.5).unwrap() - pd.nu(c, 0.5).unwrap(), at);
        assert_eq!(pd.nu(c, 2.5).unwrap(), pd.family.nu(c, 2.5).unwrap());
    }
}
