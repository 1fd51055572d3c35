//! Spectral projections, their derivatives along harmonic directions, and
//! commutators with `D_a`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geometry::{GeometryError, ModelGeometry, PicardPoint};
use crate::linalg::{dot, mat_vec, Mat2, C64};

use super::family::{BlockEigen, SpinorBlock};
use super::{
    dirac_spectrum, sort_items, Branch, DiracError, DiracFamily, EigenItem, ProjectionMask,
    SpectralSettings,
};

/// Spectral projection onto `(lower, upper]`; `None` stands for the
/// truncation surrogate of `-inf` / `+inf`.
pub fn projection_mask(
    geom: &ModelGeometry,
    a: &PicardPoint,
    lower: Option<f64>,
    upper: Option<f64>,
    settings: &SpectralSettings,
) -> Result<ProjectionMask, DiracError> {
    let fam = DiracFamily::new(geom, settings.cap)?;
    let lim = fam.max_radius();
    for cut in [lower, upper].into_iter().flatten() {
        let tol = settings.gap_tol(cut);
        let near = dirac_spectrum(geom, a, (cut - tol, cut + tol), settings)?;
        if let Some(it) = near.items.first() {
            return Err(DiracError::EigenvalueOnCut { cut, eigenvalue: it.eigenvalue });
        }
    }
    let lo = lower.unwrap_or(-lim);
    let hi = upper.unwrap_or(lim);
    let mut selected = BTreeSet::new();
    if lo < hi {
        for it in dirac_spectrum(geom, a, (lo, hi), settings)?.items {
            if lower.map_or(true, |l| it.eigenvalue > l) {
                selected.insert((it.mode, it.branch));
            }
        }
    }
    Ok(ProjectionMask { base: a.clone(), lower, upper, selected })
}

/// Sparse matrix in an eigenbasis. `entries` holds `(i, j, <M e_i, e_j>)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenMatrix {
    pub items: Vec<EigenItem>,
    pub entries: Vec<(usize, usize, C64)>,
}

impl EigenMatrix {
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries
            .iter()
            .find(|(a, b, _)| *a == i && *b == j)
            .map(|e| e.2)
            .unwrap_or(C64::new(0.0, 0.0))
    }
}

/// `<(d pi_S) e_i, e_j>` for the spectral projection onto a set `S` of
/// eigenvectors of one block, with `V = dD` in block coordinates.
///
/// Returns `V_ji / (eta_j - eta_i)` if `j in S`, `i notin S`;
/// `V_ji / (eta_i - eta_j)` if `i in S`, `j notin S`; zero otherwise.
pub fn block_projection_derivative(
    eig: &[BlockEigen],
    in_set: &[bool],
    v: &Mat2,
) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for i in 0..eig.len() {
        for j in 0..eig.len() {
            if in_set[i] == in_set[j] {
                continue;
            }
            let vji = dot(&eig[j].vector, &mat_vec(v, &eig[i].vector));
            let d = if in_set[j] {
                eig[j].eigenvalue - eig[i].eigenvalue
            } else {
                eig[i].eigenvalue - eig[j].eigenvalue
            };
            out.push((i, j, vji / d));
        }
    }
    out
}

/// Derivative of `pi^mu_{-inf}` along the harmonic direction `v` (harmonic-form
/// coefficients, `a_r = 2 pi c`), in the eigenbasis of the truncation
/// `[-trunc, trunc]`.
pub fn projection_derivative(
    geom: &ModelGeometry,
    a: &PicardPoint,
    v: &[f64],
    mu: f64,
    trunc: f64,
    settings: &SpectralSettings,
) -> Result<EigenMatrix, DiracError> {
    if v.len() != geom.b1() {
        return Err(GeometryError::InvalidDimension { expected: geom.b1(), got: v.len() }.into());
    }
    let fam = DiracFamily::new(geom, settings.cap)?;
    let tol = settings.gap_tol(mu);
    let pairs = fam.eigen_in_window(&a.coords, -trunc, trunc)?;
    if let Some((_, e)) = pairs.iter().find(|(_, e)| (e.eigenvalue - mu).abs() <= tol) {
        return Err(DiracError::EigenvalueOnCut { cut: mu, eigenvalue: e.eigenvalue });
    }
    let mut items: Vec<EigenItem> = pairs
        .iter()
        .map(|(b, e)| EigenItem {
            eigenvalue: e.eigenvalue,
            mode: b.label.to_vec(),
            branch: e.branch,
            multiplicity: 1,
        })
        .collect();
    sort_items(&mut items);
    let index: std::collections::BTreeMap<(Vec<i64>, Branch), usize> =
        items.iter().enumerate().map(|(i, it)| ((it.mode.clone(), it.branch), i)).collect();
    let dir = geom.embed_picard(v);
    // eigenpairs of one block are adjacent in `pairs`
    let mut blocks: Vec<&SpinorBlock> = Vec::new();
    for (b, _) in &pairs {
        if blocks.last().map_or(true, |x| x.label != b.label) {
            blocks.push(b);
        }
    }
    let mut entries = Vec::new();
    for b in blocks {
        let eig: Vec<BlockEigen> = b
            .eigen()
            .into_iter()
            .filter(|e| e.eigenvalue >= -trunc && e.eigenvalue <= trunc)
            .collect();
        let in_set: Vec<bool> = eig.iter().map(|e| e.eigenvalue < mu).collect();
        let dv = b.d_hamiltonian(dir);
        for (i, j, val) in block_projection_derivative(&eig, &in_set, &dv) {
            if val.norm() == 0.0 {
                continue;
            }
            let gi = index[&(b.label.to_vec(), eig[i].branch)];
            let gj = index[&(b.label.to_vec(), eig[j].branch)];
            entries.push((gi, gj, val));
        }
    }
    entries.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    Ok(EigenMatrix { items, entries })
}

/// Projection passed to [`commutator_norm`].
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionSpec {
    Mask(ProjectionMask),
    /// `pi^mu_{-inf}` plus the line spanned by `cos(theta) e_p + sin(theta) e_q`,
    /// where `e_p`, `e_q` are the lowest and highest eigenvectors in
    /// `(mu, mu + delta]`.
    Frame { mu: f64, delta: f64, theta: f64 },
}

fn sobolev_weight(eta: f64, s: f64) -> f64 {
    (1.0 + eta * eta).powf(0.5 * s)
}

/// Operator norm of `[D_a, pi]` from `L^2_l` to `L^2_{l - eps}` on the
/// truncation, with weights `(1 + eta^2)^{s/2}`.
pub fn commutator_norm(
    geom: &ModelGeometry,
    a: &PicardPoint,
    proj: &ProjectionSpec,
    l: f64,
    eps: f64,
    settings: &SpectralSettings,
) -> Result<f64, DiracError> {
    match proj {
        // a mask is diagonal in the eigenbasis, so every commutator entry
        // (eta_i - eta_j) pi_ij vanishes
        ProjectionSpec::Mask(_) => Ok(0.0),
        ProjectionSpec::Frame { mu, delta, theta } => {
            let sl = dirac_spectrum(geom, a, (*mu, mu + delta), settings)?;
            let inside: Vec<&EigenItem> = sl.items.iter().filter(|i| i.eigenvalue > *mu).collect();
            if inside.len() < 2 {
                return Err(DiracError::InvalidParameters(format!(
                    "frame window ({mu}, {}] holds fewer than two eigenvalues",
                    mu + delta
                )));
            }
            let ep = inside.first().unwrap().eigenvalue;
            let eq = inside.last().unwrap().eigenvalue;
            let cs = theta.cos() * theta.sin();
            let pq = sobolev_weight(ep, l - eps) * (ep - eq) * cs / sobolev_weight(eq, l);
            let qp = sobolev_weight(eq, l - eps) * (eq - ep) * cs / sobolev_weight(ep, l);
            Ok(pq.abs().max(qp.abs()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_examples() {
        let g = ModelGeometry::t3([0.0; 3]);
        let s = SpectralSettings::default();
        let a = PicardPoint::origin(3);
        let m = projection_mask(&g, &a, Some(-1.0), Some(1.0), &s).unwrap();
        let expect: BTreeSet<_> =
            [(vec![0, 0, 0], Branch::Plus), (vec![0, 0, 0], Branch::Minus)].into_iter().collect();
        assert_eq!(m.selected, expect);
        assert!(matches!(
            projection_mask(&g, &a, None, Some(0.0), &s),
            Err(DiracError::EigenvalueOnCut { .. })
        ));
        let small = SpectralSettings::with_cap(3);
        let all = projection_mask(&g, &a, None, None, &small).unwrap();
        let fam = DiracFamily::new(&g, 3).unwrap();
        let n = dirac_spectrum(&g, &a, (-fam.max_radius(), fam.max_radius()), &small)
            .unwrap()
            .items
            .len();
        assert_eq!(all.selected.len(), n);
    }

    #[test]
    fn derivative_structure() {
        let g = ModelGeometry::t3([0.5; 3]);
        let s = SpectralSettings::default();
        let a = PicardPoint { coords: vec![0.13, 0.42, 0.77] };
        let mu = 1.3;
        let d = projection_derivative(&g, &a, &[0.3, -0.2, 0.9], mu, 20.0, &s).unwrap();
        assert!(!d.entries.is_empty());
        for &(i, j, _) in &d.entries {
            let (ei, ej) = (d.items[i].eigenvalue, d.items[j].eigenvalue);
            assert!((ei < mu) != (ej < mu));
        }
        let z = projection_derivative(&g, &a, &[0.0; 3], mu, 20.0, &s).unwrap();
        assert!(z.entries.is_empty());
    }

    #[test]
    fn mask_commutator_is_zero() {
        let g = ModelGeometry::t3([0.5; 3]);
        let s = SpectralSettings::default();
        let a = PicardPoint::origin(3);
        let m = projection_mask(&g, &a, None, Some(10.0), &s).unwrap();
        assert_eq!(commutator_norm(&g, &a, &ProjectionSpec::Mask(m), 1.0, 0.5, &s).unwrap(), 0.0);
    }
}
