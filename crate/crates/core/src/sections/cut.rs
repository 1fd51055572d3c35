use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirac::{curl_modes, curl_spectrum, Branch, CurlMode, DiracFamily, SpectralSettings};
use crate::geometry::ModelGeometry;

use super::{BaseGrid, PerturbedDirac, SectionError, SectionKind, SectionSettings};

/// Self-adjoint operator family a cut is taken in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpectralOperator {
    Dirac(DiracFamily),
    Perturbed(PerturbedDirac),
    Curl { geom: ModelGeometry, settings: SpectralSettings },
}

impl SpectralOperator {
    pub fn is_base_independent(&self) -> bool {
        matches!(self, SpectralOperator::Curl { .. })
    }

    /// Sorted eigenvalues (with multiplicity) of `sign * op` in `[lo, hi]`.
    pub fn eigenvalues(&self, sign: f64, c: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>, SectionError> {
        let (a, b) = if sign > 0.0 { (lo, hi) } else { (-hi, -lo) };
        let mut v: Vec<f64> = match self {
            SpectralOperator::Dirac(fam) => {
                fam.eigen_in_window(c, a, b)?.into_iter().map(|(_, e)| e.eigenvalue).collect()
            }
            SpectralOperator::Perturbed(pd) => {
                pd.eigen_in_window(c, a, b)?.into_iter().map(|(_, e)| e.eigenvalue).collect()
            }
            SpectralOperator::Curl { geom, settings } => {
                curl_spectrum(geom, (a, b), settings)?.eigenvalues()
            }
        };
        for x in v.iter_mut() {
            *x *= sign;
        }
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    /// Right-continuous renormalised count of eigenvalues of `op` up to `x`.
    fn ordinal_unsigned(&self, c: &[f64], x: f64) -> Result<i64, SectionError> {
        match self {
            SpectralOperator::Dirac(fam) => Ok(fam.nu(c, x)?),
            SpectralOperator::Perturbed(pd) => pd.nu(c, x),
            SpectralOperator::Curl { geom, settings } => {
                let n = if x >= 0.0 {
                    curl_modes(geom, 0.0, x, settings.cap)?.iter().filter(|m| m.eigenvalue > 0.0).count()
                } else {
                    curl_modes(geom, x, 0.0, settings.cap)?.iter().filter(|m| m.eigenvalue > x).count()
                };
                Ok(if x >= 0.0 { n as i64 } else { -(n as i64) })
            }
        }
    }

    /// Ordinal of `sign * op` at `x`: increases by one at each eigenvalue.
    pub fn ordinal(&self, sign: f64, c: &[f64], x: f64) -> Result<i64, SectionError> {
        if sign > 0.0 {
            return self.ordinal_unsigned(c, x);
        }
        // #{-eta <= x} = -#{eta < -x} + const, and the count below -x is the
        // right-continuous count minus the eigenvalues sitting at -x
        let at = self.eigenvalues(1.0, c, -x, -x)?.len() as i64;
        Ok(-self.ordinal_unsigned(c, -x)? + at)
    }
}

/// Cut placement rule: the cut lies in `(lo, hi]`, in the gap whose ordinal
/// equals `count`, at the gap midpoint clamped into the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutRule {
    pub lo: f64,
    pub hi: f64,
    pub count: i64,
}

/// `(ordinal, cut, half_width)` for every gap meeting the window.
pub fn gap_options(
    op: &SpectralOperator,
    sign: f64,
    c: &[f64],
    lo: f64,
    hi: f64,
) -> Result<Vec<(i64, f64, f64)>, SectionError> {
    let margin = hi - lo;
    let ext = op.eigenvalues(sign, c, lo - margin, hi + margin)?;
    let below = ext.iter().copied().filter(|&e| e <= lo).last().unwrap_or(lo - margin);
    let above = ext.iter().copied().find(|&e| e > hi).unwrap_or(hi + margin);
    let inside: Vec<f64> = ext.iter().copied().filter(|&e| e > lo && e <= hi).collect();
    let base = op.ordinal(sign, c, lo)?;
    let pad = 1e-9 * margin;
    let mut out = Vec::new();
    for j in 0..=inside.len() {
        let prev = if j == 0 { below } else { inside[j - 1] };
        let next = if j == inside.len() { above } else { inside[j] };
        let a = prev.max(lo + pad);
        let b = next.min(hi - pad);
        if a >= b {
            continue;
        }
        let x = (0.5 * (prev + next)).clamp(a, b);
        let half = (x - prev).min(next - x);
        if half > 0.0 {
            out.push((base + j as i64, x, half));
        }
    }
    Ok(out)
}

impl CutRule {
    /// Cut and certified half-width at `c`.
    pub fn evaluate(
        &self,
        op: &SpectralOperator,
        sign: f64,
        c: &[f64],
    ) -> Result<(f64, f64), SectionError> {
        gap_options(op, sign, c, self.lo, self.hi)?
            .into_iter()
            .find(|o| o.0 == self.count)
            .map(|o| (o.1, o.2))
            .ok_or_else(|| SectionError::NoGlobalGap {
                kind: "cut".into(),
                target: 0.5 * (self.lo + self.hi),
                worst_base: c.to_vec(),
                reason: format!("no gap with ordinal {} in ({}, {}]", self.count, self.lo, self.hi),
            })
    }

    /// Chooses the common ordinal with the widest worst-case gap over `grid`
    /// and returns the rule with its cut profile and half-widths.
    pub fn fit(
        op: &SpectralOperator,
        sign: f64,
        grid: &BaseGrid,
        lo: f64,
        hi: f64,
        min_half: f64,
        label: &str,
    ) -> Result<(CutRule, Vec<f64>, Vec<f64>), SectionError> {
        let target = 0.5 * (lo + hi);
        let no_gap = |base: &[f64], reason: String| SectionError::NoGlobalGap {
            kind: label.to_string(),
            target,
            worst_base: base.to_vec(),
            reason,
        };
        if grid.is_empty() {
            return Err(SectionError::InvalidParameters("empty base grid".into()));
        }
        let options: Vec<Vec<(i64, f64, f64)>> = if op.is_base_independent() {
            vec![gap_options(op, sign, &grid.points[0], lo, hi)?; grid.len()]
        } else {
            grid.points
                .par_iter()
                .map(|c| gap_options(op, sign, c, lo, hi))
                .collect::<Result<_, _>>()?
        };
        let mut common: Vec<i64> = options[0].iter().map(|o| o.0).collect();
        for (i, opts) in options.iter().enumerate().skip(1) {
            common.retain(|n| opts.iter().any(|o| o.0 == *n));
            if common.is_empty() {
                return Err(no_gap(&grid.points[i], "no ordinal is available at every base point".into()));
            }
        }
        if common.is_empty() {
            return Err(no_gap(&grid.points[0], "window holds no gap".into()));
        }
        let worst = |n: i64| -> (f64, usize) {
            let mut w = (f64::INFINITY, 0);
            for (i, opts) in options.iter().enumerate() {
                let h = opts.iter().find(|o| o.0 == n).unwrap().2;
                if h < w.0 {
                    w = (h, i);
                }
            }
            w
        };
        let dist = |n: i64| (options[0].iter().find(|o| o.0 == n).unwrap().1 - target).abs();
        let best = *common
            .iter()
            .max_by(|&&a, &&b| worst(a).0.total_cmp(&worst(b).0).then(dist(b).total_cmp(&dist(a))))
            .unwrap();
        let (w, wi) = worst(best);
        if w < min_half {
            return Err(no_gap(
                &grid.points[wi],
                format!("widest common gap has half-width {w:e} < {min_half:e}"),
            ));
        }
        let mut profile = Vec::with_capacity(grid.len());
        let mut halves = Vec::with_capacity(grid.len());
        for opts in &options {
            let o = opts.iter().find(|o| o.0 == best).unwrap();
            profile.push(o.1);
            halves.push(o.2);
        }
        Ok((CutRule { lo, hi, count: best }, profile, halves))
    }
}

/// A spectral section given by a cut placed in a certified gap at every base
/// point, with a common ordinal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCutSection {
    pub kind: SectionKind,
    /// Nominal target; the per-base cuts lie within `delta / 2` of it.
    pub cut: f64,
    /// Minimum certified half-width over the grid.
    pub certified_gap: f64,
    pub per_base_ok: bool,
    pub rule: CutRule,
    pub operator: SpectralOperator,
    pub grid: BaseGrid,
    pub profile: Vec<f64>,
}

impl SpectralCutSection {
    /// Cut at an arbitrary base point, in the eigenvalues of `sign * op`.
    pub fn cut_at(&self, c: &[f64]) -> Result<f64, SectionError> {
        if self.operator.is_base_independent() {
            return Ok(self.profile[0]);
        }
        if let Some(i) = self.grid.points.iter().position(|p| p.as_slice() == c) {
            return Ok(self.profile[i]);
        }
        Ok(self.rule.evaluate(&self.operator, self.kind.sign(), c)?.0)
    }

    /// Smallest and largest cut over the grid.
    pub fn spread(&self) -> (f64, f64) {
        let lo = self.profile.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Whether the section contains the eigenvector of the unsigned operator
    /// with eigenvalue `eta` at `c`.
    pub fn contains(&self, c: &[f64], eta: f64) -> Result<bool, SectionError> {
        Ok(self.kind.sign() * eta <= self.cut_at(c)?)
    }
}

/// Places a cut near `target` in a gap certified at every point of `grid`.
///
/// Spinor sections (`P`, `Q`) are cuts of the perturbed operator `D'`, which
/// must be supplied; form sections (`WP`, `WQ`) are cuts of `*d`.
pub fn build_cut_section(
    geom: &ModelGeometry,
    kind: SectionKind,
    target: f64,
    grid: &BaseGrid,
    dprime: Option<&PerturbedDirac>,
    settings: &SectionSettings,
) -> Result<SpectralCutSection, SectionError> {
    geom.require_spectral().map_err(crate::dirac::DiracError::from)?;
    if grid.b1 != geom.b1() {
        return Err(SectionError::InvalidParameters(format!(
            "grid dimension {} does not match b1 = {}",
            grid.b1,
            geom.b1()
        )));
    }
    let operator = if kind.is_spinor() {
        let pd = dprime.ok_or(SectionError::MissingPerturbation)?;
        if pd.family.geom != *geom {
            return Err(SectionError::InvalidParameters("D' belongs to another geometry".into()));
        }
        SpectralOperator::Perturbed(pd.clone())
    } else {
        SpectralOperator::Curl { geom: geom.clone(), settings: settings.spectral }
    };
    let lo = target - 0.5 * settings.delta;
    let hi = target + 0.5 * settings.delta;
    let (rule, profile, halves) = CutRule::fit(
        &operator,
        kind.sign(),
        grid,
        lo,
        hi,
        settings.min_half_width(target),
        kind.as_str(),
    )?;
    let certified_gap = halves.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SpectralCutSection {
        kind,
        cut: target,
        certified_gap,
        per_base_ok: true,
        rule,
        operator,
        grid: grid.clone(),
        profile,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMode {
    pub mode: Vec<i64>,
    pub branch: Branch,
    /// Eigenvalue of `D'`.
    pub eigenvalue: f64,
}

/// `F = P ∩ Q` on the grid: `D'` eigenmodes with eigenvalue in
/// `(-cut_Q(c), cut_P(c)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteBundle {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub per_base: Vec<Vec<BundleMode>>,
    pub rank: usize,
}

pub fn intersect_bundles(
    p: &SpectralCutSection,
    q: &SpectralCutSection,
) -> Result<FiniteBundle, SectionError> {
    if p.kind != SectionKind::P || q.kind != SectionKind::Q {
        return Err(SectionError::InvalidParameters("intersect_bundles takes a P and a Q section".into()));
    }
    if p.grid != q.grid || p.operator != q.operator {
        return Err(SectionError::InvalidParameters("sections over different grids or operators".into()));
    }
    let pd = match &p.operator {
        SpectralOperator::Perturbed(pd) => pd,
        _ => return Err(SectionError::MissingPerturbation),
    };
    let lower: Vec<f64> = q.profile.iter().map(|x| -x).collect();
    let upper = p.profile.clone();
    if let Some(i) = (0..lower.len()).find(|&i| lower[i] > upper[i]) {
        return Err(SectionError::InvalidParameters(format!(
            "lower cut {} exceeds upper cut {} at {:?}",
            lower[i], upper[i], p.grid.points[i]
        )));
    }
    let per_base: Vec<Vec<BundleMode>> = p
        .grid
        .points
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let mut v: Vec<BundleMode> = pd
                .eigen_in_window(c, lower[i], upper[i])?
                .into_iter()
                .filter(|(_, e)| e.eigenvalue > lower[i])
                .map(|(b, e)| BundleMode { mode: b.label.to_vec(), branch: e.branch, eigenvalue: e.eigenvalue })
                .collect();
            v.sort_by(|a, b| a.eigenvalue.total_cmp(&b.eigenvalue).then(a.mode.cmp(&b.mode)));
            Ok(v)
        })
        .collect::<Result<_, SectionError>>()?;
    for (a, b) in p.grid.neighbours() {
        if per_base[a].len() != per_base[b].len() {
            return Err(SectionError::RankJump {
                a: p.grid.points[a].clone(),
                b: p.grid.points[b].clone(),
                rank_a: per_base[a].len(),
                rank_b: per_base[b].len(),
            });
        }
    }
    let rank = per_base[0].len();
    Ok(FiniteBundle { lower, upper, per_base, rank })
}

/// `W = W_P ∩ W_Q`: real coexact eigenforms of `*d` with eigenvalue in
/// `(-cut_WQ, cut_WP]`.
#[derive(Debug, Clone)]
pub struct FormBundle {
    pub lower: f64,
    pub upper: f64,
    pub modes: Vec<CurlMode>,
}

impl FormBundle {
    pub fn rank(&self) -> usize {
        self.modes.len()
    }

    /// Number of negative eigenforms.
    pub fn negative_rank(&self) -> usize {
        self.modes.iter().filter(|m| m.eigenvalue < 0.0).count()
    }
}

pub fn intersect_forms(
    wp: &SpectralCutSection,
    wq: &SpectralCutSection,
) -> Result<FormBundle, SectionError> {
    if wp.kind != SectionKind::WP || wq.kind != SectionKind::WQ {
        return Err(SectionError::InvalidParameters("intersect_forms takes a WP and a WQ section".into()));
    }
    let (geom, settings) = match &wp.operator {
        SpectralOperator::Curl { geom, settings } => (geom, settings),
        _ => return Err(SectionError::InvalidParameters("WP must be a cut of *d".into())),
    };
    let lower = -wq.profile[0];
    let upper = wp.profile[0];
    if lower > upper {
        return Err(SectionError::InvalidParameters(format!("lower cut {lower} exceeds upper cut {upper}")));
    }
    let modes = curl_modes(geom, lower, upper, settings.cap)?
        .into_iter()
        .filter(|m| m.eigenvalue > lower)
        .collect();
    Ok(FormBundle { lower, upper, modes })
}
