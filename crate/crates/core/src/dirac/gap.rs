//! Spectral gaps and density diagnostics.

use serde::{Deserialize, Serialize};

use crate::geometry::{ModelGeometry, PicardPoint};

use super::{dirac_spectrum, DiracError, SpectralSettings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    /// Returned cut `mu'`.
    pub center: f64,
    /// Certified half-width: no eigenvalue in `(center - r, center + r]`.
    pub half_width: f64,
    /// Neighbouring eigenvalues around the gap (infinite if none in range).
    pub below: f64,
    pub above: f64,
}

/// Admissible cut intervals for half-width `r` inside `(lo, hi]`.
///
/// Each entry is `(start, end, below, above)`: every `x` strictly between
/// `start` and `end` has no eigenvalue in `(x - r, x + r]`, and `below`/`above` are the nearest
/// eigenvalues. `eigs` must be sorted and contain every eigenvalue in
/// `(lo - r, hi + r]`.
pub fn gap_candidates(eigs: &[f64], lo: f64, hi: f64, r: f64) -> Vec<(f64, f64, f64, f64)> {
    let mut out = Vec::new();
    let n = eigs.len();
    for k in 0..=n {
        let below = if k == 0 { f64::NEG_INFINITY } else { eigs[k - 1] };
        let above = if k == n { f64::INFINITY } else { eigs[k] };
        let start = (below + r).max(lo);
        let end = (above - r).min(hi);
        if start < end {
            out.push((start, end, below, above));
        }
    }
    out
}

/// Gap search on a sorted eigenvalue list; see [`find_spectral_gap`].
pub fn find_gap_in_sorted(eigs: &[f64], mu: f64, h: f64, r: f64) -> Result<GapResult, DiracError> {
    let lo = mu - h;
    let hi = mu + h;
    let cands = gap_candidates(eigs, lo, hi, r);
    let mut best: Option<(f64, GapResult)> = None;
    for (start, end, below, above) in cands {
        let mid = if below.is_finite() && above.is_finite() {
            0.5 * (below + above)
        } else {
            mu
        };
        // strictly inside, so x > lo and x + r < above hold exactly
        let pad = (end - start) * 1e-9;
        let x = mid.clamp(start + pad, end - pad);
        let d = (x - mu).abs();
        if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
            best = Some((d, GapResult { center: x, half_width: r, below, above }));
        }
    }
    match best {
        Some((_, g)) => Ok(g),
        None => {
            let (densest, count) = densest_interval(eigs, lo, hi, 2.0 * r);
            Err(DiracError::NoGapFound { densest, count })
        }
    }
}

fn densest_interval(eigs: &[f64], lo: f64, hi: f64, width: f64) -> ((f64, f64), usize) {
    let inside: Vec<f64> = eigs.iter().copied().filter(|e| *e > lo && *e <= hi).collect();
    let mut best = ((lo, lo + width), 0usize);
    let mut j = 0;
    for i in 0..inside.len() {
        while j < inside.len() && inside[j] < inside[i] + width {
            j += 1;
        }
        if j - i > best.1 {
            best = ((inside[i], inside[i] + width), j - i);
        }
    }
    best
}

/// Cut near `mu` with a certified eigenvalue-free window of half-width
/// `|mu|^(-beta)`, searched in `(mu - |mu|^(-alpha), mu + |mu|^(-alpha)]`.
pub fn find_spectral_gap(
    geom: &ModelGeometry,
    a: &PicardPoint,
    mu: f64,
    alpha: f64,
    beta: f64,
    settings: &SpectralSettings,
) -> Result<GapResult, DiracError> {
    if !(alpha + 3.0 < beta) {
        return Err(DiracError::InvalidParameters(format!(
            "gap search needs alpha + 3 < beta (alpha={alpha}, beta={beta})"
        )));
    }
    let scale = mu.abs().max(1.0);
    let h = scale.powf(-alpha);
    let r = scale.powf(-beta);
    let window = (mu - h - 2.0 * r, mu + h + 2.0 * r);
    let eigs = dirac_spectrum(geom, a, window, settings)?.eigenvalues();
    let g = find_gap_in_sorted(&eigs, mu, h, r)?;
    let check = dirac_spectrum(geom, a, (g.center - r, g.center + r), settings)?;
    if let Some(bad) = check.items.iter().find(|i| i.eigenvalue > g.center - r) {
        return Err(DiracError::EigenvalueOnCut { cut: g.center, eigenvalue: bad.eigenvalue });
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub max_gap: f64,
    pub count: u64,
    pub weyl_ratio: f64,
}

/// Largest eigenvalue-free interval in `[-L, L]`, eigenvalue count and
/// `count / L^3`.
pub fn density_weyl_report(
    geom: &ModelGeometry,
    a: &PicardPoint,
    lambda: f64,
    settings: &SpectralSettings,
) -> Result<DensityReport, DiracError> {
    let sl = dirac_spectrum(geom, a, (-lambda, lambda), settings)?;
    let eigs = sl.eigenvalues();
    let mut max_gap: f64 = 0.0;
    let mut prev = -lambda;
    for &e in &eigs {
        max_gap = max_gap.max(e - prev);
        prev = e;
    }
    max_gap = max_gap.max(lambda - prev);
    let count = eigs.len() as u64;
    Ok(DensityReport { max_gap, count, weyl_ratio: count as f64 / lambda.powi(3) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_gap_is_found() {
        let mu: f64 = 100.0;
        let beta = 4.0;
        let r = mu.powf(-beta);
        let h = mu.powf(-0.5);
        // dense spectrum with spacing well below 2r except one planted gap of
        // width 3r at mu
        let mut eigs = Vec::new();
        let step = 0.5 * r;
        let mut x = mu - 2.0 * h;
        while x < mu - 1.5 * r {
            eigs.push(x);
            x += step;
        }
        let mut x = mu + 1.5 * r;
        while x < mu + 2.0 * h {
            eigs.push(x);
            x += step;
        }
        let g = find_gap_in_sorted(&eigs, mu, h, r).unwrap();
        assert!(g.center > mu - 1.5 * r && g.center < mu + 1.5 * r);
        assert!(eigs.iter().all(|&e| e <= g.center - r || e > g.center + r));
    }

    #[test]
    fn no_gap_reports_densest() {
        let eigs: Vec<f64> = (0..1000).map(|i| -1.0 + i as f64 * 0.002).collect();
        match find_gap_in_sorted(&eigs, 0.0, 0.5, 0.01) {
            Err(DiracError::NoGapFound { densest, count }) => {
                assert!(count >= 10);
                assert!(densest.0 >= -0.5 && densest.1 <= 0.6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn density_below_first_eigenvalue() {
        let g = ModelGeometry::t3([0.5; 3]);
        let r = density_weyl_report(&g, &PicardPoint::origin(3), 2.0, &SpectralSettings::default())
            .unwrap();
        assert_eq!(r.count, 0);
        assert_eq!(r.max_gap, 4.0);
    }
}
