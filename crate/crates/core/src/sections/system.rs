use serde::{Deserialize, Serialize};

use crate::dirac::curl_spectrum;

use super::{
    build_cut_section, BaseGrid, PerturbedDirac, SectionError, SectionKind, SectionSettings,
    SpectralCutSection,
};

/// Minimum distance between the top of one ladder level and the bottom of
/// the next.
pub const LADDER_SPACING: f64 = 10.0;

/// Targets for the four ladders; index 0 is the base level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderTargets {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub wp: Vec<f64>,
    pub wq: Vec<f64>,
}

impl LadderTargets {
    /// The same targets for `P` and `Q`, and for `W_P` and `W_Q`.
    pub fn symmetric(spinor: Vec<f64>, form: Vec<f64>) -> Self {
        Self { p: spinor.clone(), q: spinor, wp: form.clone(), wq: form }
    }
}

/// Dimensions added between consecutive levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtaMap {
    pub from: usize,
    pub added: [i64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSystem {
    pub perturbed: PerturbedDirac,
    pub grid: BaseGrid,
    pub p: Vec<SpectralCutSection>,
    pub q: Vec<SpectralCutSection>,
    pub wp: Vec<SpectralCutSection>,
    pub wq: Vec<SpectralCutSection>,
    /// `(dim(P_n - P_0), dim(Q_n - Q_0), dim(W_P,n - W_P,0), dim(W_Q,n - W_Q,0))`.
    pub d: Vec<[i64; 4]>,
    pub eta_maps: Vec<EtaMap>,
}

impl SpectralSystem {
    pub fn levels(&self) -> usize {
        self.d.len()
    }
}

fn check_ladder(name: &str, secs: &[SpectralCutSection], delta: f64) -> Result<(), SectionError> {
    for (n, s) in secs.iter().enumerate() {
        let (lo, hi) = s.spread();
        if !(hi - lo < delta) {
            return Err(SectionError::LadderViolation {
                ladder: name.into(),
                level: n,
                detail: format!("cut spread {} is not below delta = {delta}", hi - lo),
            });
        }
        if let Some(next) = secs.get(n + 1) {
            let (nlo, _) = next.spread();
            if !(hi + LADDER_SPACING < nlo) {
                return Err(SectionError::LadderViolation {
                    ladder: name.into(),
                    level: n,
                    detail: format!("top cut {hi} + {LADDER_SPACING} is not below next bottom cut {nlo}"),
                });
            }
        }
    }
    Ok(())
}

/// Builds the four ladders and the dimension vectors `D_n`.
pub fn build_spectral_system(
    pd: &PerturbedDirac,
    grid: &BaseGrid,
    targets: &LadderTargets,
    settings: &SectionSettings,
) -> Result<SpectralSystem, SectionError> {
    let levels = targets.p.len();
    if levels == 0 || [targets.q.len(), targets.wp.len(), targets.wq.len()].iter().any(|&l| l != levels) {
        return Err(SectionError::InvalidParameters("ladders need equal, positive lengths".into()));
    }
    let geom = &pd.family.geom;
    let ladder = |kind: SectionKind, ts: &[f64]| -> Result<Vec<SpectralCutSection>, SectionError> {
        ts.iter().map(|&t| build_cut_section(geom, kind, t, grid, Some(pd), settings)).collect()
    };
    let p = ladder(SectionKind::P, &targets.p)?;
    let q = ladder(SectionKind::Q, &targets.q)?;
    let wp = ladder(SectionKind::WP, &targets.wp)?;
    let wq = ladder(SectionKind::WQ, &targets.wq)?;
    for (name, secs) in [("P", &p), ("Q", &q), ("WP", &wp), ("WQ", &wq)] {
        check_ladder(name, secs, settings.delta)?;
    }
    let d: Vec<[i64; 4]> = (0..levels)
        .map(|n| {
            [
                p[n].rule.count - p[0].rule.count,
                q[n].rule.count - q[0].rule.count,
                wp[n].rule.count - wp[0].rule.count,
                wq[n].rule.count - wq[0].rule.count,
            ]
        })
        .collect();
    let eta_maps = (0..levels.saturating_sub(1))
        .map(|n| EtaMap { from: n, added: std::array::from_fn(|i| d[n + 1][i] - d[n][i]) })
        .collect();
    Ok(SpectralSystem { perturbed: pd.clone(), grid: grid.clone(), p, q, wp, wq, d, eta_maps })
}

/// Default ladder: level 0 at zero, level 1 at the first target at or above
/// ten times the smallest eigenvalue magnitude whose cut certifies, further
/// levels every `spacing`.
pub fn default_ladder_targets(
    pd: &PerturbedDirac,
    grid: &BaseGrid,
    levels: usize,
    spacing: f64,
    settings: &SectionSettings,
) -> Result<LadderTargets, SectionError> {
    let geom = &pd.family.geom;
    let mut m = f64::INFINITY;
    for c in &grid.points {
        m = m.min(pd.min_abs_eigenvalue(c)?);
    }
    let first_form = curl_spectrum(geom, (1e-9, pd.family.max_radius()), &settings.spectral)?
        .items
        .first()
        .map(|i| i.eigenvalue)
        .unwrap_or(f64::INFINITY);
    let first_certified = |start: f64, kind: SectionKind| -> Result<f64, SectionError> {
        let step = 0.25 * settings.delta;
        let mut last = None;
        for i in 0..64 {
            let t = start + step * i as f64;
            match build_cut_section(geom, kind, t, grid, Some(pd), settings) {
                Ok(_) => return Ok(t),
                Err(e @ SectionError::NoGlobalGap { .. }) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.unwrap())
    };
    let ladder = |first: f64| -> Vec<f64> {
        let mut v = vec![0.0];
        for n in 1..levels {
            v.push(first + spacing * (n - 1) as f64);
        }
        v
    };
    let sp = if levels > 1 { first_certified(10.0 * m, SectionKind::P)? } else { 0.0 };
    let fp = if levels > 1 { first_certified(10.0 * first_form, SectionKind::WP)? } else { 0.0 };
    Ok(LadderTargets::symmetric(ladder(sp), ladder(fp)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub level: usize,
    pub a: (i64, i64),
    pub padding: (i64, i64),
}

/// Largest ladder pair `(D_n^2, D_n^4)` not exceeding `(i1, i2)`.
pub fn ledger_from_dims(d: &[[i64; 4]], i1: i64, i2: i64) -> Result<LedgerEntry, SectionError> {
    let floor = d.first().map(|x| (x[1], x[3])).unwrap_or((0, 0));
    let level = d
        .iter()
        .enumerate()
        .filter(|(_, x)| x[1] <= i1 && x[3] <= i2)
        .map(|(n, _)| n)
        .last()
        .ok_or(SectionError::BelowLadder { i1, i2, floor })?;
    let a = (d[level][1], d[level][3]);
    Ok(LedgerEntry { level, a, padding: (i1 - a.0, i2 - a.1) })
}

pub fn system_ledger(system: &SpectralSystem, i1: i64, i2: i64) -> Result<LedgerEntry, SectionError> {
    ledger_from_dims(&system.d, i1, i2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KClassDifference {
    /// `dim(P_0^1 - P_0^2)`.
    pub p0: i64,
    /// `dim(Q_0^1 - Q_0^2)`.
    pub q0: i64,
    pub trivializable: bool,
}

/// Dimension difference of the base sections of two systems over the same
/// geometry. Cut sections over these bases always differ by a trivial class.
pub fn kclass_difference(a: &SpectralSystem, b: &SpectralSystem) -> KClassDifference {
    KClassDifference {
        p0: a.p[0].rule.count - b.p[0].rule.count,
        q0: a.q[0].rule.count - b.q[0].rule.count,
        trivializable: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ModelGeometry;
    use crate::sections::{build_perturbed_dirac, intersect_bundles, intersect_forms};

    #[test]
    fn ledger_examples() {
        let d = [[0, 0, 0, 0], [3, 4, 1, 6], [8, 10, 5, 12]];
        assert_eq!(ledger_from_dims(&d, 4, 6).unwrap(), LedgerEntry { level: 1, a: (4, 6), padding: (0, 0) });
        let d2 = [[0, 0, 0, 0], [0, 4, 0, 6], [0, 10, 0, 12]];
        assert_eq!(ledger_from_dims(&d2, 7, 9).unwrap(), LedgerEntry { level: 1, a: (4, 6), padding: (3, 3) });
        assert!(matches!(ledger_from_dims(&d2, -1, 0), Err(SectionError::BelowLadder { .. })));
    }

    #[test]
    fn bundle_ladder_dimensions() {
        let g = ModelGeometry::flat_torus_bundle(1);
        let grid = BaseGrid::staggered(1, 64);
        let st = SectionSettings::default();
        let pd = build_perturbed_dirac(&g, &grid, 1.0, &st).unwrap();
        let t = LadderTargets::symmetric(vec![0.0, 10.6], vec![0.0, 10.0]);
        let sys = build_spectral_system(&pd, &grid, &t, &st).unwrap();
        assert_eq!(sys.d[0], [0; 4]);
        for n in 1..2 {
            for i in 0..4 {
                assert!(sys.d[n][i] >= sys.d[n - 1][i]);
            }
            let f = intersect_bundles(&sys.p[n], &sys.q[n]).unwrap();
            assert_eq!(f.rank as i64, sys.d[n][0] + sys.d[n][1]);
            let w = intersect_forms(&sys.wp[n], &sys.wq[n]).unwrap();
            assert_eq!(w.rank() as i64, sys.d[n][2] + sys.d[n][3]);
        }
        assert_eq!(sys.d[1], [20, 20, 20, 20]);
        assert_eq!(sys.eta_maps, vec![EtaMap { from: 0, added: [20, 20, 20, 20] }]);
        let bad = LadderTargets::symmetric(vec![0.0, 6.0], vec![0.0, 10.0]);
        assert!(matches!(
            build_spectral_system(&pd, &grid, &bad, &st),
            Err(SectionError::LadderViolation { .. })
        ));
    }

    #[test]
    fn kclass_shift_by_one_shell() {
        let g = ModelGeometry::t3([0.5; 3]);
        let grid = BaseGrid::single(vec![0.0; 3]);
        let st = SectionSettings::default();
        let pd = build_perturbed_dirac(&g, &grid, 1.0, &st).unwrap();
        let a = build_spectral_system(&pd, &grid, &LadderTargets::symmetric(vec![0.0], vec![0.0]), &st).unwrap();
        assert_eq!(kclass_difference(&a, &a), KClassDifference { p0: 0, q0: 0, trivializable: true });
        let up = LadderTargets { p: vec![10.0], q: vec![-10.0], wp: vec![0.0], wq: vec![0.0] };
        let down = LadderTargets { p: vec![-10.0], q: vec![-10.0], wp: vec![0.0], wq: vec![0.0] };
        let b = build_spectral_system(&pd, &grid, &up, &st).unwrap();
        let c = build_spectral_system(&pd, &grid, &down, &st).unwrap();
        assert_eq!(kclass_difference(&b, &c), KClassDifference { p0: 16, q0: 0, trivializable: true });
    }
}
