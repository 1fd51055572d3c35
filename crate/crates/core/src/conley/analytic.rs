//! Sample-based certification of isolating boxes and of the reducible index
//! pair, and the homology of analytic pairs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::flow::{integrate_field, FlowError, IntegrationControls};
use crate::sections::SpectralSystem;

use super::cubical::cubical_homology;
use super::homology::{shift_homology, ChainComplex, Homology, HomologyGroup};
use super::{
    ConleyError, ConleyIndexData, FactoredFlow, IndexPair, IsolatingBox, PairRegion, SectionData, FACTORS,
};

/// A boundary sample whose orbit stays in the box for `[-T, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub face: usize,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub ok: bool,
    pub radii: [f64; 4],
    pub density: usize,
    pub dwell: f64,
    pub seed: u64,
    pub samples: usize,
    /// Samples certified by the sign of the face-norm derivative.
    pub sign_certified: usize,
    /// Samples certified by integrating until they leave.
    pub integrated: usize,
    pub witnesses: Vec<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSettings {
    pub face_samples: usize,
    /// Samples of the cloud searched for invariant-set candidates.
    pub cloud: usize,
    /// Box `A(R)` for the candidate search.
    pub outer_radii: [f64; 4],
    pub dwell: f64,
    pub tau_samples: usize,
    /// Largest exit-time jump between neighbouring samples for `regular`.
    pub jump_tol: f64,
    pub fixed_samples: usize,
    pub fixed_tol: f64,
    pub seed: u64,
    pub controls: IntegrationControls,
}

impl Default for PairSettings {
    fn default() -> Self {
        Self {
            face_samples: 16,
            cloud: 16,
            outer_radii: [20.0; 4],
            dwell: 30.0,
            tau_samples: 8,
            jump_tol: 0.5,
            fixed_samples: 8,
            fixed_tol: 1e-9,
            seed: 0,
            controls: IntegrationControls { tol: 1e-7, ..Default::default() },
        }
    }
}

/// First time the orbit of `x` leaves the box of `radii` within `|t| <= |duration|`.
fn exit_time(
    flow: &dyn FactoredFlow,
    x: &[f64],
    duration: f64,
    radii: [f64; 4],
    controls: &IntegrationControls,
) -> Result<Option<(f64, usize)>, FlowError> {
    let dims = flow.factor_dims();
    let mut hit = None;
    let mut err = None;
    let mut prev = (0.0, [f64::NEG_INFINITY; 4]);
    integrate_field(
        |y| flow.field(y),
        x,
        duration,
        controls,
        |t, y| match flow.norms_sq(y) {
            Ok(n) => {
                let excess: [f64; 4] = std::array::from_fn(|i| n[i].sqrt() - radii[i] * (1.0 + 1e-9));
                if let Some(i) = (0..4).find(|&i| dims[i] > 0 && excess[i] > 0.0) {
                    let (t0, e0) = (prev.0, prev.1[i]);
                    let at = if e0.is_finite() && e0 < 0.0 { t0 + (t - t0) * e0 / (e0 - excess[i]) } else { t };
                    hit = Some((at, i));
                    return true;
                }
                prev = (t, excess);
                false
            }
            Err(e) => {
                err = Some(e);
                true
            }
        },
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(hit)
}

fn nonzero_faces(flow: &dyn FactoredFlow) -> Vec<usize> {
    let d = flow.factor_dims();
    (0..4).filter(|&i| d[i] > 0).collect()
}

/// Certifies that no sampled boundary point of the box stays inside for
/// `[-T, T]`.
pub fn verify_isolating(
    bx: &IsolatingBox,
    flow: &dyn FactoredFlow,
    seed: u64,
    controls: &IntegrationControls,
) -> Result<Certificate, ConleyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cert = Certificate {
        ok: true,
        radii: bx.radii,
        density: bx.density,
        dwell: bx.dwell,
        seed,
        samples: 0,
        sign_certified: 0,
        integrated: 0,
        witnesses: vec![],
    };
    let mut stuck = Vec::new();
    for face in nonzero_faces(flow) {
        for _ in 0..bx.density {
            let x = flow.sample(&mut rng, bx.radii, Some(face))?;
            cert.samples += 1;
            let (n, r) = flow.rates(&x)?;
            if r[face].abs() > 1e-12 * n[face] {
                cert.sign_certified += 1;
                continue;
            }
            let fwd = exit_time(flow, &x, bx.dwell, bx.radii, controls);
            let bwd = exit_time(flow, &x, -bx.dwell, bx.radii, controls);
            match (fwd, bwd) {
                (Ok(Some(_)), _) | (_, Ok(Some(_))) => cert.integrated += 1,
                (Ok(None), Ok(None)) => cert.witnesses.push(Witness { face, x }),
                _ => stuck.push(x),
            }
        }
    }
    if !stuck.is_empty() {
        return Err(ConleyError::Undecided { stuck });
    }
    cert.ok = cert.witnesses.is_empty();
    Ok(cert)
}

const EXIT: [bool; 4] = [false, true, false, true];

/// The pair `(A(eps), L(eps))`: `N` the product of `eps`-balls, `L` the
/// sphere faces of `F-` and `W-`.
pub fn reducible_index_pair(
    flow: &dyn FactoredFlow,
    eps: f64,
    settings: &PairSettings,
) -> Result<IndexPair, ConleyError> {
    if !(eps > 0.0) {
        return Err(ConleyError::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    let radii = [eps; 4];
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    for face in nonzero_faces(flow) {
        for _ in 0..settings.face_samples {
            let x = flow.sample(&mut rng, radii, Some(face))?;
            let (_, r) = flow.rates(&x)?;
            let good = if EXIT[face] { r[face] > 0.0 } else { r[face] < 0.0 };
            if !good {
                let dir = if EXIT[face] { "into N on the exit" } else { "out of N on the entrance" };
                return Err(ConleyError::ConditionFailed {
                    condition: format!("flow points {dir} face {} (rate {:e})", FACTORS[face], r[face]),
                    face: Some(face),
                    witness: x,
                });
            }
        }
    }
    for _ in 0..settings.cloud {
        let x = flow.sample(&mut rng, settings.outer_radii, None)?;
        let stays = |d: f64| exit_time(flow, &x, d, settings.outer_radii, &settings.controls).map(|e| e.is_none());
        if stays(settings.dwell)? && stays(-settings.dwell)? {
            let n = flow.norms_sq(&x)?;
            if (0..4).any(|i| n[i].sqrt() > eps) {
                return Err(ConleyError::ConditionFailed {
                    condition: "sampled invariant-set candidate lies outside A(eps)".into(),
                    face: None,
                    witness: x,
                });
            }
        }
    }
    let exit_radii: [f64; 4] = std::array::from_fn(|i| if EXIT[i] { eps } else { f64::INFINITY });
    let tau = |x: &[f64]| -> Result<f64, ConleyError> {
        Ok(exit_time(flow, x, settings.dwell, exit_radii, &settings.controls)?.map_or(settings.dwell, |e| e.0))
    };
    let mut tau_samples = Vec::new();
    let mut regular = true;
    for _ in 0..settings.tau_samples {
        let x = flow.sample(&mut rng, radii, None)?;
        let y = flow.sample(&mut rng, radii, None)?;
        let near: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + 1e-4 * (b - a)).collect();
        let (t0, t1) = (tau(&x)?, tau(&near)?);
        regular &= (t0 - t1).abs() <= settings.jump_tol;
        tau_samples.push(t0);
    }
    Ok(IndexPair {
        region: PairRegion::Analytic { base_dim: flow.base_dim(), factor_dims: flow.factor_dims(), radii, exit: EXIT },
        regular,
        tau_samples,
    })
}

/// `H_*(N, L)`.
pub fn relative_homology(pair: &IndexPair) -> Result<Homology, ConleyError> {
    match &pair.region {
        PairRegion::Analytic { base_dim, factor_dims, exit, .. } => {
            let p: usize = (0..4).filter(|&i| exit[i]).map(|i| factor_dims[i]).sum();
            ChainComplex::torus(*base_dim).tensor(&ChainComplex::relative_disk(p)).homology()
        }
        PairRegion::Cubical { n, l, .. } => cubical_homology(n, l),
        PairRegion::Opaque { description } => Err(ConleyError::UnrecognizedPair(description.clone())),
    }
}

fn sphere(p: usize) -> ChainComplex {
    if p == 0 {
        return ChainComplex::free(vec![2]);
    }
    let mut dims = vec![0; p + 1];
    dims[0] = 1;
    dims[p] = 1;
    ChainComplex::free(dims)
}

/// Homology of the index with its base section collapsed: the fiberwise
/// one-point compactification `I = T^b x S^p` has `H(I) = H(B) + H(I, s(B))`.
pub fn quotient_model_homology(pair: &IndexPair) -> Result<Homology, ConleyError> {
    let PairRegion::Analytic { base_dim, factor_dims, exit, .. } = &pair.region else {
        return relative_homology(pair);
    };
    let p: usize = (0..4).filter(|&i| exit[i]).map(|i| factor_dims[i]).sum();
    let total = ChainComplex::torus(*base_dim).tensor(&sphere(p)).homology()?;
    let base = ChainComplex::torus(*base_dim).homology()?;
    let mut out = Vec::new();
    for g in total {
        let r = base.iter().find(|b| b.degree == g.degree).map_or(0, |b| b.rank);
        let rank = g.rank.checked_sub(r).ok_or(ConleyError::InvalidInput("section does not split".into()))?;
        if rank > 0 || !g.torsion.is_empty() {
            out.push(HomologyGroup { rank, ..g });
        }
    }
    Ok(out)
}

/// Index data including the fixed-point subindex of the reducible pair.
pub fn fixed_point_index(
    pair: &IndexPair,
    flow: &dyn FactoredFlow,
    settings: &PairSettings,
) -> Result<ConleyIndexData, ConleyError> {
    let PairRegion::Analytic { base_dim, factor_dims, radii, .. } = &pair.region else {
        return Err(ConleyError::UnrecognizedPair("fixed-point index needs the analytic pair".into()));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x5eed);
    let fixed_radii = [0.0, 0.0, radii[2], radii[3]];
    for _ in 0..settings.fixed_samples {
        let x = flow.sample(&mut rng, fixed_radii, None)?;
        let scale = flow.field(&x)?.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let defect = flow.fixed_defect(&x)?;
        if defect > settings.fixed_tol * scale {
            return Err(ConleyError::NonlinearOnFixedSet { defect, witness: x });
        }
    }
    let t = factor_dims[3];
    Ok(ConleyIndexData {
        relative_homology: relative_homology(pair)?,
        fixed_homology: ChainComplex::torus(*base_dim).tensor(&ChainComplex::relative_disk(t)).homology()?,
        section_data: SectionData { base_dim: *base_dim, projection: format!("T^{base_dim}") },
        level: t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftVerdict {
    pub delta: usize,
    pub fixed_delta: usize,
}

/// `(dim_R Q_{n+1}/Q_n + dim W-_{n+1}/W-_n, dim W-_{n+1}/W-_n)`.
pub fn suspension_shift(system: &SpectralSystem, n: usize) -> Result<ShiftVerdict, ConleyError> {
    let (a, b) = match (system.d.get(n), system.d.get(n + 1)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(ConleyError::InvalidInput(format!("levels {n} and {} are not both in the ladder", n + 1))),
    };
    let q = b[1] - a[1];
    let w = b[3] - a[3];
    if q < 0 || w < 0 {
        return Err(ConleyError::InvalidInput("ladder dimensions decrease".into()));
    }
    Ok(ShiftVerdict { delta: (2 * q + w) as usize, fixed_delta: w as usize })
}

/// Compares level `n + 1` with level `n` suspended by `shift`.
pub fn check_shift(
    lower: &ConleyIndexData,
    upper: &ConleyIndexData,
    shift: ShiftVerdict,
) -> Result<ShiftVerdict, ConleyError> {
    let expected = shift_homology(&lower.relative_homology, shift.delta);
    if expected != upper.relative_homology {
        return Err(ConleyError::Mismatch { which: "relative".into(), expected, got: upper.relative_homology.clone() });
    }
    let expected = shift_homology(&lower.fixed_homology, shift.fixed_delta);
    if expected != upper.fixed_homology {
        return Err(ConleyError::Mismatch { which: "fixed".into(), expected, got: upper.fixed_homology.clone() });
    }
    Ok(shift)
}

pub fn suspension_shift_check(
    lower: &ConleyIndexData,
    upper: &ConleyIndexData,
    system: &SpectralSystem,
    n: usize,
) -> Result<ShiftVerdict, ConleyError> {
    check_shift(lower, upper, suspension_shift(system, n)?)
}
