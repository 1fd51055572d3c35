//! Pipeline stages: spectrum, sections, flow certification, Conley index and
//! invariants.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::conley::{
    fixed_point_index, reducible_index_pair, suspension_shift, check_shift, verify_isolating, Certificate,
    ConleyIndexData, FactoredFlow, Homology, SwFlow,
};
use crate::dirac::{dirac_spectrum, SpectralSettings, SpectrumSlice};
use crate::flow::{integrate_trajectory, FlowModel, Trajectory};
use crate::geometry::{ModelGeometry, PicardPoint};
use crate::invariants::{
    h_from_ideal, invariant_report, kappa_k, recognize_thom, thom_ideal, thom_k_ideal, InvariantReport,
};
use crate::sections::{build_perturbed_dirac, build_spectral_system, intersect_bundles, SpectralSystem};

use super::config::{Desuspension, PipelineConfig};
use super::CliError;

pub const PARTIAL_MARKER: &str = "PARTIAL";
pub const RUN_FILES: [&str; 5] = ["spectrum.csv", "sections.json", "certificate.json", "conley.json", "invariants.json"];

pub const CACHE_ENV: &str = "MONOPOLE_LAB_CACHE";

pub fn spectrum_to_csv(slice: &SpectrumSlice) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["eigenvalue", "mode0", "mode1", "mode2", "branch", "multiplicity"])?;
    for it in &slice.items {
        let mut rec = vec![format!("{:.15e}", it.eigenvalue)];
        rec.extend((0..3).map(|i| it.mode.get(i).map_or(String::new(), |m| m.to_string())));
        rec.push(it.branch.as_str().to_string());
        rec.push(it.multiplicity.to_string());
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Spectrum CSV of `D_c` in `[-window, window]`, read from and stored in the
/// cache directory named by `MONOPOLE_LAB_CACHE` when it is set.
pub fn spectrum_csv(geom: &ModelGeometry, base: &[f64], window: f64, cap: i64) -> Result<String, CliError> {
    let key = serde_json::to_string(&json!({"geometry": geom, "base": base, "window": window, "cap": cap}))?;
    let cache = std::env::var_os(CACHE_ENV).map(PathBuf::from);
    let digest: String = Sha256::digest(key.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    let path = cache.as_ref().map(|d| d.join(format!("spectrum-{digest}.csv")));
    if let Some(p) = &path {
        if let Ok(text) = fs::read_to_string(p) {
            return Ok(text);
        }
    }
    let a = PicardPoint { coords: base.to_vec() };
    let slice = dirac_spectrum(geom, &a, (-window, window), &SpectralSettings::with_cap(cap))?;
    let text = spectrum_to_csv(&slice)?;
    if let Some(p) = &path {
        fs::create_dir_all(p.parent().expect("cache file has a parent"))?;
        fs::write(p, &text)?;
    }
    Ok(text)
}

pub fn build_system(cfg: &PipelineConfig, geom: &ModelGeometry) -> Result<SpectralSystem, CliError> {
    let grid = cfg.ladder.grid.build(geom.b1());
    let st = cfg.ladder.settings();
    let pd = build_perturbed_dirac(geom, &grid, cfg.ladder.perturbation, &st)?;
    Ok(build_spectral_system(&pd, &grid, &cfg.ladder.targets(), &st)?)
}

pub fn sections_json(sys: &SpectralSystem) -> Result<Value, CliError> {
    let mut levels = Vec::new();
    for n in 0..sys.levels() {
        let f = intersect_bundles(&sys.p[n], &sys.q[n])?;
        let cut = |s: &crate::sections::SpectralCutSection| {
            let (lo, hi) = s.spread();
            json!({"target": s.cut, "count": s.rule.count, "spread": [lo, hi]})
        };
        levels.push(json!({
            "n": n,
            "cuts": {"P": cut(&sys.p[n]), "Q": cut(&sys.q[n]), "WP": cut(&sys.wp[n]), "WQ": cut(&sys.wq[n])},
            "rank_f": f.rank,
            "d": sys.d[n],
        }));
    }
    Ok(json!({"base_points": sys.grid.points.len(), "levels": levels, "eta_maps": sys.eta_maps}))
}

pub fn sw_flow(cfg: &PipelineConfig, sys: &SpectralSystem, n: usize) -> Result<SwFlow, CliError> {
    let base: Vec<Vec<f64>> = sys.grid.points.iter().step_by(cfg.conley.base_stride).cloned().collect();
    Ok(SwFlow::new(FlowModel::from_system(sys, n)?, cfg.flow.config(n), base)?)
}

/// Trajectory from a random point of `A(eps)` at level `cfg.flow.n`.
pub fn flow_trajectory(cfg: &PipelineConfig, sys: &SpectralSystem) -> Result<(SwFlow, Trajectory), CliError> {
    let flow = sw_flow(cfg, sys, cfg.flow.n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x0 = flow.sample(&mut rng, [cfg.flow.epsilon * cfg.flow.r; 4], None)?;
    let controls = crate::flow::IntegrationControls {
        exit_radii: Some([cfg.flow.r; 4]),
        ..cfg.conley.controls()
    };
    let traj = integrate_trajectory(&flow.model, &flow.chart, &x0, &flow.config, cfg.flow.duration, &controls)?;
    Ok((flow, traj))
}

pub fn trajectory_csv(flow: &SwFlow, traj: &Trajectory) -> Result<String, CliError> {
    let chart = &flow.chart;
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((0..chart.b1).map(|i| format!("a{i}")));
    for l in &chart.labels {
        let tag = format!("m{}_{}_{}", l[0], l[1], l[2]);
        header.extend(["re0", "im0", "re1", "im1"].iter().map(|c| format!("{tag}_{c}")));
    }
    header.extend((0..chart.nforms).map(|j| format!("w{j}")));
    header.extend(["phi_plus", "phi_minus", "omega_plus", "omega_minus"].map(String::from));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for s in &traj.samples {
        let mut rec = vec![format!("{:.12e}", s.t)];
        rec.extend(s.x.iter().map(|v| format!("{v:.12e}")));
        rec.extend(s.norms.as_array().iter().map(|v| format!("{v:.12e}")));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Homology as `[[degree, factors...], ...]`, with 0 standing for `Z`.
pub fn homology_table(h: &Homology) -> Vec<Vec<u64>> {
    h.iter()
        .map(|g| {
            let mut row = vec![g.degree as u64];
            row.extend(g.invariant_factors());
            row
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub n: usize,
    pub factor_dims: [usize; 4],
    /// `rank_C F_n`.
    pub rank_f: usize,
    pub dim_w_minus: usize,
    pub epsilon: f64,
    pub regular: bool,
    pub tau_samples: Vec<f64>,
    pub homology: Vec<Vec<u64>>,
    pub fixed: Vec<Vec<u64>>,
    pub level_t: usize,
    #[serde(skip)]
    pub data: Option<ConleyIndexData>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub from: usize,
    pub delta: usize,
    pub fixed_delta: usize,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConleyReport {
    pub levels: Vec<LevelResult>,
    pub shifts: Vec<ShiftRow>,
}

/// Certifies the isolating box at `level` and returns it; a failed
/// certificate is returned as `Ok` with `ok = false`.
pub fn certify_level(cfg: &PipelineConfig, flow: &SwFlow, level: usize) -> Result<Certificate, CliError> {
    let bx = cfg.conley.isolating_box(cfg.flow.r);
    Ok(verify_isolating(&bx, flow, cfg.seed.wrapping_add(level as u64), &cfg.conley.controls())?)
}

pub fn index_level(cfg: &PipelineConfig, flow: &SwFlow, n: usize) -> Result<LevelResult, CliError> {
    let r = cfg.flow.r;
    let eps = cfg.flow.epsilon * r;
    let settings = cfg.conley.pair_settings(r, cfg.seed.wrapping_add(n as u64));
    let pair = reducible_index_pair(flow, eps, &settings)?;
    let data = fixed_point_index(&pair, flow, &settings)?;
    let dims = flow.factor_dims();
    Ok(LevelResult {
        n,
        factor_dims: dims,
        rank_f: (dims[0] + dims[1]) / 2,
        dim_w_minus: dims[3],
        epsilon: eps,
        regular: pair.regular,
        tau_samples: pair.tau_samples,
        homology: homology_table(&data.relative_homology),
        fixed: homology_table(&data.fixed_homology),
        level_t: data.level,
        data: Some(data),
    })
}

pub fn shift_rows(sys: &SpectralSystem, levels: &[LevelResult]) -> Result<Vec<ShiftRow>, CliError> {
    let mut rows = Vec::new();
    for w in levels.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let shift = suspension_shift(sys, a.n)?;
        let da = a.data.as_ref().expect("computed level");
        let db = b.data.as_ref().expect("computed level");
        check_shift(da, db, shift)?;
        rows.push(ShiftRow { from: a.n, delta: shift.delta, fixed_delta: shift.fixed_delta, ok: true });
    }
    Ok(rows)
}

/// Desuspended `h` and `k` from the top level of a Conley report.
pub fn indices_from_conley(cfg: &PipelineConfig, top: &LevelResult) -> Result<(i64, Option<i64>), CliError> {
    let data = top.data.as_ref().expect("computed level");
    let (m, t) = recognize_thom(data)?;
    let (complex, real) = match cfg.invariants.desuspension {
        Desuspension::Auto => ((top.factor_dims[1] / 2) as u64, top.factor_dims[3] as u64),
        Desuspension::Explicit { complex, real } => (complex, real),
    };
    let h = h_from_ideal(&thom_ideal(m, t, data.section_data.base_dim), complex, real)?;
    let k = if m % 2 == 0 && complex % 2 == 0 {
        Some(kappa_k(&thom_k_ideal((m / 2) as usize))? as i64 - (complex / 2) as i64)
    } else {
        None
    };
    Ok((h, k))
}

pub fn invariants_for(
    cfg: &PipelineConfig,
    geom: &ModelGeometry,
    conley: Option<&ConleyReport>,
) -> Result<InvariantReport, CliError> {
    let (h, k) = match (cfg.invariants.h_index, conley.and_then(|c| c.levels.last())) {
        (Some(h), _) => (h, cfg.invariants.k_index),
        (None, Some(top)) => indices_from_conley(cfg, top)?,
        (None, None) if !geom.has_spectral_model() => (0, cfg.invariants.k_index),
        (None, None) => return Err(CliError::Config("no Conley data for the h index".into())),
    };
    Ok(invariant_report(geom, h, k, serde_json::to_value(cfg)?)?)
}

fn write_json(dir: &Path, name: &str, v: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn skipped(geom: &ModelGeometry) -> Value {
    json!({"skipped": format!("{} has no spectral model", geom.name())})
}

fn run_stages(cfg: &PipelineConfig, dir: &Path) -> Result<(), CliError> {
    let geom = cfg.geometry.build()?;
    if !geom.has_spectral_model() {
        fs::write(dir.join("spectrum.csv"), "eigenvalue,mode0,mode1,mode2,branch,multiplicity\n")?;
        for name in ["sections.json", "certificate.json", "conley.json"] {
            write_json(dir, name, &skipped(&geom))?;
        }
        return write_json(dir, "invariants.json", &invariants_for(cfg, &geom, None)?);
    }
    let origin = vec![0.0; geom.b1()];
    fs::write(dir.join("spectrum.csv"), spectrum_csv(&geom, &origin, cfg.output.spectrum_window, cfg.ladder.cap)?)?;
    let sys = build_system(cfg, &geom)?;
    write_json(dir, "sections.json", &sections_json(&sys)?)?;
    let mut certs = Vec::new();
    let mut flows = Vec::new();
    for n in 0..sys.levels() {
        let flow = sw_flow(cfg, &sys, n)?;
        let cert = certify_level(cfg, &flow, n)?;
        let ok = cert.ok;
        certs.push(json!({"n": n, "certificate": cert}));
        if !ok {
            write_json(dir, "certificate.json", &certs)?;
            return Err(CliError::Certification(format!("isolating box at level {n} has a witness")));
        }
        flows.push(flow);
    }
    write_json(dir, "certificate.json", &certs)?;
    let levels = flows.iter().enumerate().map(|(n, f)| index_level(cfg, f, n)).collect::<Result<Vec<_>, _>>()?;
    let shifts = shift_rows(&sys, &levels)?;
    let report = ConleyReport { levels, shifts };
    write_json(dir, "conley.json", &report)?;
    write_json(dir, "invariants.json", &invariants_for(cfg, &geom, Some(&report))?)
}

/// Runs every stage into `dir`. On failure a `PARTIAL` marker holding the
/// error is left next to the files written so far.
pub fn run_pipeline(cfg: &PipelineConfig, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let marker = dir.join(PARTIAL_MARKER);
    fs::write(&marker, "running\n")?;
    match run_stages(cfg, dir) {
        Ok(()) => {
            fs::remove_file(&marker)?;
            Ok(())
        }
        Err(e) => {
            fs::write(&marker, format!("{e}\n"))?;
            Err(e)
        }
    }
}
