//! Pipeline configuration and `--set` overrides.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::conley::{IsolatingBox, PairSettings};
use crate::dirac::SpectralSettings;
use crate::flow::{FlowConfig, IntegrationControls, OverflowPolicy};
use crate::geometry::{GeometryKind, ModelGeometry, SpinData};
use crate::sections::{BaseGrid, LadderTargets, SectionSettings};

use super::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GeometryName {
    T3,
    FlatTorusBundle,
    SphereBundle { d: i64, g: i64, q: i64 },
    S3stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub geometry: GeometryName,
    #[serde(default)]
    pub spin: Vec<f64>,
    #[serde(default = "one")]
    pub metric_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl GeometryConfig {
    pub fn build(&self) -> Result<ModelGeometry, CliError> {
        let (kind, spin) = match &self.geometry {
            GeometryName::T3 => (GeometryKind::T3, SpinData::Shift(self.spin.clone())),
            GeometryName::FlatTorusBundle => (GeometryKind::FlatTorusBundle, SpinData::Shift(self.spin.clone())),
            GeometryName::SphereBundle { d, g, q } => (GeometryKind::SphereBundle { d: *d, g: *g }, SpinData::Torsion(*q)),
            GeometryName::S3stub => (GeometryKind::S3Stub, SpinData::None),
        };
        ModelGeometry::new(kind, self.metric_scale, spin).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridConfig {
    Regular { n: usize },
    Staggered { n: usize },
    Concentrated { n: usize, radius: f64 },
}

impl GridConfig {
    pub fn build(&self, b1: usize) -> BaseGrid {
        match *self {
            GridConfig::Regular { n } => BaseGrid::regular(b1, n),
            GridConfig::Staggered { n } => BaseGrid::staggered(b1, n),
            GridConfig::Concentrated { n, radius } => BaseGrid::concentrated(b1, n, radius),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderConfig {
    pub spinor: Vec<f64>,
    pub form: Vec<f64>,
    pub grid: GridConfig,
    pub delta: f64,
    pub cap: i64,
    /// Size of the kernel-removing perturbation.
    pub perturbation: f64,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            spinor: vec![0.0, 10.6],
            form: vec![0.0, 10.0],
            grid: GridConfig::Staggered { n: 64 },
            delta: 1.0,
            cap: SpectralSettings::default().cap,
            perturbation: 1.0,
        }
    }
}

impl LadderConfig {
    pub fn targets(&self) -> LadderTargets {
        LadderTargets::symmetric(self.spinor.clone(), self.form.clone())
    }

    pub fn settings(&self) -> SectionSettings {
        SectionSettings { delta: self.delta, spectral: SpectralSettings::with_cap(self.cap) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowBlock {
    pub n: usize,
    pub k_plus: f64,
    pub k_minus: f64,
    pub r: f64,
    pub r_prime: f64,
    pub r_estimate: f64,
    /// `eps` of the reducible pair as a fraction of `r`.
    pub epsilon: f64,
    pub quadratic: bool,
    pub overflow: OverflowPolicy,
    /// Duration of the `flow` command trajectory.
    pub duration: f64,
}

impl Default for FlowBlock {
    fn default() -> Self {
        let f = FlowConfig::default();
        Self {
            n: f.n,
            k_plus: f.k_plus,
            k_minus: f.k_minus,
            r: f.r,
            r_prime: f.r_prime,
            r_estimate: f.r_estimate,
            epsilon: 0.05,
            quadratic: f.quadratic,
            overflow: f.overflow,
            duration: 1.0,
        }
    }
}

impl FlowBlock {
    pub fn config(&self, n: usize) -> FlowConfig {
        FlowConfig {
            n,
            k_plus: self.k_plus,
            k_minus: self.k_minus,
            r: self.r,
            r_prime: self.r_prime,
            r_estimate: self.r_estimate,
            overflow: self.overflow,
            quadratic: self.quadratic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConleyBlock {
    /// Boundary samples per face for the isolating box.
    pub density: usize,
    pub dwell: f64,
    pub face_samples: usize,
    pub cloud: usize,
    pub pair_dwell: f64,
    pub tau_samples: usize,
    pub jump_tol: f64,
    pub fixed_samples: usize,
    pub fixed_tol: f64,
    /// Every `base_stride`-th grid point is used as a base sample.
    pub base_stride: usize,
    pub tol: f64,
}

impl Default for ConleyBlock {
    fn default() -> Self {
        let p = PairSettings::default();
        Self {
            density: 16,
            dwell: 5.0,
            face_samples: p.face_samples,
            cloud: p.cloud,
            pair_dwell: p.dwell,
            tau_samples: p.tau_samples,
            jump_tol: p.jump_tol,
            fixed_samples: p.fixed_samples,
            fixed_tol: p.fixed_tol,
            base_stride: 8,
            tol: p.controls.tol,
        }
    }
}

impl ConleyBlock {
    pub fn controls(&self) -> IntegrationControls {
        IntegrationControls { tol: self.tol, ..Default::default() }
    }

    pub fn isolating_box(&self, r: f64) -> IsolatingBox {
        IsolatingBox { radii: [r; 4], density: self.density, dwell: self.dwell }
    }

    pub fn pair_settings(&self, r: f64, seed: u64) -> PairSettings {
        PairSettings {
            face_samples: self.face_samples,
            cloud: self.cloud,
            outer_radii: [r; 4],
            dwell: self.pair_dwell,
            tau_samples: self.tau_samples,
            jump_tol: self.jump_tol,
            fixed_samples: self.fixed_samples,
            fixed_tol: self.fixed_tol,
            seed,
            controls: self.controls(),
        }
    }
}

/// Formal desuspension `C^complex + R^real` applied before reading off `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Desuspension {
    /// The complex rank of `F_n^-` and the dimension of `W_n^-` at the top level.
    Auto,
    Explicit { complex: u64, real: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvariantsBlock {
    pub desuspension: Desuspension,
    /// `h` of the desuspended index for geometries without a spectral model
    /// (0 when unset).
    pub h_index: Option<i64>,
    /// `k` of the desuspended index for geometries without a spectral model.
    pub k_index: Option<i64>,
}

impl Default for InvariantsBlock {
    fn default() -> Self {
        Self { desuspension: Desuspension::Auto, h_index: None, k_index: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: String,
    /// Window of the spectrum written to `spectrum.csv`.
    pub spectrum_window: f64,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: "run".into(), spectrum_window: 12.0 }
    }
}

const TOP_LEVEL_KEYS: [&str; 9] =
    ["geometry", "spin", "metric_scale", "ladder", "flow", "conley", "invariants", "output", "seed"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(flatten)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub ladder: LadderConfig,
    #[serde(default)]
    pub flow: FlowBlock,
    #[serde(default)]
    pub conley: ConleyBlock,
    #[serde(default)]
    pub invariants: InvariantsBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub seed: u64,
}

impl PipelineConfig {
    /// Flat torus bundle with `s_1` and default blocks.
    pub fn flat_torus_bundle() -> Self {
        Self {
            geometry: GeometryConfig { geometry: GeometryName::FlatTorusBundle, spin: vec![0.5, 0.0], metric_scale: 1.0 },
            ladder: Default::default(),
            flow: Default::default(),
            conley: Default::default(),
            invariants: Default::default(),
            output: Default::default(),
            seed: 0,
        }
    }

    /// Parses `text` after applying `key=value` overrides.
    pub fn from_json_with(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut v: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config is not JSON: {e}")))?;
        for o in overrides {
            apply_override(&mut v, o)?;
        }
        if let Some(obj) = v.as_object() {
            if let Some(k) = obj.keys().find(|k| !TOP_LEVEL_KEYS.contains(&k.as_str())) {
                return Err(CliError::Config(format!("unknown config key {k:?}")));
            }
        }
        let cfg: Self = serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.ladder.spinor.len() != self.ladder.form.len() || self.ladder.spinor.is_empty() {
            return bad("ladder.spinor and ladder.form need equal, positive lengths".into());
        }
        if !(self.flow.epsilon > 0.0 && self.flow.epsilon < 1.0) {
            return bad(format!("flow.epsilon must lie in (0, 1), got {}", self.flow.epsilon));
        }
        if self.conley.base_stride == 0 {
            return bad("conley.base_stride must be positive".into());
        }
        self.flow.config(self.flow.n).validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.geometry.build()?;
        Ok(())
    }
}

/// Sets the dotted `key` of `v` to `value`, parsed as JSON when possible.
pub fn apply_override(v: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {assignment:?}")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = v;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::Usage(format!("--set {key}: {} is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(p.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(p.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(CliError::Usage(format!("--set needs a key, got {assignment:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = PipelineConfig::flat_torus_bundle();
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"geometry\":\"FlatTorusBundle\""));
        assert_eq!(PipelineConfig::from_json_with(&text, &[]).unwrap(), c);
        let minimal = r#"{"geometry": {"SphereBundle": {"d": 2, "g": 1, "q": 1}}}"#;
        let s = PipelineConfig::from_json_with(minimal, &[]).unwrap();
        assert_eq!(s.geometry.build().unwrap().name(), "SphereBundle(d=2,g=1)");
    }

    #[test]
    fn overrides() {
        let text = serde_json::to_string(&PipelineConfig::flat_torus_bundle()).unwrap();
        let c = PipelineConfig::from_json_with(&text, &["flow.n=0".into(), "seed=7".into(), "ladder.grid.staggered.n=16".into()])
            .unwrap();
        assert_eq!((c.flow.n, c.seed), (0, 7));
        assert_eq!(c.ladder.grid, GridConfig::Staggered { n: 16 });
        assert!(matches!(PipelineConfig::from_json_with(&text, &["flow.nope=1".into()]), Err(CliError::Config(_))));
        assert!(matches!(PipelineConfig::from_json_with(&text, &["nope=1".into()]), Err(CliError::Config(_))));
        let partial = PipelineConfig::from_json_with(&text, &["conley={\"density\": 4}".into()]).unwrap();
        assert_eq!((partial.conley.density, partial.conley.base_stride), (4, 8));
        assert!(matches!(PipelineConfig::from_json_with(&text, &["seed".into()]), Err(CliError::Usage(_))));
        assert!(matches!(PipelineConfig::from_json_with(&text, &["flow.epsilon=2".into()]), Err(CliError::Config(_))));
    }
}
