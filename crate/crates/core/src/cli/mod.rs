//! Command line front end.

pub mod config;
pub mod pipeline;
pub mod report;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_rational::Rational64;
use thiserror::Error;

use crate::conley::ConleyError;
use crate::dirac::{find_spectral_gap, DiracError, SpectralSettings};
use crate::flow::FlowError;
use crate::geometry::{GeometryError, PicardPoint};
use crate::invariants::{check_bounds, rational, BoundInputs, BoundMode, InvariantError};
use crate::sections::SectionError;

pub use config::PipelineConfig;
pub use pipeline::run_pipeline;
pub use report::{emit_report, read_homology_csv, ReportFormat};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("inequality fails: {0}")]
    Inequality(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("numeric overflow: {0}")]
    Overflow(String),
    #[error("run in {0} is incomplete")]
    IncompleteRun(PathBuf),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) | CliError::IncompleteRun(_) => 1,
            CliError::Inequality(_) => 2,
            CliError::Certification(_) => 3,
            CliError::Overflow(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DiracError> for CliError {
    fn from(e: DiracError) -> Self {
        match e {
            DiracError::InvalidParameters(_) | DiracError::Geometry(_) => CliError::Config(e.to_string()),
            DiracError::WindowTooLarge { .. } => CliError::Overflow(e.to_string()),
            _ => CliError::Certification(e.to_string()),
        }
    }
}

impl From<SectionError> for CliError {
    fn from(e: SectionError) -> Self {
        match e {
            SectionError::Dirac(d) => d.into(),
            SectionError::InvalidParameters(_) => CliError::Config(e.to_string()),
            _ => CliError::Certification(e.to_string()),
        }
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::Section(s) => s.into(),
            FlowError::TruncationOverflow { .. } => CliError::Overflow(e.to_string()),
            FlowError::InvalidConfig(_) | FlowError::StateMismatch { .. } => CliError::Config(e.to_string()),
            FlowError::StepUnderflow { .. } => CliError::Certification(e.to_string()),
        }
    }
}

impl From<ConleyError> for CliError {
    fn from(e: ConleyError) -> Self {
        match e {
            ConleyError::Flow(f) => f.into(),
            ConleyError::NumericOverflow => CliError::Overflow(e.to_string()),
            ConleyError::InvalidInput(_) => CliError::Config(e.to_string()),
            _ => CliError::Certification(e.to_string()),
        }
    }
}

impl From<InvariantError> for CliError {
    fn from(e: InvariantError) -> Self {
        match e {
            InvariantError::UnsupportedGeometry(_)
            | InvariantError::UnknownRokhlin(_)
            | InvariantError::MissingInput(_)
            | InvariantError::InvalidInput(_) => CliError::Config(e.to_string()),
            _ => CliError::Certification(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "monopole-lab", version, about = "Seiberg-Witten Floer spectra of flat 3-manifolds")]
pub struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON config file; without it the flat torus bundle defaults are used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set flow.r=30`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl ConfigArgs {
    pub fn load(&self) -> Result<PipelineConfig, CliError> {
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            None => serde_json::to_string(&PipelineConfig::flat_torus_bundle())?,
        };
        PipelineConfig::from_json_with(&text, &self.set)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues of the Dirac operator at a base point, as CSV.
    Spectrum {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma separated Picard coordinates (default: origin).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        base: Vec<f64>,
        #[arg(long)]
        window: Option<f64>,
    },
    /// Certified spectral gaps near each `mu`.
    Gaps {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        mu: Vec<f64>,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 4.0)]
        beta: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        base: Vec<f64>,
    },
    /// Spectral section ladder as JSON.
    Sections {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// One approximate flow line as CSV.
    Flow {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Isolating certificates, index pairs and homology as JSON.
    Conley {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Froyshov and kappa invariants as JSON.
    Invariants {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Checks an inequality between invariants; exits 2 if it fails.
    CheckBounds {
        #[arg(long, value_enum)]
        mode: BoundMode,
        #[arg(long, value_parser = parse_rational, allow_hyphen_values = true)]
        sigma: Option<Rational64>,
        #[arg(long, value_parser = parse_rational, allow_hyphen_values = true)]
        b_plus: Option<Rational64>,
        #[arg(long, value_parser = parse_rational, allow_hyphen_values = true)]
        b2_minus: Option<Rational64>,
        #[arg(long, value_parser = parse_rational, allow_hyphen_values = true)]
        c1_sq: Option<Rational64>,
        #[arg(long, value_parser = parse_rational, allow_hyphen_values = true)]
        h0: Option<Rational64>,
        #[arg(long, value_parser = parse_rational, allow_hyphen_values = true)]
        h1: Option<Rational64>,
        #[arg(long, value_parser = parse_rational, allow_hyphen_values = true)]
        kappa0: Option<Rational64>,
        #[arg(long, value_parser = parse_rational, allow_hyphen_values = true)]
        kappa1: Option<Rational64>,
    },
    /// Runs every stage and writes the artifacts into the output directory.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarizes a finished run.
    Report {
        run: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Markdown)]
        format: ReportFormat,
    },
}

fn parse_rational(s: &str) -> Result<Rational64, String> {
    rational::parse(s).map_err(|e| e.to_string())
}

fn base_point(base: &[f64], b1: usize) -> Result<PicardPoint, CliError> {
    if base.is_empty() {
        return Ok(PicardPoint::origin(b1));
    }
    if base.len() != b1 {
        return Err(CliError::Usage(format!("--base needs {b1} coordinates, got {}", base.len())));
    }
    Ok(PicardPoint { coords: base.to_vec() })
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Spectrum { cfg, base, window } => {
            let cfg = cfg.load()?;
            let geom = cfg.geometry.build()?;
            geom.require_spectral()?;
            let a = base_point(&base, geom.b1())?;
            let w = window.unwrap_or(cfg.output.spectrum_window);
            write!(out, "{}", pipeline::spectrum_csv(&geom, &a.coords, w, cfg.ladder.cap)?)?;
        }
        Command::Gaps { cfg, mu, alpha, beta, base } => {
            let cfg = cfg.load()?;
            let geom = cfg.geometry.build()?;
            geom.require_spectral()?;
            let a = base_point(&base, geom.b1())?;
            let st = SpectralSettings::with_cap(cfg.ladder.cap);
            let mut rows = Vec::new();
            for m in mu {
                let g = find_spectral_gap(&geom, &a, m, alpha, beta, &st)?;
                rows.push(serde_json::json!({"mu": m, "gap": g}));
            }
            writeln!(out, "{}", serde_json::to_string_pretty(&rows)?)?;
        }
        Command::Sections { cfg } => {
            let cfg = cfg.load()?;
            let geom = cfg.geometry.build()?;
            geom.require_spectral()?;
            let sys = pipeline::build_system(&cfg, &geom)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&pipeline::sections_json(&sys)?)?)?;
        }
        Command::Flow { cfg } => {
            let cfg = cfg.load()?;
            let geom = cfg.geometry.build()?;
            geom.require_spectral()?;
            let sys = pipeline::build_system(&cfg, &geom)?;
            if cfg.flow.n >= sys.levels() {
                return Err(CliError::Config(format!("flow.n = {} but the ladder has {} levels", cfg.flow.n, sys.levels())));
            }
            let (flow, traj) = pipeline::flow_trajectory(&cfg, &sys)?;
            write!(out, "{}", pipeline::trajectory_csv(&flow, &traj)?)?;
        }
        Command::Conley { cfg } => {
            let cfg = cfg.load()?;
            let report = conley_report(&cfg)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
        }
        Command::Invariants { cfg } => {
            let cfg = cfg.load()?;
            let geom = cfg.geometry.build()?;
            let conley = if geom.has_spectral_model() && cfg.invariants.h_index.is_none() {
                Some(conley_report(&cfg)?)
            } else {
                None
            };
            let inv = pipeline::invariants_for(&cfg, &geom, conley.as_ref())?;
            writeln!(out, "{}", serde_json::to_string_pretty(&inv)?)?;
        }
        Command::CheckBounds { mode, sigma, b_plus, b2_minus, c1_sq, h0, h1, kappa0, kappa1 } => {
            let inputs = BoundInputs { sigma, b_plus, b2_minus, c1_sq, h0, h1, kappa0, kappa1 };
            let check = check_bounds(mode, &inputs)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&check)?)?;
            if !check.pass {
                return Err(CliError::Inequality(format!(
                    "{} > {} (slack {})",
                    rational::to_string(&check.lhs),
                    rational::to_string(&check.rhs),
                    rational::to_string(&check.slack)
                )));
            }
        }
        Command::Run { cfg, out: dir } => {
            let cfg = cfg.load()?;
            let dir = dir.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            run_pipeline(&cfg, &dir)?;
            writeln!(out, "wrote {}", dir.display())?;
        }
        Command::Report { run, format } => {
            write!(out, "{}", emit_report(&run, format)?)?;
        }
    }
    Ok(())
}

/// Certified Conley report for every ladder level.
pub fn conley_report(cfg: &PipelineConfig) -> Result<pipeline::ConleyReport, CliError> {
    let geom = cfg.geometry.build()?;
    geom.require_spectral()?;
    let sys = pipeline::build_system(cfg, &geom)?;
    let mut levels = Vec::new();
    for n in 0..sys.levels() {
        let flow = pipeline::sw_flow(cfg, &sys, n)?;
        let cert = pipeline::certify_level(cfg, &flow, n)?;
        if !cert.ok {
            return Err(CliError::Certification(format!("isolating box at level {n} has a witness")));
        }
        levels.push(pipeline::index_level(cfg, &flow, n)?);
    }
    let shifts = pipeline::shift_rows(&sys, &levels)?;
    Ok(pipeline::ConleyReport { levels, shifts })
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors go to stderr.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(j) = cli.jobs {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("monopole-lab: {e}");
            e.exit_code()
        }
    }
}
