//! Isolating neighbourhoods, index pairs and Conley index homology.
//!
//! Certification is sample based: boundary points are drawn at random, and
//! each is certified by the sign of a factor-norm derivative or by
//! integrating until it leaves the box.

mod analytic;
mod cubical;
pub mod homology;
mod sw;
pub mod toy;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::FlowError;

pub use analytic::{
    check_shift, fixed_point_index, quotient_model_homology, reducible_index_pair, relative_homology,
    suspension_shift, suspension_shift_check, verify_isolating, Certificate, PairSettings, ShiftVerdict, Witness,
};
pub use cubical::{cubical_index_pair, cubical_invariant_set, CubeSet, CubicalSpec};
pub use homology::{free_homology, kunneth_free, shift_homology, ChainComplex, Homology, HomologyGroup};
pub use sw::SwFlow;

/// Factor names in box order.
pub const FACTORS: [&str; 4] = ["F+", "F-", "W+", "W-"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConleyError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("certification undecided: {} samples failed to integrate", stuck.len())]
    Undecided { stuck: Vec<Vec<f64>> },
    #[error("index pair condition failed: {condition}")]
    ConditionFailed { condition: String, face: Option<usize>, witness: Vec<f64> },
    #[error("combinatorial invariant set touches the grid boundary ({cells} boundary cells)")]
    GridTooCoarse { cells: usize },
    #[error("no CW model for pair: {0}")]
    UnrecognizedPair(String),
    #[error("flow on the fixed set is not the linear form flow (defect {defect:e})")]
    NonlinearOnFixedSet { defect: f64, witness: Vec<f64> },
    #[error("suspension check failed for {which}: expected {expected:?}, got {got:?}")]
    Mismatch { which: String, expected: Homology, got: Homology },
    #[error("integer overflow in Smith normal form")]
    NumericOverflow,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// A vector field on `R^dim`.
pub trait Flow: Sync {
    fn dim(&self) -> usize;
    fn field(&self, x: &[f64]) -> Result<Vec<f64>, FlowError>;
}

/// A flow on a bundle over a torus whose fiber splits into the four factors
/// `F+`, `F-`, `W+`, `W-`, each with its own norm.
pub trait FactoredFlow: Flow {
    fn base_dim(&self) -> usize;
    /// Real dimension of each factor.
    fn factor_dims(&self) -> [usize; 4];
    /// Squared factor norms.
    fn norms_sq(&self, x: &[f64]) -> Result<[f64; 4], FlowError>;
    /// Squared factor norms and their derivatives along the flow.
    fn rates(&self, x: &[f64]) -> Result<([f64; 4], [f64; 4]), FlowError>;
    /// Random point with factor norms below `radii`, or on the sphere of
    /// factor `face`.
    fn sample(&self, rng: &mut ChaCha8Rng, radii: [f64; 4], face: Option<usize>) -> Result<Vec<f64>, FlowError>;
    /// Distance of the field at `x` (a point with zero spinor factors) from
    /// the linear flow that fixes the base and the spinor and acts linearly
    /// on the form factors.
    fn fixed_defect(&self, x: &[f64]) -> Result<f64, FlowError>;
}

/// Fiberwise product of balls around the reducible locus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolatingBox {
    pub radii: [f64; 4],
    /// Boundary samples per nonempty face.
    pub density: usize,
    /// Dwell time `T` for samples the sign test cannot decide.
    pub dwell: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PairRegion {
    /// `N` a product of balls over `T^base_dim`, `L` the union of the sphere
    /// faces of the exit factors.
    Analytic { base_dim: usize, factor_dims: [usize; 4], radii: [f64; 4], exit: [bool; 4] },
    Cubical { spec: CubicalSpec, n: CubeSet, l: CubeSet },
    Opaque { description: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexPair {
    pub region: PairRegion,
    pub regular: bool,
    /// Sampled exit times to `L` (`dwell` when a sample did not exit).
    pub tau_samples: Vec<f64>,
}

/// Projection of the index to the base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionData {
    pub base_dim: usize,
    pub projection: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConleyIndexData {
    pub relative_homology: Homology,
    pub fixed_homology: Homology,
    pub section_data: SectionData,
    /// `t` with fixed set of SWF type at level `t`.
    pub level: usize,
}
