//! The approximate Seiberg-Witten flow on `F_n x W_n` over the Picard torus.
//!
//! States are stored in the flat trivialisation given by cover Fourier
//! coefficients: each tracked Dirac block carries a 2-vector in block
//! coordinates, the base carries Picard coordinates and `W_n` carries real
//! coefficients over a fixed basis of `*d` eigenforms. Eigen-coordinates over
//! the fiber of `F_n` are recomputed from the flat data when needed.

mod integrate;
mod model;
mod norms;
mod quadratic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dirac::DiracError;
use crate::geometry::GeometryError;
use crate::sections::SectionError;

pub use integrate::{integrate_field, integrate_trajectory, ExitEvent, IntegrationControls, Trajectory, TrajectorySample};
pub use model::{FiberMode, FlatChart, FlowModel, FlowState, SpinorWindow, Tangent};
pub use norms::{weighted_norm, weighted_norm_of, SplitNorms, WeightBand, WeightSpec};
pub use quadratic::{quadratic_terms, Form3, QuadraticTerms};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error(transparent)]
    Section(#[from] SectionError),
    #[error("convolution reaches mode {mode:?} beyond the truncation radius {limit}")]
    TruncationOverflow { mode: Vec<i64>, limit: f64 },
    #[error("step size {h} fell below the minimum at t = {t}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("invalid flow configuration: {0}")]
    InvalidConfig(String),
    #[error("state does not match the fiber: expected {expected} coefficients, got {got}")]
    StateMismatch { expected: usize, got: usize },
}

impl From<DiracError> for FlowError {
    fn from(e: DiracError) -> Self {
        FlowError::Section(e.into())
    }
}

impl From<GeometryError> for FlowError {
    fn from(e: GeometryError) -> Self {
        FlowError::Section(DiracError::from(e).into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverflowPolicy {
    /// Drop modes beyond the truncation and count them.
    Clip,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    /// Ladder index.
    pub n: usize,
    pub k_plus: f64,
    pub k_minus: f64,
    pub r: f64,
    pub r_prime: f64,
    /// Configured estimate of the compactness radius `R_{k+,k-}`.
    pub r_estimate: f64,
    pub overflow: OverflowPolicy,
    /// Switches the quadratic terms off (linear flow).
    pub quadratic: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            n: 1,
            k_plus: 5.5,
            k_minus: 5.5,
            r: 20.0,
            r_prime: 2000.0,
            r_estimate: 10.0,
            overflow: OverflowPolicy::Clip,
            quadratic: true,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let half = |x: f64| (2.0 * x).fract() == 0.0;
        let bad = |m: String| Err(FlowError::InvalidConfig(m));
        for (name, k) in [("k_plus", self.k_plus), ("k_minus", self.k_minus)] {
            if !(k > 5.0 && half(k)) {
                return bad(format!("{name} = {k} must be a half-integer above 5"));
            }
        }
        if (self.k_plus - self.k_minus).abs() > 0.5 {
            return bad(format!("|k_plus - k_minus| = {} exceeds 1/2", (self.k_plus - self.k_minus).abs()));
        }
        if !(self.r > 0.0 && self.r_estimate > 0.0) {
            return bad("R and R_estimate must be positive".into());
        }
        if !(self.r_prime >= 100.0 * self.r_estimate) {
            return bad(format!("R' = {} is below 100 * R_estimate = {}", self.r_prime, 100.0 * self.r_estimate));
        }
        Ok(())
    }

    /// Cutoff `chi` at mixed norm `norm`: 1 up to `R'`, 0 from `2R'`.
    pub fn chi(&self, norm: f64) -> f64 {
        let u = ((norm - self.r_prime) / self.r_prime).clamp(0.0, 1.0);
        1.0 - 3.0 * u * u + 2.0 * u * u * u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_constraints() {
        assert!(FlowConfig::default().validate().is_ok());
        let c = FlowConfig { k_plus: 5.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = FlowConfig { k_plus: 6.5, ..Default::default() };
        assert!(c.validate().is_err());
        let c = FlowConfig { k_plus: 6.0, ..Default::default() };
        assert!(c.validate().is_ok());
        let c = FlowConfig { r_prime: 999.0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn cutoff_profile() {
        let c = FlowConfig::default();
        assert_eq!(c.chi(0.0), 1.0);
        assert_eq!(c.chi(2000.0), 1.0);
        assert_eq!(c.chi(4000.0), 0.0);
        assert_eq!(c.chi(1e9), 0.0);
        assert!((c.chi(3000.0) - 0.5).abs() < 1e-15);
    }
}
