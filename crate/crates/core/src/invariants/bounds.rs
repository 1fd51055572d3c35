//! Four-manifold inequalities.

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use super::{rational, InvariantError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    /// `(c1^2 + b2^-)/8 + h(Y0) <= h(Y1)`.
    Negdef,
    /// `-sigma/8 + kappa(Y0) - 1 <= b+ + kappa(Y1)`.
    TenEighths,
    /// `-sigma/8 + kappa(Y0) + 1 <= b+ + kappa(Y1)`, for split `Y0` and `b+ > 0`.
    TenEighthsSplit,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    #[serde(default, with = "rational::option")]
    pub sigma: Option<Rational64>,
    #[serde(default, with = "rational::option")]
    pub b_plus: Option<Rational64>,
    #[serde(default, with = "rational::option")]
    pub b2_minus: Option<Rational64>,
    #[serde(default, with = "rational::option")]
    pub c1_sq: Option<Rational64>,
    #[serde(default, with = "rational::option")]
    pub h0: Option<Rational64>,
    #[serde(default, with = "rational::option")]
    pub h1: Option<Rational64>,
    #[serde(default, with = "rational::option")]
    pub kappa0: Option<Rational64>,
    #[serde(default, with = "rational::option")]
    pub kappa1: Option<Rational64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub mode: BoundMode,
    pub pass: bool,
    #[serde(with = "rational")]
    pub lhs: Rational64,
    #[serde(with = "rational")]
    pub rhs: Rational64,
    /// `rhs - lhs`.
    #[serde(with = "rational")]
    pub slack: Rational64,
}

fn need(v: Option<Rational64>, name: &'static str) -> Result<Rational64, InvariantError> {
    v.ok_or(InvariantError::MissingInput(name))
}

pub fn check_bounds(mode: BoundMode, inputs: &BoundInputs) -> Result<BoundCheck, InvariantError> {
    let eighth = Rational64::new(1, 8);
    let one = Rational64::from_integer(1);
    let (lhs, rhs) = match mode {
        BoundMode::Negdef => (
            (need(inputs.c1_sq, "c1_sq")? + need(inputs.b2_minus, "b2_minus")?) * eighth + need(inputs.h0, "h0")?,
            need(inputs.h1, "h1")?,
        ),
        BoundMode::TenEighths | BoundMode::TenEighthsSplit => {
            let b_plus = need(inputs.b_plus, "b_plus")?;
            if mode == BoundMode::TenEighthsSplit && b_plus <= Rational64::from_integer(0) {
                return Err(InvariantError::InvalidInput("the split inequality needs b+ > 0".into()));
            }
            let sign = if mode == BoundMode::TenEighths { -one } else { one };
            (
                -need(inputs.sigma, "sigma")? * eighth + need(inputs.kappa0, "kappa0")? + sign,
                b_plus + need(inputs.kappa1, "kappa1")?,
            )
        }
    };
    Ok(BoundCheck { mode, pass: lhs <= rhs, lhs, rhs, slack: rhs - lhs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64) -> Option<Rational64> {
        Some(Rational64::from_integer(n))
    }

    #[test]
    fn examples() {
        let split = BoundInputs { sigma: r(-16), b_plus: r(3), kappa0: r(0), kappa1: r(0), ..Default::default() };
        let c = check_bounds(BoundMode::TenEighthsSplit, &split).unwrap();
        assert!(c.pass);
        assert_eq!((c.lhs, c.slack), (Rational64::from_integer(3), Rational64::from_integer(0)));
        let c = check_bounds(BoundMode::TenEighthsSplit, &BoundInputs { b_plus: r(2), ..split.clone() }).unwrap();
        assert!(!c.pass);
        assert_eq!(c.slack, Rational64::from_integer(-1));
        let c = check_bounds(BoundMode::TenEighths, &split).unwrap();
        assert_eq!(c.slack, Rational64::from_integer(2));
        let nd = BoundInputs { c1_sq: r(0), b2_minus: r(8), h0: r(0), h1: r(0), ..Default::default() };
        let c = check_bounds(BoundMode::Negdef, &nd).unwrap();
        assert!(!c.pass);
        assert_eq!(c.slack, Rational64::from_integer(-1));
        assert_eq!(
            check_bounds(BoundMode::Negdef, &BoundInputs { h1: None, ..nd }),
            Err(InvariantError::MissingInput("h1"))
        );
    }
}
