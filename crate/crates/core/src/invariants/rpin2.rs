//! The representation ring `R(Pin(2)) = Z[z, w] / (w^2 - 2w, zw - 2w)`.

use std::fmt;
use std::ops::{Add, Mul};

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use super::InvariantError;

/// `sum_k z_coeffs[k] z^k + w_coeff w`, with no trailing zero `z` coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RPin2Element {
    pub z_coeffs: Vec<i128>,
    pub w_coeff: i128,
}

impl RPin2Element {
    pub fn new(mut z_coeffs: Vec<i128>, w_coeff: i128) -> Self {
        while z_coeffs.last() == Some(&0) {
            z_coeffs.pop();
        }
        Self { z_coeffs, w_coeff }
    }

    pub fn zero() -> Self {
        Self::new(vec![], 0)
    }

    pub fn constant(c: i128) -> Self {
        Self::new(vec![c], 0)
    }

    pub fn z_pow(k: usize) -> Self {
        let mut c = vec![0; k + 1];
        c[k] = 1;
        Self::new(c, 0)
    }

    pub fn w() -> Self {
        Self::new(vec![], 1)
    }

    pub fn is_zero(&self) -> bool {
        self.z_coeffs.is_empty() && self.w_coeff == 0
    }

    /// `c` with `w * self = c w`.
    pub fn w_multiplier(&self) -> i128 {
        self.at_two() + 2 * self.w_coeff
    }

    /// The `z` part evaluated at `z = 2`.
    fn at_two(&self) -> i128 {
        self.z_coeffs.iter().enumerate().map(|(k, a)| a * pow2(k)).sum()
    }
}

fn pow2(k: usize) -> i128 {
    1i128.checked_shl(k as u32).filter(|_| k < 127).expect("R(Pin(2)) coefficient overflow")
}

impl Add for &RPin2Element {
    type Output = RPin2Element;

    fn add(self, o: &RPin2Element) -> RPin2Element {
        let n = self.z_coeffs.len().max(o.z_coeffs.len());
        let z = (0..n)
            .map(|k| self.z_coeffs.get(k).unwrap_or(&0) + o.z_coeffs.get(k).unwrap_or(&0))
            .collect();
        RPin2Element::new(z, self.w_coeff + o.w_coeff)
    }
}

impl Mul for &RPin2Element {
    type Output = RPin2Element;

    fn mul(self, o: &RPin2Element) -> RPin2Element {
        rpin2_mul(self, o)
    }
}

pub fn rpin2_mul(x: &RPin2Element, y: &RPin2Element) -> RPin2Element {
    let mut z = vec![0i128; (x.z_coeffs.len() + y.z_coeffs.len()).saturating_sub(1)];
    for (i, a) in x.z_coeffs.iter().enumerate() {
        for (j, b) in y.z_coeffs.iter().enumerate() {
            z[i + j] += a * b;
        }
    }
    let w = x.w_coeff * y.at_two() + y.w_coeff * x.at_two() + 2 * x.w_coeff * y.w_coeff;
    RPin2Element::new(z, w)
}

impl fmt::Display for RPin2Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms: Vec<String> = self
            .z_coeffs
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0)
            .map(|(k, a)| match k {
                0 => format!("{a}"),
                1 => format!("{a}z"),
                _ => format!("{a}z^{k}"),
            })
            .collect();
        if self.w_coeff != 0 {
            terms.push(format!("{}w", self.w_coeff));
        }
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

/// `min { k >= 0 : w x = 2^k w for some x in the ideal }`.
pub fn kappa_k(generators: &[RPin2Element]) -> Result<u32, InvariantError> {
    if generators.is_empty() || generators.iter().any(|g| g.is_zero()) {
        return Err(InvariantError::InvalidInput("ideal generators must be nonzero".into()));
    }
    let g = generators.iter().fold(0i128, |acc, x| acc.gcd(&x.w_multiplier()));
    if g == 0 || g.count_ones() != 1 {
        return Err(InvariantError::NoFiniteK { gcd: g });
    }
    Ok(g.trailing_zeros())
}
