//! Small synthetic flows for testing the certification machinery.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::flow::FlowError;

use super::{FactoredFlow, Flow};

/// Modification of a [`LinearFlow`].
#[derive(Debug, Clone, PartialEq)]
pub enum Planted {
    None,
    /// Radial speed `r (r - radius)(3 radius - r) / radius` on one factor: the sphere of
    /// `radius` repels and the sphere of `3 radius` attracts.
    RadialCycle { factor: usize, radius: f64 },
    /// Constant drift of the first coordinate of factor 0.
    FixedSetDrift { amount: f64 },
}

/// `dx_i/dt = rates[i] x_i` on the fiber coordinates, with `base_dim`
/// leading circle coordinates that do not move. Fiber coordinates are grouped
/// into the four factors; norms are Euclidean around `center`, which only
/// moves the box.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFlow {
    pub base_dim: usize,
    pub rates: Vec<f64>,
    pub groups: [Vec<usize>; 4],
    pub center: Vec<f64>,
    pub planted: Planted,
}

impl LinearFlow {
    /// Factor `i` gets `dims[i]` coordinates with rate `rates[i]`.
    pub fn split(base_dim: usize, dims: [usize; 4], rates: [f64; 4]) -> Self {
        let mut r = Vec::new();
        let mut groups: [Vec<usize>; 4] = Default::default();
        for i in 0..4 {
            for _ in 0..dims[i] {
                groups[i].push(r.len());
                r.push(rates[i]);
            }
        }
        let n = r.len();
        Self { base_dim, rates: r, groups, center: vec![0.0; n], planted: Planted::None }
    }

    /// Plain linear flow on `R^n`, each coordinate its own rate; factors are
    /// assigned by sign (expanding to `F-`, contracting to `F+`).
    pub fn diagonal(rates: Vec<f64>) -> Self {
        let mut groups: [Vec<usize>; 4] = Default::default();
        for (i, &r) in rates.iter().enumerate() {
            groups[if r > 0.0 { 1 } else { 0 }].push(i);
        }
        let n = rates.len();
        Self { base_dim: 0, rates, groups, center: vec![0.0; n], planted: Planted::None }
    }

    pub fn with_center(mut self, center: Vec<f64>) -> Self {
        self.center = center;
        self
    }

    pub fn with_planted(mut self, planted: Planted) -> Self {
        self.planted = planted;
        self
    }

    fn fiber<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.base_dim..]
    }

    fn check(&self, x: &[f64]) -> Result<(), FlowError> {
        if x.len() != self.dim() {
            return Err(FlowError::StateMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }
}

impl Flow for LinearFlow {
    fn dim(&self) -> usize {
        self.base_dim + self.rates.len()
    }

    fn field(&self, x: &[f64]) -> Result<Vec<f64>, FlowError> {
        self.check(x)?;
        let y = self.fiber(x);
        let mut out = vec![0.0; x.len()];
        for (i, r) in self.rates.iter().enumerate() {
            out[self.base_dim + i] = r * y[i];
        }
        match &self.planted {
            Planted::None => {}
            Planted::RadialCycle { factor, radius } => {
                let g = &self.groups[*factor];
                let r = g.iter().map(|&i| y[i] * y[i]).sum::<f64>().sqrt();
                if r > 0.0 {
                    let speed = (r - radius) * (3.0 * radius - r) / radius;
                    for &i in g {
                        out[self.base_dim + i] = y[i] * speed;
                    }
                }
            }
            Planted::FixedSetDrift { amount } => {
                if let Some(&i) = self.groups[0].first() {
                    out[self.base_dim + i] += amount;
                }
            }
        }
        Ok(out)
    }
}

impl FactoredFlow for LinearFlow {
    fn base_dim(&self) -> usize {
        self.base_dim
    }

    fn factor_dims(&self) -> [usize; 4] {
        std::array::from_fn(|i| self.groups[i].len())
    }

    fn norms_sq(&self, x: &[f64]) -> Result<[f64; 4], FlowError> {
        self.check(x)?;
        let y = self.fiber(x);
        Ok(std::array::from_fn(|f| self.groups[f].iter().map(|&i| (y[i] - self.center[i]).powi(2)).sum()))
    }

    fn rates(&self, x: &[f64]) -> Result<([f64; 4], [f64; 4]), FlowError> {
        let n = self.norms_sq(x)?;
        let v = self.field(x)?;
        let y = self.fiber(x);
        let r = std::array::from_fn(|f| {
            self.groups[f].iter().map(|&i| 2.0 * (y[i] - self.center[i]) * v[self.base_dim + i]).sum()
        });
        Ok((n, r))
    }

    fn sample(&self, rng: &mut ChaCha8Rng, radii: [f64; 4], face: Option<usize>) -> Result<Vec<f64>, FlowError> {
        let mut x: Vec<f64> = (0..self.base_dim).map(|_| rng.gen::<f64>()).collect();
        x.extend(self.center.iter().copied());
        for f in 0..4 {
            let g = &self.groups[f];
            if g.is_empty() {
                continue;
            }
            let dir: Vec<f64> = g.iter().map(|_| StandardNormal.sample(rng)).collect();
            let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let r = if face == Some(f) { radii[f] } else { radii[f] * rng.gen::<f64>().powf(1.0 / g.len() as f64) };
            for (&i, d) in g.iter().zip(dir) {
                x[self.base_dim + i] += r * d / len;
            }
        }
        Ok(x)
    }

    fn fixed_defect(&self, x: &[f64]) -> Result<f64, FlowError> {
        let v = self.field(x)?;
        let y = self.fiber(x);
        let mut d = v[..self.base_dim].iter().map(|a| a.abs()).fold(0.0, f64::max);
        for f in 0..2 {
            for &i in &self.groups[f] {
                d = d.max(v[self.base_dim + i].abs());
            }
        }
        for f in 2..4 {
            for &i in &self.groups[f] {
                d = d.max((v[self.base_dim + i] - self.rates[i] * y[i]).abs());
            }
        }
        Ok(d)
    }
}
