use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::flow::{FlatChart, FlowConfig, FlowError, FlowModel};

use super::{FactoredFlow, Flow};

/// The approximate flow of a [`FlowModel`] in flat coordinates over a set of
/// base points. Samples are drawn over these points; the chart tracks every
/// block of `F_n` that appears at any of them.
#[derive(Debug, Clone)]
pub struct SwFlow {
    pub model: FlowModel,
    pub chart: FlatChart,
    pub config: FlowConfig,
    pub base_points: Vec<Vec<f64>>,
    dims: [usize; 4],
}

impl SwFlow {
    pub fn new(model: FlowModel, config: FlowConfig, base_points: Vec<Vec<f64>>) -> Result<Self, FlowError> {
        if base_points.is_empty() {
            return Err(FlowError::InvalidConfig("SwFlow needs at least one base point".into()));
        }
        let chart = model.chart(&base_points)?;
        let mut dims = None;
        for c in &base_points {
            let fiber = model.fiber(c)?;
            let plus = fiber.iter().filter(|m| m.dprime > 0.0).count();
            let forms_plus = model.forms.iter().filter(|m| m.eigenvalue > 0.0).count();
            let d = [2 * plus, 2 * (fiber.len() - plus), forms_plus, model.forms.len() - forms_plus];
            match dims {
                None => dims = Some(d),
                Some(prev) if prev != d => {
                    return Err(FlowError::InvalidConfig(format!(
                        "factor dimensions change over the base: {prev:?} at the first point, {d:?} at {c:?}"
                    )))
                }
                _ => {}
            }
        }
        Ok(Self { dims: dims.expect("nonempty base"), model, chart, config, base_points })
    }
}

impl Flow for SwFlow {
    fn dim(&self) -> usize {
        self.chart.dim()
    }

    fn field(&self, x: &[f64]) -> Result<Vec<f64>, FlowError> {
        self.model.flat_field(&self.chart, x, &self.config)
    }
}

impl FactoredFlow for SwFlow {
    fn base_dim(&self) -> usize {
        self.chart.b1
    }

    fn factor_dims(&self) -> [usize; 4] {
        self.dims
    }

    fn norms_sq(&self, x: &[f64]) -> Result<[f64; 4], FlowError> {
        Ok(self.model.flat_norms(&self.chart, x, &self.config)?.as_array().map(|v| v * v))
    }

    fn rates(&self, x: &[f64]) -> Result<([f64; 4], [f64; 4]), FlowError> {
        self.model.flat_rates(&self.chart, x, &self.config)
    }

    fn sample(&self, rng: &mut ChaCha8Rng, radii: [f64; 4], face: Option<usize>) -> Result<Vec<f64>, FlowError> {
        let c = &self.base_points[rng.gen_range(0..self.base_points.len())];
        self.model.sample_flat(&self.chart, c, radii, face, &self.config, rng)
    }

    fn fixed_defect(&self, x: &[f64]) -> Result<f64, FlowError> {
        let v = self.field(x)?;
        let chi = self.config.chi(self.model.flat_norms(&self.chart, x, &self.config)?.mixed());
        let fo = self.chart.dim() - self.chart.nforms;
        let omega = self.chart.omega(x);
        let mut d = v[..fo].iter().map(|a| a.abs()).fold(0.0, f64::max);
        for (j, m) in self.model.forms.iter().enumerate() {
            d = d.max((v[fo + j] + chi * m.eigenvalue * omega[j]).abs());
        }
        Ok(d)
    }
}
