use serde::{Deserialize, Serialize};

use super::{FlatChart, FlowConfig, FlowError, FlowModel, SplitNorms};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationControls {
    pub max_step: f64,
    pub min_step: f64,
    /// Local error tolerance per step, relative to `1 + |x|`.
    pub tol: f64,
    /// Stop once a factor norm exceeds its radius.
    pub exit_radii: Option<[f64; 4]>,
}

impl Default for IntegrationControls {
    fn default() -> Self {
        Self { max_step: 0.1, min_step: 1e-12, tol: 1e-9, exit_radii: None }
    }
}

fn axpy(x: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

fn rk4_step<F>(field: &mut F, x: &[f64], h: f64) -> Result<Vec<f64>, FlowError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, FlowError>,
{
    let k1 = field(x)?;
    let k2 = field(&axpy(x, 0.5 * h, &k1))?;
    let k3 = field(&axpy(x, 0.5 * h, &k2))?;
    let k4 = field(&axpy(x, h, &k3))?;
    Ok((0..x.len()).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}

/// Integrates `dx/dt = field(x)` for time `duration` (negative runs the flow
/// backwards) with adaptive RK4 and step doubling. Returns the accepted
/// points, starting with `(0, x0)`. `stop` is called on every accepted point
/// and ends the integration early when it returns true.
pub fn integrate_field<F, S>(
    mut field: F,
    x0: &[f64],
    duration: f64,
    controls: &IntegrationControls,
    mut stop: S,
) -> Result<Vec<(f64, Vec<f64>)>, FlowError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, FlowError>,
    S: FnMut(f64, &[f64]) -> bool,
{
    let sign = if duration < 0.0 { -1.0 } else { 1.0 };
    let total = duration.abs();
    let mut f = |x: &[f64]| -> Result<Vec<f64>, FlowError> {
        let mut v = field(x)?;
        if sign < 0.0 {
            v.iter_mut().for_each(|e| *e = -*e);
        }
        Ok(v)
    };
    let mut out = vec![(0.0, x0.to_vec())];
    if stop(0.0, x0) || total == 0.0 {
        return Ok(out);
    }
    let mut t = 0.0;
    let mut x = x0.to_vec();
    let mut h = controls.max_step.min(total);
    while t < total {
        let step = h.min(total - t);
        let full = rk4_step(&mut f, &x, step)?;
        let half = rk4_step(&mut f, &x, 0.5 * step)?;
        let two = rk4_step(&mut f, &half, 0.5 * step)?;
        let err = two
            .iter()
            .zip(&full)
            .map(|(a, b)| (a - b).abs() / (controls.tol * (1.0 + a.abs())))
            .fold(0.0, |m, e| if e.is_nan() { f64::INFINITY } else { m.max(e) });
        if err <= 1.0 {
            t += step;
            x = two.iter().zip(&full).map(|(a, b)| a + (a - b) / 15.0).collect();
            out.push((sign * t, x.clone()));
            if stop(sign * t, &x) {
                break;
            }
        }
        let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.2, 4.0) } else { 0.2 };
        h = (step * factor).min(controls.max_step);
        if err > 1.0 && h < controls.min_step {
            return Err(FlowError::StepUnderflow { t: sign * t, h });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: Vec<f64>,
    pub norms: SplitNorms,
}

/// First sample with a factor norm beyond its radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitEvent {
    pub t: f64,
    pub factor: usize,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub exit: Option<ExitEvent>,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has its initial point")
    }
}

/// Flow line of the model from the flat vector `x0`.
pub fn integrate_trajectory(
    model: &FlowModel,
    chart: &FlatChart,
    x0: &[f64],
    config: &FlowConfig,
    duration: f64,
    controls: &IntegrationControls,
) -> Result<Trajectory, FlowError> {
    if x0.len() != chart.dim() {
        return Err(FlowError::StateMismatch { expected: chart.dim(), got: x0.len() });
    }
    let mut samples = Vec::new();
    let mut exit = None;
    let mut norm_err = None;
    let path = integrate_field(
        |x| model.flat_field(chart, x, config),
        x0,
        duration,
        controls,
        |t, x| match model.flat_norms(chart, x, config) {
            Ok(norms) => {
                samples.push(TrajectorySample { t, x: x.to_vec(), norms });
                if let Some(r) = controls.exit_radii {
                    let a = norms.as_array();
                    if let Some(i) = (0..4).find(|&i| a[i] > r[i]) {
                        exit = Some(ExitEvent { t, factor: i, norm: a[i] });
                        return true;
                    }
                }
                false
            }
            Err(e) => {
                norm_err = Some(e);
                true
            }
        },
    )?;
    if let Some(e) = norm_err {
        return Err(e);
    }
    debug_assert_eq!(path.len(), samples.len());
    Ok(Trajectory { samples, exit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let c = IntegrationControls { tol: 1e-11, ..Default::default() };
        let f = |x: &[f64]| Ok(vec![x[1], -x[0]]);
        let path = integrate_field(f, &[1.0, 0.0], 2.0, &c, |_, _| false).unwrap();
        let (t, x) = path.last().unwrap();
        assert_eq!(*t, 2.0);
        assert!((x[0] - 2f64.cos()).abs() < 1e-8 && (x[1] + 2f64.sin()).abs() < 1e-8);
        let back = integrate_field(f, x, -2.0, &c, |_, _| false).unwrap();
        let (_, y) = back.last().unwrap();
        assert!((y[0] - 1.0).abs() < 1e-8 && y[1].abs() < 1e-8);
        assert_eq!(integrate_field(f, &[1.0, 0.0], 0.0, &c, |_, _| false).unwrap(), vec![(0.0, vec![1.0, 0.0])]);
    }

    #[test]
    fn blow_up_and_stop() {
        let c = IntegrationControls { min_step: 1e-6, ..Default::default() };
        let f = |x: &[f64]| Ok(vec![x[0] * x[0]]);
        assert!(matches!(integrate_field(f, &[1.0], 2.0, &c, |_, _| false), Err(FlowError::StepUnderflow { .. })));
        let path = integrate_field(f, &[1.0], 2.0, &c, |_, x| x[0] > 2.0).unwrap();
        let (t, x) = path.last().unwrap();
        assert!(x[0] > 2.0 && *t < 1.0);
    }
}
