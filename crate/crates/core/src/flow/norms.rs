use serde::{Deserialize, Serialize};

use super::{FlowConfig, FlowError, FlowModel, FlowState};

/// `|phi+|_{k+}`, `|phi-|_{k-}`, `|omega+|_{k+}`, `|omega-|_{k-}`, split by the
/// sign of the `D'` (resp. `*d`) eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SplitNorms {
    pub phi_plus: f64,
    pub phi_minus: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
}

impl SplitNorms {
    /// The `L^2_{k+,k-}` norm of `(phi, omega)`.
    pub fn mixed(&self) -> f64 {
        (self.phi_plus.powi(2) + self.phi_minus.powi(2) + self.omega_plus.powi(2) + self.omega_minus.powi(2)).sqrt()
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.phi_plus, self.phi_minus, self.omega_plus, self.omega_minus]
    }
}

/// Split norms from `(|coefficient|, eigenvalue)` pairs.
pub(crate) fn norm_parts(
    spinor: impl Iterator<Item = (f64, f64)>,
    forms: impl Iterator<Item = (f64, f64)>,
    k_plus: f64,
    k_minus: f64,
) -> SplitNorms {
    let mut s = [0.0; 4];
    for (offset, it) in [(0, Box::new(spinor) as Box<dyn Iterator<Item = (f64, f64)>>), (2, Box::new(forms))] {
        for (c, eta) in it {
            let (slot, k) = if eta > 0.0 { (offset, k_plus) } else { (offset + 1, k_minus) };
            s[slot] += (c * eta.abs().powf(k)).powi(2);
        }
    }
    SplitNorms { phi_plus: s[0].sqrt(), phi_minus: s[1].sqrt(), omega_plus: s[2].sqrt(), omega_minus: s[3].sqrt() }
}

/// A band `(lo, hi]` of eigenvalues weighted by `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightBand {
    pub lo: f64,
    pub hi: f64,
    pub eps: f64,
}

/// Weight `w` equal to `eps` on each band and 1 elsewhere, with exponent `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub k: f64,
    pub bands: Vec<WeightBand>,
}

impl WeightSpec {
    pub fn weight(&self, eta: f64) -> f64 {
        self.bands.iter().find(|b| eta > b.lo && eta <= b.hi).map_or(1.0, |b| b.eps)
    }
}

/// `(sum |c_j|^2 |eta_j|^{2k} w(eta_j)^2)^{1/2}` over `(|c_j|, eta_j)`.
pub fn weighted_norm_of(coeffs: &[(f64, f64)], spec: &WeightSpec) -> f64 {
    coeffs
        .iter()
        .map(|&(c, eta)| (c * eta.abs().powf(spec.k) * spec.weight(eta)).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Weighted norm of the spinor part of `state`, using `D'` eigenvalues.
pub fn weighted_norm(model: &FlowModel, state: &FlowState, spec: &WeightSpec) -> Result<f64, FlowError> {
    let fiber = model.fiber(&state.a.coords)?;
    if fiber.len() != state.phi.len() {
        return Err(FlowError::StateMismatch { expected: fiber.len(), got: state.phi.len() });
    }
    let pairs: Vec<(f64, f64)> = fiber.iter().zip(&state.phi).map(|(m, c)| (c.norm(), m.dprime)).collect();
    Ok(weighted_norm_of(&pairs, spec))
}

impl FlowModel {
    pub fn split_norms(&self, state: &FlowState, config: &FlowConfig) -> Result<SplitNorms, FlowError> {
        let fiber = self.fiber(&state.a.coords)?;
        if fiber.len() != state.phi.len() {
            return Err(FlowError::StateMismatch { expected: fiber.len(), got: state.phi.len() });
        }
        let spinor = fiber.iter().zip(&state.phi).map(|(m, c)| (c.norm(), m.dprime));
        let forms = self.forms.iter().zip(&state.omega).map(|(m, w)| (w.abs(), m.eigenvalue));
        Ok(norm_parts(spinor, forms, config.k_plus, config.k_minus))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_norms() {
        let n = norm_parts([(1.0, 3.0)].into_iter(), std::iter::empty(), 5.5, 5.5);
        assert!((n.phi_plus - 3f64.powf(5.5)).abs() < 1e-9);
        assert_eq!(n.phi_minus, 0.0);
        let n = norm_parts([(1.0, 2.0), (2.0, -3.0)].into_iter(), [(1.0, -1.0)].into_iter(), 5.5, 6.0);
        let want = (2f64.powf(11.0) + 4.0 * 3f64.powf(12.0) + 1.0).sqrt();
        assert!((n.mixed() - want).abs() < 1e-9 * want);
    }

    #[test]
    fn weights() {
        let flat = WeightSpec { k: 2.0, bands: vec![] };
        let pairs = [(1.0, 2.0), (0.5, -3.0)];
        assert!((weighted_norm_of(&pairs, &flat) - (16.0f64 + 0.25 * 81.0).sqrt()).abs() < 1e-12);
        for n in 1..5 {
            let spec = WeightSpec { k: 2.0, bands: vec![WeightBand { lo: 1.0, hi: 3.0, eps: 1.0 / n as f64 }] };
            let w = weighted_norm_of(&[(1.0, 2.0)], &spec);
            assert!((w - 4.0 / n as f64).abs() < 1e-12);
            assert!(weighted_norm_of(&pairs, &spec) <= weighted_norm_of(&pairs, &flat));
        }
    }
}
