//! Static threshold detectors `‖ε_i(t)‖ > γ_i`.

use crate::error::{Error, Result};
use crate::lti::{dc_gain, SignalTrace, StateSpace};

/// Per-subsystem thresholds together with the attack amplitude they were
/// calibrated for.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    gamma: Vec<f64>,
    a_bar: f64,
}

impl DetectorConfig {
    pub fn new(gamma: Vec<f64>, a_bar: f64) -> Result<Self> {
        if let Some((i, g)) = gamma.iter().enumerate().find(|(_, g)| !(**g > 0.0 && g.is_finite())) {
            return Err(Error::Invalid(format!("threshold {i} must be positive, got {g}")));
        }
        Ok(Self { gamma, a_bar })
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }
    pub fn a_bar(&self) -> f64 {
        self.a_bar
    }
}

/// `‖G_{εa}(0) e_port‖₂`: the steady residual per unit step on one attack port.
pub fn dc_sensitivity(map: &StateSpace, port: usize) -> Result<f64> {
    if port >= map.ninputs() {
        return Err(Error::Dimension(format!("attack port {port} out of range ({})", map.ninputs())));
    }
    Ok(dc_gain(map)?.column(port).norm())
}

/// `γ = ā · ‖G_{εa}(0) e_port‖₂`. `map` should already be restricted to the
/// residual channels of the subsystem being calibrated.
pub fn calibrate_threshold(map: &StateSpace, port: usize, a_bar: f64) -> Result<f64> {
    Ok(a_bar.abs() * dc_sensitivity(map, port)?)
}

/// First sample index with `‖ε(t_k)‖₂ > γ` (strict).
pub fn first_crossing(eps: &SignalTrace, gamma: f64) -> Result<Option<usize>> {
    if !(gamma > 0.0) {
        return Err(Error::Invalid(format!("threshold must be positive, got {gamma}")));
    }
    Ok((0..eps.len()).find(|&k| eps.norm_at(k) > gamma))
}

/// Alarm time in seconds, or `None` if the threshold is never exceeded.
pub fn evaluate(eps: &SignalTrace, gamma: f64) -> Result<Option<f64>> {
    Ok(first_crossing(eps, gamma)?.map(|k| eps.time(k)))
}
