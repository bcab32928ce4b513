use alloc::format;
use alloc::vec::Vec;

use crate::error::{Result, SimError};

/// Scalar neuron and synapse constants shared by a whole network.
///
/// All time constants are in seconds. Decay factors are derived as
/// `1 - dt / tau` and must lie strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationParams {
    pub dt: f64,
    /// Output neuron membrane time constant.
    pub tau_m: f64,
    /// Synaptic time constant shared by every current variable.
    pub tau_c: f64,
    /// Controller membrane time constant.
    pub tau_u: f64,
    /// Output neuron threshold. Together with unit feedback weights it sets
    /// the loop gain of the controller, roughly `(tau_c/dt)^2 / (v_th * u_th)`.
    pub v_th: f64,
    /// Controller neuron threshold.
    pub u_th: f64,
    /// Clamp membrane voltages at zero from below.
    pub voltage_floor: bool,
}

impl Default for SimulationParams {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            tau_m: 10e-3,
            tau_c: 50e-3,
            tau_u: 5e-3,
            v_th: 250.0,
            u_th: 1.0,
            voltage_floor: false,
        }
    }
}

/// Soft violations that do not prevent simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamWarning {
    /// Controller membrane is not faster than the synapses, so controller
    /// resets are no longer negligible against the rate estimate.
    ControllerNotFasterThanSynapse,
}

impl SimulationParams {
    pub fn alpha(&self) -> f64 {
        decay(self.dt, self.tau_m)
    }

    pub fn beta(&self) -> f64 {
        decay(self.dt, self.tau_c)
    }

    pub fn gamma(&self) -> f64 {
        decay(self.dt, self.tau_u)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SimError::InvalidParams(format!("dt must be positive, got {}", self.dt)));
        }
        for (name, tau) in [("tau_m", self.tau_m), ("tau_c", self.tau_c), ("tau_u", self.tau_u)] {
            check_tau(name, tau, self.dt)?;
        }
        for (name, th) in [("v_th", self.v_th), ("u_th", self.u_th)] {
            check_threshold(name, th)?;
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<ParamWarning> {
        let mut out = Vec::new();
        if self.tau_u >= self.tau_c {
            out.push(ParamWarning::ControllerNotFasterThanSynapse);
        }
        out
    }
}

pub(crate) fn decay(dt: f64, tau: f64) -> f64 {
    1.0 - dt / tau
}

pub(crate) fn check_tau(name: &str, tau: f64, dt: f64) -> Result<()> {
    if !(tau.is_finite() && tau > dt) {
        return Err(SimError::InvalidParams(format!(
            "{name} = {tau} must exceed dt = {dt}"
        )));
    }
    Ok(())
}

pub(crate) fn check_threshold(name: &str, th: f64) -> Result<()> {
    if !(th.is_finite() && th > 0.0) {
        return Err(SimError::InvalidParams(format!("{name} must be positive, got {th}")));
    }
    Ok(())
}
