//! Device mismatch and population coding.
//!
//! Mismatch scales every neuron parameter independently as
//! `theta * (1 + cv * z)` with `z ~ N(0, 1)`. Draws that would leave a time
//! constant at or below `dt`, or a threshold at or below zero, are redrawn.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::{ControllerConstants, NeuronConstants, OutputConstants, WeightSet};
use crate::error::{Result, SimError};
use crate::matrix::Matrix;
use crate::network::Network;
use crate::params::{decay, SimulationParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchSpec {
    /// Coefficient of variation applied to every parameter.
    pub cv: f64,
    /// Redraws allowed per parameter before giving up.
    pub max_attempts: usize,
}

impl MismatchSpec {
    pub fn new(cv: f64) -> Self {
        Self { cv, max_attempts: 100 }
    }
}

/// Per-neuron parameters of a network, before conversion to decay factors.
#[derive(Debug, Clone, PartialEq)]
pub struct PerNeuronParams {
    pub dt: f64,
    pub voltage_floor: bool,
    pub tau_m: Vec<f64>,
    pub tau_c: Vec<f64>,
    pub v_th: Vec<f64>,
    /// Estimator synapse time constant of each controller pair.
    pub ctrl_tau_c: Vec<f64>,
    pub tau_u_p: Vec<f64>,
    pub tau_u_n: Vec<f64>,
    pub u_th_p: Vec<f64>,
    pub u_th_n: Vec<f64>,
}

impl PerNeuronParams {
    pub fn uniform(p: &SimulationParams, n_out: usize, n_ctrl: usize) -> Self {
        Self {
            dt: p.dt,
            voltage_floor: p.voltage_floor,
            tau_m: alloc::vec![p.tau_m; n_out],
            tau_c: alloc::vec![p.tau_c; n_out],
            v_th: alloc::vec![p.v_th; n_out],
            ctrl_tau_c: alloc::vec![p.tau_c; n_ctrl],
            tau_u_p: alloc::vec![p.tau_u; n_ctrl],
            tau_u_n: alloc::vec![p.tau_u; n_ctrl],
            u_th_p: alloc::vec![p.u_th; n_ctrl],
            u_th_n: alloc::vec![p.u_th; n_ctrl],
        }
    }

    pub fn constants(&self) -> NeuronConstants {
        let d = |v: &[f64]| v.iter().map(|&tau| decay(self.dt, tau)).collect::<Vec<_>>();
        NeuronConstants {
            output: OutputConstants {
                alpha: d(&self.tau_m),
                beta: d(&self.tau_c),
                v_th: self.v_th.clone(),
                floor: self.voltage_floor,
            },
            controller: ControllerConstants {
                beta: d(&self.ctrl_tau_c),
                gamma_p: d(&self.tau_u_p),
                gamma_n: d(&self.tau_u_n),
                u_th_p: self.u_th_p.clone(),
                u_th_n: self.u_th_n.clone(),
                floor: self.voltage_floor,
            },
        }
    }

    /// Named parameter vectors, in a fixed order.
    pub fn fields(&self) -> [(&'static str, &[f64]); 8] {
        [
            ("tau_m", &self.tau_m),
            ("tau_c", &self.tau_c),
            ("v_th", &self.v_th),
            ("ctrl_tau_c", &self.ctrl_tau_c),
            ("tau_u_p", &self.tau_u_p),
            ("tau_u_n", &self.tau_u_n),
            ("u_th_p", &self.u_th_p),
            ("u_th_n", &self.u_th_n),
        ]
    }
}

/// Draws one mismatch realization for `n_out` output neurons and `n_ctrl`
/// controller pairs.
pub fn apply_mismatch(
    base: &SimulationParams,
    n_out: usize,
    n_ctrl: usize,
    spec: &MismatchSpec,
    seed: u64,
) -> Result<PerNeuronParams> {
    base.validate()?;
    if !(spec.cv.is_finite() && spec.cv >= 0.0) {
        return Err(SimError::InvalidParams("cv must be finite and non-negative".into()));
    }
    let mut out = PerNeuronParams::uniform(base, n_out, n_ctrl);
    if spec.cv == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = base.dt;
    let mut perturb = |param: &'static str, xs: &mut [f64], min: f64| -> Result<()> {
        for x in xs.iter_mut() {
            let theta = *x;
            let mut attempts = 0;
            loop {
                if attempts == spec.max_attempts {
                    return Err(SimError::MismatchRejected { param, attempts });
                }
                attempts += 1;
                let z: f64 = StandardNormal.sample(&mut rng);
                let v = theta * (1.0 + spec.cv * z);
                if v > min {
                    *x = v;
                    break;
                }
            }
        }
        Ok(())
    };
    perturb("tau_m", &mut out.tau_m, dt)?;
    perturb("tau_c", &mut out.tau_c, dt)?;
    perturb("v_th", &mut out.v_th, 0.0)?;
    perturb("ctrl_tau_c", &mut out.ctrl_tau_c, dt)?;
    perturb("tau_u_p", &mut out.tau_u_p, dt)?;
    perturb("tau_u_n", &mut out.tau_u_n, dt)?;
    perturb("u_th_p", &mut out.u_th_p, 0.0)?;
    perturb("u_th_n", &mut out.u_th_n, 0.0)?;
    Ok(out)
}

/// Replicates each logical output `p` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PopulationSpec {
    pub p: usize,
}

/// Physical weights for a population of `p` members per logical unit.
///
/// Feedforward rows are copied to every member. Every controller of a unit
/// projects to every member of that unit with weight `±gain / p`, so the
/// total feedback each member receives matches the `p = 1` network when all
/// controllers of a unit agree.
pub fn expand_population(w: &Matrix, spec: PopulationSpec, gain: f64) -> Result<WeightSet> {
    let p = spec.p;
    if p == 0 {
        return Err(SimError::InvalidParams("population size must be at least 1".into()));
    }
    let (n, m) = w.shape();
    let np = n * p;
    let w_phys = Matrix::from_fn(np, m, |i, j| w.get(i / p, j));
    let g = gain / p as f64;
    let q_p = Matrix::from_fn(np, np, |i, j| if i / p == j / p { g } else { 0.0 });
    let q_n = Matrix::from_fn(np, np, |i, j| if i / p == j / p { -g } else { 0.0 });
    WeightSet::new(w_phys, q_p, q_n)
}

/// Group means of consecutive blocks of `p` physical values.
pub fn aggregate_population_output(values: &[f64], p: usize) -> Result<Vec<f64>> {
    if p == 0 || values.len() % p != 0 {
        return Err(SimError::InvalidParams("population size must divide the output count".into()));
    }
    Ok(values
        .chunks(p)
        .map(|g| g.iter().sum::<f64>() / p as f64)
        .collect())
}

/// A network whose logical weights are `w`, with `p` members per unit and
/// optional per-neuron parameters. Returns the realization used.
pub fn build_network(
    w: &Matrix,
    params: &SimulationParams,
    gain: f64,
    population: PopulationSpec,
    mismatch: Option<(&MismatchSpec, u64)>,
) -> Result<(Network, PerNeuronParams)> {
    let weights = expand_population(w, population, gain)?;
    let n = weights.n();
    let per = match mismatch {
        Some((spec, seed)) => apply_mismatch(params, n, n, spec, seed)?,
        None => {
            params.validate()?;
            PerNeuronParams::uniform(params, n, n)
        }
    };
    let net = Network::from_parts(weights, per.constants(), population.p)?;
    Ok((net, per))
}
