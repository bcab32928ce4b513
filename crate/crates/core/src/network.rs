use alloc::vec::Vec;

use crate::dynamics::{ControllerState, NeuronConstants, OutputLayerState, WeightSet};
use crate::error::{check_len, Result, SimError};
use crate::params::SimulationParams;

/// A single-layer network with its controller module.
///
/// Physical output neurons and controller pairs are grouped into logical
/// units of `population` members each; member `k` belongs to unit
/// `k / population`. With `population == 1` the network is the plain
/// one-controller-pair-per-output architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub weights: WeightSet,
    pub consts: NeuronConstants,
    population: usize,
}

impl Network {
    pub fn new(weights: WeightSet, params: &SimulationParams) -> Result<Self> {
        params.validate()?;
        let n = weights.n();
        let consts = NeuronConstants::uniform(params, n, n);
        Self::from_parts(weights, consts, 1)
    }

    pub fn from_parts(weights: WeightSet, consts: NeuronConstants, population: usize) -> Result<Self> {
        let n = weights.n();
        if population == 0 || n % population != 0 {
            return Err(SimError::InvalidParams(alloc::format!(
                "population size {population} does not divide {n} outputs"
            )));
        }
        check_len("output constants", n, consts.n_out())?;
        check_len("controller constants", n, consts.n_ctrl())?;
        Ok(Self {
            weights,
            consts,
            population,
        })
    }

    pub fn population(&self) -> usize {
        self.population
    }

    pub fn physical_outputs(&self) -> usize {
        self.weights.n()
    }

    pub fn logical_outputs(&self) -> usize {
        self.weights.n() / self.population
    }

    pub fn inputs(&self) -> usize {
        self.weights.m()
    }

    #[inline]
    pub fn unit_of(&self, k: usize) -> usize {
        k / self.population
    }

    pub fn fresh_state(&self) -> NetworkState {
        NetworkState {
            output: OutputLayerState::zeros(self.physical_outputs()),
            controller: ControllerState::zeros(self.physical_outputs()),
        }
    }

    /// Feedforward weights of one member per logical unit.
    pub fn logical_weights(&self) -> Vec<Vec<f64>> {
        (0..self.logical_outputs())
            .map(|u| self.weights.w.row(u * self.population).to_vec())
            .collect()
    }
}

/// Dynamic state of output layer and controller, carried across samples in
/// online learning.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub output: OutputLayerState,
    pub controller: ControllerState,
}
