//! Readout, losses and classification scores.

use alloc::vec::Vec;

use crate::encoding::{ClassTargets, Decode};
use crate::error::{check_len, Result, SimError};
use crate::raster::SpikeRaster;

/// Mean spikes per step of every row.
pub fn readout_rates(spikes: &SpikeRaster) -> Result<Vec<f64>> {
    if spikes.steps() == 0 {
        return Err(SimError::Dimension {
            what: "raster steps",
            expected: 1,
            found: 0,
        });
    }
    Ok(spikes.rates_per_step())
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[label]`, computed through log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + libm::log(logits.iter().map(|&z| libm::exp(z - max)).sum::<f64>());
    lse - logits[label]
}

/// Mean absolute difference over neurons. Both vectors in the same units.
pub fn target_error(output_rates: &[f64], target_rates: &[f64]) -> Result<f64> {
    check_len("target rates", output_rates.len(), target_rates.len())?;
    if output_rates.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = output_rates
        .iter()
        .zip(target_rates)
        .map(|(o, t)| libm::fabs(t - o))
        .sum();
    Ok(sum / output_rates.len() as f64)
}

/// Class logits from output rates given in spikes per step.
pub fn class_scores(rates_per_step: &[f64], targets: &ClassTargets, dt: f64) -> Vec<f64> {
    match targets.decode {
        Decode::Softmax => rates_per_step.iter().map(|r| r / dt).collect(),
        Decode::NearestTarget => targets
            .rates_hz
            .iter()
            .map(|t| {
                -rates_per_step
                    .iter()
                    .zip(t)
                    .map(|(r, th)| libm::fabs(r / dt - th))
                    .sum::<f64>()
            })
            .collect(),
    }
}

/// Index of the largest score; the lowest index wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}
