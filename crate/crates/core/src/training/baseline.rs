//! Softmax regression on the empirical input rates of each sample.

use alloc::vec;
use alloc::vec::Vec;

use super::metrics::{argmax, softmax};
use crate::encoding::LabeledSample;
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    /// Input rates are divided by this before fitting (Hz).
    pub rate_scale: f64,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            learning_rate: 0.5,
            rate_scale: 100.0,
        }
    }
}

/// Class weights with a trailing bias column, `[class][feature + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearReadout {
    pub weights: Vec<Vec<f64>>,
    pub rate_scale: f64,
}

impl LinearReadout {
    pub fn fit(samples: &[LabeledSample], n_classes: usize, cfg: &ReadoutConfig) -> Result<Self> {
        if samples.is_empty() || n_classes == 0 {
            return Err(SimError::InvalidParams("readout needs samples and classes".into()));
        }
        let xs: Vec<Vec<f64>> = samples.iter().map(|s| features(s, cfg.rate_scale)).collect();
        let d = xs[0].len();
        let mut w = vec![vec![0.0; d]; n_classes];
        let inv = 1.0 / samples.len() as f64;
        for _ in 0..cfg.iterations {
            let mut grad = vec![vec![0.0; d]; n_classes];
            for (x, s) in xs.iter().zip(samples) {
                let p = softmax(&logits(&w, x));
                for (c, g) in grad.iter_mut().enumerate() {
                    let e = p[c] - (c == s.label) as u8 as f64;
                    g.iter_mut().zip(x).for_each(|(gi, xi)| *gi += e * xi);
                }
            }
            for (wc, gc) in w.iter_mut().zip(&grad) {
                wc.iter_mut().zip(gc).for_each(|(wi, gi)| *wi -= cfg.learning_rate * gi * inv);
            }
        }
        Ok(Self {
            weights: w,
            rate_scale: cfg.rate_scale,
        })
    }

    pub fn predict(&self, sample: &LabeledSample) -> usize {
        argmax(&logits(&self.weights, &features(sample, self.rate_scale)))
    }

    pub fn accuracy(&self, samples: &[LabeledSample]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let hits = samples.iter().filter(|s| self.predict(s) == s.label).count();
        hits as f64 / samples.len() as f64
    }
}

fn features(s: &LabeledSample, scale: f64) -> Vec<f64> {
    let mut f: Vec<f64> = s.input.rates_hz().into_iter().map(|r| r / scale).collect();
    f.push(1.0);
    f
}

fn logits(w: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    w.iter().map(|wc| wc.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// Fits on `train` and returns accuracy on `test`.
pub fn baseline_linear_readout(
    train: &[LabeledSample],
    test: &[LabeledSample],
    n_classes: usize,
    cfg: &ReadoutConfig,
) -> Result<f64> {
    Ok(LinearReadout::fit(train, n_classes, cfg)?.accuracy(test))
}
