//! Trial simulation, losses, the local learning rule and the training loops.
//!
//! Learning-rate units: `eta` multiplies the feedback current and the
//! presynaptic rate in Hz, so a presynaptic spike contributes `s / dt`.
//! Online learning applies `eta * i_fb / dt` at every presynaptic spike.
//! Offline learning averages those per-spike increments over the trial's
//! timesteps and then over the batch, i.e. it applies the rate form
//! `eta * mean_t(i_fb * r_in)` once per batch.

mod baseline;
pub mod metrics;
mod rule;
mod trial;

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use baseline::{baseline_linear_readout, LinearReadout, ReadoutConfig};
pub use metrics::{argmax, class_scores, cross_entropy, readout_rates, softmax, target_error};
pub use rule::{apply_local_update, local_weight_update};
pub use trial::{run_trial, Plasticity, TrialOptions, TrialRecord};

use crate::encoding::{ClassTargets, Dataset, LabeledSample};
use crate::error::{Result, SimError};
use crate::matrix::Matrix;
use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Offline,
    Online,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateCadence {
    /// Weights change at every presynaptic spike.
    PerSpikeOnline,
    /// Per-sample increments are averaged over the batch and applied once.
    PerBatchOffline,
    /// Offline ablation: each sample's averaged increment is applied as soon
    /// as its trial ends.
    PerSampleOffline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: Mode,
    pub cadence: UpdateCadence,
    pub epochs: usize,
    pub batch_size: usize,
    pub eta: f64,
    pub seed: u64,
    pub weight_clamp: Option<(f64, f64)>,
    /// Draw new Poisson rasters for every training trial instead of reusing
    /// the rasters frozen at dataset creation.
    pub redraw_rasters: bool,
    /// Online: samples per metrics window.
    pub window: usize,
    /// Online: validation samples evaluated at the end of every window.
    /// Zero means the whole validation split.
    pub online_val_samples: usize,
}

impl TrainConfig {
    pub fn offline(epochs: usize, batch_size: usize, eta: f64, seed: u64) -> Self {
        Self {
            mode: Mode::Offline,
            cadence: UpdateCadence::PerBatchOffline,
            epochs,
            batch_size,
            eta,
            seed,
            weight_clamp: None,
            redraw_rasters: false,
            window: 0,
            online_val_samples: 0,
        }
    }

    pub fn online(eta: f64, window: usize, seed: u64) -> Self {
        Self {
            mode: Mode::Online,
            cadence: UpdateCadence::PerSpikeOnline,
            epochs: 1,
            batch_size: 1,
            eta,
            seed,
            weight_clamp: None,
            redraw_rasters: false,
            window,
            online_val_samples: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(SimError::InvalidParams("eta must be finite and non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(SimError::InvalidParams("batch_size must be at least 1".into()));
        }
        if let Some((lo, hi)) = self.weight_clamp {
            if !(lo <= hi) {
                return Err(SimError::InvalidParams("weight clamp needs lo <= hi".into()));
            }
        }
        match self.mode {
            Mode::Online => {
                if self.batch_size != 1 {
                    return Err(SimError::InvalidParams("online mode needs batch_size = 1".into()));
                }
                if self.cadence != UpdateCadence::PerSpikeOnline {
                    return Err(SimError::InvalidParams("online mode updates per spike".into()));
                }
                if self.window == 0 {
                    return Err(SimError::InvalidParams("online window must be at least 1".into()));
                }
            }
            Mode::Offline => {
                if self.cadence == UpdateCadence::PerSpikeOnline {
                    return Err(SimError::InvalidParams("offline mode updates per batch or sample".into()));
                }
            }
        }
        Ok(())
    }
}

/// One row of training metrics: an epoch offline, a window online.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub index: usize,
    /// Training samples processed so far.
    pub samples_seen: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Mean absolute rate error on validation, spikes per step.
    pub target_error: f64,
    pub accuracy: f64,
    /// Mean logical output rate (Hz) per class, indexed `[class][neuron]`.
    pub class_rates_hz: Vec<Vec<f64>>,
}

/// Control-off evaluation over a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub loss: f64,
    pub target_error: f64,
    pub accuracy: f64,
    pub class_rates_hz: Vec<Vec<f64>>,
    pub predictions: Vec<usize>,
}

/// Runs every sample from a reset state with control off and weights frozen.
pub fn evaluate(net: &Network, samples: &[LabeledSample], targets: &ClassTargets) -> Result<EvalSummary> {
    let mut net = net.clone();
    let opts = TrialOptions::eval(targets);
    let n_classes = targets.n_classes();
    let units = net.logical_outputs();
    let mut loss = 0.0;
    let mut err = 0.0;
    let mut correct = 0usize;
    let mut rate_sums = vec![vec![0.0; units]; n_classes];
    let mut class_counts = vec![0usize; n_classes];
    let mut predictions = Vec::with_capacity(samples.len());
    for s in samples {
        let mut state = net.fresh_state();
        let rec = run_trial(s, &mut net, &opts, &mut state)?;
        let dt = s.input.dt();
        loss += rec.loss(s.label);
        err += sample_target_error(&rec, s)?;
        let pred = rec.predicted_class();
        correct += (pred == s.label) as usize;
        predictions.push(pred);
        if s.label < n_classes {
            class_counts[s.label] += 1;
            for (acc, r) in rate_sums[s.label].iter_mut().zip(&rec.output_rates) {
                *acc += r / dt;
            }
        }
    }
    let count = samples.len().max(1) as f64;
    for (sums, &c) in rate_sums.iter_mut().zip(&class_counts) {
        sums.iter_mut().for_each(|x| *x /= c.max(1) as f64);
    }
    Ok(EvalSummary {
        loss: loss / count,
        target_error: err / count,
        accuracy: correct as f64 / count,
        class_rates_hz: rate_sums,
        predictions,
    })
}

fn sample_target_error(rec: &TrialRecord, s: &LabeledSample) -> Result<f64> {
    let dt = s.input.dt();
    let trg: Vec<f64> = s.target_rates.iter().map(|r| r * dt).collect();
    target_error(&rec.output_rates, &trg)
}

fn shuffle_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn redraw_seed(seed: u64, epoch: usize, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((epoch as u64) << 32) ^ index as u64
}

/// Mini-batch training with fresh state for every trial. Weights are frozen
/// within a batch; the batch-mean increment is applied after it.
pub fn train_offline(data: &Dataset, cfg: &TrainConfig, net: &mut Network) -> Result<Vec<MetricsRow>> {
    train_offline_with(data, cfg, net, |_| {})
}

/// [`train_offline`] calling `on_row` as soon as each epoch's row exists.
pub fn train_offline_with(
    data: &Dataset,
    cfg: &TrainConfig,
    net: &mut Network,
    mut on_row: impl FnMut(&MetricsRow),
) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    if cfg.mode != Mode::Offline {
        return Err(SimError::InvalidParams("train_offline needs offline mode".into()));
    }
    if data.train.is_empty() {
        return Err(SimError::InvalidParams("empty training set".into()));
    }
    let mut rows = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut seen = 0usize;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng(cfg.seed, epoch as u64));
        let mut train_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut sum = Matrix::zeros(net.physical_outputs(), net.inputs());
            for &idx in batch {
                let redrawn;
                let sample = if cfg.redraw_rasters {
                    redrawn = data.train[idx].redraw(redraw_seed(cfg.seed, epoch, idx))?;
                    &redrawn
                } else {
                    &data.train[idx]
                };
                let dt = sample.input.dt();
                let coef = cfg.eta / (dt * sample.steps() as f64);
                let mut opts = TrialOptions::train(&data.targets, Plasticity::Accumulate { coef });
                opts.weight_clamp = cfg.weight_clamp;
                let mut state = net.fresh_state();
                let rec = run_trial(sample, net, &opts, &mut state)?;
                train_loss += rec.loss(sample.label);
                let delta = rec.weight_delta.expect("accumulating trial returns a delta");
                match cfg.cadence {
                    UpdateCadence::PerSampleOffline => apply_delta(net, &delta, 1.0, cfg.weight_clamp)?,
                    _ => sum.add_scaled(&delta, 1.0)?,
                }
            }
            if cfg.cadence == UpdateCadence::PerBatchOffline {
                apply_delta(net, &sum, 1.0 / batch.len() as f64, cfg.weight_clamp)?;
            }
            seen += batch.len();
        }
        let val = evaluate(net, &data.val, &data.targets)?;
        let row = MetricsRow {
            index: epoch,
            samples_seen: seen,
            train_loss: train_loss / data.train.len() as f64,
            val_loss: val.loss,
            target_error: val.target_error,
            accuracy: val.accuracy,
            class_rates_hz: val.class_rates_hz,
        };
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}

fn apply_delta(net: &mut Network, delta: &Matrix, scale: f64, clamp: Option<(f64, f64)>) -> Result<()> {
    net.weights.w.add_scaled(delta, scale)?;
    if let Some((lo, hi)) = clamp {
        trial::clamp(&mut net.weights.w, lo, hi);
    }
    if !net.weights.w.is_finite() {
        return Err(SimError::Divergence { what: "feedforward weights" });
    }
    Ok(())
}

/// Samples drawn uniformly with replacement from `pool`.
pub fn random_stream(pool_len: usize, count: usize, seed: u64) -> Vec<usize> {
    use rand::Rng;
    let mut rng = shuffle_rng(seed, u64::MAX);
    (0..count).map(|_| rng.random_range(0..pool_len)).collect()
}

/// Single-phase learning over a stream of samples. State carries over from
/// one sample to the next and weights change at every presynaptic spike.
/// Metrics are emitted once per `cfg.window` samples.
pub fn train_online<'a, I>(
    stream: I,
    val: &[LabeledSample],
    targets: &ClassTargets,
    cfg: &TrainConfig,
    net: &mut Network,
) -> Result<Vec<MetricsRow>>
where
    I: IntoIterator<Item = &'a LabeledSample>,
{
    train_online_with(stream, val, targets, cfg, net, |_| {})
}

pub fn train_online_with<'a, I>(
    stream: I,
    val: &[LabeledSample],
    targets: &ClassTargets,
    cfg: &TrainConfig,
    net: &mut Network,
    mut on_row: impl FnMut(&MetricsRow),
) -> Result<Vec<MetricsRow>>
where
    I: IntoIterator<Item = &'a LabeledSample>,
{
    cfg.validate()?;
    if cfg.mode != Mode::Online {
        return Err(SimError::InvalidParams("train_online needs online mode".into()));
    }
    let val = match cfg.online_val_samples {
        0 => val,
        k => &val[..k.min(val.len())],
    };
    let mut state = net.fresh_state();
    let mut rows = Vec::new();
    let mut window_loss = 0.0;
    let mut in_window = 0usize;
    let mut seen = 0usize;
    for (i, sample) in stream.into_iter().enumerate() {
        let redrawn;
        let sample = if cfg.redraw_rasters {
            redrawn = sample.redraw(redraw_seed(cfg.seed, 0, i))?;
            &redrawn
        } else {
            sample
        };
        let coef = cfg.eta / sample.input.dt();
        let mut opts = TrialOptions::train(targets, Plasticity::Immediate { coef });
        opts.weight_clamp = cfg.weight_clamp;
        let rec = run_trial(sample, net, &opts, &mut state)?;
        window_loss += rec.loss(sample.label);
        in_window += 1;
        seen += 1;
        if in_window == cfg.window {
            let ev = evaluate(net, val, targets)?;
            let row = MetricsRow {
                index: rows.len() + 1,
                samples_seen: seen,
                train_loss: window_loss / in_window as f64,
                val_loss: ev.loss,
                target_error: ev.target_error,
                accuracy: ev.accuracy,
                class_rates_hz: ev.class_rates_hz,
            };
            on_row(&row);
            rows.push(row);
            window_loss = 0.0;
            in_window = 0;
        }
    }
    Ok(rows)
}
