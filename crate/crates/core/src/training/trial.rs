use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::metrics::{argmax, class_scores, cross_entropy, softmax};
use super::rule::apply_local_update;
use crate::dynamics::spike;
use crate::encoding::{ClassTargets, LabeledSample};
use crate::error::{check_len, Result, SimError};
use crate::matrix::Matrix;
use crate::network::{Network, NetworkState};
use crate::raster::SpikeRaster;

/// What happens to the feedforward weights during a trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Plasticity {
    Frozen,
    /// Update the network weights at every presynaptic spike, with the given
    /// per-spike coefficient.
    Immediate { coef: f64 },
    /// Keep weights fixed and sum the per-spike updates into
    /// [`TrialRecord::weight_delta`].
    Accumulate { coef: f64 },
}

impl Plasticity {
    pub fn learns(&self) -> bool {
        !matches!(self, Plasticity::Frozen)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrialOptions<'a> {
    pub control_active: bool,
    pub plasticity: Plasticity,
    pub targets: &'a ClassTargets,
    pub record_spikes: bool,
    pub weight_clamp: Option<(f64, f64)>,
}

impl<'a> TrialOptions<'a> {
    /// Control off, no learning.
    pub fn eval(targets: &'a ClassTargets) -> Self {
        Self {
            control_active: false,
            plasticity: Plasticity::Frozen,
            targets,
            record_spikes: false,
            weight_clamp: None,
        }
    }

    /// Control on with the given plasticity.
    pub fn train(targets: &'a ClassTargets, plasticity: Plasticity) -> Self {
        Self {
            control_active: true,
            plasticity,
            targets,
            record_spikes: false,
            weight_clamp: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    /// Logical output rates in spikes per step.
    pub output_rates: Vec<f64>,
    /// Class logits the prediction is formed from.
    pub scores: Vec<f64>,
    /// Softmax over `scores`.
    pub prediction: Vec<f64>,
    /// Spike counts of every physical output neuron.
    pub spike_counts: Vec<usize>,
    /// Sum over steps and neurons of `|i_fb|`.
    pub feedback_energy: f64,
    /// Spikes emitted by positive and negative controllers.
    pub controller_spikes: (usize, usize),
    pub weight_delta: Option<Matrix>,
    pub output_spikes: Option<SpikeRaster>,
}

impl TrialRecord {
    pub fn loss(&self, label: usize) -> f64 {
        cross_entropy(&self.scores, label)
    }

    pub fn predicted_class(&self) -> usize {
        argmax(&self.scores)
    }
}

/// Simulates one sample for its full length.
///
/// `state` is read as the initial condition and left holding the final
/// state, so callers choose between resetting and carrying it over.
pub fn run_trial(
    sample: &LabeledSample,
    net: &mut Network,
    opts: &TrialOptions<'_>,
    state: &mut NetworkState,
) -> Result<TrialRecord> {
    let n = net.physical_outputs();
    let m = net.inputs();
    let p = net.population();
    let units = net.logical_outputs();
    let steps = sample.steps();
    check_len("sample inputs", m, sample.input.rows())?;
    check_len("sample targets", units, sample.target.rows())?;
    check_len("state size", n, state.output.len())?;
    check_len("controller size", n, state.controller.len())?;
    check_len("target steps", steps, sample.target.steps())?;
    if opts.plasticity.learns() && !opts.control_active {
        return Err(SimError::InvalidParams(
            "learning needs the controller active".into(),
        ));
    }
    if steps == 0 {
        return Err(SimError::Dimension {
            what: "sample steps",
            expected: 1,
            found: 0,
        });
    }

    let mut s_in = vec![false; m];
    let mut s_trg = vec![false; units];
    let mut fb_eff = vec![0.0; n];
    let mut counts = vec![0usize; n];
    let mut ctrl_spikes = (0usize, 0usize);
    let mut energy = 0.0;
    let mut delta = match opts.plasticity {
        Plasticity::Accumulate { .. } => Some(Matrix::zeros(n, m)),
        _ => None,
    };
    let mut raster = opts
        .record_spikes
        .then(|| SpikeRaster::zeros(n, steps, sample.input.dt()));
    let inv_p = 1.0 / p as f64;

    for t in 0..steps {
        let at = |e: SimError| SimError::TrialDiverged {
            step: t,
            source: Box::new(e),
        };
        sample.input.column_into(t, &mut s_in);

        let NetworkState { output, controller } = &mut *state;
        output
            .step(
                &net.weights,
                &s_in,
                &controller.s_p,
                &controller.s_n,
                &net.consts.output,
                opts.control_active,
            )
            .map_err(at)?;

        for (k, &s) in output.s.iter().enumerate() {
            if s {
                counts[k] += 1;
                if let Some(r) = raster.as_mut() {
                    r.set(k, t, true);
                }
            }
        }
        energy += output.i_fb.iter().map(|x| libm::fabs(*x)).sum::<f64>();

        if opts.control_active {
            sample.target.column_into(t, &mut s_trg);
            let out_s = &output.s;
            let drive_out = |k: usize| {
                if p == 1 {
                    spike(out_s[k])
                } else {
                    let u = k / p;
                    out_s[u * p..(u + 1) * p].iter().filter(|&&s| s).count() as f64 * inv_p
                }
            };
            controller
                .step_with(drive_out, |k| spike(s_trg[k / p]), &net.consts.controller)
                .map_err(at)?;
            ctrl_spikes.0 += controller.s_p.iter().filter(|&&s| s).count();
            ctrl_spikes.1 += controller.s_n.iter().filter(|&&s| s).count();
        }

        if opts.plasticity.learns() && s_in.iter().any(|&s| s) {
            if p == 1 {
                fb_eff.copy_from_slice(&output.i_fb);
            } else {
                for u in 0..units {
                    let mean = output.i_fb[u * p..(u + 1) * p].iter().sum::<f64>() * inv_p;
                    fb_eff[u * p..(u + 1) * p].iter_mut().for_each(|x| *x = mean);
                }
            }
            match opts.plasticity {
                Plasticity::Immediate { coef } => {
                    apply_local_update(&mut net.weights.w, &fb_eff, &s_in, coef)?;
                    if let Some((lo, hi)) = opts.weight_clamp {
                        clamp(&mut net.weights.w, lo, hi);
                    }
                }
                Plasticity::Accumulate { coef } => {
                    if let Some(d) = delta.as_mut() {
                        apply_local_update(d, &fb_eff, &s_in, coef)?;
                    }
                }
                Plasticity::Frozen => {}
            }
        }
    }

    let output_rates = population_rates(&counts, p, steps);
    let scores = class_scores(&output_rates, opts.targets, sample.input.dt());
    let prediction = softmax(&scores);
    Ok(TrialRecord {
        output_rates,
        scores,
        prediction,
        spike_counts: counts,
        feedback_energy: energy,
        controller_spikes: ctrl_spikes,
        weight_delta: delta,
        output_spikes: raster,
    })
}

pub(crate) fn clamp(w: &mut Matrix, lo: f64, hi: f64) {
    w.as_mut_slice().iter_mut().for_each(|x| *x = x.clamp(lo, hi));
}

/// Group-mean spikes per step for consecutive groups of `p` counts.
fn population_rates(counts: &[usize], p: usize, steps: usize) -> Vec<f64> {
    counts
        .chunks(p)
        .map(|g| g.iter().sum::<usize>() as f64 / (p * steps) as f64)
        .collect()
}
