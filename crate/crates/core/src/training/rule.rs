//! The feedback-driven local learning rule.
//!
//! `w[i][j] += eta * i_fb[i] * s_in[j]`: a synapse changes only when its
//! presynaptic input spikes, by an amount set by the feedback current of its
//! own postsynaptic neuron at that step. Nothing else enters the update.

use crate::error::{check_len, Result};
use crate::matrix::Matrix;

/// In-place form of [`local_weight_update`].
pub fn apply_local_update(w: &mut Matrix, i_fb: &[f64], s_in: &[bool], eta: f64) -> Result<()> {
    check_len("feedback current", w.rows(), i_fb.len())?;
    check_len("input spikes", w.cols(), s_in.len())?;
    w.add_outer_spikes(i_fb, s_in, eta);
    Ok(())
}

pub fn local_weight_update(w: &Matrix, i_fb: &[f64], s_in: &[bool], eta: f64) -> Result<Matrix> {
    let mut out = w.clone();
    apply_local_update(&mut out, i_fb, s_in, eta)?;
    Ok(out)
}
