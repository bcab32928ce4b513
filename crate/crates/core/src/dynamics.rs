//! Discrete-time state machines for the output layer and the controller.
//!
//! One call advances one timestep. Per timestep the output layer is advanced
//! first, consuming controller spikes from the previous step, and then the
//! controller is advanced, consuming output spikes of the current step.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Result, SimError};
use crate::matrix::Matrix;
use crate::params::SimulationParams;

/// Feedforward and feedback weights.
///
/// `q_p` is non-negative and `q_n` non-positive so that negative-controller
/// spikes inhibit their output neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub w: Matrix,
    pub q_p: Matrix,
    pub q_n: Matrix,
}

impl WeightSet {
    pub fn new(w: Matrix, q_p: Matrix, q_n: Matrix) -> Result<Self> {
        let n = w.rows();
        check_len("q_p rows", n, q_p.rows())?;
        check_len("q_p cols", n, q_p.cols())?;
        check_len("q_n rows", n, q_n.rows())?;
        check_len("q_n cols", n, q_n.cols())?;
        if q_p.as_slice().iter().any(|&x| x < 0.0) {
            return Err(SimError::InvalidParams("q_p must be non-negative".into()));
        }
        if q_n.as_slice().iter().any(|&x| x > 0.0) {
            return Err(SimError::InvalidParams("q_n must be non-positive".into()));
        }
        Ok(Self { w, q_p, q_n })
    }

    /// One positive and one negative controller per output neuron, each
    /// feeding back with magnitude `gain`.
    pub fn with_identity_feedback(w: Matrix, gain: f64) -> Self {
        let n = w.rows();
        Self {
            w,
            q_p: Matrix::scaled_identity(n, gain),
            q_n: Matrix::scaled_identity(n, -gain),
        }
    }

    /// Number of output neurons.
    pub fn n(&self) -> usize {
        self.w.rows()
    }

    /// Number of inputs.
    pub fn m(&self) -> usize {
        self.w.cols()
    }
}

/// Decay factors and thresholds of the output neurons, one entry per neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputConstants {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub v_th: Vec<f64>,
    pub floor: bool,
}

/// Decay factors and thresholds of the controller pairs, one entry per pair.
///
/// `beta` belongs to the pair's estimator synapses; the positive and negative
/// controller neurons carry separate membrane constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConstants {
    pub beta: Vec<f64>,
    pub gamma_p: Vec<f64>,
    pub gamma_n: Vec<f64>,
    pub u_th_p: Vec<f64>,
    pub u_th_n: Vec<f64>,
    pub floor: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronConstants {
    pub output: OutputConstants,
    pub controller: ControllerConstants,
}

impl NeuronConstants {
    /// Broadcasts scalar parameters to `n_out` output neurons and `n_ctrl`
    /// controller pairs.
    pub fn uniform(params: &SimulationParams, n_out: usize, n_ctrl: usize) -> Self {
        Self {
            output: OutputConstants {
                alpha: vec![params.alpha(); n_out],
                beta: vec![params.beta(); n_out],
                v_th: vec![params.v_th; n_out],
                floor: params.voltage_floor,
            },
            controller: ControllerConstants {
                beta: vec![params.beta(); n_ctrl],
                gamma_p: vec![params.gamma(); n_ctrl],
                gamma_n: vec![params.gamma(); n_ctrl],
                u_th_p: vec![params.u_th; n_ctrl],
                u_th_n: vec![params.u_th; n_ctrl],
                floor: params.voltage_floor,
            },
        }
    }

    pub fn n_out(&self) -> usize {
        self.output.alpha.len()
    }

    pub fn n_ctrl(&self) -> usize {
        self.controller.beta.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputLayerState {
    pub v: Vec<f64>,
    pub i_ff: Vec<f64>,
    pub i_fb: Vec<f64>,
    pub s: Vec<bool>,
}

impl OutputLayerState {
    pub fn zeros(n: usize) -> Self {
        Self {
            v: vec![0.0; n],
            i_ff: vec![0.0; n],
            i_fb: vec![0.0; n],
            s: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Advances one timestep in place.
    ///
    /// Controller spikes `s_p`, `s_n` are those of the previous step. With
    /// `control_active` false the feedback current only decays.
    pub fn step(
        &mut self,
        weights: &WeightSet,
        s_in: &[bool],
        s_p: &[bool],
        s_n: &[bool],
        consts: &OutputConstants,
        control_active: bool,
    ) -> Result<()> {
        let n = self.len();
        check_len("output weights rows", n, weights.n())?;
        check_len("input spikes", weights.m(), s_in.len())?;
        check_len("output constants", n, consts.alpha.len())?;
        if control_active {
            check_len("positive controller spikes", weights.q_p.cols(), s_p.len())?;
            check_len("negative controller spikes", weights.q_n.cols(), s_n.len())?;
        }

        for (i, beta) in consts.beta.iter().enumerate() {
            self.i_ff[i] *= beta;
            self.i_fb[i] *= beta;
        }
        weights.w.add_mul_spikes(s_in, &mut self.i_ff);
        if control_active {
            weights.q_p.add_mul_spikes(s_p, &mut self.i_fb);
            weights.q_n.add_mul_spikes(s_n, &mut self.i_fb);
        }

        for i in 0..n {
            let reset = if self.s[i] { consts.v_th[i] } else { 0.0 };
            let mut v = consts.alpha[i] * self.v[i] - reset + self.i_ff[i] + self.i_fb[i];
            if consts.floor && v < 0.0 {
                v = 0.0;
            }
            if !v.is_finite() {
                return Err(SimError::Divergence { what: "output voltage" });
            }
            self.v[i] = v;
            self.s[i] = v >= consts.v_th[i];
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub u_p: Vec<f64>,
    pub u_n: Vec<f64>,
    pub j_ff: Vec<f64>,
    pub j_fb: Vec<f64>,
    pub s_p: Vec<bool>,
    pub s_n: Vec<bool>,
}

impl ControllerState {
    pub fn zeros(n: usize) -> Self {
        Self {
            u_p: vec![0.0; n],
            u_n: vec![0.0; n],
            j_ff: vec![0.0; n],
            j_fb: vec![0.0; n],
            s_p: vec![false; n],
            s_n: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.u_p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_p.is_empty()
    }

    /// Advances one timestep in place with binary output and target spikes.
    pub fn step(&mut self, s_out: &[bool], s_trg: &[bool], consts: &ControllerConstants) -> Result<()> {
        check_len("output spikes", self.len(), s_out.len())?;
        check_len("target spikes", self.len(), s_trg.len())?;
        self.step_with(|i| spike(s_out[i]), |i| spike(s_trg[i]), consts)
    }

    /// Same as [`ControllerState::step`] with arbitrary per-pair estimator
    /// drive, used when a controller listens to a population of outputs.
    pub fn step_with(
        &mut self,
        out_drive: impl Fn(usize) -> f64,
        trg_drive: impl Fn(usize) -> f64,
        consts: &ControllerConstants,
    ) -> Result<()> {
        let n = self.len();
        check_len("controller constants", n, consts.beta.len())?;
        for i in 0..n {
            let beta = consts.beta[i];
            self.j_ff[i] = beta * self.j_ff[i] + out_drive(i);
            self.j_fb[i] = beta * self.j_fb[i] + trg_drive(i);
            let err = self.j_fb[i] - self.j_ff[i];

            let reset_p = if self.s_p[i] { consts.u_th_p[i] } else { 0.0 };
            let reset_n = if self.s_n[i] { consts.u_th_n[i] } else { 0.0 };
            let mut up = consts.gamma_p[i] * self.u_p[i] - reset_p + err;
            let mut un = consts.gamma_n[i] * self.u_n[i] - reset_n - err;
            if consts.floor {
                up = up.max(0.0);
                un = un.max(0.0);
            }
            if !(up.is_finite() && un.is_finite()) {
                return Err(SimError::Divergence { what: "controller voltage" });
            }
            self.u_p[i] = up;
            self.u_n[i] = un;
            self.s_p[i] = up >= consts.u_th_p[i];
            self.s_n[i] = un >= consts.u_th_n[i];
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn spike(on: bool) -> f64 {
    if on {
        1.0
    } else {
        0.0
    }
}

/// Value-returning form of [`OutputLayerState::step`].
pub fn step_output_layer(
    state: &OutputLayerState,
    weights: &WeightSet,
    s_in: &[bool],
    s_p: &[bool],
    s_n: &[bool],
    consts: &OutputConstants,
    control_active: bool,
) -> Result<OutputLayerState> {
    let mut next = state.clone();
    next.step(weights, s_in, s_p, s_n, consts, control_active)?;
    Ok(next)
}

/// Value-returning form of [`ControllerState::step`].
pub fn step_controller(
    state: &ControllerState,
    s_out: &[bool],
    s_trg: &[bool],
    consts: &ControllerConstants,
) -> Result<ControllerState> {
    let mut next = state.clone();
    next.step(s_out, s_trg, consts)?;
    Ok(next)
}

/// Zeroed output layer and controller for `n` neurons.
pub fn reset_states(n: usize) -> Result<(OutputLayerState, ControllerState)> {
    if n == 0 {
        return Err(SimError::Dimension {
            what: "network size",
            expected: 1,
            found: 0,
        });
    }
    Ok((OutputLayerState::zeros(n), ControllerState::zeros(n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn out_consts(alpha: f64, beta: f64, v_th: f64, n: usize) -> OutputConstants {
        OutputConstants {
            alpha: vec![alpha; n],
            beta: vec![beta; n],
            v_th: vec![v_th; n],
            floor: false,
        }
    }

    fn ctrl_consts(beta: f64, gamma: f64, u_th: f64, n: usize) -> ControllerConstants {
        ControllerConstants {
            beta: vec![beta; n],
            gamma_p: vec![gamma; n],
            gamma_n: vec![gamma; n],
            u_th_p: vec![u_th; n],
            u_th_n: vec![u_th; n],
            floor: false,
        }
    }

    fn weights(n: usize, m: usize) -> WeightSet {
        WeightSet::with_identity_feedback(Matrix::zeros(n, m), 1.0)
    }

    #[test]
    fn pure_decay() {
        let mut st = OutputLayerState::zeros(1);
        st.v[0] = 0.5;
        st.step(&weights(1, 1), &[false], &[false], &[false], &out_consts(0.9, 0.8, 1.0, 1), true)
            .unwrap();
        assert_abs_diff_eq!(st.v[0], 0.45, epsilon = 1e-15);
        assert!(!st.s[0]);
    }

    #[test]
    fn soft_reset_subtracts_threshold() {
        let mut st = OutputLayerState::zeros(1);
        st.v[0] = 1.2;
        st.s[0] = true;
        st.step(&weights(1, 1), &[false], &[false], &[false], &out_consts(1.0, 0.8, 1.0, 1), true)
            .unwrap();
        assert_abs_diff_eq!(st.v[0], 0.2, epsilon = 1e-12);
        assert!(!st.s[0]);
    }

    #[test]
    fn spike_at_exact_threshold_then_reset() {
        let mut st = OutputLayerState::zeros(1);
        st.v[0] = 1.0;
        let c = out_consts(1.0, 0.8, 1.0, 1);
        let w = weights(1, 1);
        // v == v_th counts as a spike
        st.step(&w, &[false], &[false], &[false], &c, true).unwrap();
        assert!(st.s[0]);
        st.step(&w, &[false], &[false], &[false], &c, true).unwrap();
        assert_abs_diff_eq!(st.v[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn feedforward_current_one_step() {
        let w = Matrix::from_rows(2, 2, vec![0.04, 0.0, 0.0, 0.04]).unwrap();
        let ws = WeightSet::with_identity_feedback(w, 1.0);
        let mut st = OutputLayerState::zeros(2);
        st.step(&ws, &[true, true], &[false; 2], &[false; 2], &out_consts(0.9, 0.8, 1.0, 2), true)
            .unwrap();
        assert_eq!(st.i_ff, vec![0.04, 0.04]);
    }

    #[test]
    fn negative_controller_inhibits() {
        let mut st = OutputLayerState::zeros(1);
        st.step(&weights(1, 1), &[false], &[false], &[true], &out_consts(0.9, 0.8, 1.0, 1), true)
            .unwrap();
        assert_eq!(st.i_fb, vec![-1.0]);
        assert_eq!(st.v, vec![-1.0]);
    }

    #[test]
    fn control_inactive_ignores_controller_spikes() {
        let mut st = OutputLayerState::zeros(1);
        st.i_fb[0] = 1.0;
        st.step(&weights(1, 1), &[false], &[true], &[false], &out_consts(0.9, 0.5, 10.0, 1), false)
            .unwrap();
        assert_eq!(st.i_fb, vec![0.5]);
    }

    #[test]
    fn voltage_floor_clamps() {
        let mut st = OutputLayerState::zeros(1);
        let mut c = out_consts(0.9, 0.8, 1.0, 1);
        c.floor = true;
        st.step(&weights(1, 1), &[false], &[false], &[true], &c, true).unwrap();
        assert_eq!(st.v, vec![0.0]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut st = OutputLayerState::zeros(1);
        let err = st
            .step(&weights(1, 2), &[false], &[false], &[false], &out_consts(0.9, 0.8, 1.0, 1), true)
            .unwrap_err();
        assert!(matches!(err, SimError::Dimension { .. }));
    }

    #[test]
    fn non_finite_input_diverges() {
        let w = Matrix::from_rows(1, 1, vec![f64::INFINITY]).unwrap();
        let ws = WeightSet::with_identity_feedback(w, 1.0);
        let mut st = OutputLayerState::zeros(1);
        let err = st
            .step(&ws, &[true], &[false], &[false], &out_consts(0.9, 0.8, 1.0, 1), true)
            .unwrap_err();
        assert!(matches!(err, SimError::Divergence { .. }));
    }

    #[test]
    fn controller_origin_is_fixed_point() {
        let mut st = ControllerState::zeros(2);
        let c = ctrl_consts(0.98, 0.8, 1.0, 2);
        for _ in 0..100 {
            st.step(&[false; 2], &[false; 2], &c).unwrap();
        }
        assert_eq!(st, ControllerState::zeros(2));
    }

    #[test]
    fn controller_one_step() {
        let mut st = ControllerState::zeros(1);
        st.j_ff[0] = 2.0;
        st.j_fb[0] = 1.0;
        // beta = 1 keeps the currents at (2, 1) for this step
        st.step(&[false], &[false], &ctrl_consts(1.0, 0.9, 1.0, 1)).unwrap();
        assert_eq!(st.u_p, vec![-1.0]);
        assert_eq!(st.u_n, vec![1.0]);
        assert!(!st.s_p[0]);
        assert!(st.s_n[0]);
    }

    #[test]
    fn target_excess_drives_positive_controller_only() {
        let mut st = ControllerState::zeros(1);
        let c = ctrl_consts(0.98, 0.8, 1.0, 1);
        let mut p_spikes = 0;
        for t in 0..200 {
            st.step(&[false], &[t % 5 == 0], &c).unwrap();
            assert!(!st.s_n[0]);
            p_spikes += st.s_p[0] as usize;
            assert!(st.u_n[0] <= 0.0);
        }
        assert!(p_spikes > 0);
    }

    #[test]
    fn reset_then_target_spike() {
        let (_, mut ctrl) = reset_states(3).unwrap();
        ctrl.step(&[false; 3], &[true, false, false], &ctrl_consts(0.98, 0.8, 1.0, 3)).unwrap();
        assert_eq!(ctrl.j_fb, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn reset_zero_size_rejected() {
        assert!(reset_states(0).is_err());
        let (o, c) = reset_states(3).unwrap();
        assert_eq!(o.len(), 3);
        assert!(o.v.iter().chain(&o.i_ff).chain(&o.i_fb).all(|&x| x == 0.0));
        assert!(c.u_p.iter().chain(&c.u_n).chain(&c.j_ff).chain(&c.j_fb).all(|&x| x == 0.0));
    }

    #[test]
    fn value_forms_match_in_place() {
        let ws = WeightSet::with_identity_feedback(Matrix::from_rows(1, 1, vec![0.3]).unwrap(), 1.0);
        let c = out_consts(0.9, 0.8, 1.0, 1);
        let st = OutputLayerState::zeros(1);
        let next = step_output_layer(&st, &ws, &[true], &[true], &[false], &c, true).unwrap();
        let mut inplace = st.clone();
        inplace.step(&ws, &[true], &[true], &[false], &c, true).unwrap();
        assert_eq!(next, inplace);

        let cc = ctrl_consts(0.98, 0.8, 1.0, 1);
        let cs = ControllerState::zeros(1);
        let next = step_controller(&cs, &[true], &[false], &cc).unwrap();
        assert_eq!(next.j_ff, vec![1.0]);
    }

    #[test]
    fn weight_signs_validated() {
        let bad = WeightSet::new(Matrix::zeros(1, 1), Matrix::identity(1), Matrix::identity(1));
        assert!(bad.is_err());
        let ok = WeightSet::new(Matrix::zeros(1, 1), Matrix::identity(1), Matrix::scaled_identity(1, -1.0));
        assert!(ok.is_ok());
    }
}
