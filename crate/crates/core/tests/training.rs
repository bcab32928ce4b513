use spikefc_core::encoding::{gen_binary_dataset, gen_yinyang_dataset, BinaryTask, SplitSizes, YinYangTask};
use spikefc_core::hardware::{build_network, PopulationSpec};
use spikefc_core::init::{gaussian_weights, uniform_weights};
use spikefc_core::training::{
    baseline_linear_readout, evaluate, random_stream, run_trial, train_offline, train_online, LinearReadout,
    ReadoutConfig, TrainConfig, TrialOptions,
};
use spikefc_core::{Matrix, SimulationParams};

fn small_binary(seed: u64) -> spikefc_core::encoding::Dataset {
    let sizes = SplitSizes { train: 100, val: 40, test: 40 };
    gen_binary_dataset(&BinaryTask::default(), sizes, 2000, 1e-3, seed).unwrap()
}

#[test]
fn zero_learning_rate_freezes_weights() {
    let data = small_binary(3);
    let p = SimulationParams::default();
    let w = uniform_weights(1, 2, 0.0, 0.04, 3).unwrap();
    let (mut net, _) = build_network(&w, &p, 1.0, PopulationSpec { p: 1 }, None).unwrap();
    let rows = train_offline(&data, &TrainConfig::offline(3, 20, 0.0, 3), &mut net).unwrap();
    assert_eq!(net.weights.w, w);
    assert!(rows.windows(2).all(|r| r[0].val_loss == r[1].val_loss && r[0].accuracy == r[1].accuracy));
}

#[test]
fn offline_training_separates_binary_classes() {
    let data = small_binary(5);
    let p = SimulationParams::default();
    let w = uniform_weights(1, 2, 0.0, 0.04, 5).unwrap();
    let (mut net, _) = build_network(&w, &p, 1.0, PopulationSpec { p: 1 }, None).unwrap();
    let rows = train_offline(&data, &TrainConfig::offline(12, 5, 1e-4, 5), &mut net).unwrap();
    let last = rows.last().unwrap();
    assert!(last.accuracy >= 0.95, "accuracy {}", last.accuracy);
    // class 0 drives the neuron towards the high target
    assert!(last.class_rates_hz[0][0] > last.class_rates_hz[1][0]);
}

#[test]
fn online_learning_is_reproducible() {
    let data = small_binary(9);
    let p = SimulationParams::default();
    let w = uniform_weights(1, 2, 0.0, 0.04, 9).unwrap();
    let stream: Vec<_> = random_stream(data.train.len(), 60, 9).into_iter().map(|i| &data.train[i]).collect();
    let mut cfg = TrainConfig::online(1e-8, 20, 9);
    cfg.online_val_samples = 10;
    let run = || {
        let (mut net, _) = build_network(&w, &p, 1.0, PopulationSpec { p: 1 }, None).unwrap();
        let rows = train_online(stream.iter().copied(), &data.val, &data.targets, &cfg, &mut net).unwrap();
        (net.weights.w, rows)
    };
    let (wa, ra) = run();
    let (wb, rb) = run();
    assert_eq!(wa, wb);
    assert_eq!(ra, rb);
    assert_eq!(ra.len(), 3);
    assert_ne!(wa, w);
}

#[test]
fn replicated_members_match_base_network_without_control() {
    let data = gen_yinyang_dataset(&YinYangTask::default(), SplitSizes { train: 1, val: 1, test: 30 }, 500, 1e-3, 2)
        .unwrap();
    let p = SimulationParams::default();
    let w = gaussian_weights(3, 4, 2.0, 1.0, 2).unwrap();
    let (base, _) = build_network(&w, &p, 1.0, PopulationSpec { p: 1 }, None).unwrap();
    let (pop, _) = build_network(&w, &p, 1.0, PopulationSpec { p: 2 }, None).unwrap();
    let a = evaluate(&base, &data.test, &data.targets).unwrap();
    let b = evaluate(&pop, &data.test, &data.targets).unwrap();
    assert_eq!(a, b);
}

#[test]
fn replicated_members_track_like_base_network() {
    let data = gen_yinyang_dataset(&YinYangTask::default(), SplitSizes { train: 10, val: 1, test: 1 }, 3000, 1e-3, 4)
        .unwrap();
    let p = SimulationParams::default();
    let w = Matrix::from_fn(3, 4, |_, _| 1.0);
    let mut diffs = Vec::new();
    for s in &data.train {
        let mut rates = Vec::new();
        for pop in [1, 2] {
            let (mut net, _) = build_network(&w, &p, 1.0, PopulationSpec { p: pop }, None).unwrap();
            let opts = TrialOptions::train(&data.targets, spikefc_core::training::Plasticity::Frozen);
            let mut st = net.fresh_state();
            rates.push(run_trial(s, &mut net, &opts, &mut st).unwrap().output_rates);
        }
        diffs.extend(rates[0].iter().zip(&rates[1]).map(|(a, b)| (a - b) / p.dt));
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() <= 3.0 * sd / n.sqrt() + 0.5, "mean diff {mean} Hz, sd {sd}");
}

#[test]
fn linear_readout_extremes() {
    let data = gen_yinyang_dataset(&YinYangTask::default(), SplitSizes { train: 300, val: 1, test: 300 }, 1000, 1e-3, 8)
        .unwrap();
    let untrained = ReadoutConfig { iterations: 0, ..Default::default() };
    let chance = baseline_linear_readout(&data.train, &data.test, 3, &untrained).unwrap();
    assert!((chance - 1.0 / 3.0).abs() <= 0.05, "chance {chance}");

    // relabel by the first coordinate: a linearly separable split
    let mut sep = data.train.clone();
    for s in &mut sep {
        s.label = usize::from(s.input_rates[0] > 55.0);
    }
    let model = LinearReadout::fit(&sep, 2, &ReadoutConfig { iterations: 3000, learning_rate: 2.0, rate_scale: 100.0 })
        .unwrap();
    let margin: Vec<_> = sep.into_iter().filter(|s| (s.input_rates[0] - 55.0).abs() > 15.0).collect();
    assert_eq!(model.accuracy(&margin), 1.0);
}
