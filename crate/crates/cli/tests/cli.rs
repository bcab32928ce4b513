use std::path::Path;
use std::process::{Command, Output};

use spikefc::formats::{read_dataset, read_json, read_metrics, read_weights, RunSummary};
use spikefc::runner::{EvalReport, Manifest, SweepSummary, TrainAggregate};

fn spikefc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spikefc")).args(args).output().unwrap()
}

const TINY: &[&str] = &[
    "--set",
    "data.train=40",
    "--set",
    "data.val=10",
    "--set",
    "data.test=10",
    "--set",
    "data.steps=200",
    "--set",
    "train.epochs=2",
    "--set",
    "train.batch_size=10",
];

fn with<'a>(head: &[&'a str], dir: &'a Path) -> Vec<&'a str> {
    let mut v = head.to_vec();
    v.extend_from_slice(&["--out-dir", dir.to_str().unwrap()]);
    v.extend_from_slice(TINY);
    v
}

#[test]
fn unknown_config_key_is_rejected_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[train]\nepochs = 3\nlearning_rate = 1e-4\n").unwrap();
    let out = spikefc(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("learning_rate") && err.contains("line 3"), "{err}");
}

#[test]
fn train_writes_every_file_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[experiment]\ntask = \"yinyang\"\nseeds = [9]\n\n[train]\nepochs = 7\n").unwrap();
    let mut args = with(&["train", "--config", cfg.to_str().unwrap(), "--seed-list", "3,4"], dir.path());
    args.push("--fast");
    let out = spikefc(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let agg: TrainAggregate = read_json(&dir.path().join("train_summary.json")).unwrap();
    assert_eq!(agg.seeds, vec![3, 4]);
    let (w, prov) = read_weights(&dir.path().join("seed4.weights.txt")).unwrap();
    assert_eq!(w.shape(), (3, 4));
    assert_eq!(prov.seed, 4);
    // CLI flags beat --fast, which beats the file
    assert_eq!(prov.config.train.epochs, 2);
    assert_eq!(prov.config.data.steps, 200);
    let rows = read_metrics(&dir.path().join("seed4.metrics.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    let s: RunSummary = read_json(&dir.path().join("seed4.summary.json")).unwrap();
    assert_eq!(s.schema_version, 1);
    assert_eq!(s.config_hash, prov.config.hash());
    assert!(s.baseline_test_accuracy.is_some());
    assert!(!s.no_learning);
}

#[test]
fn zero_learning_rate_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = with(&["train", "--seed-list", "1", "--set", "train.eta=0"], dir.path());
    args.extend_from_slice(&["--set", "experiment.mode=online", "--set", "train.online_samples=30"]);
    let out = spikefc(&args);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("no learning"));
    let s: RunSummary = read_json(&dir.path().join("seed1.summary.json")).unwrap();
    assert!(s.no_learning && s.weights_unchanged);
    assert_eq!(s.initial_weights_sha256, s.final_weights_sha256);
}

#[test]
fn dataset_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    assert!(spikefc(&with(&["gen-dataset", "--seed-list", "2"], dir.path())).status.success());
    let m: Manifest = read_json(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(m.datasets.len(), 1);
    let data_path = dir.path().join(&m.datasets[0].file);
    let (data, prov) = read_dataset(&data_path).unwrap();
    assert_eq!((data.train.len(), data.test.len(), data.train[0].steps()), (40, 10, 200));
    assert_eq!(prov.seed, 2);

    assert!(spikefc(&with(&["train", "--seed-list", "2"], dir.path())).status.success());
    let weights = dir.path().join("seed2.weights.txt");
    let eval_dir = dir.path().join("eval");
    let run_eval = |extra: &[&str]| {
        let mut a = vec!["eval", "--weights", weights.to_str().unwrap(), "--out-dir", eval_dir.to_str().unwrap()];
        a.extend_from_slice(extra);
        assert!(spikefc(&a).status.success());
        read_json::<EvalReport>(&eval_dir.join("eval_seed2.json")).unwrap()
    };
    let from_file = run_eval(&["--dataset", data_path.to_str().unwrap()]);
    let regenerated = run_eval(&[]);
    assert_eq!(from_file.test, regenerated.test);
    let s: RunSummary = read_json(&dir.path().join("seed2.summary.json")).unwrap();
    assert_eq!(from_file.test, s.test);
}

#[test]
fn sweep_reports_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = with(&["sweep-mismatch", "--seed-list", "1-3", "--workers", "2"], dir.path());
    args.extend_from_slice(&["--set", "hardware.sweep_cv=[0.0, 0.1]", "--set", "hardware.sweep_population=[1, 2]"]);
    let out = spikefc(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s: SweepSummary = read_json(&dir.path().join("sweep_summary.json")).unwrap();
    assert_eq!(s.cells.len(), 4);
    assert!(s.cells.iter().all(|c| c.n == 3 && c.accuracy_q1 <= c.accuracy_median));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(csv.starts_with("# seeds = 1,2,3\n"));
    let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "cv,p,seed,accuracy,target_error,val_loss");
    assert_eq!(body.len(), 13);
    assert!(dir.path().join("runs/cv0.1_p2_seed3.mismatch.json").exists());
    assert!(!dir.path().join("runs/cv0_p1_seed1.mismatch.json").exists());
}

#[test]
fn failed_seed_gives_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    // every mismatch draw is rejected after one attempt at this spread
    let mut args = with(&["train", "--seed-list", "1"], dir.path());
    args.extend_from_slice(&["--set", "hardware.cv=50", "--set", "hardware.max_attempts=1"]);
    let out = spikefc(&args);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed 1 failed"));
}
