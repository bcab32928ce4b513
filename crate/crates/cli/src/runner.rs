//! Experiment execution: one seed at a time, fanned out over a thread pool.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spikefc_core::encoding::{gen_binary_dataset, gen_yinyang_dataset, Dataset};
use spikefc_core::hardware::{build_network, PopulationSpec};
use spikefc_core::init::{gaussian_weights, uniform_weights};
use spikefc_core::training::{
    baseline_linear_readout, evaluate, random_stream, train_offline_with, train_online_with, EvalSummary, MetricsRow,
};
use spikefc_core::{Matrix, Network};

use crate::config::{derive_seed, Config, InitKind, ModeName, Task};
use crate::formats::{
    self, weights_checksum, MetricsWriter, MismatchRecord, Provenance, RunSummary, Scores, SCHEMA_VERSION,
};

/// Validation losses below this count as zero.
pub const ZERO_LOSS_TOL: f64 = 1e-6;

const STREAM_DATA: u64 = 1;
const STREAM_WEIGHTS: u64 = 2;
const STREAM_MISMATCH: u64 = 3;
const STREAM_TRAIN: u64 = 4;
const STREAM_ONLINE_ORDER: u64 = 5;

pub fn data_seed(seed: u64) -> u64 {
    derive_seed(seed, STREAM_DATA)
}

pub fn mismatch_seed(seed: u64) -> u64 {
    derive_seed(seed, STREAM_MISMATCH)
}

pub fn generate_dataset(cfg: &Config, seed: u64) -> Result<Dataset> {
    let (sizes, steps, dt, s) = (cfg.split_sizes(), cfg.data.steps, cfg.sim.dt, data_seed(seed));
    Ok(match cfg.experiment.task {
        Task::Binary => gen_binary_dataset(&cfg.binary_task(), sizes, steps, dt, s)?,
        Task::Yinyang => gen_yinyang_dataset(&cfg.yinyang_task(), sizes, steps, dt, s)?,
    })
}

pub fn initial_weights(cfg: &Config, seed: u64) -> Result<Matrix> {
    let (n, m, s) = (cfg.n_outputs(), cfg.n_inputs(), derive_seed(seed, STREAM_WEIGHTS));
    Ok(match cfg.train.init {
        InitKind::Uniform => uniform_weights(n, m, cfg.train.init_min, cfg.train.init_max, s)?,
        InitKind::Gaussian => gaussian_weights(n, m, 0.0, cfg.train.init_std, s)?,
    })
}

fn logical_matrix(net: &Network) -> Matrix {
    let rows = net.logical_weights();
    let (n, m) = (rows.len(), net.inputs());
    Matrix::from_rows(n, m, rows.concat()).expect("logical weights are rectangular")
}

fn scores(e: &EvalSummary) -> Scores {
    Scores {
        loss: e.loss,
        target_error: e.target_error,
        accuracy: e.accuracy,
    }
}

/// Smallest sample count after which every window's validation loss is zero.
pub fn zero_loss_from(rows: &[MetricsRow]) -> Option<usize> {
    match rows.iter().rposition(|r| !(r.val_loss < ZERO_LOSS_TOL)) {
        None if rows.is_empty() => None,
        None => Some(0),
        Some(k) if k + 1 == rows.len() => None,
        Some(k) => Some(rows[k].samples_seen),
    }
}

/// Where one seed's files go: `<dir>/<stem>.metrics.csv` and friends.
#[derive(Debug, Clone)]
pub struct SeedFiles {
    pub dir: PathBuf,
    pub stem: String,
}

impl SeedFiles {
    pub fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}.{suffix}", self.stem))
    }
}

#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    pub summary: RunSummary,
    pub weights: Matrix,
}

/// Trains and tests one seed with the given mismatch and population size.
/// With `files`, writes metrics as they arrive, then the checkpoint, the
/// summary and, for `cv > 0`, the mismatch realization.
pub fn run_seed(cfg: &Config, seed: u64, cv: f64, population: usize, files: Option<&SeedFiles>) -> Result<SeedResult> {
    let prov = Provenance::new(cfg, seed);
    let data = generate_dataset(cfg, seed)?;
    let w0 = initial_weights(cfg, seed)?;
    let spec = cfg.mismatch(cv);
    let realization = mismatch_seed(seed);
    let (mut net, per) = build_network(
        &w0,
        &cfg.sim_params(),
        cfg.sim.feedback_gain,
        PopulationSpec { p: population },
        Some((&spec, realization)),
    )?;
    if let (Some(f), true) = (files, cv > 0.0) {
        let rec = MismatchRecord::new(&prov, realization, cv, population, &per);
        formats::write_json(&f.path("mismatch.json"), &rec)?;
    }

    let mut writer = match files {
        Some(f) => Some(MetricsWriter::create(
            &f.path("metrics.csv"),
            &prov,
            data.targets.n_classes(),
            data.n_outputs(),
        )?),
        None => None,
    };
    let mut write_err = None;
    let mut on_row = |row: &MetricsRow| {
        if let Some(w) = writer.as_mut() {
            if let Err(e) = w.push(row) {
                write_err.get_or_insert(e);
            }
        }
    };
    let tcfg = cfg.train_config(derive_seed(seed, STREAM_TRAIN));
    let rows = match cfg.experiment.mode {
        ModeName::Offline => train_offline_with(&data, &tcfg, &mut net, &mut on_row)?,
        ModeName::Online => {
            let order = random_stream(data.train.len(), cfg.train.online_samples, derive_seed(seed, STREAM_ONLINE_ORDER));
            let stream = order.iter().map(|&i| &data.train[i]);
            train_online_with(stream, &data.val, &data.targets, &tcfg, &mut net, &mut on_row)?
        }
    };
    if let Some(e) = write_err {
        return Err(e.context("writing metrics"));
    }

    let test = evaluate(&net, &data.test, &data.targets)?;
    let baseline = match cfg.experiment.task {
        Task::Yinyang => Some(baseline_linear_readout(
            &data.train,
            &data.test,
            data.targets.n_classes(),
            &cfg.readout_config(),
        )?),
        Task::Binary => None,
    };
    let weights = logical_matrix(&net);
    let (h0, h1) = (weights_checksum(&w0), weights_checksum(&weights));
    let last = rows.last();
    let summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        seed,
        config_hash: cfg.hash(),
        config: cfg.to_toml(),
        task: cfg.experiment.task.to_string(),
        mode: format!("{:?}", cfg.experiment.mode).to_lowercase(),
        cv,
        population,
        rows: rows.len(),
        samples_seen: last.map_or(0, |r| r.samples_seen),
        final_val: Scores {
            loss: last.map_or(f64::NAN, |r| r.val_loss),
            target_error: last.map_or(f64::NAN, |r| r.target_error),
            accuracy: last.map_or(f64::NAN, |r| r.accuracy),
        },
        test: scores(&test),
        baseline_test_accuracy: baseline,
        zero_loss_from: match cfg.experiment.mode {
            ModeName::Online => zero_loss_from(&rows),
            ModeName::Offline => None,
        },
        no_learning: cfg.train.eta == 0.0,
        weights_unchanged: h0 == h1,
        initial_weights_sha256: h0,
        final_weights_sha256: h1,
    };
    if let Some(f) = files {
        formats::write_weights(&f.path("weights.txt"), &weights, &prov)?;
        formats::write_json(&f.path("summary.json"), &summary)?;
    }
    Ok(SeedResult {
        seed,
        rows,
        summary,
        weights,
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?)
}

/// Outcome of a multi-seed command. `failures` holds `(label, error)` pairs.
#[derive(Debug, Default)]
pub struct Report {
    pub failures: Vec<(String, String)>,
}

impl Report {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    fn record<T>(&mut self, label: String, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                let msg = format!("{e:#}");
                eprintln!("{label} failed: {msg}");
                self.failures.push((label, msg));
                None
            }
        }
    }
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Linear-interpolation quantile of unsorted data.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainAggregate {
    pub schema_version: u32,
    pub config_hash: String,
    pub config: String,
    pub seeds: Vec<u64>,
    pub failed_seeds: Vec<u64>,
    pub test_accuracy: Vec<f64>,
    pub test_accuracy_mean: f64,
    pub test_accuracy_sd: f64,
    pub baseline_accuracy_mean: Option<f64>,
    pub baseline_accuracy_sd: Option<f64>,
}

pub fn cmd_train(cfg: &Config, out_dir: &Path) -> Result<(Report, Vec<SeedResult>)> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("create {}", out_dir.display()))?;
    let seeds = cfg.experiment.seeds.clone();
    let outcomes: Vec<Result<SeedResult>> = pool(cfg.experiment.workers)?.install(|| {
        seeds
            .par_iter()
            .map(|&s| {
                let files = SeedFiles {
                    dir: out_dir.to_path_buf(),
                    stem: format!("seed{s}"),
                };
                run_seed(cfg, s, cfg.hardware.cv, cfg.hardware.population, Some(&files))
            })
            .collect()
    });
    let mut report = Report::default();
    let mut results = Vec::new();
    let mut failed = Vec::new();
    for (s, r) in seeds.iter().zip(outcomes) {
        match report.record(format!("seed {s}"), r) {
            Some(v) => results.push(v),
            None => failed.push(*s),
        }
    }
    let acc: Vec<f64> = results.iter().map(|r| r.summary.test.accuracy).collect();
    let base: Vec<f64> = results.iter().filter_map(|r| r.summary.baseline_test_accuracy).collect();
    let (m, sd) = mean_sd(&acc);
    let (bm, bsd) = mean_sd(&base);
    let agg = TrainAggregate {
        schema_version: SCHEMA_VERSION,
        config_hash: cfg.hash(),
        config: cfg.to_toml(),
        seeds,
        failed_seeds: failed,
        test_accuracy: acc,
        test_accuracy_mean: m,
        test_accuracy_sd: sd,
        baseline_accuracy_mean: (!base.is_empty()).then_some(bm),
        baseline_accuracy_sd: (!base.is_empty()).then_some(bsd),
    };
    formats::write_json(&out_dir.join("train_summary.json"), &agg)?;
    Ok((report, results))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cv: f64,
    pub p: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub target_error: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub cv: f64,
    pub p: usize,
    pub n: usize,
    pub accuracy_median: f64,
    pub accuracy_q1: f64,
    pub accuracy_q3: f64,
    pub target_error_median: f64,
    pub target_error_q1: f64,
    pub target_error_q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub schema_version: u32,
    pub config_hash: String,
    pub config: String,
    pub seeds: Vec<u64>,
    pub cells: Vec<SweepCell>,
}

pub fn summarize_sweep(rows: &[SweepRow], grid: &[(f64, usize)]) -> Vec<SweepCell> {
    grid.iter()
        .map(|&(cv, p)| {
            let cell: Vec<&SweepRow> = rows.iter().filter(|r| r.cv == cv && r.p == p).collect();
            let acc: Vec<f64> = cell.iter().map(|r| r.accuracy).collect();
            let err: Vec<f64> = cell.iter().map(|r| r.target_error).collect();
            SweepCell {
                cv,
                p,
                n: cell.len(),
                accuracy_median: quantile(&acc, 0.5),
                accuracy_q1: quantile(&acc, 0.25),
                accuracy_q3: quantile(&acc, 0.75),
                target_error_median: quantile(&err, 0.5),
                target_error_q1: quantile(&err, 0.25),
                target_error_q3: quantile(&err, 0.75),
            }
        })
        .collect()
}

fn seeds_preamble(cfg: &Config) -> String {
    let seeds: Vec<String> = cfg.experiment.seeds.iter().map(u64::to_string).collect();
    let full = Provenance::new(cfg, 0).preamble();
    let body = full.split_once('\n').map_or("", |x| x.1);
    format!("# seeds = {}\n{body}", seeds.join(","))
}

/// Long-form sweep table, one line per (cv, p, seed).
pub fn write_sweep_csv(path: &Path, cfg: &Config, rows: &[SweepRow]) -> Result<()> {
    let mut buf = seeds_preamble(cfg).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["cv", "p", "seed", "accuracy", "target_error", "val_loss"])?;
        for r in rows {
            w.write_record([
                r.cv.to_string(),
                r.p.to_string(),
                r.seed.to_string(),
                r.accuracy.to_string(),
                r.target_error.to_string(),
                r.val_loss.to_string(),
            ])?;
        }
        w.flush()?;
    }
    std::fs::write(path, buf).with_context(|| format!("write {}", path.display()))
}

pub fn cmd_sweep_mismatch(cfg: &Config, out_dir: &Path) -> Result<(Report, SweepSummary)> {
    let runs = out_dir.join("runs");
    std::fs::create_dir_all(&runs).with_context(|| format!("create {}", runs.display()))?;
    let grid: Vec<(f64, usize)> = cfg
        .hardware
        .sweep_cv
        .iter()
        .flat_map(|&cv| cfg.hardware.sweep_population.iter().map(move |&p| (cv, p)))
        .collect();
    let jobs: Vec<(f64, usize, u64)> = grid
        .iter()
        .flat_map(|&(cv, p)| cfg.experiment.seeds.iter().map(move |&s| (cv, p, s)))
        .collect();
    let outcomes: Vec<Result<SeedResult>> = pool(cfg.experiment.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(cv, p, s)| {
                let files = SeedFiles {
                    dir: runs.clone(),
                    stem: format!("cv{cv}_p{p}_seed{s}"),
                };
                run_seed(cfg, s, cv, p, Some(&files))
            })
            .collect()
    });
    let mut report = Report::default();
    let mut rows = Vec::new();
    for (&(cv, p, s), r) in jobs.iter().zip(outcomes) {
        if let Some(r) = report.record(format!("cv {cv} p {p} seed {s}"), r) {
            rows.push(SweepRow {
                cv,
                p,
                seed: s,
                accuracy: r.summary.test.accuracy,
                target_error: r.summary.test.target_error,
                val_loss: r.summary.final_val.loss,
            });
        }
    }
    write_sweep_csv(&out_dir.join("sweep.csv"), cfg, &rows)?;
    let summary = SweepSummary {
        schema_version: SCHEMA_VERSION,
        config_hash: cfg.hash(),
        config: cfg.to_toml(),
        seeds: cfg.experiment.seeds.clone(),
        cells: summarize_sweep(&rows, &grid),
    };
    formats::write_json(&out_dir.join("sweep_summary.json"), &summary)?;
    Ok((report, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub seed: u64,
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub config: String,
    pub datasets: Vec<ManifestEntry>,
}

pub fn cmd_gen_dataset(cfg: &Config, out_dir: &Path) -> Result<(Report, Manifest)> {
    use sha2::{Digest, Sha256};
    std::fs::create_dir_all(out_dir).with_context(|| format!("create {}", out_dir.display()))?;
    let seeds = cfg.experiment.seeds.clone();
    let outcomes: Vec<Result<ManifestEntry>> = pool(cfg.experiment.workers)?.install(|| {
        seeds
            .par_iter()
            .map(|&s| {
                let file = format!("dataset_seed{s}.sfd");
                let path = out_dir.join(&file);
                formats::write_dataset(&path, &generate_dataset(cfg, s)?, &Provenance::new(cfg, s))?;
                let sha256 = hex::encode(Sha256::digest(std::fs::read(&path)?));
                Ok(ManifestEntry { seed: s, file, sha256 })
            })
            .collect()
    });
    let mut report = Report::default();
    let datasets = seeds
        .iter()
        .zip(outcomes)
        .filter_map(|(s, r)| report.record(format!("seed {s}"), r))
        .collect();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        config_hash: cfg.hash(),
        config: cfg.to_toml(),
        datasets,
    };
    formats::write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok((report, manifest))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub config: String,
    pub weights_sha256: String,
    pub dataset: String,
    pub samples: usize,
    pub test: Scores,
    pub class_rates_hz: Vec<Vec<f64>>,
}

/// Tests a checkpoint on a dataset's test split with control off. Without a
/// dataset file, the split is regenerated from the checkpoint's seed.
pub fn cmd_eval(cfg: &Config, seed: u64, weights: &Matrix, dataset: Option<&Path>, out_dir: &Path) -> Result<EvalReport> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("create {}", out_dir.display()))?;
    let (data, source) = match dataset {
        Some(p) => (formats::read_dataset(p)?.0, p.display().to_string()),
        None => (generate_dataset(cfg, seed)?, format!("generated from seed {seed}")),
    };
    let spec = cfg.mismatch(cfg.hardware.cv);
    let (net, _) = build_network(
        weights,
        &cfg.sim_params(),
        cfg.sim.feedback_gain,
        PopulationSpec {
            p: cfg.hardware.population,
        },
        Some((&spec, mismatch_seed(seed))),
    )?;
    let ev = evaluate(&net, &data.test, &data.targets)?;
    let report = EvalReport {
        schema_version: SCHEMA_VERSION,
        seed,
        config_hash: cfg.hash(),
        config: cfg.to_toml(),
        weights_sha256: weights_checksum(weights),
        dataset: source,
        samples: data.test.len(),
        test: scores(&ev),
        class_rates_hz: ev.class_rates_hz,
    };
    formats::write_json(&out_dir.join(format!("eval_seed{seed}.json")), &report)?;
    Ok(report)
}
