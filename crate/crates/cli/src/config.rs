//! Experiment configuration.
//!
//! Files are TOML restricted to five sections of scalar or array keys.
//! Resolution order, later layers winning: task/mode defaults, the config
//! file, the `--fast` profile, `--set` overrides, dedicated CLI flags.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spikefc_core::encoding::{BinaryTask, SplitSizes, YinYangTask};
use spikefc_core::hardware::MismatchSpec;
use spikefc_core::training::{Mode, ReadoutConfig, TrainConfig, UpdateCadence};
use spikefc_core::SimulationParams;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Binary,
    Yinyang,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Offline,
    Online,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cadence {
    PerBatch,
    PerSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Uniform,
    Gaussian,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Binary => "binary",
            Task::Yinyang => "yinyang",
        })
    }
}

/// Declares a section with every key required, plus a patch twin where every
/// key is optional. Both reject unknown keys.
macro_rules! section {
    ($name:ident / $patch:ident { $($field:ident : $ty:ty),* $(,)? }) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            $(pub $field: $ty,)*
        }

        #[derive(Debug, Clone, Default, PartialEq, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $patch {
            $(#[serde(default)] pub $field: Option<$ty>,)*
        }

        impl $name {
            fn apply(&mut self, p: $patch) {
                $(if let Some(v) = p.$field { self.$field = v; })*
            }
        }
    };
}

section!(Experiment / ExperimentPatch {
    task: Task,
    mode: ModeName,
    seeds: Vec<u64>,
    workers: usize,
});

section!(Sim / SimPatch {
    dt: f64,
    tau_m: f64,
    tau_c: f64,
    tau_u: f64,
    v_th: f64,
    u_th: f64,
    voltage_floor: bool,
    feedback_gain: f64,
});

section!(Data / DataPatch {
    train: usize,
    val: usize,
    test: usize,
    steps: usize,
    rate_high: f64,
    rate_low: f64,
    f_min: f64,
    f_max: f64,
    f1: f64,
    f0: f64,
});

section!(Train / TrainPatch {
    epochs: usize,
    batch_size: usize,
    eta: f64,
    cadence: Cadence,
    redraw_rasters: bool,
    window: usize,
    online_samples: usize,
    online_val_samples: usize,
    init: InitKind,
    init_min: f64,
    init_max: f64,
    init_std: f64,
    clamp: bool,
    clamp_min: f64,
    clamp_max: f64,
    baseline_iterations: usize,
    baseline_lr: f64,
});

section!(Hardware / HardwarePatch {
    cv: f64,
    population: usize,
    max_attempts: usize,
    sweep_cv: Vec<f64>,
    sweep_population: Vec<usize>,
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: Experiment,
    pub sim: Sim,
    pub data: Data,
    pub train: Train,
    pub hardware: Hardware,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPatch {
    #[serde(default)]
    pub experiment: Option<ExperimentPatch>,
    #[serde(default)]
    pub sim: Option<SimPatch>,
    #[serde(default)]
    pub data: Option<DataPatch>,
    #[serde(default)]
    pub train: Option<TrainPatch>,
    #[serde(default)]
    pub hardware: Option<HardwarePatch>,
}

impl ConfigPatch {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            origin: origin.to_string(),
            message: e.to_string().trim_end().to_string(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// One `section.key=value` assignment. Values that are not valid TOML are
    /// taken as bare strings.
    pub fn from_assignment(assign: &str) -> Result<Self, ConfigError> {
        let bad = || ConfigError::Parse {
            origin: format!("--set {assign}"),
            message: "expected section.key=value".into(),
        };
        let (lhs, value) = assign.split_once('=').ok_or_else(bad)?;
        let (section, key) = lhs.trim().split_once('.').ok_or_else(bad)?;
        let value = value.trim();
        let literal = if toml::from_str::<toml::Table>(&format!("v = {value}")).is_ok() {
            value.to_string()
        } else {
            format!("{value:?}")
        };
        Self::parse(&format!("[{section}]\n{key} = {literal}\n"), &format!("--set {assign}"))
    }

    fn task(&self) -> Option<Task> {
        self.experiment.as_ref().and_then(|e| e.task)
    }

    fn mode(&self) -> Option<ModeName> {
        self.experiment.as_ref().and_then(|e| e.mode)
    }
}

impl Config {
    pub fn defaults(task: Task, mode: ModeName) -> Self {
        let sim = SimulationParams::default();
        let (seeds, steps, epochs, eta, window, online_samples) = match (task, mode) {
            (Task::Binary, ModeName::Offline) => (5, 5000, 30, 1e-5, 25, 2500),
            (Task::Binary, ModeName::Online) => (15, 4000, 30, 1e-9, 25, 2500),
            (Task::Yinyang, ModeName::Offline) => (15, 1000, 100, 1e-4, 50, 10000),
            (Task::Yinyang, ModeName::Online) => (15, 1000, 100, 5e-9, 50, 10000),
        };
        let bin = BinaryTask::default();
        let yy = YinYangTask::default();
        let (f1, f0) = match task {
            Task::Binary => (bin.f1, bin.f0),
            Task::Yinyang => (yy.f1, yy.f0),
        };
        let sizes = SplitSizes::default();
        let readout = ReadoutConfig::default();
        Config {
            experiment: Experiment {
                task,
                mode,
                seeds: (1..=seeds).collect(),
                workers: 1,
            },
            sim: Sim {
                dt: sim.dt,
                tau_m: sim.tau_m,
                tau_c: sim.tau_c,
                tau_u: sim.tau_u,
                v_th: sim.v_th,
                u_th: sim.u_th,
                voltage_floor: sim.voltage_floor,
                feedback_gain: 1.0,
            },
            data: Data {
                train: sizes.train,
                val: sizes.val,
                test: sizes.test,
                steps,
                rate_high: bin.rate_high,
                rate_low: bin.rate_low,
                f_min: yy.f_min,
                f_max: yy.f_max,
                f1,
                f0,
            },
            train: Train {
                epochs,
                batch_size: 50,
                eta,
                cadence: Cadence::PerBatch,
                redraw_rasters: false,
                window,
                online_samples,
                online_val_samples: 100,
                init: match task {
                    Task::Binary => InitKind::Uniform,
                    Task::Yinyang => InitKind::Gaussian,
                },
                init_min: 0.0,
                init_max: 0.04,
                init_std: 0.5,
                clamp: false,
                clamp_min: -1e3,
                clamp_max: 1e3,
                baseline_iterations: readout.iterations,
                baseline_lr: readout.learning_rate,
            },
            hardware: Hardware {
                cv: 0.0,
                population: 1,
                max_attempts: 100,
                sweep_cv: vec![0.0, 0.05, 0.10, 0.20],
                sweep_population: vec![1, 2],
            },
        }
    }

    /// Desk-scale smoke profile. Does not reproduce full-scale results.
    fn apply_fast(&mut self) {
        self.experiment.seeds = vec![1, 2, 3];
        self.data.steps = 500;
        if self.experiment.task == Task::Yinyang {
            self.train.epochs = 20;
        }
    }

    pub fn resolve(file: Option<ConfigPatch>, fast: bool, overrides: Vec<ConfigPatch>) -> Result<Self, ConfigError> {
        let file = file.unwrap_or_default();
        let pick = |f: fn(&ConfigPatch) -> Option<Task>| overrides.iter().rev().find_map(f).or_else(|| f(&file));
        let task = pick(ConfigPatch::task).unwrap_or(Task::Binary);
        let mode = overrides
            .iter()
            .rev()
            .find_map(ConfigPatch::mode)
            .or_else(|| file.mode())
            .unwrap_or(ModeName::Offline);
        let mut cfg = Self::defaults(task, mode);
        cfg.apply(file);
        if fast {
            cfg.apply_fast();
        }
        for o in overrides {
            cfg.apply(o);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, p: ConfigPatch) {
        if let Some(s) = p.experiment {
            self.experiment.apply(s);
        }
        if let Some(s) = p.sim {
            self.sim.apply(s);
        }
        if let Some(s) = p.data {
            self.data.apply(s);
        }
        if let Some(s) = p.train {
            self.train.apply(s);
        }
        if let Some(s) = p.hardware {
            self.hardware.apply(s);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.experiment.seeds.is_empty() {
            return bad("experiment.seeds is empty");
        }
        if self.experiment.workers == 0 {
            return bad("experiment.workers must be at least 1");
        }
        if self.data.steps == 0 || self.data.train == 0 || self.data.val == 0 || self.data.test == 0 {
            return bad("data.steps and split sizes must be at least 1");
        }
        if self.hardware.population == 0 || self.hardware.sweep_population.contains(&0) {
            return bad("population sizes must be at least 1");
        }
        if !(self.hardware.cv >= 0.0) || self.hardware.sweep_cv.iter().any(|c| !(*c >= 0.0)) {
            return bad("mismatch cv must be non-negative");
        }
        if self.train.clamp && !(self.train.clamp_min <= self.train.clamp_max) {
            return bad("train.clamp_min must not exceed train.clamp_max");
        }
        if self.experiment.mode == ModeName::Online && self.train.online_samples == 0 {
            return bad("train.online_samples must be at least 1");
        }
        self.sim_params()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.train_config(0)
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.experiment.task == Task::Yinyang {
            self.yinyang_task()
                .validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    /// Canonical TOML text; identical configs give identical text.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn sim_params(&self) -> SimulationParams {
        SimulationParams {
            dt: self.sim.dt,
            tau_m: self.sim.tau_m,
            tau_c: self.sim.tau_c,
            tau_u: self.sim.tau_u,
            v_th: self.sim.v_th,
            u_th: self.sim.u_th,
            voltage_floor: self.sim.voltage_floor,
        }
    }

    pub fn split_sizes(&self) -> SplitSizes {
        SplitSizes {
            train: self.data.train,
            val: self.data.val,
            test: self.data.test,
        }
    }

    pub fn binary_task(&self) -> BinaryTask {
        BinaryTask {
            rate_high: self.data.rate_high,
            rate_low: self.data.rate_low,
            f1: self.data.f1,
            f0: self.data.f0,
            ..BinaryTask::default()
        }
    }

    pub fn yinyang_task(&self) -> YinYangTask {
        YinYangTask {
            f_min: self.data.f_min,
            f_max: self.data.f_max,
            f1: self.data.f1,
            f0: self.data.f0,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let t = &self.train;
        let mut cfg = match self.experiment.mode {
            ModeName::Offline => {
                let mut c = TrainConfig::offline(t.epochs, t.batch_size, t.eta, seed);
                c.cadence = match t.cadence {
                    Cadence::PerBatch => UpdateCadence::PerBatchOffline,
                    Cadence::PerSample => UpdateCadence::PerSampleOffline,
                };
                c
            }
            ModeName::Online => TrainConfig::online(t.eta, t.window, seed),
        };
        cfg.redraw_rasters = t.redraw_rasters;
        cfg.online_val_samples = t.online_val_samples;
        cfg.weight_clamp = t.clamp.then_some((t.clamp_min, t.clamp_max));
        debug_assert_eq!(cfg.mode == Mode::Online, self.experiment.mode == ModeName::Online);
        cfg
    }

    pub fn readout_config(&self) -> ReadoutConfig {
        ReadoutConfig {
            iterations: self.train.baseline_iterations,
            learning_rate: self.train.baseline_lr,
            ..ReadoutConfig::default()
        }
    }

    pub fn mismatch(&self, cv: f64) -> MismatchSpec {
        MismatchSpec {
            cv,
            max_attempts: self.hardware.max_attempts,
        }
    }

    pub fn n_inputs(&self) -> usize {
        match self.experiment.task {
            Task::Binary => 2,
            Task::Yinyang => 4,
        }
    }

    pub fn n_outputs(&self) -> usize {
        match self.experiment.task {
            Task::Binary => 1,
            Task::Yinyang => 3,
        }
    }
}

/// Parses `1,2,5-8` into `[1, 2, 5, 6, 7, 8]`.
pub fn parse_seed_list(s: &str) -> Result<Vec<u64>, ConfigError> {
    let bad = || ConfigError::Invalid(format!("bad seed list `{s}`"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

/// Independent sub-seeds for the parts of one experiment seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the combined input
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_reports_line_and_key() {
        let err = ConfigPatch::parse("[sim]\ndt = 0.001\n\nbogus_key = 3\n", "cfg.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus_key"), "{msg}");
        assert!(msg.contains("line 4"), "{msg}");
    }

    #[test]
    fn unknown_section_rejected() {
        let msg = ConfigPatch::parse("[simulation]\ndt = 0.001\n", "c").unwrap_err().to_string();
        assert!(msg.contains("simulation"), "{msg}");
    }

    #[test]
    fn layers_apply_in_order() {
        let file = ConfigPatch::parse("[experiment]\ntask = \"yinyang\"\n[data]\nsteps = 700\n", "f").unwrap();
        let cfg = Config::resolve(Some(file.clone()), false, vec![]).unwrap();
        assert_eq!(cfg.experiment.task, Task::Yinyang);
        assert_eq!(cfg.data.steps, 700);
        assert_eq!(cfg.train.epochs, 100);
        let fast = Config::resolve(Some(file.clone()), true, vec![]).unwrap();
        assert_eq!((fast.data.steps, fast.train.epochs, fast.experiment.seeds.len()), (500, 20, 3));
        let set = ConfigPatch::from_assignment("data.steps=900").unwrap();
        let over = Config::resolve(Some(file), true, vec![set]).unwrap();
        assert_eq!(over.data.steps, 900);
    }

    #[test]
    fn task_from_override_picks_defaults() {
        let set = ConfigPatch::from_assignment("experiment.task=yinyang").unwrap();
        let cfg = Config::resolve(None, false, vec![set]).unwrap();
        assert_eq!(cfg.experiment.seeds.len(), 15);
        assert_eq!(cfg.data.f1, 20.0);
        let online = ConfigPatch::from_assignment("experiment.mode=online").unwrap();
        let cfg = Config::resolve(None, false, vec![online]).unwrap();
        assert_eq!((cfg.data.steps, cfg.train.eta), (4000, 1e-9));
    }

    #[test]
    fn canonical_text_round_trips() {
        let cfg = Config::defaults(Task::Yinyang, ModeName::Offline);
        let back: Config = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        let mut other = cfg.clone();
        other.sim.v_th += 1.0;
        assert_ne!(other.hash(), cfg.hash());
    }

    #[test]
    fn invalid_values_rejected() {
        let set = ConfigPatch::from_assignment("sim.tau_u=0.0005").unwrap();
        assert!(Config::resolve(None, false, vec![set]).is_err());
        let set = ConfigPatch::from_assignment("train.eta=-1").unwrap();
        assert!(Config::resolve(None, false, vec![set]).is_err());
        assert!(ConfigPatch::from_assignment("nodot=3").is_err());
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seed_list("1,2,5-7").unwrap(), vec![1, 2, 5, 6, 7]);
        assert!(parse_seed_list("3-1").is_err());
        assert!(parse_seed_list("x").is_err());
    }
}
