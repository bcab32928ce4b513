//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::config::{parse_seed_list, Config, ConfigPatch, ExperimentPatch};
use crate::{formats, runner};

#[derive(Debug, Parser)]
#[command(name = "spikefc", version, about = "Spiking feedback-control learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one dataset file per seed plus a manifest.
    GenDataset(Common),
    /// Train and test every seed.
    Train(Common),
    /// Train over a grid of mismatch levels and population sizes.
    SweepMismatch(Common),
    /// Test a weight checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint written by `train`.
        #[arg(long)]
        weights: PathBuf,
        /// Dataset file; regenerated from the checkpoint seed if omitted.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML config file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seeds, e.g. `1,2,5-9`.
    #[arg(long, value_name = "LIST")]
    pub seed_list: Option<String>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Small smoke profile: 3 seeds, T=500, 20 Yin-Yang epochs.
    #[arg(long)]
    pub fast: bool,
    /// Override one key, e.g. `--set train.eta=1e-4`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,
}

impl Common {
    fn overrides(&self) -> Result<Vec<ConfigPatch>> {
        let mut out = self
            .set
            .iter()
            .map(|s| ConfigPatch::from_assignment(s))
            .collect::<Result<Vec<_>, _>>()?;
        let seeds = self.seed_list.as_deref().map(parse_seed_list).transpose()?;
        out.push(ConfigPatch {
            experiment: Some(ExperimentPatch {
                seeds,
                workers: self.workers,
                ..Default::default()
            }),
            ..Default::default()
        });
        Ok(out)
    }

    pub fn resolve(&self) -> Result<Config> {
        let file = self.config.as_deref().map(ConfigPatch::from_file).transpose()?;
        Ok(Config::resolve(file, self.fast, self.overrides()?)?)
    }
}

/// Runs the CLI. `Ok(true)` iff every seed completed.
pub fn run<I, T>(args: I) -> Result<bool>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).unwrap_or_else(|e| e.exit());
    match cli.command {
        Command::GenDataset(c) => {
            let cfg = c.resolve()?;
            let (report, m) = runner::cmd_gen_dataset(&cfg, &c.out_dir)?;
            println!("wrote {} datasets to {}", m.datasets.len(), c.out_dir.display());
            Ok(report.ok())
        }
        Command::Train(c) => {
            let cfg = c.resolve()?;
            let (report, results) = runner::cmd_train(&cfg, &c.out_dir)?;
            for r in &results {
                let s = &r.summary;
                let extra = if s.no_learning {
                    format!(" no learning (weights unchanged: {})", s.weights_unchanged)
                } else {
                    String::new()
                };
                println!(
                    "seed {} test accuracy {:.4} target error {:.5} spikes/step{extra}",
                    r.seed, s.test.accuracy, s.test.target_error
                );
            }
            Ok(report.ok())
        }
        Command::SweepMismatch(c) => {
            let cfg = c.resolve()?;
            let (report, summary) = runner::cmd_sweep_mismatch(&cfg, &c.out_dir)?;
            for cell in &summary.cells {
                println!(
                    "cv {} p {} n {} accuracy median {:.4} IQR [{:.4}, {:.4}]",
                    cell.cv, cell.p, cell.n, cell.accuracy_median, cell.accuracy_q1, cell.accuracy_q3
                );
            }
            Ok(report.ok())
        }
        Command::Eval {
            common,
            weights,
            dataset,
        } => {
            let (w, prov) = formats::read_weights(&weights)?;
            let cfg = match common.config {
                Some(_) => common.resolve()?,
                None => {
                    let mut cfg = prov.config.clone();
                    for o in common.overrides()? {
                        cfg.apply(o);
                    }
                    cfg.validate()?;
                    cfg
                }
            };
            let r = runner::cmd_eval(&cfg, prov.seed, &w, dataset.as_deref(), &common.out_dir)?;
            println!(
                "seed {} test accuracy {:.4} target error {:.5} spikes/step over {} samples",
                r.seed, r.test.accuracy, r.test.target_error, r.samples
            );
            Ok(true)
        }
    }
}
