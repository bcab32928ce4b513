//! Experiment runner for `spikefc-core`: config files, on-disk formats and
//! the multi-seed commands behind the `spikefc` binary.

pub mod cli;
pub mod config;
pub mod formats;
pub mod runner;
