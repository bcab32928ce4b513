//! Spiking feedback-control learning: leaky integrate-and-fire output
//! neurons driven towards target rates by spiking controller pairs, with a
//! local rule that moves feedforward weights along the feedback current.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
extern crate alloc;

pub mod dynamics;
pub mod encoding;
mod error;
pub mod hardware;
pub mod init;
pub mod matrix;
pub mod network;
pub mod params;
pub mod raster;
pub mod training;

pub use dynamics::{NeuronConstants, WeightSet};
pub use error::{Result, SimError};
pub use matrix::Matrix;
pub use network::{Network, NetworkState};
pub use params::SimulationParams;
pub use raster::SpikeRaster;
