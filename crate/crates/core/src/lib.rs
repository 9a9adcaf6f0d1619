//! Time-multiplexed reservoir computing on a spin-torque nano-oscillator
//! amplitude surrogate.

pub mod audio;
pub mod encoder;
pub mod error;
pub mod oscillator;
pub mod readout;
pub mod seeds;
pub mod sweep;
pub mod tasks;

pub use error::{Error, Result};
