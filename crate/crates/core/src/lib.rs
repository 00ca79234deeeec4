//! Monte Carlo evaluation of downlink training strategies for correlated,
//! time-varying MISO channels.
//!
//! The crate models a transmitter with many antennas sounding a single-antenna
//! receiver under Gauss-Markov block fading, estimates the channel with
//! single-shot MMSE or Kalman filters, picks training matrices from a shared
//! codebook (round-robin or feedback-driven), and scores the resulting
//! beamforming SNR and estimation MSE per block.

pub mod channel;
pub mod codebook;
pub mod error;
pub mod estimation;
pub mod numerics;
pub mod rng;
pub mod simulator;
pub mod strategies;

pub use error::{Error, Result};
