//! Robust deep-learning beamformer for the multi-user MISO downlink.
//!
//! The library generates Rayleigh-fading channels with imperfect CSI, trains
//! a small dense network that maps `(nominal CSI, error statistics, power
//! budget)` to downlink beamforming vectors through an uplink-downlink
//! duality output layer, and evaluates the result against classical
//! beamformers (MRT, ZF, regularized ZF, WMMSE). Training is unsupervised:
//! the loss is the negated sum rate scored on the actual channels while the
//! network only ever sees their noisy estimates.

// Index loops mirror the math in the numerical kernels.
#![allow(clippy::needless_range_loop)]

pub mod baselines;
pub mod beamnet;
pub mod channel;
pub mod config;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
