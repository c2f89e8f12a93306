//! Joint RIS phase configuration and element allocation for a multi-user
//! mmWave downlink under alpha-fair utility.
//!
//! The crate is organised bottom-up:
//!
//! - [`netgeom`]: scenario parameters, seeded user/blockage deployment, blockage tests
//! - [`channel`]: 3GPP UMi pathloss, UPA steering vectors, CSI synthesis
//! - [`metrics`]: masked effective channel, SINR, rate, alpha-fair utility and throughput
//! - [`alloc`]: feasibility projection, binarization, baselines, MRT beamformers
//! - [`bcd`]: relaxed block coordinate ascent over phases and allocation
//! - [`brute`]: exhaustive oracle for tiny instances
//! - [`learn`]: PCA preprocessing, MLP allocator, Adam and the training loop
//! - [`dataset`]: reproducible dataset generation and binary persistence

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alloc;
pub mod bcd;
mod binio;
pub mod brute;
pub mod channel;
pub mod dataset;
pub mod error;
pub mod learn;
pub mod metrics;
pub mod netgeom;
mod rng;

pub use error::{Error, Result};

/// Complex scalar used for all channel quantities.
pub type C64 = nalgebra::Complex<f64>;
/// Complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
