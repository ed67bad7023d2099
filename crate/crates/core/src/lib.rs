//! Clipped stochastic gradient methods under heavy-tailed noise.
//!
//! The crate provides mirror-descent geometries, synthetic test problems with
//! known optima, calibrated heavy-tailed noise, the clipping operator and its
//! bias/variance decomposition, step-size and clipping-level schedules, the
//! three clipped optimizers (mirror descent, accelerated mirror descent and
//! gradient descent), numerical diagnostics of their per-step inequalities and
//! supermartingale, and a multi-seed experiment harness.

// `!(x <= y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod clipping;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod noise;
pub mod output;
pub mod problems;
pub mod rng;
pub mod schedules;
pub mod stats;

pub use error::{Error, Result};
