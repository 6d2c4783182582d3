//! Stochastic rigid-body simulations with degenerate noise: the sliding disk,
//! a magnetized ball on a plane, and a fluctuation-driven magnetic motor,
//! together with the ensemble statistics used to study them.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod disk;
pub mod error;
pub mod magnet;
pub mod motor;
pub mod output;
pub mod so3;
pub mod stats;
pub mod top;

pub use error::{Error, Result};
