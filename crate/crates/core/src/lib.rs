//! Markovian score climbing: variational inference that minimizes the
//! inclusive KL divergence `KL(p || q)` by climbing the score of `q` at
//! samples from an MCMC kernel that leaves the posterior invariant.
//!
//! The crate is organised bottom-up:
//!
//! - [`numkit`]: log-space arithmetic, sampling helpers, reproducible RNG streams.
//! - [`families`]: variational families (diagonal Gaussian, Gaussian twisting).
//! - [`models`]: targets (skew normal, probit regression, LGSSM, stochastic volatility).
//! - [`kernels`]: conditional importance sampling and conditional SMC.
//! - [`gradients`]: score-climbing, SNIS, Fisher and subset-average estimators.
//! - [`climb`]: step-size schedules and the optimization loops.
//! - [`expcli`]: experiment configs, dataset loading and the `msc` command line.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod climb;
pub mod error;
pub mod expcli;
pub mod families;
pub mod gradients;
pub mod kernels;
pub mod models;
pub mod numkit;

pub use error::{Error, Result};
pub use numkit::RngStream;
