//! Gaussian stochastic volatility models of Volterra type.
//!
//! The library covers the full pipeline: joint simulation of the scaled
//! log-price and its volatility process, numerical minimization of the
//! deviation rate functionals, closed-form central-limit-regime laws,
//! call-price and implied-volatility leading-order asymptotics, and
//! computable divergence certificates for exponential moments of the
//! integrated variance. The `gsv` binary drives experiments from flat
//! key-value or JSON configs and writes reproducible reports.

pub mod cli;
pub mod config;
pub mod error;
pub mod explosion;
pub mod grid;
pub mod kernels;
pub mod math;
pub mod model;
pub mod pricing;
pub mod rates;
pub mod simulate;
pub mod vol;

pub use error::{Error, Result};
pub use grid::PathGrid;
pub use kernels::{GaussianBackend, GaussianSample, KernelFamily, KernelSpec};
pub use model::{ModelSpec, Regime, ScalingParams};
pub use vol::{VolFunction, VolSpec};
