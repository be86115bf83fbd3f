//! Gittins indices for bandit arms driven by (reflected) spectrally negative
//! Lévy processes and one-dimensional diffusions, observed at exponential
//! renewal times, together with a path-wise Monte Carlo bandit engine.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandit;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod index_diffusion;
pub mod index_levy;
pub mod pathsim;
pub mod pcf;
pub mod quad;
pub mod reward;
pub mod scale;

pub use error::{Error, Result};
pub use reward::RewardSpec;
pub use scale::{ScaleModel, SnlpParams};
