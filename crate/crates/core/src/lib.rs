//! Stochastic neighbor cross entropy (SNCE) for discrete generative models.
//!
//! Instead of training a token predictor against the one-hot index of the
//! nearest codebook entry, SNCE trains against a softmax over negated
//! codebook distances of the continuous latent. This crate provides:
//!
//! - [`codebook`]: codebooks, metrics, quantization and the binary file format
//! - [`neighbor`]: dense, log-space and top-M neighbor target distributions,
//!   plus perplexity-matched bandwidth calibration
//! - [`losses`]: CE / label smoothing / SNCE with analytic gradients, the
//!   autoregressive wrapper and the equivalence oracles
//! - [`masked`]: masked-diffusion forward process and ELBO wrapper
//! - [`toy`]: the two-Gaussian grid experiment with a from-scratch MLP
//! - [`verify`]: the property suite run by `snce verify`
//! - [`cli`]: the `snce` command line

pub mod cli;
pub mod codebook;
pub mod error;
pub mod losses;
pub mod masked;
pub mod neighbor;
pub mod numeric;
pub mod rng;
pub mod toy;
pub mod verify;

pub use codebook::{grid_codebook, Codebook, Metric, Token};
pub use error::{Error, FormatError, Result};
pub use losses::{soft_xent, snce_target, LossReport, TargetSpec};
pub use neighbor::{NeighborDistribution, Temperature};
