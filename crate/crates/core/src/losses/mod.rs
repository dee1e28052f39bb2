//! Cross-entropy against one-hot, label-smoothed and stochastic-neighbor
//! targets, with analytic logit gradients.
//!
//! The library minimizes `loss = -Σ_k w_k log softmax(h)_k`, so
//! `∂loss/∂h_k = p_k - w_k`. The maximized objective of the same quantity has
//! gradient `w_k - p_k`.

mod oracles;
mod sequence;

pub use oracles::{
    ce_reward, kl_decomposition_check, mc_snce_estimate, policy_gradient_check, snce_reward,
    KlDecomposition, MonteCarloEstimate,
};
pub use sequence::{
    ar_sequence_loss, sequence_targets_for, SequenceBatch, SequenceLossReport, TargetKind,
};

use crate::codebook::{Codebook, Token};
use crate::error::{Error, Result};
use crate::neighbor::{neighbor_distribution, NeighborDistribution, Temperature};
use crate::numeric;

/// Supervision target for one position.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    OneHot(Token),
    /// `1 - ε` on `index`, `ε / (K - 1)` on every other token.
    Smoothed { index: Token, epsilon: f64 },
    Neighbor(NeighborDistribution),
}

impl TargetSpec {
    /// Materialize the weight vector `w` over `size` tokens.
    pub fn weights(&self, size: usize) -> Result<Vec<f64>> {
        match self {
            TargetSpec::OneHot(index) => {
                check_token(*index, size)?;
                let mut w = vec![0.0; size];
                w[*index] = 1.0;
                Ok(w)
            }
            TargetSpec::Smoothed { index, epsilon } => {
                check_token(*index, size)?;
                let eps = *epsilon;
                if !(0.0..1.0).contains(&eps) {
                    return Err(Error::invalid("epsilon", format!("must lie in [0, 1), got {eps}")));
                }
                if eps > 0.0 && size < 2 {
                    return Err(Error::invalid("epsilon", "smoothing needs at least two tokens"));
                }
                let off = if size > 1 { eps / (size - 1) as f64 } else { 0.0 };
                let mut w = vec![off; size];
                w[*index] = 1.0 - eps;
                Ok(w)
            }
            TargetSpec::Neighbor(q) => {
                if q.size() != size {
                    return Err(Error::ShapeMismatch {
                        what: "neighbor target",
                        expected: format!("{size} tokens"),
                        got: format!("{} tokens", q.size()),
                    });
                }
                q.validate()?;
                Ok(q.to_dense())
            }
        }
    }
}

fn check_token(token: Token, size: usize) -> Result<()> {
    if token >= size {
        return Err(Error::TokenOutOfRange { token, size });
    }
    Ok(())
}

/// Loss value and `∂loss/∂h`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub loss: f64,
    pub grad_logits: Vec<f64>,
}

pub(crate) fn check_logits(logits: &[f64]) -> Result<()> {
    if logits.is_empty() {
        return Err(Error::invalid("logits", "empty"));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("logits"));
    }
    Ok(())
}

/// Soft-label cross entropy against an explicit weight vector.
pub fn soft_xent_weights(logits: &[f64], weights: &[f64]) -> Result<LossReport> {
    check_logits(logits)?;
    if weights.len() != logits.len() {
        return Err(Error::DimensionMismatch {
            expected: logits.len(),
            got: weights.len(),
        });
    }
    numeric::check_distribution(weights).map_err(Error::NotADistribution)?;
    Ok(soft_xent_unchecked(logits, weights))
}

pub(crate) fn soft_xent_unchecked(logits: &[f64], weights: &[f64]) -> LossReport {
    let (m, s) = numeric::shifted_partition(logits);
    let (ls, inv) = (s.ln(), 1.0 / s);
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&h, &w) in logits.iter().zip(weights) {
        let shifted = h - m;
        if w > 0.0 {
            loss -= w * (shifted - ls);
        }
        grad.push(shifted.exp() * inv - w);
    }
    LossReport {
        loss,
        grad_logits: grad,
    }
}

/// Cross entropy of `softmax(logits)` against `target`.
pub fn soft_xent(logits: &[f64], target: &TargetSpec) -> Result<LossReport> {
    check_logits(logits)?;
    let w = target.weights(logits.len())?;
    Ok(soft_xent_unchecked(logits, &w))
}

/// Neighbor target for latent `z`, so callers never recompute distances in
/// the loss layer.
pub fn snce_target(codebook: &Codebook, z: &[f64], temp: Temperature) -> Result<TargetSpec> {
    neighbor_distribution(codebook, z, temp).map(TargetSpec::Neighbor)
}
