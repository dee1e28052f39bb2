//! Autoregressive sequence wrapper: per-position soft cross entropy averaged
//! over positions. The caller supplies the logits each position was scored
//! with (from its own prefix); no model runs here.

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

use super::{check_logits, soft_xent_unchecked, LossReport, TargetSpec};
use crate::codebook::{Codebook, Token};
use crate::error::{Error, Result};
use crate::neighbor::{neighbor_distribution, Temperature};

/// Which target family to build for every position of a sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetKind {
    OneHot,
    Smoothed { epsilon: f64 },
    Neighbor,
}

/// Tokens of one sequence, plus their continuous latents when neighbor
/// targets are requested.
#[derive(Debug, Clone)]
pub struct SequenceBatch {
    pub tokens: Vec<Token>,
    /// `L x D`, one latent per position.
    pub latents: Option<Array2<f64>>,
    pub target_kind: TargetKind,
}

impl SequenceBatch {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Per-position targets. Neighbor targets are computed in parallel; the
    /// output order is the position order.
    pub fn targets(&self, codebook: &Codebook, temp: Temperature) -> Result<Vec<TargetSpec>> {
        let size = codebook.size();
        if let Some(&token) = self.tokens.iter().find(|&&t| t >= size) {
            return Err(Error::TokenOutOfRange { token, size });
        }
        match self.target_kind {
            TargetKind::OneHot => Ok(self.tokens.iter().map(|&t| TargetSpec::OneHot(t)).collect()),
            TargetKind::Smoothed { epsilon } => Ok(self
                .tokens
                .iter()
                .map(|&index| TargetSpec::Smoothed { index, epsilon })
                .collect()),
            TargetKind::Neighbor => {
                let latents = self.latents.as_ref().ok_or_else(|| {
                    Error::invalid("latents", "neighbor targets need one latent per position")
                })?;
                if latents.nrows() != self.tokens.len() {
                    return Err(Error::ShapeMismatch {
                        what: "sequence latents",
                        expected: format!("{} rows", self.tokens.len()),
                        got: format!("{} rows", latents.nrows()),
                    });
                }
                let rows: Vec<Vec<f64>> = latents.outer_iter().map(|r| r.to_vec()).collect();
                rows.par_iter()
                    .map(|z| neighbor_distribution(codebook, z, temp).map(TargetSpec::Neighbor))
                    .collect()
            }
        }
    }
}

/// Quantized tokens and neighbor targets for an `L x D` latent matrix.
pub fn sequence_targets_for(
    latents: &Array2<f64>,
    codebook: &Codebook,
    temp: Temperature,
) -> Result<(Vec<Token>, Vec<TargetSpec>)> {
    let rows: Vec<Vec<f64>> = latents.outer_iter().map(|r| r.to_vec()).collect();
    if rows.is_empty() {
        return Err(Error::invalid("latents", "empty sequence"));
    }
    rows.par_iter()
        .map(|z| {
            let token = codebook.quantize(z)?;
            let q = neighbor_distribution(codebook, z, temp)?;
            Ok((token, TargetSpec::Neighbor(q)))
        })
        .collect::<Result<Vec<_>>>()
        .map(|pairs| pairs.into_iter().unzip())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceLossReport {
    /// Mean of `position_losses`.
    pub loss: f64,
    pub position_losses: Vec<f64>,
    /// `L x K`; row `i` is `∂loss/∂h_i` of the mean loss.
    pub grad: Array2<f64>,
}

pub(crate) fn position_reports(
    logits: &Array2<f64>,
    targets: &[TargetSpec],
) -> Result<Vec<LossReport>> {
    if logits.nrows() != targets.len() {
        return Err(Error::ShapeMismatch {
            what: "logits rows vs targets",
            expected: format!("{} rows", targets.len()),
            got: format!("{} rows", logits.nrows()),
        });
    }
    let size = logits.ncols();
    let rows: Vec<ArrayView1<f64>> = logits.outer_iter().collect();
    rows.par_iter()
        .zip(targets.par_iter())
        .map(|(row, target)| {
            let h = row.to_vec();
            check_logits(&h)?;
            let w = target.weights(size)?;
            Ok(soft_xent_unchecked(&h, &w))
        })
        .collect()
}

/// Mean per-position cross entropy of a sequence.
///
/// The sum-form objective is `L` times this value. Per-position work runs in
/// parallel and is reduced in position order, so the result is bit-identical
/// across thread counts.
pub fn ar_sequence_loss(
    logits: &Array2<f64>,
    batch: &SequenceBatch,
    codebook: &Codebook,
    temp: Temperature,
) -> Result<SequenceLossReport> {
    if batch.is_empty() {
        return Err(Error::invalid("tokens", "empty sequence"));
    }
    if logits.ncols() != codebook.size() {
        return Err(Error::ShapeMismatch {
            what: "logits columns",
            expected: format!("{} tokens", codebook.size()),
            got: format!("{} columns", logits.ncols()),
        });
    }
    let targets = batch.targets(codebook, temp)?;
    let reports = position_reports(logits, &targets)?;
    let len = reports.len();
    let scale = 1.0 / len as f64;
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut total = 0.0;
    let mut position_losses = Vec::with_capacity(len);
    for (i, r) in reports.into_iter().enumerate() {
        total += r.loss;
        position_losses.push(r.loss);
        for (g, v) in grad.row_mut(i).iter_mut().zip(&r.grad_logits) {
            *g = v * scale;
        }
    }
    Ok(SequenceLossReport {
        loss: total * scale,
        position_losses,
        grad,
    })
}
