//! Absorbing-state masked diffusion: the forward masking process and the
//! `1/t`-weighted masked-position loss.
//!
//! Forward law: every position is replaced by the mask symbol independently
//! with probability `t`. The loss is
//! `(1 / (t L)) Σ_i I{masked_i} CE(h_i, w_i)`, i.e. the ELBO sum divided by
//! the sequence length.

use ndarray::Array2;
use rayon::prelude::*;

use crate::codebook::{Codebook, Token};
use crate::error::{Error, Result};
use crate::losses::{sequence_targets_for, TargetSpec};
use crate::neighbor::Temperature;
use crate::rng::{indexed_stream_seed, SplitMix64};

/// Smallest diffusion time drawn by [`elbo_expectation_check`]; bounds the
/// variance of the `1/t` weight.
pub const MIN_TRIAL_TIME: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedSequence {
    clean: Vec<Token>,
    /// `true` = position kept, `false` = replaced by the mask symbol.
    visible: Vec<bool>,
    t: f64,
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::invalid("t", format!("must lie in (0, 1], got {t}")));
    }
    Ok(())
}

impl MaskedSequence {
    pub fn new(clean: Vec<Token>, visible: Vec<bool>, t: f64) -> Result<Self> {
        check_time(t)?;
        if clean.is_empty() {
            return Err(Error::invalid("clean", "empty sequence"));
        }
        if clean.len() != visible.len() {
            return Err(Error::ShapeMismatch {
                what: "visibility mask",
                expected: format!("{} positions", clean.len()),
                got: format!("{} positions", visible.len()),
            });
        }
        Ok(Self { clean, visible, t })
    }

    pub fn clean(&self) -> &[Token] {
        &self.clean
    }

    pub fn visible(&self) -> &[bool] {
        &self.visible
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.clean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clean.is_empty()
    }

    pub fn masked_count(&self) -> usize {
        self.visible.iter().filter(|v| !**v).count()
    }

    /// Corrupted sequence with `None` standing for the mask symbol.
    pub fn corrupted(&self) -> Vec<Option<Token>> {
        self.clean
            .iter()
            .zip(&self.visible)
            .map(|(&tok, &vis)| vis.then_some(tok))
            .collect()
    }
}

/// Mask each position independently with probability `t`.
pub fn forward_mask(clean: &[Token], t: f64, seed: u64) -> Result<MaskedSequence> {
    check_time(t)?;
    let mut rng = SplitMix64::new(seed);
    let visible = clean.iter().map(|_| rng.next_f64() >= t).collect();
    MaskedSequence::new(clean.to_vec(), visible, t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElboReport {
    pub loss: f64,
    /// `L x K`; rows at visible positions are exactly zero.
    pub grad: Array2<f64>,
    pub masked_count: usize,
}

/// Masked-diffusion cross entropy, `1/(tL)`-weighted over masked positions.
pub fn elbo_snce_loss(
    logits: &Array2<f64>,
    seq: &MaskedSequence,
    targets: &[TargetSpec],
) -> Result<ElboReport> {
    let len = seq.len();
    if logits.nrows() != len || targets.len() != len {
        return Err(Error::ShapeMismatch {
            what: "masked sequence",
            expected: format!("{len} rows and targets"),
            got: format!("{} rows, {} targets", logits.nrows(), targets.len()),
        });
    }
    let size = logits.ncols();
    let masked: Vec<usize> = (0..len).filter(|&i| !seq.visible[i]).collect();
    let reports: Vec<_> = masked
        .par_iter()
        .map(|&i| {
            let h = logits.row(i).to_vec();
            crate::losses::check_logits(&h)?;
            let w = targets[i].weights(size)?;
            Ok(crate::losses::soft_xent_unchecked(&h, &w))
        })
        .collect::<Result<_>>()?;

    let scale = 1.0 / (seq.t * len as f64);
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut total = 0.0;
    for (&i, r) in masked.iter().zip(&reports) {
        total += r.loss;
        for (g, v) in grad.row_mut(i).iter_mut().zip(&r.grad_logits) {
            *g = v * scale;
        }
    }
    Ok(ElboReport {
        loss: total * scale,
        grad,
        masked_count: masked.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboExpectation {
    pub mc_mean: f64,
    pub stderr: f64,
    /// Mean per-position loss with every position unmasked and unweighted.
    pub analytic: f64,
}

/// Monte Carlo check that the `1/t`-weighted masked loss is unbiased for the
/// unmasked mean loss.
///
/// Clean tokens are the quantized `latents`, targets are their neighbor
/// distributions. Trial `j` draws `t ~ Unif(MIN_TRIAL_TIME, 1]` and a mask
/// pattern from its own seed stream; trials run in parallel and are reduced
/// in trial order.
pub fn elbo_expectation_check(
    latents: &Array2<f64>,
    logits: &Array2<f64>,
    codebook: &Codebook,
    temp: Temperature,
    n_trials: usize,
    seed: u64,
) -> Result<ElboExpectation> {
    if n_trials == 0 {
        return Err(Error::invalid("n_trials", "must be at least 1"));
    }
    let (clean, targets) = sequence_targets_for(latents, codebook, temp)?;
    let full = MaskedSequence::new(clean.clone(), vec![false; clean.len()], 1.0)?;
    let analytic = elbo_snce_loss(logits, &full, &targets)?.loss;

    let losses: Vec<f64> = (0..n_trials)
        .into_par_iter()
        .map(|j| {
            let mut rng = SplitMix64::new(indexed_stream_seed(seed, "elbo.trial", j as u64));
            let t = 1.0 - (1.0 - MIN_TRIAL_TIME) * rng.next_f64();
            let seq = forward_mask(&clean, t, rng.next_u64())?;
            Ok(elbo_snce_loss(logits, &seq, &targets)?.loss)
        })
        .collect::<Result<_>>()?;

    let n = n_trials as f64;
    let mean = losses.iter().sum::<f64>() / n;
    let stderr = if n_trials > 1 {
        let var = losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(ElboExpectation {
        mc_mean: mean,
        stderr,
        analytic,
    })
}
