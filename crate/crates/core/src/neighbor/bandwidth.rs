//! Per-point bandwidth calibration by perplexity matching, as used for
//! pairwise neighbor distributions in t-SNE. Offered as an offline utility;
//! training targets use a fixed temperature instead.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthResult {
    /// Gaussian bandwidth `σ`.
    pub sigma: f64,
    /// Perplexity `2^H` (entropy in bits) reached at `sigma`.
    pub achieved_perplexity: f64,
    pub iterations: usize,
}

/// Perplexity of `p_j ∝ exp(-d_j · beta)` where `beta = 1 / 2σ²`. The input
/// holds squared distances to the other points only, so the self term is
/// absent rather than zeroed.
fn perplexity_at_beta(shifted: &[f64], beta: f64) -> f64 {
    let w: Vec<f64> = shifted.iter().map(|&d| (-d * beta).exp()).collect();
    let z: f64 = w.iter().sum();
    let h_bits: f64 = -w
        .iter()
        .map(|&x| x / z)
        .filter(|&p| p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>();
    h_bits.exp2()
}

/// Perplexity of the neighbor distribution at bandwidth `sigma`.
pub fn perplexity_at(distances: &[f64], sigma: f64) -> f64 {
    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = distances.iter().map(|d| d - min).collect();
    perplexity_at_beta(&shifted, 1.0 / (2.0 * sigma * sigma))
}

/// Binary search for the bandwidth whose neighbor distribution has the
/// requested perplexity.
///
/// Perplexity decreases monotonically in the precision `beta = 1/2σ²`, from
/// `count` at `beta = 0` down to the number of tied nearest points as
/// `beta → ∞`. The search brackets `beta`, doubling until an upper bound is
/// found and bisecting afterwards. It stops once `|perp - target| <= tol` or
/// after `max_iter` evaluations.
pub fn calibrate_bandwidth(
    distances: &[f64],
    target_perplexity: f64,
    tol: f64,
    max_iter: usize,
) -> Result<BandwidthResult> {
    if distances.len() < 2 {
        return Err(Error::invalid("distances", "need at least two neighbors"));
    }
    if distances.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("distances"));
    }
    let count = distances.len() as f64;
    if !(target_perplexity > 1.0 && target_perplexity <= count) {
        return Err(Error::UnreachablePerplexity {
            target: target_perplexity,
            max: count,
        });
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("tol", "must be positive"));
    }

    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = distances.iter().map(|d| d - min).collect();
    let mean_gap = shifted.iter().sum::<f64>() / count;

    let mut beta = if mean_gap > 0.0 { 1.0 / mean_gap } else { 1.0 };
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut perp = perplexity_at_beta(&shifted, beta);
    let mut iterations = 1;
    while (perp - target_perplexity).abs() > tol && iterations < max_iter {
        if perp > target_perplexity {
            lo = beta;
            beta = if hi.is_infinite() { beta * 2.0 } else { 0.5 * (lo + hi) };
        } else {
            hi = beta;
            beta = 0.5 * (lo + hi);
        }
        perp = perplexity_at_beta(&shifted, beta);
        iterations += 1;
    }
    Ok(BandwidthResult {
        sigma: (1.0 / (2.0 * beta)).sqrt(),
        achieved_perplexity: perp,
        iterations,
    })
}
