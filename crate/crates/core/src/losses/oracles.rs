//! Independent routes to the SNCE objective: sampling tokens from the
//! neighbor distribution, the KL decomposition, and the policy-gradient form
//! of the logit gradient.

use super::{check_logits, soft_xent_unchecked};
use crate::error::{Error, Result};
use crate::neighbor::NeighborDistribution;
use crate::numeric::{self, log_softmax};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    /// Standard error of the mean (sample standard deviation / √n).
    pub stderr: f64,
}

fn dense_checked(logits: &[f64], q: &NeighborDistribution) -> Result<Vec<f64>> {
    check_logits(logits)?;
    if q.size() != logits.len() {
        return Err(Error::DimensionMismatch {
            expected: logits.len(),
            got: q.size(),
        });
    }
    q.validate()?;
    Ok(q.to_dense())
}

/// Estimate the SNCE loss by drawing `n_samples` tokens `y ~ q` (inverse CDF
/// on a seeded SplitMix64 stream) and averaging their one-hot CE losses.
pub fn mc_snce_estimate(
    logits: &[f64],
    q: &NeighborDistribution,
    n_samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be at least 1"));
    }
    let q = dense_checked(logits, q)?;
    let log_p = log_softmax(logits);
    let mut cdf = Vec::with_capacity(q.len());
    let mut acc = 0.0;
    for &x in &q {
        acc += x;
        cdf.push(acc);
    }
    let last_positive = q.iter().rposition(|&x| x > 0.0).unwrap_or(0);

    // Draws are tallied per token; the sample mean and variance are then
    // exact functions of the counts.
    let mut rng = SplitMix64::new(seed);
    let mut counts = vec![0u64; q.len()];
    for _ in 0..n_samples {
        let u = rng.next_f64() * acc;
        let k = cdf.partition_point(|&c| c <= u).min(last_positive);
        counts[k] += 1;
    }
    let n = n_samples as f64;
    let mean: f64 = counts
        .iter()
        .zip(&log_p)
        .filter(|(c, _)| **c > 0)
        .map(|(&c, lp)| (c as f64 / n) * -lp)
        .sum();
    let stderr = if n_samples > 1 {
        let ss: f64 = counts
            .iter()
            .zip(&log_p)
            .filter(|(c, _)| **c > 0)
            .map(|(&c, lp)| c as f64 * (-lp - mean).powi(2))
            .sum();
        (ss / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        estimate: mean,
        stderr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlDecomposition {
    /// `D_KL(q ‖ p)`, summed directly as `Σ q log(q/p)`.
    pub kl: f64,
    /// `H(q, p) = -Σ q log p`.
    pub xent: f64,
    /// `H(q)`.
    pub entropy: f64,
}

/// The three terms of `KL(q‖p) = H(q, p) - H(q)`, each computed separately.
pub fn kl_decomposition_check(logits: &[f64], q: &NeighborDistribution) -> Result<KlDecomposition> {
    let q = dense_checked(logits, q)?;
    let log_p = log_softmax(logits);
    let mut kl = 0.0;
    let mut xent = 0.0;
    for (&qk, &lp) in q.iter().zip(&log_p) {
        if qk > 0.0 {
            kl += qk * (qk.ln() - lp);
            xent -= qk * lp;
        }
    }
    Ok(KlDecomposition {
        kl,
        xent,
        entropy: numeric::entropy(&q),
    })
}

/// Reward of the CE policy-gradient view: `I{a = y} / p(a)`.
pub fn ce_reward(action: usize, label: usize, p: &[f64]) -> f64 {
    if action == label {
        1.0 / p[action]
    } else {
        0.0
    }
}

/// Reward of the SNCE policy-gradient view: `q_a / p(a)`.
pub fn snce_reward(action: usize, q: &[f64], p: &[f64]) -> f64 {
    q[action] / p[action]
}

/// Compare the policy gradient `E_{a~p}[r(a) ∇_h log p(a)]` with reward
/// `r(a) = q_a / p(a)` against `-∂loss/∂h` from [`super::soft_xent`].
/// Returns the largest absolute component difference.
pub fn policy_gradient_check(logits: &[f64], q: &NeighborDistribution) -> Result<f64> {
    let q = dense_checked(logits, q)?;
    let size = logits.len();
    let p = numeric::softmax(logits);

    let mut policy_grad = vec![0.0; size];
    for a in 0..size {
        let weight = p[a] * snce_reward(a, &q, &p);
        if weight == 0.0 {
            continue;
        }
        // ∇_h log p(a) = e_a - p
        for (k, g) in policy_grad.iter_mut().enumerate() {
            let score = if k == a { 1.0 - p[k] } else { -p[k] };
            *g += weight * score;
        }
    }

    let report = soft_xent_unchecked(logits, &q);
    Ok(policy_grad
        .iter()
        .zip(&report.grad_logits)
        .map(|(pg, g)| (pg + g).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{soft_xent, TargetSpec};

    fn three_code_q() -> NeighborDistribution {
        let w = [1.0, (-1.0f64).exp(), (-4.0f64).exp()];
        let z: f64 = w.iter().sum();
        NeighborDistribution::Dense(w.iter().map(|x| x / z).collect())
    }

    #[test]
    fn one_hot_sampling_is_exact() {
        let h = [0.3, 1.0, -2.0];
        let q = NeighborDistribution::Dense(vec![0.0, 1.0, 0.0]);
        let mc = mc_snce_estimate(&h, &q, 1000, 9).unwrap();
        let ce = soft_xent(&h, &TargetSpec::OneHot(1)).unwrap().loss;
        assert_eq!(mc.estimate, ce);
        assert_eq!(mc.stderr, 0.0);
    }

    #[test]
    fn sampling_is_deterministic_and_unbiased() {
        let h = [1.0, 0.0, -1.0];
        let q = three_code_q();
        let a = mc_snce_estimate(&h, &q, 100_000, 5).unwrap();
        let b = mc_snce_estimate(&h, &q, 100_000, 5).unwrap();
        assert_eq!(a, b);
        let exact = soft_xent(&h, &TargetSpec::Neighbor(q)).unwrap().loss;
        assert!((a.estimate - exact).abs() <= 3.0 * a.stderr, "{a:?} vs {exact}");
    }

    #[test]
    fn kl_identity_cases() {
        let h = [2.0, 0.5, -1.0];
        let p = numeric::softmax(&h);
        let d = kl_decomposition_check(&h, &NeighborDistribution::Dense(p)).unwrap();
        assert!(d.kl.abs() < 1e-15);
        assert!((d.xent - d.entropy).abs() < 1e-15);

        let onehot = NeighborDistribution::Dense(vec![1.0, 0.0, 0.0]);
        let d = kl_decomposition_check(&h, &onehot).unwrap();
        assert_eq!(d.entropy, 0.0);
        assert!((d.kl - d.xent).abs() < 1e-15);

        let d = kl_decomposition_check(&[1.0, 0.0, -1.0], &three_code_q()).unwrap();
        assert!((d.kl - (d.xent - d.entropy)).abs() < 1e-9);
    }

    #[test]
    fn policy_gradient_small_cases() {
        let q = NeighborDistribution::Dense(vec![1.0, 0.0]);
        assert!(policy_gradient_check(&[0.0, 0.0], &q).unwrap() < 1e-12);
        assert!(policy_gradient_check(&[1.0, 0.0, -1.0], &three_code_q()).unwrap() < 1e-10);
    }

    #[test]
    fn rewards() {
        let p = [0.25, 0.75];
        assert_eq!(ce_reward(0, 0, &p), 4.0);
        assert_eq!(ce_reward(1, 0, &p), 0.0);
        assert_eq!(snce_reward(1, &[0.5, 0.5], &p), 0.5 / 0.75);
    }

    #[test]
    fn invalid_q_rejected() {
        let q = NeighborDistribution::Dense(vec![0.6, 0.6]);
        assert!(kl_decomposition_check(&[0.0, 0.0], &q).is_err());
        assert!(mc_snce_estimate(&[0.0, 0.0], &q, 10, 0).is_err());
        let q = NeighborDistribution::Dense(vec![0.5, 0.5]);
        assert!(policy_gradient_check(&[0.0, 0.0, 0.0], &q).is_err());
        assert!(mc_snce_estimate(&[0.0, 0.0], &q, 0, 0).is_err());
    }
}
