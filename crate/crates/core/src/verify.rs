//! The property suite behind `snce verify`.
//!
//! Each check recomputes a quantity along an independent route (finite
//! differences, sampling, direct summation, a naive reference) and compares
//! it with the library result at a fixed tolerance.

use ndarray::Array2;
use serde::Serialize;

use crate::codebook::{grid_codebook, Codebook, Metric};
use crate::error::Result;
use crate::losses::{
    kl_decomposition_check, mc_snce_estimate, policy_gradient_check, soft_xent, snce_target,
    TargetSpec,
};
use crate::masked::elbo_expectation_check;
use crate::neighbor::reference::naive_neighbor_probs;
use crate::neighbor::{
    neighbor_distribution, probs_from_distances, topk_from_distances, NeighborDistribution,
    Temperature,
};
use crate::rng::SplitMix64;
use crate::toy::{gradient_check_mlp, Objective, ToyConfig};

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Test hook: perturb the analytic logit gradient so the gradient check
    /// must fail.
    pub break_gradient: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Observed deviation (or statistic) compared against `threshold`.
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }
}

fn check(name: &'static str, value: f64, threshold: f64, detail: impl Into<String>) -> CheckResult {
    CheckResult {
        name,
        passed: value.is_finite() && value < threshold,
        value,
        threshold,
        detail: detail.into(),
    }
}

pub(crate) fn random_codebook(rng: &mut SplitMix64, size: usize, dim: usize, metric: Metric) -> Codebook {
    let flat: Vec<f32> = (0..size * dim).map(|_| rng.standard_normal() as f32).collect();
    Codebook::new(flat, size, dim, metric).expect("random codebook is valid")
}

fn random_vec(rng: &mut SplitMix64, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.standard_normal()).collect()
}

/// Loss by plain summation, independent of the library's log-softmax.
fn direct_loss(logits: &[f64], w: &[f64]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|h| (h - m).exp()).sum();
    let lse = m + z.ln();
    -logits
        .iter()
        .zip(w)
        .filter(|(_, w)| **w > 0.0)
        .map(|(h, w)| w * (h - lse))
        .sum::<f64>()
}

/// `max_k |analytic_k - fd_k| / max_k |fd_k|` with central differences.
pub fn logit_gradient_deviation(logits: &[f64], w: &[f64], analytic: &[f64], step: f64) -> f64 {
    let mut h = logits.to_vec();
    let mut max_err = 0.0f64;
    let mut max_ref = 0.0f64;
    for k in 0..logits.len() {
        let orig = h[k];
        h[k] = orig + step;
        let lp = direct_loss(&h, w);
        h[k] = orig - step;
        let lm = direct_loss(&h, w);
        h[k] = orig;
        let fd = (lp - lm) / (2.0 * step);
        max_err = max_err.max((analytic[k] - fd).abs());
        max_ref = max_ref.max(fd.abs());
    }
    max_err / max_ref.max(f64::MIN_POSITIVE)
}

fn target_family(rng: &mut SplitMix64, size: usize) -> Result<Vec<(&'static str, TargetSpec)>> {
    let y = rng.below(size);
    let neighbor = if size == 2500 {
        let cb = grid_codebook(-5.0, 5.0, 50)?;
        let z = [rng.next_f64() * 8.0 - 4.0, rng.next_f64() * 8.0 - 4.0];
        snce_target(&cb, &z, Temperature::new(0.71)?)?
    } else {
        let cb = random_codebook(rng, size, 3, Metric::L2Squared);
        let z = random_vec(rng, 3, 1.0);
        snce_target(&cb, &z, Temperature::new(0.71)?)?
    };
    Ok(vec![
        ("one_hot", TargetSpec::OneHot(y)),
        ("smoothed", TargetSpec::Smoothed { index: y, epsilon: 0.1 }),
        ("neighbor", neighbor),
    ])
}

fn gradient_checks(opts: &VerifyOptions, rng: &mut SplitMix64) -> Result<Vec<CheckResult>> {
    let mut worst_fd = 0.0f64;
    let mut worst_sum = 0.0f64;
    let mut sign_violations = 0usize;
    let mut cases = Vec::new();
    for size in [2usize, 10, 2500] {
        for (kind, target) in target_family(rng, size)? {
            let logits = random_vec(rng, size, 2.0);
            let w = target.weights(size)?;
            let mut r = soft_xent(&logits, &target)?;
            if opts.break_gradient {
                r.grad_logits[0] += 1e-3;
            }
            let dev = logit_gradient_deviation(&logits, &w, &r.grad_logits, 1e-5);
            worst_fd = worst_fd.max(dev);
            worst_sum = worst_sum.max(r.grad_logits.iter().sum::<f64>().abs());
            let p = crate::numeric::softmax(&logits);
            for k in 0..size {
                let g = r.grad_logits[k];
                let expect_negative = w[k] > p[k];
                if (w[k] - p[k]).abs() > 1e-12 && (g < 0.0) != expect_negative {
                    sign_violations += 1;
                }
            }
            cases.push(format!("K={size}/{kind}: {dev:.2e}"));
        }
    }
    Ok(vec![
        check("logit_gradient_fd", worst_fd, 1e-5, cases.join(", ")),
        check("gradient_sum_zero", worst_sum, 1e-9, "Σ ∂loss/∂h over all cases"),
        check(
            "gradient_sign_structure",
            sign_violations as f64,
            0.5,
            "∂loss/∂h_k < 0 exactly when w_k > p_k",
        ),
    ])
}

fn limit_checks() -> Result<Vec<CheckResult>> {
    let cb = grid_codebook(-5.0, 5.0, 50)?;
    let z = [-2.03, 0.04];
    let y = cb.quantize(&z)?;
    let cold = neighbor_distribution(&cb, &z, Temperature::new(1e-3)?)?.to_dense();
    let onehot_dev = cold
        .iter()
        .enumerate()
        .map(|(k, &q)| (q - if k == y { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    let hot = neighbor_distribution(&cb, &z, Temperature::new(1e6)?)?.to_dense();
    let uniform = 1.0 / cb.size() as f64;
    let uniform_dev = hot.iter().map(|q| (q - uniform).abs()).fold(0.0, f64::max);

    let mut rng = SplitMix64::new(17);
    let logits = random_vec(&mut rng, cb.size(), 1.0);
    let snce = soft_xent(&logits, &TargetSpec::Neighbor(NeighborDistribution::Dense(cold)))?.loss;
    let ce = soft_xent(&logits, &TargetSpec::OneHot(y))?.loss;

    Ok(vec![
        check("tau_zero_limit", onehot_dev, 1e-6, "τ = 1e-3, ‖q - onehot‖∞"),
        check("tau_infinity_limit", uniform_dev, 1e-6, "τ = 1e6, ‖q - uniform‖∞"),
        check("ce_limit", (snce - ce).abs(), 1e-5, format!("SNCE {snce:.6} vs CE {ce:.6}")),
    ])
}

fn equivalence_checks(seed: u64, rng: &mut SplitMix64) -> Result<Vec<CheckResult>> {
    let three = Codebook::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]], Metric::L2Squared)?;
    let q3 = neighbor_distribution(&three, &[0.0, 0.0], Temperature::from_two_tau_sq(1.0)?)?;
    let h3 = [1.0, 0.0, -1.0];
    let exact = soft_xent(&h3, &TargetSpec::Neighbor(q3.clone()))?.loss;
    let mc = mc_snce_estimate(&h3, &q3, 100_000, seed)?;
    let z_mc = (mc.estimate - exact).abs() / mc.stderr;

    let cb = random_codebook(rng, 100, 4, Metric::NegDot);
    let z = random_vec(rng, 4, 1.0);
    let q = neighbor_distribution(&cb, &z, Temperature::new(0.71)?)?;
    let logits = random_vec(rng, 100, 1.5);
    let kl = kl_decomposition_check(&logits, &q)?;
    let xent_direct = soft_xent(&logits, &TargetSpec::Neighbor(q.clone()))?.loss;
    let kl_dev = (kl.kl - (kl.xent - kl.entropy)).abs();
    let xent_dev = (kl.xent - xent_direct).abs();
    let kl3 = kl_decomposition_check(&h3, &q3)?;
    let kl_dev = kl_dev.max((kl3.kl - (kl3.xent - kl3.entropy)).abs());

    let pg = policy_gradient_check(&logits, &q)?.max(policy_gradient_check(&h3, &q3)?);

    let grid = grid_codebook(-5.0, 5.0, 50)?;
    let len = 8;
    let mut latents = Array2::zeros((len, 2));
    for i in 0..len {
        latents[[i, 0]] = if i % 2 == 0 { -2.0 } else { 2.0 } + 0.5 * rng.standard_normal();
        latents[[i, 1]] = 0.5 * rng.standard_normal();
    }
    let mut logits_l = Array2::zeros((len, grid.size()));
    logits_l.iter_mut().for_each(|x| *x = rng.standard_normal());
    let e = elbo_expectation_check(
        &latents,
        &logits_l,
        &grid,
        Temperature::from_two_tau_sq(1.0)?,
        20_000,
        seed,
    )?;
    let z_elbo = (e.mc_mean - e.analytic).abs() / e.stderr;

    Ok(vec![
        check(
            "monte_carlo_equivalence",
            z_mc,
            3.0,
            format!("estimate {:.6} ± {:.2e} vs exact {exact:.6} (|z|)", mc.estimate, mc.stderr),
        ),
        check("kl_decomposition", kl_dev, 1e-9, "|KL - (H(q,p) - H(q))|"),
        check("kl_xent_matches_loss", xent_dev, 1e-12, "|H(q,p) - soft_xent|"),
        check("policy_gradient_identity", pg, 1e-10, "max |Σ p r ∇log p + ∂loss/∂h|"),
        check(
            "elbo_unbiasedness",
            z_elbo,
            3.0,
            format!("MC {:.6} ± {:.2e} vs analytic {:.6} (|z|)", e.mc_mean, e.stderr, e.analytic),
        ),
    ])
}

fn stability_checks(rng: &mut SplitMix64) -> Result<Vec<CheckResult>> {
    let temp = Temperature::new(0.71)?;
    let big: Vec<f64> = (0..131_072).map(|_| rng.next_f64() * 1e4).collect();
    let q = probs_from_distances(&big, temp)?;
    let bad = q.iter().filter(|x| !x.is_finite()).count();
    let sum_dev = (q.iter().sum::<f64>() - 1.0).abs();
    let naive = naive_neighbor_probs(&big, temp);
    let big_dev = q.iter().zip(&naive).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let cb = random_codebook(rng, 4096, 16, Metric::L2Squared);
    let z = random_vec(rng, 16, 1.0);
    let d = cb.distances(&z)?;
    let dense = probs_from_distances(&d, temp)?;
    let naive = naive_neighbor_probs(&d, temp);
    let naive_dev = dense.iter().zip(&naive).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let full = topk_from_distances(&d, temp, d.len())?;
    let topk_dev = (0..d.len()).map(|k| (full.prob(k) - dense[k]).abs()).fold(0.0, f64::max);

    let mut sum_check = check(
        "large_codebook_normalization",
        sum_dev,
        1e-6,
        format!("K = 131072, distances in [0, 1e4], {bad} non-finite"),
    );
    sum_check.passed &= bad == 0;
    Ok(vec![
        sum_check,
        check("large_codebook_vs_naive", big_dev, 1e-6, "K = 131072 blocked vs two-pass"),
        check("dense_vs_naive_k4096", naive_dev, 1e-6, "K = 4096, random codebook"),
        check("topk_full_equals_dense", topk_dev, 1e-12, "M = K = 4096"),
    ])
}

fn smoothing_check() -> Result<CheckResult> {
    let mut dev = 0.0f64;
    for eps in [0.05, 0.1] {
        let w = TargetSpec::Smoothed { index: 7, epsilon: eps }.weights(2500)?;
        for (k, &x) in w.iter().enumerate() {
            let expect = if k == 7 { 1.0 - eps } else { eps / 2499.0 };
            dev = dev.max((x - expect).abs());
        }
    }
    Ok(check("label_smoothing_weights", dev, 1e-15, "ε ∈ {0.05, 0.1}, K = 2500"))
}

fn mlp_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let snce = gradient_check_mlp(&ToyConfig::default().with_seed(seed), 50)?;
    let l2 = gradient_check_mlp(
        &ToyConfig::default()
            .with_seed(seed)
            .with_objective(Objective::L2Regression),
        50,
    )?;
    Ok(vec![
        check(
            "mlp_gradient_fd_snce",
            snce.max_rel_deviation,
            1e-4,
            format!("10 layers, {} probes, {} kinks redrawn", snce.probes, snce.skipped_kinks),
        ),
        check(
            "mlp_gradient_fd_l2",
            l2.max_rel_deviation,
            1e-6,
            format!("10 layers, {} probes, {} kinks redrawn", l2.probes, l2.skipped_kinks),
        ),
    ])
}

/// Run every check. Fails only on setup errors; property failures are
/// reported in the returned table.
pub fn run_suite(opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut rng = SplitMix64::from_stream(opts.seed, "verify");
    let mut checks = gradient_checks(opts, &mut rng)?;
    checks.extend(limit_checks()?);
    checks.extend(equivalence_checks(opts.seed, &mut rng)?);
    checks.extend(stability_checks(&mut rng)?);
    checks.push(smoothing_check()?);
    checks.extend(mlp_checks(opts.seed)?);
    Ok(VerifyReport {
        seed: opts.seed,
        checks,
    })
}
