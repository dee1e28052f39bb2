use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::mixture::{discretized_truth, sample_mixture};
use super::mlp::{Adam, Mlp};
use super::{Objective, ToyConfig};
use crate::codebook::{Codebook, Token};
use crate::error::{Error, Result};
use crate::losses::{soft_xent_unchecked, TargetSpec};
use crate::neighbor::neighbor_distribution;
use crate::numeric::softmax;
use crate::rng::{stream_seed, SplitMix64};

/// Probability above which a token counts toward the learned support.
pub const SUPPORT_THRESHOLD: f64 = 1e-4;
/// Floor applied to learned probabilities inside `KL(truth ‖ learned)`.
pub const KL_FLOOR: f64 = 1e-12;
/// Finite-difference step for [`gradient_check_mlp`].
pub const GRADCHECK_STEP: f64 = 1e-4;
/// Below this magnitude gradients are compared on an absolute scale.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnedOutput {
    Distribution(Vec<f64>),
    Point([f64; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyMetrics {
    /// `KL(truth ‖ learned)` with learned probabilities floored at `1e-12`.
    pub kl_to_truth: f64,
    /// Half the L1 distance to the truth.
    pub tv_to_truth: f64,
    /// Tokens with learned probability `>= SUPPORT_THRESHOLD`.
    pub support_size_at_threshold: usize,
    /// Learned mass on tokens present in the training set.
    pub empirical_fit_mass: f64,
    pub distinct_training_tokens: usize,
    /// Distance from the learned point to the data mean (L2 runs only).
    pub point_to_data_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyRunReport {
    pub objective: Objective,
    pub seed: u64,
    pub learned: LearnedOutput,
    /// Token distribution used for the metrics. For L2 runs this is the one-hot
    /// of the token the learned point quantizes to.
    pub learned_distribution: Vec<f64>,
    pub metrics: ToyMetrics,
    pub data_mean: [f64; 2],
    /// `(step, loss)` before each optimizer update.
    pub loss_curve: Vec<(usize, f64)>,
    pub final_loss: f64,
}

/// Everything derived from the config before training starts.
struct Setup {
    codebook: Codebook,
    samples: Vec<[f64; 2]>,
    tokens: Vec<Token>,
    /// Per-sample weight vectors for categorical objectives.
    targets: Vec<Vec<f64>>,
    model: Mlp,
}

fn setup(config: &ToyConfig) -> Result<Setup> {
    config.validate()?;
    let codebook = config.grid.codebook()?;
    let samples = sample_mixture(
        &config.mixture,
        config.n_samples,
        stream_seed(config.seed, "toy.data"),
    )?;
    let tokens = samples
        .iter()
        .map(|z| codebook.quantize(z))
        .collect::<Result<Vec<_>>>()?;
    let k = codebook.size();
    let targets = match config.objective {
        Objective::L2Regression => Vec::new(),
        Objective::Ce => tokens
            .iter()
            .map(|&t| TargetSpec::OneHot(t).weights(k))
            .collect::<Result<_>>()?,
        Objective::LabelSmoothing { epsilon } => tokens
            .iter()
            .map(|&index| TargetSpec::Smoothed { index, epsilon }.weights(k))
            .collect::<Result<_>>()?,
        Objective::Snce => {
            let temp = config.temperature()?;
            samples
                .iter()
                .map(|z| neighbor_distribution(&codebook, z, temp).map(|q| q.to_dense()))
                .collect::<Result<_>>()?
        }
    };
    let outputs = if config.objective.is_categorical() { k } else { 2 };
    let model = Mlp::new(
        config.mlp.depth,
        config.mlp.hidden_width,
        outputs,
        stream_seed(config.seed, "toy.init"),
    );
    Ok(Setup {
        codebook,
        samples,
        tokens,
        targets,
        model,
    })
}

/// Batch loss and `∂loss/∂output` for the network output.
///
/// The input is constant, so every sample sees the same output. The mean of
/// per-sample cross entropies is then the cross entropy against the mean
/// target, and the mean squared error has gradient `2 (o - mean(x))`.
fn batch_loss(config: &ToyConfig, setup: &Setup, batch: &[usize], output: &[f64]) -> (f64, Vec<f64>) {
    let inv = 1.0 / batch.len() as f64;
    if config.objective.is_categorical() {
        let mut w = vec![0.0; output.len()];
        for &i in batch {
            for (a, b) in w.iter_mut().zip(&setup.targets[i]) {
                *a += b;
            }
        }
        w.iter_mut().for_each(|x| *x *= inv);
        let r = soft_xent_unchecked(output, &w);
        (r.loss, r.grad_logits)
    } else {
        let mut loss = 0.0;
        let mut mean = [0.0; 2];
        for &i in batch {
            let x = setup.samples[i];
            loss += (output[0] - x[0]).powi(2) + (output[1] - x[1]).powi(2);
            mean[0] += x[0];
            mean[1] += x[1];
        }
        let grad = vec![2.0 * (output[0] - mean[0] * inv), 2.0 * (output[1] - mean[1] * inv)];
        (loss * inv, grad)
    }
}

fn data_mean(samples: &[[f64; 2]]) -> [f64; 2] {
    let n = samples.len() as f64;
    let (sx, sy) = samples.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
    [sx / n, sy / n]
}

/// Train the constant-input MLP on the configured objective.
///
/// Deterministic given the config: the data, the initialization and the
/// minibatch draws each come from their own stream of `config.seed`.
pub fn train_toy(config: &ToyConfig) -> Result<ToyRunReport> {
    let mut setup = setup(config)?;
    let n = setup.samples.len();
    let full: Vec<usize> = (0..n).collect();
    let mut batch_rng = SplitMix64::new(stream_seed(config.seed, "toy.batch"));
    let o = config.optimizer;
    let mut adam = Adam::new(setup.model.num_params(), o.learning_rate, o.betas, o.eps);
    let mut loss_curve = Vec::with_capacity(config.steps);

    let mut batch = full.clone();
    for step in 0..config.steps {
        if let Some(b) = config.batch_size.filter(|&b| b < n) {
            batch.clear();
            batch.extend((0..b).map(|_| batch_rng.below(n)));
        }
        let pass = setup.model.forward();
        let (loss, grad_out) = batch_loss(config, &setup, &batch, pass.output());
        if !loss.is_finite() {
            return Err(Error::Diverged { step, loss });
        }
        loss_curve.push((step, loss));
        setup.model.backward_adam_step(&pass, &grad_out, &mut adam);
    }

    let pass = setup.model.forward();
    let (final_loss, _) = batch_loss(config, &setup, &full, pass.output());
    if !final_loss.is_finite() {
        return Err(Error::Diverged {
            step: config.steps,
            loss: final_loss,
        });
    }
    let mean = data_mean(&setup.samples);
    let k = setup.codebook.size();
    let (learned, learned_distribution, point_dist) = if config.objective.is_categorical() {
        let p = softmax(pass.output());
        (LearnedOutput::Distribution(p.clone()), p, None)
    } else {
        let pt = [pass.output()[0], pass.output()[1]];
        let mut p = vec![0.0; k];
        p[setup.codebook.quantize(&pt)?] = 1.0;
        let d = ((pt[0] - mean[0]).powi(2) + (pt[1] - mean[1]).powi(2)).sqrt();
        (LearnedOutput::Point(pt), p, Some(d))
    };
    let truth = discretized_truth(&config.mixture, &config.grid)?;
    let metrics = score(&truth, &learned_distribution, &setup.tokens, point_dist);
    Ok(ToyRunReport {
        objective: config.objective,
        seed: config.seed,
        learned,
        learned_distribution,
        metrics,
        data_mean: mean,
        loss_curve,
        final_loss,
    })
}

fn score(truth: &[f64], learned: &[f64], tokens: &[Token], point_dist: Option<f64>) -> ToyMetrics {
    let kl = truth
        .iter()
        .zip(learned)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, p)| t * (t.ln() - p.max(KL_FLOOR).ln()))
        .sum();
    let tv = 0.5 * truth.iter().zip(learned).map(|(t, p)| (t - p).abs()).sum::<f64>();
    let distinct: BTreeSet<Token> = tokens.iter().copied().collect();
    ToyMetrics {
        kl_to_truth: kl,
        tv_to_truth: tv,
        support_size_at_threshold: learned.iter().filter(|&&p| p >= SUPPORT_THRESHOLD).count(),
        empirical_fit_mass: distinct.iter().map(|&t| learned[t]).sum(),
        distinct_training_tokens: distinct.len(),
        point_to_data_mean: point_dist,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientCheckReport {
    /// `max |a - n| / max(|a|, |n|, GRADCHECK_FLOOR)` over the probes.
    pub max_rel_deviation: f64,
    pub probes: usize,
    /// Probes redrawn because the `±step` perturbation flipped a ReLU.
    pub skipped_kinks: usize,
}

/// Compare backprop gradients of the full-batch loss at initialization with
/// central differences (`GRADCHECK_STEP`, 64-bit) on `n_probes` randomly
/// chosen parameters.
///
/// A probe whose perturbation changes any ReLU on/off state is redrawn, since
/// the loss is not differentiable across the kink; at most `10 * n_probes`
/// draws are made.
pub fn gradient_check_mlp(config: &ToyConfig, n_probes: usize) -> Result<GradientCheckReport> {
    let setup = setup(config)?;
    let full: Vec<usize> = (0..setup.samples.len()).collect();
    let pass = setup.model.forward();
    let pattern = pass.activation_pattern();
    let (_, grad_out) = batch_loss(config, &setup, &full, pass.output());
    let mut grad = vec![0.0; setup.model.num_params()];
    setup.model.backward(&pass, &grad_out, &mut grad);

    let mut rng = SplitMix64::new(stream_seed(config.seed, "toy.gradcheck"));
    let mut model = setup.model.clone();
    let (mut probes, mut skipped, mut max_dev) = (0, 0, 0.0f64);
    let mut draws = 0;
    while probes < n_probes && draws < 10 * n_probes.max(1) {
        draws += 1;
        let idx = rng.below(model.num_params());
        let orig = model.params()[idx];
        model.params_mut()[idx] = orig + GRADCHECK_STEP;
        let plus = model.forward();
        model.params_mut()[idx] = orig - GRADCHECK_STEP;
        let minus = model.forward();
        model.params_mut()[idx] = orig;
        if plus.activation_pattern() != pattern || minus.activation_pattern() != pattern {
            skipped += 1;
            continue;
        }
        let (lp, _) = batch_loss(config, &setup, &full, plus.output());
        let (lm, _) = batch_loss(config, &setup, &full, minus.output());
        let numeric = (lp - lm) / (2.0 * GRADCHECK_STEP);
        let analytic = grad[idx];
        let dev = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
        max_dev = max_dev.max(dev);
        probes += 1;
    }
    Ok(GradientCheckReport {
        max_rel_deviation: max_dev,
        probes,
        skipped_kinks: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::{GridSpec, MlpSpec};

    fn small(objective: Objective) -> ToyConfig {
        ToyConfig {
            grid: GridSpec {
                lo: -5.0,
                hi: 5.0,
                n_per_axis: 10,
            },
            n_samples: 30,
            steps: 200,
            mlp: MlpSpec {
                depth: 3,
                hidden_width: 16,
                ..MlpSpec::default()
            },
            objective,
            ..ToyConfig::default()
        }
    }

    #[test]
    fn small_runs_are_valid_and_deterministic() {
        for obj in [
            Objective::L2Regression,
            Objective::Ce,
            Objective::Snce,
            Objective::LabelSmoothing { epsilon: 0.1 },
        ] {
            let c = small(obj);
            let a = train_toy(&c).unwrap();
            let b = train_toy(&c).unwrap();
            assert_eq!(a, b);
            assert!((a.learned_distribution.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(a.learned_distribution.iter().all(|&p| p >= 0.0));
            assert!(a.metrics.kl_to_truth.is_finite());
            assert!(a.loss_curve.last().unwrap().1 < a.loss_curve[0].1);
        }
    }

    #[test]
    fn linear_model_gradients_are_exact() {
        let mut c = small(Objective::Ce);
        c.grid.n_per_axis = 3;
        c.mlp.depth = 1;
        let r = gradient_check_mlp(&c, 50).unwrap();
        assert_eq!(r.probes, 50);
        assert!(r.max_rel_deviation < 1e-8, "{r:?}");
    }

    #[test]
    fn divergence_is_reported() {
        let mut c = small(Objective::Ce);
        c.optimizer.learning_rate = 1e300;
        c.steps = 50;
        match train_toy(&c) {
            Err(Error::Diverged { step, .. }) => assert!(step > 0),
            other => panic!("expected divergence, got {:?}", other.map(|r| r.final_loss)),
        }
    }
}
