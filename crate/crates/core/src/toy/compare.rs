use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::{train_toy, ToyRunReport};
use super::{discretized_truth, Objective, ToyConfig};
use crate::error::{Error, Result};
use crate::neighbor::TemperatureParam;

/// Which runs to make per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub objectives: Vec<Objective>,
    /// Extra SNCE runs, one per `τ`.
    pub tau_grid: Vec<f64>,
    /// Extra label-smoothed CE runs, one per `ε`.
    pub smoothing_grid: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            objectives: vec![Objective::L2Regression, Objective::Ce, Objective::Snce],
            tau_grid: Vec::new(),
            smoothing_grid: Vec::new(),
        }
    }
}

impl SweepSpec {
    /// The temperature sweep `τ ∈ {0.50, 0.71, 1.00, 1.41}`.
    pub fn tau_ablation() -> Vec<f64> {
        vec![0.50, 0.71, 1.00, 1.41]
    }

    /// Label-smoothing strengths `ε ∈ {0.05, 0.1}`.
    pub fn smoothing_ablation() -> Vec<f64> {
        vec![0.05, 0.1]
    }

    fn runs(&self, base: &ToyConfig) -> Vec<(String, ToyConfig)> {
        let mut out: Vec<(String, ToyConfig)> = self
            .objectives
            .iter()
            .map(|&o| (o.label(), base.clone().with_objective(o)))
            .collect();
        for &tau in &self.tau_grid {
            let mut c = base.clone().with_objective(Objective::Snce);
            c.temperature = TemperatureParam::Tau(tau);
            out.push((format!("snce_tau{tau:.2}"), c));
        }
        for &epsilon in &self.smoothing_grid {
            let o = Objective::LabelSmoothing { epsilon };
            out.push((o.label(), base.clone().with_objective(o)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub seed: u64,
    pub config: ToyConfig,
    pub report: ToyRunReport,
}

/// Per-label means over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub label: String,
    pub runs: usize,
    pub mean_kl_to_truth: f64,
    pub mean_tv_to_truth: f64,
    pub mean_support_size: f64,
    pub mean_empirical_fit_mass: f64,
    pub mean_final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub truth: Vec<f64>,
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<Aggregate>,
}

impl Comparison {
    pub fn aggregate(&self, label: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.label == label)
    }

    pub fn runs_for<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a RunRecord> + 'a {
        self.runs.iter().filter(move |r| r.label == label)
    }
}

/// Train every run of `sweep` for every seed.
///
/// Runs are independent and execute in parallel; each run is itself
/// single-threaded and the results keep the (seed, run) order, so the output
/// is the same for any thread count.
pub fn compare_objectives(base: &ToyConfig, seeds: &[u64], sweep: &SweepSpec) -> Result<Comparison> {
    if seeds.is_empty() {
        return Err(Error::invalid("seeds", "need at least one seed"));
    }
    base.validate()?;
    let plan: Vec<(String, u64, ToyConfig)> = seeds
        .iter()
        .flat_map(|&seed| {
            sweep
                .runs(&base.clone().with_seed(seed))
                .into_iter()
                .map(move |(label, c)| (label, seed, c))
        })
        .collect();
    if plan.is_empty() {
        return Err(Error::invalid("sweep", "no runs requested"));
    }
    let runs: Vec<RunRecord> = plan
        .into_par_iter()
        .map(|(label, seed, config)| {
            let report = train_toy(&config)?;
            Ok(RunRecord {
                label,
                seed,
                config,
                report,
            })
        })
        .collect::<Result<_>>()?;

    let mut labels: Vec<String> = Vec::new();
    for r in &runs {
        if !labels.contains(&r.label) {
            labels.push(r.label.clone());
        }
    }
    let aggregates = labels
        .into_iter()
        .map(|label| {
            let group: Vec<&RunRecord> = runs.iter().filter(|r| r.label == label).collect();
            let n = group.len() as f64;
            let mean = |f: &dyn Fn(&RunRecord) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
            Aggregate {
                runs: group.len(),
                mean_kl_to_truth: mean(&|r| r.report.metrics.kl_to_truth),
                mean_tv_to_truth: mean(&|r| r.report.metrics.tv_to_truth),
                mean_support_size: mean(&|r| r.report.metrics.support_size_at_threshold as f64),
                mean_empirical_fit_mass: mean(&|r| r.report.metrics.empirical_fit_mass),
                mean_final_loss: mean(&|r| r.report.final_loss),
                label,
            }
        })
        .collect();

    Ok(Comparison {
        truth: discretized_truth(&base.mixture, &base.grid)?,
        runs,
        aggregates,
    })
}
