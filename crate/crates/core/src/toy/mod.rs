//! The two-Gaussian grid experiment.
//!
//! One continuous 2D latent is drawn from a Gaussian mixture and quantized on
//! a uniform grid, so the vocabulary is large (2,500 tokens by default) while
//! the dataset is small (100 samples). A deep MLP with a constant input learns
//! either a 2D point (L2 regression) or a categorical distribution over the
//! grid tokens (CE, label-smoothed CE, SNCE). Recovered distributions are
//! scored against the exact discretized mixture.

mod compare;
mod mixture;
mod mlp;
mod train;

pub use compare::{compare_objectives, Aggregate, Comparison, RunRecord, SweepSpec};
pub use mixture::{discretized_truth, sample_mixture, MixtureSpec};
pub use mlp::{Activation, Adam, ForwardPass, Mlp, OptimizerKind};
pub use train::{
    gradient_check_mlp, train_toy, GradientCheckReport, LearnedOutput, ToyMetrics, ToyRunReport,
    SUPPORT_THRESHOLD,
};

use serde::{Deserialize, Serialize};

use crate::codebook::{grid_axis, grid_codebook, Codebook};
use crate::error::{Error, Result};
use crate::neighbor::{Temperature, TemperatureParam};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n_per_axis: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lo: -5.0,
            hi: 5.0,
            n_per_axis: 50,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::config(
                "grid.lo",
                format!("need finite lo < hi, got [{}, {}]", self.lo, self.hi),
            ));
        }
        if self.n_per_axis < 2 {
            return Err(Error::config(
                "grid.n_per_axis",
                format!("need at least 2 points per axis, got {}", self.n_per_axis),
            ));
        }
        Ok(())
    }

    pub fn axis(&self) -> Result<Vec<f64>> {
        grid_axis(self.lo, self.hi, self.n_per_axis)
    }

    pub fn codebook(&self) -> Result<Codebook> {
        grid_codebook(self.lo, self.hi, self.n_per_axis)
    }

    pub fn size(&self) -> usize {
        self.n_per_axis * self.n_per_axis
    }
}

/// Training objective of a toy run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Squared error between the predicted point and each raw sample.
    L2Regression,
    /// Cross entropy against the one-hot quantized token.
    Ce,
    /// Cross entropy against the stochastic-neighbor distribution.
    Snce,
    /// Cross entropy against a label-smoothed one-hot token.
    LabelSmoothing { epsilon: f64 },
}

impl Objective {
    pub fn label(&self) -> String {
        match self {
            Objective::L2Regression => "l2".into(),
            Objective::Ce => "ce".into(),
            Objective::Snce => "snce".into(),
            Objective::LabelSmoothing { epsilon } => format!("ce_ls{epsilon}"),
        }
    }

    pub fn is_categorical(&self) -> bool {
        !matches!(self, Objective::L2Regression)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpSpec {
    /// Number of linear layers, including the output head.
    pub depth: usize,
    pub hidden_width: usize,
    pub activation: Activation,
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self {
            depth: 10,
            hidden_width: 256,
            activation: Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub betas: [f64; 2],
    pub eps: f64,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            betas: [0.9, 0.999],
            eps: 1e-8,
        }
    }
}

/// Full description of one toy training run. Missing JSON fields take the
/// defaults below; unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyConfig {
    pub mixture: MixtureSpec,
    pub grid: GridSpec,
    pub n_samples: usize,
    pub objective: Objective,
    /// Neighbor temperature; only read by [`Objective::Snce`].
    pub temperature: TemperatureParam,
    pub steps: usize,
    /// Minibatch size; `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub mlp: MlpSpec,
    pub optimizer: OptimizerSpec,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            mixture: MixtureSpec::default(),
            grid: GridSpec::default(),
            n_samples: 100,
            objective: Objective::Snce,
            temperature: TemperatureParam::TwoTauSq(1.0),
            steps: 2000,
            batch_size: None,
            mlp: MlpSpec::default(),
            optimizer: OptimizerSpec::default(),
            seed: 0,
        }
    }
}

impl ToyConfig {
    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn temperature(&self) -> Result<Temperature> {
        self.temperature
            .resolve()
            .map_err(|e| Error::config("temperature", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.mixture.validate()?;
        self.grid.validate()?;
        if self.n_samples == 0 {
            return Err(Error::config("n_samples", "must be at least 1"));
        }
        if self.steps == 0 {
            return Err(Error::config("steps", "must be at least 1"));
        }
        if let Some(b) = self.batch_size {
            if b == 0 || b > self.n_samples {
                return Err(Error::config(
                    "batch_size",
                    format!("must lie in 1..={}, got {b}", self.n_samples),
                ));
            }
        }
        if self.mlp.depth == 0 {
            return Err(Error::config("mlp.depth", "must be at least 1"));
        }
        if self.mlp.hidden_width == 0 {
            return Err(Error::config("mlp.hidden_width", "must be at least 1"));
        }
        let o = &self.optimizer;
        if !(o.learning_rate.is_finite() && o.learning_rate > 0.0) {
            return Err(Error::config("optimizer.learning_rate", "must be positive"));
        }
        if o.betas.iter().any(|b| !(0.0..1.0).contains(b)) {
            return Err(Error::config("optimizer.betas", "each beta must lie in [0, 1)"));
        }
        if !(o.eps.is_finite() && o.eps > 0.0) {
            return Err(Error::config("optimizer.eps", "must be positive"));
        }
        if let Objective::LabelSmoothing { epsilon } = self.objective {
            if !(0.0..1.0).contains(&epsilon) {
                return Err(Error::config(
                    "objective.label_smoothing.epsilon",
                    format!("must lie in [0, 1), got {epsilon}"),
                ));
            }
        }
        self.temperature()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_json() {
        let c = ToyConfig::default();
        let s = serde_json::to_string(&c).unwrap();
        let back: ToyConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ToyConfig>(r#"{"stpes": 10}"#).is_err());
        assert!(serde_json::from_str::<ToyConfig>(r#"{"grid": {"lo": 0, "hi": 1}}"#).is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let c: ToyConfig =
            serde_json::from_str(r#"{"grid": {"lo": -5, "hi": 5, "n_per_axis": 0}}"#).unwrap();
        match c.validate() {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "grid.n_per_axis"),
            other => panic!("{other:?}"),
        }
        let c = ToyConfig {
            objective: Objective::LabelSmoothing { epsilon: 1.2 },
            ..ToyConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn objective_json_forms() {
        let o: Objective = serde_json::from_str(r#""l2_regression""#).unwrap();
        assert_eq!(o, Objective::L2Regression);
        let o: Objective = serde_json::from_str(r#"{"label_smoothing": {"epsilon": 0.05}}"#).unwrap();
        assert_eq!(o.label(), "ce_ls0.05");
    }
}
