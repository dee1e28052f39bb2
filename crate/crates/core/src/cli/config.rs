use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::toy::{Objective, SweepSpec, ToyConfig};

/// On-disk experiment description for `snce toy`.
///
/// `toy` is the shared base config; each seed trains every objective plus
/// one SNCE run per `tau_grid` entry and one smoothed-CE run per
/// `smoothing_grid` entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub toy: ToyConfig,
    pub objectives: Vec<Objective>,
    pub seeds: Vec<u64>,
    pub tau_grid: Vec<f64>,
    pub smoothing_grid: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sweep = SweepSpec::default();
        Self {
            toy: ToyConfig::default(),
            objectives: sweep.objectives,
            seeds: vec![0],
            tau_grid: sweep.tau_grid,
            smoothing_grid: sweep.smoothing_grid,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn sweep(&self) -> SweepSpec {
        SweepSpec {
            objectives: self.objectives.clone(),
            tau_grid: self.tau_grid.clone(),
            smoothing_grid: self.smoothing_grid.clone(),
        }
    }

    /// Field names in errors are prefixed with `toy.` where they refer to
    /// the base config.
    pub fn validate(&self) -> Result<()> {
        self.toy.validate().map_err(|e| match e {
            Error::InvalidConfig { field, reason } => Error::InvalidConfig {
                field: format!("toy.{field}"),
                reason,
            },
            other => other,
        })?;
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        if self.objectives.is_empty() && self.tau_grid.is_empty() && self.smoothing_grid.is_empty() {
            return Err(Error::config("objectives", "no runs requested"));
        }
        if let Some(t) = self.tau_grid.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::config("tau_grid", format!("τ must be positive, got {t}")));
        }
        if let Some(e) = self.smoothing_grid.iter().find(|e| !(0.0..1.0).contains(*e)) {
            return Err(Error::config("smoothing_grid", format!("ε must lie in [0, 1), got {e}")));
        }
        for o in &self.objectives {
            self.toy.clone().with_objective(*o).validate().map_err(|e| match e {
                Error::InvalidConfig { field, reason } => Error::InvalidConfig {
                    field: format!("objectives[{}].{field}", o.label()),
                    reason,
                },
                other => other,
            })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grid_names_the_field() {
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"toy": {"grid": {"lo": -5, "hi": 5, "n_per_axis": 0}}}"#).unwrap();
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("toy.grid.n_per_axis"), "{msg}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"seed": 3}"#).is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"toy": {"stepz": 3}}"#).is_err());
    }

    #[test]
    fn empty_document_is_the_default() {
        let c: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        c.validate().unwrap();
    }
}
