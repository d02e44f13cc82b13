//! Run configuration read from a single TOML file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::impacts::{CostFactors, EmissionFactors, RewardConfig, Standards};
use crate::influent::InfluentConfig;
use crate::marl::TrainConfig;
use crate::plant::PlantParams;
use crate::scenarios::{ExperimentPlan, ScenarioName};

/// Commented default configuration; parses to `RunConfig::default()`.
pub const DEFAULT_TOML: &str = include_str!("../../../config/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of single runs (`train`, `evaluate`, `bounds sample`).
    pub seed: u64,
    /// Seeds of `scenarios run`.
    pub seeds: Vec<u64>,
    pub scenarios: Vec<ScenarioName>,
    /// Random intervals sampled for the normalization extremes.
    pub bounds_samples: usize,
    pub influent: InfluentConfig,
    pub plant: PlantParams,
    pub emissions: EmissionFactors,
    pub costs: CostFactors,
    pub standards: Standards,
    pub reward: RewardConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            seeds: (0..5).collect(),
            scenarios: ScenarioName::ALL.to_vec(),
            bounds_samples: 10_000,
            influent: InfluentConfig::default(),
            plant: PlantParams::default(),
            emissions: EmissionFactors::default(),
            costs: CostFactors::default(),
            standards: Standards::default(),
            reward: RewardConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.environment().validate()?;
        self.standards.validate()?;
        self.reward.validate()?;
        self.train.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.scenarios.is_empty() {
            return Err(Error::Config("scenarios must not be empty".into()));
        }
        if self.bounds_samples == 0 {
            return Err(Error::Config("bounds_samples must be > 0".into()));
        }
        Ok(())
    }

    pub fn environment(&self) -> Environment {
        Environment {
            plant: self.plant.clone(),
            influent: self.influent.clone(),
            emissions: self.emissions.clone(),
            costs: self.costs.clone(),
        }
    }

    /// Training settings with the run seed applied.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..self.train.clone() }
    }

    pub fn experiment_plan(&self) -> ExperimentPlan {
        ExperimentPlan {
            env: self.environment(),
            reward: self.reward.clone(),
            train: self.train.clone(),
            standards: self.standards.clone(),
            scenarios: self.scenarios.clone(),
            seeds: self.seeds.clone(),
            bounds_samples: self.bounds_samples,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_file_parses_to_the_defaults() {
        assert_eq!(RunConfig::from_toml(DEFAULT_TOML).unwrap(), RunConfig::default());
    }

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn serialized_defaults_round_trip() {
        let text = toml::to_string(&RunConfig::default()).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(RunConfig::from_toml("sede = 3").is_err());
        assert!(RunConfig::from_toml("[plant]\nsrt = 3.0").is_err());
        assert!(RunConfig::from_toml("[train]\ngamma = 1.5").is_err());
        assert!(RunConfig::from_toml("seeds = []").is_err());
        assert!(RunConfig::from_toml("scenarios = [\"LCA-XX\"]").is_err());
        assert!(RunConfig::from_toml(
            "[standards.grade_1a]\nname = \"I-A\"\ncod = 0.0\nnh3n = 5.0\ntn = 15.0\ntp = 0.5"
        )
        .is_err());
    }

    #[test]
    fn overrides_reach_the_environment() {
        let cfg = RunConfig::from_toml("seed = 9\n[plant]\nsrt_target = 12.0\n[costs]\nmisc = 0.4").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.environment().plant.srt_target, 12.0);
        assert_eq!(cfg.environment().costs.misc, 0.4);
        assert_eq!(cfg.train_config(4).seed, 4);
    }
}
