use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::backtest::StrategyConfig;
use crate::dataset::Horizon;
use crate::features::{BetaDefinition, FeatureConfig, DEFAULT_MIN_OBSERVATIONS};
use crate::model::{ModelConfig, ModelKind};
use crate::synth::SynthConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    /// Directory holding the fixture bundle.
    pub fixtures: PathBuf,
    /// Root of every stage's artifacts (the report store lives in `store/`).
    pub work: PathBuf,
    /// Extra mapping tables loaded on top of the built-in ones.
    pub mappings: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            fixtures: PathBuf::from("fixtures"),
            work: PathBuf::from("work"),
            mappings: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSettings {
    pub beta: BetaDefinition,
    pub beta_min_observations: usize,
    pub macro_staleness_days: i64,
    /// First as-of date of the quarterly grid; defaults to the earliest date a
    /// report becomes visible.
    pub from: Option<NaiveDate>,
    /// Last as-of date; defaults to the last price date.
    pub to: Option<NaiveDate>,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        Self {
            beta: BetaDefinition::default(),
            beta_min_observations: DEFAULT_MIN_OBSERVATIONS,
            macro_staleness_days: 20,
            from: None,
            to: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestSettings {
    /// Defaults to the first forecast date after the train/test boundary.
    pub from: Option<NaiveDate>,
    /// Defaults to the last forecast date.
    pub to: Option<NaiveDate>,
    pub top_k: usize,
}

impl Default for BacktestSettings {
    fn default() -> Self {
        Self {
            from: None,
            to: None,
            top_k: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub synth: u64,
    pub model: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { synth: 7, model: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub horizons: Vec<Horizon>,
    pub train_fraction: f64,
    /// Months between a report's publication and its first use.
    pub lag_months: u32,
    /// Rows with a larger share of missing features are left out of datasets.
    pub max_missing_fraction: f64,
    pub features: FeatureSettings,
    pub models: Vec<ModelKind>,
    pub model: ModelConfig,
    /// Model whose probabilities feed the market outlook and top-k portfolios.
    pub outlook_model: ModelKind,
    pub strategy: StrategyConfig,
    pub backtest: BacktestSettings,
    pub seeds: Seeds,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            paths: PathsConfig::default(),
            horizons: Horizon::all().collect(),
            train_fraction: 0.75,
            lag_months: 1,
            max_missing_fraction: 0.25,
            features: FeatureSettings::default(),
            models: ModelKind::ALL.to_vec(),
            model: ModelConfig::default(),
            outlook_model: ModelKind::Mlp,
            strategy: StrategyConfig::default(),
            backtest: BacktestSettings::default(),
            seeds: Seeds::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Load a TOML config; relative paths are resolved against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.paths.fixtures = base.join(&cfg.paths.fixtures);
        cfg.paths.work = base.join(&cfg.paths.work);
        if let Some(m) = &cfg.paths.mappings {
            cfg.paths.mappings = Some(base.join(m));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.horizons.is_empty() {
            return bad("horizons must not be empty".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction {} outside (0, 1)", self.train_fraction));
        }
        if !(0.0..=1.0).contains(&self.max_missing_fraction) {
            return bad(format!("max_missing_fraction {} outside [0, 1]", self.max_missing_fraction));
        }
        if self.models.is_empty() {
            return bad("models must not be empty".into());
        }
        if !self.models.contains(&self.outlook_model) {
            return bad(format!("outlook_model {} is not among the trained models", self.outlook_model.as_str()));
        }
        if self.backtest.top_k == 0 {
            return bad("backtest.top_k must be positive".into());
        }
        self.strategy.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            lag_months: self.lag_months,
            beta: self.features.beta,
            beta_min_observations: self.features.beta_min_observations,
            macro_staleness_days: self.features.macro_staleness_days,
        }
    }

    /// Sorted, de-duplicated horizons.
    pub fn horizons(&self) -> Vec<Horizon> {
        let mut h = self.horizons.clone();
        h.sort();
        h.dedup();
        h
    }
}
