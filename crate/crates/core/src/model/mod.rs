//! Classifiers producing the probability that a stock beats the
//! fixed-income benchmark.

mod adam;
mod evaluate;
mod knn;
mod logistic;
mod mlp;
mod svm;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{Adam, AdamConfig};
pub use evaluate::{accuracy, predicted_class, AccuracyCell, AccuracyTable, AverageRow, CLASS_THRESHOLD};
pub use knn::Knn;
pub use logistic::{LogisticConfig, LogisticRegression};
pub use mlp::{Activation, Mlp, MlpFit, TrainConfig, LOSS_CLAMP};
pub use svm::{LinearSvm, SvmConfig};
pub use tree::{DecisionTree, ForestConfig, RandomForest, TreeConfig};

use crate::dataset::{Horizon, ScalerParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("training loss became non-finite at epoch {epoch} (batch {batch}): {loss}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },
    #[error("row has {got} features, model expects {expected}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("unknown model kind {0:?}")]
    UnknownKind(String),
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(u8),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mlp,
    LogisticRegression,
    Knn,
    DecisionTree,
    RandomForest,
    LinearSvm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Mlp,
        ModelKind::LinearSvm,
        ModelKind::RandomForest,
        ModelKind::DecisionTree,
        ModelKind::Knn,
        ModelKind::LogisticRegression,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::Knn => "knn",
            ModelKind::DecisionTree => "decision_tree",
            ModelKind::RandomForest => "random_forest",
            ModelKind::LinearSvm => "linear_svm",
        }
    }

    /// Short name used in accuracy tables.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Mlp => "MLP",
            ModelKind::LogisticRegression => "LR",
            ModelKind::Knn => "KNN",
            ModelKind::DecisionTree => "DT",
            ModelKind::RandomForest => "RF",
            ModelKind::LinearSvm => "SVM",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, ModelError> {
        let s = s.trim().to_ascii_lowercase();
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s || k.label().eq_ignore_ascii_case(&s))
            .ok_or(ModelError::UnknownKind(s))
    }
}

/// Scaled feature matrix with binary labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self, ModelError> {
        if features.len() != labels.len() {
            return Err(ModelError::InvalidConfig(format!(
                "{} rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
            return Err(ModelError::InvalidLabel(bad));
        }
        let width = features.first().map_or(0, Vec::len);
        if let Some(r) = features.iter().find(|r| r.len() != width) {
            return Err(ModelError::SchemaMismatch {
                expected: width,
                got: r.len(),
            });
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    fn require_nonempty(&self) -> Result<(), ModelError> {
        if self.is_empty() {
            Err(ModelError::EmptyTrainSet)
        } else {
            Ok(())
        }
    }
}

/// Hyperparameters for every model kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ModelConfig {
    pub mlp: TrainConfig,
    pub logistic: LogisticConfig,
    pub knn_k: KnnK,
    pub tree: TreeConfig,
    pub forest: ForestConfig,
    pub svm: SvmConfig,
}

/// Neighbour count for KNN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KnnK(pub usize);

impl Default for KnnK {
    fn default() -> Self {
        KnnK(15)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ModelParams {
    Mlp(Mlp),
    LogisticRegression(LogisticRegression),
    Knn(Knn),
    DecisionTree(DecisionTree),
    RandomForest(RandomForest),
    LinearSvm(LinearSvm),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Mlp(_) => ModelKind::Mlp,
            ModelParams::LogisticRegression(_) => ModelKind::LogisticRegression,
            ModelParams::Knn(_) => ModelKind::Knn,
            ModelParams::DecisionTree(_) => ModelKind::DecisionTree,
            ModelParams::RandomForest(_) => ModelKind::RandomForest,
            ModelParams::LinearSvm(_) => ModelKind::LinearSvm,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            ModelParams::Mlp(m) => m.input_width(),
            ModelParams::LogisticRegression(m) => m.weights.len(),
            ModelParams::Knn(m) => m.width(),
            ModelParams::DecisionTree(m) => m.width,
            ModelParams::RandomForest(m) => m.width,
            ModelParams::LinearSvm(m) => m.weights.len(),
        }
    }

    fn raw_proba(&self, x: &[f64]) -> f64 {
        match self {
            ModelParams::Mlp(m) => m.predict_proba(x),
            ModelParams::LogisticRegression(m) => m.predict_proba(x),
            ModelParams::Knn(m) => m.predict_proba(x),
            ModelParams::DecisionTree(m) => m.predict_proba(x),
            ModelParams::RandomForest(m) => m.predict_proba(x),
            ModelParams::LinearSvm(m) => m.predict_proba(x),
        }
    }

    /// P(label = 1) for a scaled row.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.width() {
            return Err(ModelError::SchemaMismatch {
                expected: self.width(),
                got: x.len(),
            });
        }
        Ok(self.raw_proba(x))
    }
}

/// Fit one model of `kind`. `seed` drives every random choice.
pub fn train_model(
    kind: ModelKind,
    data: &Dataset,
    config: &ModelConfig,
    seed: u64,
) -> Result<ModelParams, ModelError> {
    data.require_nonempty()?;
    Ok(match kind {
        ModelKind::Mlp => {
            let cfg = TrainConfig {
                seed,
                ..config.mlp.clone()
            };
            ModelParams::Mlp(Mlp::fit(data, &cfg)?.model)
        }
        ModelKind::LogisticRegression => {
            ModelParams::LogisticRegression(LogisticRegression::fit(data, &config.logistic)?)
        }
        ModelKind::Knn => ModelParams::Knn(Knn::fit(data, config.knn_k.0)?),
        ModelKind::DecisionTree => {
            ModelParams::DecisionTree(DecisionTree::fit(data, &config.tree, seed)?)
        }
        ModelKind::RandomForest => {
            ModelParams::RandomForest(RandomForest::fit(data, &config.forest, seed)?)
        }
        ModelKind::LinearSvm => ModelParams::LinearSvm(LinearSvm::fit(data, &config.svm, seed)?),
    })
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Serialized model file: parameters plus the scaler they were trained behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub format_version: u32,
    pub horizon: Horizon,
    /// Hash of the dataset manifest the model was trained from.
    pub manifest_hash: String,
    pub columns: Vec<String>,
    pub scaler: ScalerParams,
    pub params: ModelParams,
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }

    pub fn predict_proba(&self, scaled: &[f64]) -> Result<f64, ModelError> {
        self.params.predict_proba(scaled)
    }

    /// Scale an unscaled feature row with the embedded scaler, then predict.
    pub fn predict_raw(&self, raw: &[Option<f64>]) -> Result<f64, ModelError> {
        let x = self
            .scaler
            .transform(raw)
            .map_err(|_| ModelError::SchemaMismatch {
                expected: self.scaler.input_columns.len(),
                got: raw.len(),
            })?;
        self.predict_proba(&x)
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_parse() {
        assert_eq!("knn".parse::<ModelKind>().unwrap(), ModelKind::Knn);
        assert_eq!("LR".parse::<ModelKind>().unwrap(), ModelKind::LogisticRegression);
        assert!(matches!("gbm".parse::<ModelKind>(), Err(ModelError::UnknownKind(_))));
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![vec![1.0]], vec![2]).is_err());
        assert!(Dataset::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0, 1]).is_err());
        assert!(Dataset::new(vec![vec![1.0]], vec![0, 1]).is_err());
    }

    #[test]
    fn every_kind_trains_and_round_trips() {
        let data = fixtures::separable(200, 3);
        let config = ModelConfig {
            mlp: TrainConfig {
                epochs: 5,
                ..TrainConfig::default()
            },
            ..ModelConfig::default()
        };
        for kind in ModelKind::ALL {
            let p = train_model(kind, &data, &config, 11).unwrap();
            assert_eq!(p.kind(), kind);
            let json = serde_json::to_string(&p).unwrap();
            let back: ModelParams = serde_json::from_str(&json).unwrap();
            for x in &data.features {
                let a = p.predict_proba(x).unwrap();
                assert!((0.0..=1.0).contains(&a));
                assert_eq!(a.to_bits(), back.predict_proba(x).unwrap().to_bits());
            }
            assert!(matches!(
                p.predict_proba(&[0.0]),
                Err(ModelError::SchemaMismatch { expected: 2, got: 1 })
            ));
        }
    }

    #[test]
    fn empty_training_set() {
        let e = train_model(ModelKind::Knn, &Dataset::default(), &ModelConfig::default(), 0);
        assert_eq!(e, Err(ModelError::EmptyTrainSet));
    }
}
