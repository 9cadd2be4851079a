//! Stage orchestration: each stage reads its predecessors' artifacts from the
//! work directory, writes its own, and leaves a manifest with content hashes.
//!
//! Stage order: ingest, clean, features, dataset, train, evaluate, outlook,
//! backtest, report.

mod artifacts;
mod config;
mod stages;
mod tables;

use std::path::PathBuf;

use thiserror::Error;

pub use artifacts::{dir_hash, file_hash, sha256_hex, value_hash, LockGuard, Manifest, StageWriter, Workspace};
pub use config::{BacktestSettings, FeatureSettings, PathsConfig, PipelineConfig, Seeds};
pub use stages::{BacktestResults, Pipeline, TopKRow, STAGES};
pub use tables::{read_feature_csv, read_labeled_csv};

use crate::backtest::BacktestError;
use crate::cleaner::CleanError;
use crate::dataset::DatasetError;
use crate::features::FeatureError;
use crate::fixtures::FixtureError;
use crate::model::ModelError;
use crate::outlook::OutlookError;
use crate::store::StoreError;
use crate::synth::SynthError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("missing output of the `{step}` step: {path} (run `{step}` first)")]
    MissingUpstreamArtifact { step: &'static str, path: PathBuf },
    #[error("`{step}` artifacts do not match: {detail}")]
    ConfigConflict { step: &'static str, detail: String },
    #[error("work directory is locked by another run ({0}); remove the file if no run is active")]
    Locked(PathBuf),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Artifact { path: PathBuf, message: String },
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Clean(#[from] CleanError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Outlook(#[from] OutlookError),
    #[error(transparent)]
    Backtest(#[from] BacktestError),
}
