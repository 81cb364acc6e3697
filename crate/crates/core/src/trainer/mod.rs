//! Triplet sampling, the feature store and the training loop.

mod features;
mod train;
mod triplets;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::ModelError;

pub use features::{
    corpus_fingerprint, precompute_features, FeatureCaps, FeatureRecord, FeatureStore, Manifest, ManifestEntry,
    SkipRecord, FEATURE_STORE_VERSION,
};
pub use train::{train, EpochStats, StopReason, TrainConfig, TrainOutcome};
pub use triplets::{sample_triplets, Triplet};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("need at least 2 training pairs, got {0}")]
    TooFewPairs(usize),
    #[error("pair {0} has no eligible negative description")]
    NoNegative(usize),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad feature store: {0}")]
    BadStore(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl TrainError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        TrainError::Io { path: path.to_path_buf(), source }
    }
}
