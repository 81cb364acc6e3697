//! Evaluation metrics, the retrieval protocol and the search index.

mod eval;
mod index;
mod metrics;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::ModelError;

pub use eval::{
    distractor_pool, evaluate, evaluate_records, evaluate_scores, evaluate_with_scorer, query_subsample, EvalOptions,
    DEFAULT_DISTRACTORS,
};
pub use index::{build_index, prepare_query, query, Index, SearchHit, INDEX_VERSION};
pub use metrics::{frank, EvalReport};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("duplicate snippet id {0:?}")]
    DuplicateId(String),
    #[error("query has no words")]
    EmptyQuery,
    #[error("index was built by checkpoint {found}, not {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("description vocabulary {found} does not match checkpoint ({expected})")]
    VocabularyMismatch { expected: String, found: String },
    #[error("bad index: {0}")]
    BadIndex(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl SearchError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        SearchError::Io { path: path.to_path_buf(), source }
    }
}
