//! Code and description encoders, cosine matching, triplet loss and the
//! checkpoint format.

mod checkpoint;
mod config;
mod network;
mod params;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::nncore::NnError;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use config::{DependencyEmbedding, ModelConfig};
pub use network::{
    embed_dependency, embed_dependency_alt, embed_statement_tokens, hinge, similarity, triplet_loss, CodeVector, Model,
    QueryVector,
};
pub use params::ModelParams;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape { what: String, expected: usize, got: usize },
    #[error("token id {id} outside vocabulary of {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },
    #[error("code snippet has no statements")]
    EmptyCode,
    #[error("query has no tokens")]
    EmptyQuery,
    #[error(transparent)]
    Numeric(#[from] NnError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("{which} vocabulary mismatch: checkpoint expects {expected}, found {found}")]
    VocabularyMismatch { which: &'static str, expected: String, found: String },
}

impl ModelError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ModelError::Io { path: path.to_path_buf(), source }
    }
}
