//! Corpus loading, vocabularies and tokenization.

mod corpus;
mod tokenize;
mod vocab;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use corpus::{load_corpus, parse_corpus, Corpus, CorpusPair, SkipReason, SkippedRecord, Split};
pub use tokenize::{
    description_words, split_identifier, tokenize_code, tokenize_description, TokenizedCode, TokenizedQuery,
    MAX_DESCRIPTION_LEN,
};
pub use vocab::{build_vocabulary, pair_tokens, VocabKind, Vocabulary, CODE_TOKEN_CAP, MAX_VOCAB_WORDS};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("empty description")]
    EmptyDescription,
    #[error("vocabulary line {line}: {reason}")]
    BadVocabulary { line: usize, reason: String },
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io { path: path.to_path_buf(), source }
    }
}
