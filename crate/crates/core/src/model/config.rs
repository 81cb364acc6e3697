use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::ingest::{CODE_TOKEN_CAP, MAX_DESCRIPTION_LEN};
use crate::pdg::{DependencyMode, DEFAULT_MAX_STATEMENTS};

/// How the statement representation `s_i = [t_i; p_i]` is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependencyEmbedding {
    /// Attention over tokens, `p_i = tanh(W υ_i)`.
    #[default]
    Mlp,
    /// Attention over tokens, `p_i` = mean of the token vectors of the
    /// statements `i` depends on.
    New,
    /// Column-wise max over token embeddings instead of attention,
    /// `p_i = tanh(W υ_i)`.
    MaxPooling,
}

impl fmt::Display for DependencyEmbedding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DependencyEmbedding::Mlp => "mlp",
            DependencyEmbedding::New => "new",
            DependencyEmbedding::MaxPooling => "maxpooling",
        })
    }
}

impl FromStr for DependencyEmbedding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mlp" => Ok(DependencyEmbedding::Mlp),
            "new" => Ok(DependencyEmbedding::New),
            "maxpooling" | "max_pooling" => Ok(DependencyEmbedding::MaxPooling),
            other => Err(format!("unknown dependency embedding {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub code_vocab_size: usize,
    pub desc_vocab_size: usize,
    /// Token / word embedding width.
    pub embed_dim: usize,
    /// Width of `p_i`.
    pub dep_dim: usize,
    /// Hidden units per LSTM direction.
    pub hidden: usize,
    pub max_statements: usize,
    pub max_tokens: usize,
    pub max_desc_len: usize,
    pub dependency_mode: DependencyMode,
    pub embedding: DependencyEmbedding,
    pub dropout: f64,
}

impl ModelConfig {
    /// Full-size configuration: 256-wide embeddings, 1024 hidden units per
    /// direction, 20 statements of 5 tokens, 30 description words.
    pub fn standard(code_vocab_size: usize, desc_vocab_size: usize) -> Self {
        ModelConfig {
            code_vocab_size,
            desc_vocab_size,
            embed_dim: 256,
            dep_dim: 256,
            hidden: 1024,
            max_statements: DEFAULT_MAX_STATEMENTS,
            max_tokens: CODE_TOKEN_CAP,
            max_desc_len: MAX_DESCRIPTION_LEN,
            dependency_mode: DependencyMode::Full,
            embedding: DependencyEmbedding::Mlp,
            dropout: 0.25,
        }
    }

    pub fn code_vector_dim(&self) -> usize {
        2 * self.hidden
    }

    pub fn statement_dim(&self) -> usize {
        self.embed_dim + self.dep_dim
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("code_vocab_size", self.code_vocab_size),
            ("desc_vocab_size", self.desc_vocab_size),
            ("embed_dim", self.embed_dim),
            ("dep_dim", self.dep_dim),
            ("hidden", self.hidden),
            ("max_statements", self.max_statements),
            ("max_tokens", self.max_tokens),
            ("max_desc_len", self.max_desc_len),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::Config(format!("{name} must be positive")));
        }
        if self.embedding == DependencyEmbedding::New && self.dep_dim != self.embed_dim {
            return Err(ModelError::Config("the `new` dependency embedding needs dep_dim == embed_dim".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config("dropout must be in [0, 1)".into()));
        }
        Ok(())
    }
}
