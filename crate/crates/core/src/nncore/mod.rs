//! Dense f64 layers with hand-written backward passes.
//!
//! The architecture is fixed, so there is no graph engine: each layer exposes
//! a forward that returns whatever the backward needs, and a backward that
//! accumulates into a gradient buffer of the same shape as the parameters.

mod gradcheck;
mod layers;
mod lstm;
mod optim;

use thiserror::Error;

pub use gradcheck::{grad_check, relative_error, GradCheck, REL_ERROR_FLOOR};
pub use layers::{
    attention_pool, attention_pool_backward, cosine, cosine_backward, dropout_mask, masked_softmax, max_pool,
    max_pool_backward, sigmoid, softmax,
};
pub use lstm::{BiLstm, BiLstmTrace, Lstm, LstmTrace};
pub use optim::{flatten, param_count, unflatten, AdamConfig, AdamW, Parameters};

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("non-finite value in {what} (index {index})")]
    NonFinite { what: String, index: usize },
    #[error("shape mismatch in {what}: expected {expected:?}, got {got:?}")]
    Shape { what: String, expected: Vec<usize>, got: Vec<usize> },
    #[error("empty sequence")]
    EmptySequence,
}

/// Error if any value is NaN or infinite.
pub fn check_finite<'a>(what: &str, values: impl IntoIterator<Item = &'a f64>) -> Result<(), NnError> {
    match values.into_iter().position(|v| !v.is_finite()) {
        Some(index) => Err(NnError::NonFinite { what: what.to_string(), index }),
        None => Ok(()),
    }
}
