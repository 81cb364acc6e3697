//! Neural code search over Python functions.
//!
//! Functions are segmented into statements, a statement-level dependency
//! matrix (data and control) is extracted, and a two-tower encoder maps code
//! and natural-language queries into a shared space ranked by cosine
//! similarity.

pub mod ingest;
pub mod pystmt;
pub mod pdg;
pub mod nncore;
pub mod model;
pub mod trainer;
pub mod search;
