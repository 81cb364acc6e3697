use std::collections::HashSet;

use ndarray::ArrayView2;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{EvalReport, SearchError};
use crate::model::{similarity, Checkpoint, Model};
use crate::search::frank;
use crate::trainer::FeatureRecord;

pub const DEFAULT_DISTRACTORS: usize = 999;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub seed: u64,
    pub distractors: usize,
    /// Evaluate only a seeded subsample of this many queries.
    pub max_queries: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { seed: 0, distractors: DEFAULT_DISTRACTORS, max_queries: None }
    }
}

/// Distinct candidates other than `query`, drawn from `0..n` with a
/// stream determined by `(seed, query)`. At most `n - 1` are returned.
pub fn distractor_pool(n: usize, query: usize, distractors: usize, seed: u64) -> Vec<usize> {
    let k = distractors.min(n.saturating_sub(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(query as u64);
    let mut pool: Vec<usize> = index::sample(&mut rng, n - 1, k).into_iter().map(|j| if j >= query { j + 1 } else { j }).collect();
    pool.sort_unstable();
    pool
}

/// The queries that are evaluated: all of them, or a seeded subsample.
pub fn query_subsample(n: usize, max_queries: Option<usize>, seed: u64) -> Vec<usize> {
    match max_queries {
        Some(m) if m < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5155_4552_5953_4554);
            let mut q = index::sample(&mut rng, n, m).into_vec();
            q.sort_unstable();
            q
        }
        _ => (0..n).collect(),
    }
}

fn check_unique<S: AsRef<str>>(ids: &[S]) -> Result<(), SearchError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id.as_ref()) {
            return Err(SearchError::DuplicateId(id.as_ref().to_string()));
        }
    }
    Ok(())
}

/// Rank every selected query's own candidate within its pool.
/// `score(q, j)` scores description `q` against code `j`.
pub fn evaluate_with_scorer<S, F>(ids: &[S], opts: &EvalOptions, score: F) -> Result<EvalReport, SearchError>
where
    S: AsRef<str> + Sync,
    F: Fn(usize, usize) -> f64 + Sync,
{
    check_unique(ids)?;
    let n = ids.len();
    if n == 0 {
        return Ok(EvalReport::from_ranks(&[], 0, opts.seed));
    }
    let queries = query_subsample(n, opts.max_queries, opts.seed);
    let ranks: Vec<usize> = queries
        .par_iter()
        .map(|&q| {
            let mut cands = distractor_pool(n, q, opts.distractors, opts.seed);
            cands.push(q);
            let scores: Vec<f64> = cands.iter().map(|&j| score(q, j)).collect();
            let cand_ids: Vec<&str> = cands.iter().map(|&j| ids[j].as_ref()).collect();
            frank(&scores, &cand_ids, cands.len() - 1)
        })
        .collect();
    let pool = opts.distractors.min(n - 1) + 1;
    Ok(EvalReport::from_ranks(&ranks, pool, opts.seed))
}

/// Evaluation over a precomputed `n × n` matrix whose entry `(q, j)` is the
/// score of description `q` against code `j`.
pub fn evaluate_scores<S: AsRef<str> + Sync>(
    scores: ArrayView2<f64>,
    ids: &[S],
    opts: &EvalOptions,
) -> Result<EvalReport, SearchError> {
    assert_eq!(scores.shape(), [ids.len(), ids.len()], "square score matrix");
    evaluate_with_scorer(ids, opts, |q, j| scores[[q, j]])
}

/// Embed the records with `model` and evaluate.
pub fn evaluate_records(model: &Model, records: &[FeatureRecord], opts: &EvalOptions) -> Result<EvalReport, SearchError> {
    let mode = model.config.dependency_mode;
    let codes = records
        .par_iter()
        .map(|r| model.encode_code(&r.tokens, &r.matrix(mode)))
        .collect::<Result<Vec<_>, _>>()?;
    let queries = query_subsample(records.len(), opts.max_queries, opts.seed);
    let mut descs = vec![None; records.len()];
    let encoded = queries
        .par_iter()
        .map(|&q| model.encode_description(&records[q].description))
        .collect::<Result<Vec<_>, _>>()?;
    for (&q, d) in queries.iter().zip(encoded) {
        descs[q] = Some(d);
    }
    let ids: Vec<&str> = records.iter().map(|r| r.id.as_str()).collect();
    evaluate_with_scorer(&ids, opts, |q, j| similarity(&codes[j], descs[q].as_ref().expect("query encoded")))
}

/// The full protocol: every test pair is a query against 999 seeded
/// distractors (fewer when the split is smaller).
pub fn evaluate(checkpoint: &Checkpoint, records: &[FeatureRecord], seed: u64) -> Result<EvalReport, SearchError> {
    evaluate_records(checkpoint.model(), records, &EvalOptions { seed, ..EvalOptions::default() })
}
