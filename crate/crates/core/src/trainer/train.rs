use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sample_triplets, FeatureRecord, TrainError, Triplet};
use crate::ingest::{Vocabulary, CODE_TOKEN_CAP, MAX_DESCRIPTION_LEN};
use crate::model::{Checkpoint, DependencyEmbedding, Model, ModelConfig, ModelParams};
use crate::nncore::{AdamConfig, AdamW};
use crate::pdg::{DependencyMatrix, DependencyMode, DEFAULT_MAX_STATEMENTS};
use crate::search::{evaluate_records, EvalOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub dropout: f64,
    pub margin: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Validations without improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub dependency_mode: DependencyMode,
    pub embedding: DependencyEmbedding,
    pub weight_decay: f64,
    /// Decoupled weight decay (AdamW); false gives plain Adam.
    pub adamw: bool,
    pub embed_dim: usize,
    pub dep_dim: usize,
    pub hidden: usize,
    pub max_statements: usize,
    pub max_tokens: usize,
    pub max_desc_len: usize,
    /// Validation queries per epoch (a fixed seeded subsample).
    pub valid_queries: usize,
    /// Distractors per validation query.
    pub valid_distractors: usize,
    /// Triplets per parallel work unit; fixed so results do not depend on
    /// the thread count.
    pub chunk_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 2.08e-4,
            dropout: 0.25,
            margin: 0.05,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            seed: 42,
            dependency_mode: DependencyMode::Full,
            embedding: DependencyEmbedding::Mlp,
            weight_decay: 0.01,
            adamw: true,
            embed_dim: 256,
            dep_dim: 256,
            hidden: 1024,
            max_statements: DEFAULT_MAX_STATEMENTS,
            max_tokens: CODE_TOKEN_CAP,
            max_desc_len: MAX_DESCRIPTION_LEN,
            valid_queries: 1000,
            valid_distractors: 999,
            chunk_size: 4,
        }
    }
}

impl TrainConfig {
    pub fn model_config(&self, code_vocab_size: usize, desc_vocab_size: usize) -> ModelConfig {
        ModelConfig {
            code_vocab_size,
            desc_vocab_size,
            embed_dim: self.embed_dim,
            dep_dim: self.dep_dim,
            hidden: self.hidden,
            max_statements: self.max_statements,
            max_tokens: self.max_tokens,
            max_desc_len: self.max_desc_len,
            dependency_mode: self.dependency_mode,
            embedding: self.embedding,
            dropout: self.dropout,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be non-negative");
        }
        if self.margin.is_nan() || self.margin <= 0.0 {
            return bad("margin must be positive");
        }
        if self.batch_size == 0 || self.chunk_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch size, chunk size, epochs and patience must be positive");
        }
        if self.valid_queries == 0 || self.valid_distractors == 0 {
            return bad("validation pool must be non-empty");
        }
        if self.weight_decay < 0.0 {
            return bad("weight decay must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean triplet loss over the epoch.
    pub mean_loss: f64,
    pub valid_mrr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
    /// Loss or gradient became non-finite during this epoch.
    NonFinite { epoch: usize },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best checkpoint by validation MRR (the initial model if training
    /// failed before the first validation).
    pub checkpoint: Checkpoint,
    pub best_epoch: Option<usize>,
    pub best_mrr: f64,
    pub history: Vec<EpochStats>,
    pub stop: StopReason,
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 finaliser over a simple combination
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Batch<'a> {
    model: &'a Model,
    records: &'a [FeatureRecord],
    matrices: &'a [DependencyMatrix],
    margin: f64,
    seed: u64,
    epoch: usize,
}

impl Batch<'_> {
    /// Summed loss and gradient over `triplets`. Work is split into
    /// fixed-size chunks that are reduced in order.
    fn gradient(&self, triplets: &[(usize, Triplet)], chunk: usize) -> Result<(f64, ModelParams), TrainError> {
        let parts: Vec<Result<(f64, ModelParams), TrainError>> = triplets
            .par_chunks(chunk)
            .map(|ts| {
                let mut g = self.model.params.zeros_like();
                let mut loss = 0.0;
                for &(k, t) in ts {
                    let r = &self.records[t.code];
                    loss += self.model.triplet_loss_grad(
                        &r.tokens,
                        &self.matrices[t.code],
                        &self.records[t.positive].description,
                        &self.records[t.negative].description,
                        self.margin,
                        Some(mix(self.seed, self.epoch as u64, k as u64 + 1)),
                        &mut g,
                    )?;
                }
                Ok((loss, g))
            })
            .collect();
        let mut total = 0.0;
        let mut grads: Option<ModelParams> = None;
        for part in parts {
            let (l, g) = part?;
            total += l;
            match &mut grads {
                Some(acc) => acc.add_assign(&g),
                None => grads = Some(g),
            }
        }
        Ok((total, grads.unwrap_or_else(|| self.model.params.zeros_like())))
    }
}

/// Minimise the summed triplet loss with AdamW, validating MRR after every
/// epoch and keeping the best checkpoint. With an empty validation set the
/// training records are used for validation.
pub fn train(
    config: &TrainConfig,
    train: &[FeatureRecord],
    valid: &[FeatureRecord],
    code_vocab: &Vocabulary,
    desc_vocab: &Vocabulary,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if train.len() < 2 {
        return Err(TrainError::TooFewPairs(train.len()));
    }
    let valid = if valid.is_empty() {
        warn!("no validation records; validating on the training set");
        train
    } else {
        valid
    };
    let mcfg = config.model_config(code_vocab.len(), desc_vocab.len());
    let mut model = Model::init(mcfg, config.seed)?;
    let snapshot = |m: &Model| Checkpoint::new(m.clone(), code_vocab, desc_vocab);
    let matrices: Vec<DependencyMatrix> = train.iter().map(|r| r.matrix(config.dependency_mode)).collect();
    let descriptions: Vec<&[u32]> = train.iter().map(|r| r.description.tokens()).collect();
    let mut opt = AdamW::new(AdamConfig {
        lr: config.lr,
        weight_decay: config.weight_decay,
        decoupled: config.adamw,
        ..AdamConfig::default()
    });
    let eval = EvalOptions {
        seed: mix(config.seed, u64::MAX, 0),
        distractors: config.valid_distractors,
        max_queries: Some(config.valid_queries),
    };

    let mut best: Option<(f64, usize, Checkpoint)> = None;
    let mut history = Vec::new();
    let mut since_best = 0;
    let mut stop = StopReason::MaxEpochs;
    'epochs: for epoch in 0..config.max_epochs {
        let mut triplets: Vec<Triplet> = sample_triplets(&descriptions, mix(config.seed, epoch as u64, 0))?;
        triplets.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(config.seed, epoch as u64, 1)));
        let numbered: Vec<(usize, Triplet)> = triplets.into_iter().enumerate().collect();
        let mut epoch_loss = 0.0;
        for batch in numbered.chunks(config.batch_size) {
            let job = Batch { model: &model, records: train, matrices: &matrices, margin: config.margin, seed: config.seed, epoch };
            let (loss, grads) = job.gradient(batch, config.chunk_size)?;
            if !loss.is_finite() {
                warn!("epoch {epoch}: non-finite loss, stopping");
                stop = StopReason::NonFinite { epoch };
                break 'epochs;
            }
            if let Err(e) = opt.step(&mut model.params, &grads) {
                warn!("epoch {epoch}: {e}, stopping");
                stop = StopReason::NonFinite { epoch };
                break 'epochs;
            }
            if !model.params.all_finite() {
                warn!("epoch {epoch}: non-finite parameters, stopping");
                stop = StopReason::NonFinite { epoch };
                break 'epochs;
            }
            epoch_loss += loss;
        }
        let mean_loss = epoch_loss / train.len() as f64;
        let report = evaluate_records(&model, valid, &eval).map_err(|e| TrainError::Config(format!("validation: {e}")))?;
        info!("epoch {epoch}: loss {mean_loss:.6}, valid MRR {:.4}", report.mrr);
        history.push(EpochStats { epoch, mean_loss, valid_mrr: report.mrr });
        if best.as_ref().is_none_or(|(m, _, _)| report.mrr > *m) {
            best = Some((report.mrr, epoch, snapshot(&model)));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stop = StopReason::EarlyStop;
                break;
            }
        }
    }
    let (best_mrr, best_epoch, checkpoint) = match best {
        Some((m, e, c)) => (m, Some(e), c),
        None => (0.0, None, snapshot(&Model::init(mcfg, config.seed)?)),
    };
    Ok(TrainOutcome { checkpoint, best_epoch, best_mrr, history, stop })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_vocabulary, CorpusPair, VocabKind};
    use crate::trainer::{precompute_features, FeatureCaps};

    pub(crate) fn toy_pairs(n: usize) -> Vec<CorpusPair> {
        (0..n)
            .map(|k| CorpusPair {
                id: format!("f{k:03}"),
                code: format!("def func{k}(v{k}):\n    w{k} = v{k} + {k}\n    return w{k}\n"),
                description: format!("compute thing{k} result"),
            })
            .collect()
    }

    fn tiny() -> TrainConfig {
        TrainConfig {
            embed_dim: 6,
            dep_dim: 6,
            hidden: 4,
            max_statements: 4,
            max_tokens: 3,
            max_desc_len: 6,
            batch_size: 4,
            max_epochs: 3,
            valid_distractors: 5,
            ..TrainConfig::default()
        }
    }

    fn features(cfg: &TrainConfig, n: usize) -> (Vec<FeatureRecord>, Vocabulary, Vocabulary) {
        let pairs = toy_pairs(n);
        let cv = build_vocabulary(&pairs, VocabKind::Code);
        let dv = build_vocabulary(&pairs, VocabKind::Description);
        let caps = FeatureCaps { max_statements: cfg.max_statements, max_tokens: cfg.max_tokens, max_desc_len: cfg.max_desc_len };
        (precompute_features(&pairs, &cv, &dv, caps).records, cv, dv)
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let cfg = TrainConfig { lr: 0.0, dropout: 0.0, ..tiny() };
        let (recs, cv, dv) = features(&cfg, 8);
        let out = train(&cfg, &recs, &recs, &cv, &dv).unwrap();
        let init = Checkpoint::new(Model::init(cfg.model_config(cv.len(), dv.len()), cfg.seed).unwrap(), &cv, &dv);
        assert_eq!(out.checkpoint, init);
        // negatives are resampled each epoch, so only validation is constant
        let mrrs: Vec<f64> = out.history.iter().map(|h| h.valid_mrr).collect();
        assert!(mrrs.windows(2).all(|w| w[0] == w[1]), "{mrrs:?}");
    }

    #[test]
    fn same_seed_same_checkpoint() {
        let cfg = tiny();
        let (recs, cv, dv) = features(&cfg, 10);
        let a = train(&cfg, &recs, &recs, &cv, &dv).unwrap();
        let b = train(&cfg, &recs, &recs, &cv, &dv).unwrap();
        assert_eq!(a.checkpoint.to_bytes(), b.checkpoint.to_bytes());
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = one.install(|| train(&cfg, &recs, &recs, &cv, &dv).unwrap());
        assert_eq!(a.checkpoint.to_bytes(), c.checkpoint.to_bytes());
    }

    #[test]
    fn best_checkpoint_never_regresses() {
        let cfg = TrainConfig { max_epochs: 8, patience: 2, lr: 5e-3, ..tiny() };
        let (recs, cv, dv) = features(&cfg, 12);
        let out = train(&cfg, &recs, &recs, &cv, &dv).unwrap();
        let max = out.history.iter().map(|h| h.valid_mrr).fold(0.0, f64::max);
        assert_eq!(out.best_mrr, max);
        if out.stop == StopReason::EarlyStop {
            let tail = &out.history[out.history.len() - cfg.patience..];
            assert!(tail.iter().all(|h| h.valid_mrr <= out.best_mrr));
        }
    }

    #[test]
    fn non_finite_loss_returns_last_good() {
        let cfg = TrainConfig { lr: 1e300, dropout: 0.0, margin: 2.0, max_epochs: 20, patience: 20, ..tiny() };
        let (recs, cv, dv) = features(&cfg, 8);
        let out = train(&cfg, &recs, &recs, &cv, &dv).unwrap();
        assert!(matches!(out.stop, StopReason::NonFinite { .. }), "{:?}", out.stop);
        assert!(out.checkpoint.model().params.all_finite());
    }

    #[test]
    fn tiny_step_does_not_increase_batch_loss() {
        let cfg = TrainConfig { lr: 1e-6, dropout: 0.0, margin: 2.0, ..tiny() };
        let (recs, cv, dv) = features(&cfg, 6);
        let mut model = Model::init(cfg.model_config(cv.len(), dv.len()), 3).unwrap();
        let matrices: Vec<_> = recs.iter().map(|r| r.matrix(cfg.dependency_mode)).collect();
        let trip: Vec<(usize, Triplet)> = (0..6).map(|i| (i, Triplet { code: i, positive: i, negative: (i + 1) % 6 })).collect();
        let eval = |m: &Model| Batch { model: m, records: &recs, matrices: &matrices, margin: 2.0, seed: 0, epoch: 0 }.gradient(&trip, 2).unwrap();
        let (before, grads) = eval(&model);
        let mut opt = AdamW::new(AdamConfig { lr: 1e-6, weight_decay: 0.0, ..AdamConfig::default() });
        opt.step(&mut model.params, &grads).unwrap();
        let (after, _) = eval(&model);
        assert!(after <= before, "{after} > {before}");
    }

    #[test]
    fn rejects_bad_config() {
        let (recs, cv, dv) = features(&tiny(), 4);
        let cfg = TrainConfig { margin: 0.0, ..tiny() };
        assert!(matches!(train(&cfg, &recs, &recs, &cv, &dv), Err(TrainError::Config(_))));
        assert!(matches!(train(&tiny(), &recs[..1], &recs, &cv, &dv), Err(TrainError::TooFewPairs(1))));
    }
}
