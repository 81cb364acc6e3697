use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;
use crate::nncore::{BiLstm, Parameters};

/// Every trainable tensor of the two encoders. Also used, zero-initialised,
/// as the gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub code_embed: Array2<f64>,
    pub desc_embed: Array2<f64>,
    /// `dep_dim × max_statements`.
    pub dep_w: Array2<f64>,
    /// Attention context vector.
    pub attn: Array1<f64>,
    pub code_lstm: BiLstm,
    pub desc_lstm: BiLstm,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, shape: (usize, usize), k: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || rng.random_range(-k..k))
}

impl ModelParams {
    pub fn zeros(c: &ModelConfig) -> Self {
        ModelParams {
            code_embed: Array2::zeros((c.code_vocab_size, c.embed_dim)),
            desc_embed: Array2::zeros((c.desc_vocab_size, c.embed_dim)),
            dep_w: Array2::zeros((c.dep_dim, c.max_statements)),
            attn: Array1::zeros(c.embed_dim),
            code_lstm: BiLstm::zeros(c.statement_dim(), c.hidden),
            desc_lstm: BiLstm::zeros(c.embed_dim, c.hidden),
        }
    }

    /// Seeded initialisation: embeddings uniform in ±0.5, linear maps
    /// uniform in ±1/sqrt(fan_in), LSTMs uniform in ±1/sqrt(hidden).
    pub fn init(c: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let code_embed = uniform(&mut rng, (c.code_vocab_size, c.embed_dim), 0.5);
        let desc_embed = uniform(&mut rng, (c.desc_vocab_size, c.embed_dim), 0.5);
        let dep_w = uniform(&mut rng, (c.dep_dim, c.max_statements), 1.0 / (c.max_statements as f64).sqrt());
        let attn = uniform(&mut rng, (1, c.embed_dim), 1.0 / (c.embed_dim as f64).sqrt()).row(0).to_owned();
        let code_lstm = BiLstm::init(c.statement_dim(), c.hidden, &mut rng);
        let desc_lstm = BiLstm::init(c.embed_dim, c.hidden, &mut rng);
        ModelParams { code_embed, desc_embed, dep_w, attn, code_lstm, desc_lstm }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    pub fn fill(&mut self, value: f64) {
        for (_, mut t) in self.tensors_mut() {
            t.fill(value);
        }
    }

    pub fn add_assign(&mut self, other: &ModelParams) {
        let theirs = other.tensors();
        for ((_, mut a), (_, b)) in self.tensors_mut().into_iter().zip(theirs) {
            a += &b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        for (_, mut t) in self.tensors_mut() {
            t *= k;
        }
    }

    /// Round every value to the nearest f32.
    pub fn round_to_f32(&mut self) {
        for (_, mut t) in self.tensors_mut() {
            t.mapv_inplace(|v| v as f32 as f64);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

impl Parameters for ModelParams {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = vec![
            ("code_embed".to_string(), self.code_embed.view().into_dyn()),
            ("desc_embed".to_string(), self.desc_embed.view().into_dyn()),
            ("dep_w".to_string(), self.dep_w.view().into_dyn()),
            ("attn".to_string(), self.attn.view().into_dyn()),
        ];
        out.extend(self.code_lstm.tensors().into_iter().map(|(n, t)| (format!("code_lstm.{n}"), t)));
        out.extend(self.desc_lstm.tensors().into_iter().map(|(n, t)| (format!("desc_lstm.{n}"), t)));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out = vec![
            ("code_embed".to_string(), self.code_embed.view_mut().into_dyn()),
            ("desc_embed".to_string(), self.desc_embed.view_mut().into_dyn()),
            ("dep_w".to_string(), self.dep_w.view_mut().into_dyn()),
            ("attn".to_string(), self.attn.view_mut().into_dyn()),
        ];
        out.extend(self.code_lstm.tensors_mut().into_iter().map(|(n, t)| (format!("code_lstm.{n}"), t)));
        out.extend(self.desc_lstm.tensors_mut().into_iter().map(|(n, t)| (format!("desc_lstm.{n}"), t)));
        out
    }
}
