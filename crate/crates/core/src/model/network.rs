use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DependencyEmbedding, ModelConfig, ModelError, ModelParams};
use crate::ingest::{TokenizedCode, TokenizedQuery};
use crate::nncore::{
    attention_pool, attention_pool_backward, cosine, cosine_backward, dropout_mask, max_pool, max_pool_backward,
    BiLstmTrace,
};
use crate::pdg::DependencyMatrix;

pub type CodeVector = Array1<f64>;
pub type QueryVector = Array1<f64>;

/// Rows `0..rows` of the matrix as 0/1 reals, `rows × size`.
fn dense_rows(matrix: &DependencyMatrix, rows: usize) -> Array2<f64> {
    let n = matrix.size();
    Array2::from_shape_fn((rows, n), |(i, j)| if matrix.get(i + 1, j + 1) { 1.0 } else { 0.0 })
}

/// Row `i` divided by `max(1, Σ_j υ_ij)`, restricted to the leading
/// `rows × rows` block.
fn normalized_rows(matrix: &DependencyMatrix, rows: usize) -> Array2<f64> {
    let mut w = dense_rows(matrix, rows).slice(s![.., ..rows]).to_owned();
    for mut r in w.axis_iter_mut(Axis(0)) {
        let n = r.sum().max(1.0);
        r /= n;
    }
    w
}

/// `p_i = tanh(W_Γ υ_i)` for every row of the matrix, padded rows included.
pub fn embed_dependency(matrix: &DependencyMatrix, params: &ModelParams) -> Result<Array2<f64>, ModelError> {
    if matrix.size() != params.dep_w.ncols() {
        return Err(ModelError::Shape {
            what: "dependency matrix".into(),
            expected: params.dep_w.ncols(),
            got: matrix.size(),
        });
    }
    Ok(dense_rows(matrix, matrix.size()).dot(&params.dep_w.t()).mapv(f64::tanh))
}

/// `p_i = Σ_j t_j υ_ij / max(1, Σ_j υ_ij)`, with one row of `t` per matrix row.
pub fn embed_dependency_alt(matrix: &DependencyMatrix, t: ArrayView2<f64>) -> Array2<f64> {
    assert_eq!(t.nrows(), matrix.size(), "one token vector per matrix row");
    normalized_rows(matrix, matrix.size()).dot(&t)
}

enum Pool {
    Attention(Array1<f64>),
    Max(Vec<usize>),
}

struct StatementTrace {
    ids: Vec<usize>,
    e: Array2<f64>,
    pool: Pool,
}

fn check_ids(ids: &[usize], vocab: usize) -> Result<(), ModelError> {
    match ids.iter().find(|&&id| id >= vocab) {
        Some(&id) => Err(ModelError::TokenOutOfRange { id, vocab }),
        None => Ok(()),
    }
}

fn statement_forward(
    params: &ModelParams,
    mode: DependencyEmbedding,
    ids: Vec<usize>,
) -> Result<(Array1<f64>, StatementTrace), ModelError> {
    check_ids(&ids, params.code_embed.nrows())?;
    let e = params.code_embed.select(Axis(0), &ids);
    let (t, pool) = match mode {
        DependencyEmbedding::MaxPooling => {
            let (t, arg) = max_pool(e.view());
            (t, Pool::Max(arg))
        }
        _ => {
            let (t, alpha) = attention_pool(e.view(), params.attn.view());
            (t, Pool::Attention(alpha))
        }
    };
    Ok((t, StatementTrace { ids, e, pool }))
}

/// Token-level statement vectors `t_i`, one row per entry of `ids`. PAD ids
/// are ignored; a statement without tokens gets a zero vector.
pub fn embed_statement_tokens(
    ids: &[Vec<u32>],
    params: &ModelParams,
    mode: DependencyEmbedding,
) -> Result<Array2<f64>, ModelError> {
    let mut t = Array2::zeros((ids.len(), params.code_embed.ncols()));
    for (i, row) in ids.iter().enumerate() {
        let real = row.iter().filter(|&&id| id != crate::ingest::Vocabulary::PAD).map(|&id| id as usize).collect();
        t.row_mut(i).assign(&statement_forward(params, mode, real)?.0);
    }
    Ok(t)
}

enum DepTrace {
    Mlp { upsilon: Array2<f64>, p: Array2<f64> },
    New { weights: Array2<f64> },
}

pub(crate) struct CodeTrace {
    stmts: Vec<StatementTrace>,
    dep: DepTrace,
    mask: Option<Array2<f64>>,
    s: Array2<f64>,
    lstm: BiLstmTrace,
}

impl CodeTrace {
    pub(crate) fn vector(&self) -> &Array1<f64> {
        &self.lstm.last
    }
}

pub(crate) struct DescTrace {
    ids: Vec<usize>,
    mask: Option<Array2<f64>>,
    x: Array2<f64>,
    lstm: BiLstmTrace,
    argmax: Vec<usize>,
    d: Array1<f64>,
}

impl DescTrace {
    pub(crate) fn vector(&self) -> &Array1<f64> {
        &self.d
    }
}

fn mask_for(rows: usize, cols: usize, rate: f64, rng: Option<&mut ChaCha8Rng>) -> Option<Array2<f64>> {
    match rng {
        Some(rng) if rate > 0.0 => Some(dropout_mask(rows * cols, rate, rng).into_shape_with_order((rows, cols)).unwrap()),
        _ => None,
    }
}

pub(crate) fn code_forward(
    config: &ModelConfig,
    params: &ModelParams,
    tokens: &TokenizedCode,
    matrix: &DependencyMatrix,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<CodeTrace, ModelError> {
    let len = tokens.length;
    if len == 0 {
        return Err(ModelError::EmptyCode);
    }
    if matrix.size() != config.max_statements {
        return Err(ModelError::Shape { what: "dependency matrix".into(), expected: config.max_statements, got: matrix.size() });
    }
    let expect = matrix.true_statement_count().min(matrix.size());
    if len != expect || tokens.ids.len() < len {
        return Err(ModelError::Shape { what: "statement count".into(), expected: expect, got: len });
    }
    let ed = config.embed_dim;
    let mut t = Array2::zeros((len, ed));
    let mut stmts = Vec::with_capacity(len);
    for i in 0..len {
        let ids = tokens.statement(i).map(|id| id as usize).collect();
        let (ti, tr) = statement_forward(params, config.embedding, ids)?;
        t.row_mut(i).assign(&ti);
        stmts.push(tr);
    }
    let (p, dep) = match config.embedding {
        DependencyEmbedding::New => {
            let weights = normalized_rows(matrix, len);
            (weights.dot(&t), DepTrace::New { weights })
        }
        _ => {
            let upsilon = dense_rows(matrix, len);
            let p = upsilon.dot(&params.dep_w.t()).mapv(f64::tanh);
            (p.clone(), DepTrace::Mlp { upsilon, p })
        }
    };
    let mut s = ndarray::concatenate![Axis(1), t, p];
    let mask = mask_for(len, s.ncols(), config.dropout, rng);
    if let Some(m) = &mask {
        s *= m;
    }
    let lstm = params.code_lstm.forward(s.view(), len)?;
    Ok(CodeTrace { stmts, dep, mask, s, lstm })
}

pub(crate) fn code_backward(
    config: &ModelConfig,
    params: &ModelParams,
    trace: &CodeTrace,
    dc: &Array1<f64>,
    grads: &mut ModelParams,
) {
    let len = trace.s.nrows();
    let ed = config.embed_dim;
    let no_states = Array2::zeros((len, 2 * config.hidden));
    let mut ds = params.code_lstm.backward(&trace.lstm, trace.s.view(), no_states.view(), dc.view(), &mut grads.code_lstm);
    if let Some(m) = &trace.mask {
        ds *= m;
    }
    let mut dt = ds.slice(s![.., ..ed]).to_owned();
    let dp = ds.slice(s![.., ed..]);
    match &trace.dep {
        DepTrace::Mlp { upsilon, p } => {
            let dpre = &dp * &p.mapv(|v| 1.0 - v * v);
            grads.dep_w += &dpre.t().dot(upsilon);
        }
        DepTrace::New { weights } => dt += &weights.t().dot(&dp),
    }
    for (i, st) in trace.stmts.iter().enumerate() {
        if st.ids.is_empty() {
            continue;
        }
        let de = match &st.pool {
            Pool::Attention(alpha) => {
                let (de, da) = attention_pool_backward(st.e.view(), params.attn.view(), alpha.view(), dt.row(i));
                grads.attn += &da;
                de
            }
            Pool::Max(arg) => max_pool_backward(arg, st.ids.len(), dt.row(i)),
        };
        for (r, &id) in st.ids.iter().enumerate() {
            let mut g = grads.code_embed.row_mut(id);
            g += &de.row(r);
        }
    }
}

pub(crate) fn desc_forward(
    config: &ModelConfig,
    params: &ModelParams,
    query: &TokenizedQuery,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<DescTrace, ModelError> {
    let ids: Vec<usize> = query.tokens().iter().map(|&id| id as usize).collect();
    if ids.is_empty() {
        return Err(ModelError::EmptyQuery);
    }
    check_ids(&ids, params.desc_embed.nrows())?;
    let mut x = params.desc_embed.select(Axis(0), &ids);
    let mask = mask_for(ids.len(), x.ncols(), config.dropout, rng);
    if let Some(m) = &mask {
        x *= m;
    }
    let lstm = params.desc_lstm.forward(x.view(), ids.len())?;
    let (d, argmax) = max_pool(lstm.states.slice(s![..ids.len(), ..]));
    Ok(DescTrace { ids, mask, x, lstm, argmax, d })
}

pub(crate) fn desc_backward(params: &ModelParams, trace: &DescTrace, dd: &Array1<f64>, grads: &mut ModelParams) {
    let n = trace.ids.len();
    let d_states = max_pool_backward(&trace.argmax, n, dd.view());
    let d_last = Array1::zeros(dd.len());
    let mut dx = params.desc_lstm.backward(&trace.lstm, trace.x.view(), d_states.view(), d_last.view(), &mut grads.desc_lstm);
    if let Some(m) = &trace.mask {
        dx *= m;
    }
    for (r, &id) in trace.ids.iter().enumerate() {
        let mut g = grads.desc_embed.row_mut(id);
        g += &dx.row(r);
    }
}

/// Code and query vectors of one configuration. Evaluation never applies
/// dropout.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Model {
    pub fn new(config: ModelConfig, params: ModelParams) -> Result<Self, ModelError> {
        config.validate()?;
        let expect = ModelParams::zeros(&config);
        let theirs = crate::nncore::Parameters::tensors(&params);
        for ((name, want), (_, got)) in crate::nncore::Parameters::tensors(&expect).iter().zip(&theirs) {
            if want.shape() != got.shape() {
                return Err(ModelError::Config(format!("{name}: expected shape {:?}, got {:?}", want.shape(), got.shape())));
            }
        }
        Ok(Model { config, params })
    }

    pub fn init(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let params = ModelParams::init(&config, seed);
        Ok(Model { config, params })
    }

    /// `c`: the code bi-LSTM's last state over `s_i = [t_i; p_i]`.
    pub fn encode_code(&self, tokens: &TokenizedCode, matrix: &DependencyMatrix) -> Result<CodeVector, ModelError> {
        Ok(code_forward(&self.config, &self.params, tokens, matrix, None)?.lstm.last)
    }

    /// `d`: elementwise max over the description bi-LSTM's hidden states.
    pub fn encode_description(&self, query: &TokenizedQuery) -> Result<QueryVector, ModelError> {
        Ok(desc_forward(&self.config, &self.params, query, None)?.d)
    }

    /// Hinge loss of one triplet; gradients are added to `grads` when the
    /// hinge is active. `dropout_seed` switches dropout on.
    #[allow(clippy::too_many_arguments)]
    pub fn triplet_loss_grad(
        &self,
        tokens: &TokenizedCode,
        matrix: &DependencyMatrix,
        positive: &TokenizedQuery,
        negative: &TokenizedQuery,
        margin: f64,
        dropout_seed: Option<u64>,
        grads: &mut ModelParams,
    ) -> Result<f64, ModelError> {
        let (c, p) = (&self.config, &self.params);
        let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
        let code = code_forward(c, p, tokens, matrix, rng.as_mut())?;
        let pos = desc_forward(c, p, positive, rng.as_mut())?;
        let neg = desc_forward(c, p, negative, rng.as_mut())?;
        let (cv, dp, dn) = (code.vector(), pos.vector(), neg.vector());
        let loss = triplet_loss(cv, dp, dn, margin);
        if loss > 0.0 {
            let (gc_pos, gd_pos) = cosine_backward(cv.view(), dp.view());
            let (gc_neg, gd_neg) = cosine_backward(cv.view(), dn.view());
            code_backward(c, p, &code, &(gc_neg - gc_pos), grads);
            desc_backward(p, &pos, &(-gd_pos), grads);
            desc_backward(p, &neg, &gd_neg, grads);
        }
        Ok(loss)
    }
}

/// Cosine similarity, 0 if either vector is zero.
pub fn similarity(c: &CodeVector, d: &QueryVector) -> f64 {
    cosine(c.view(), d.view())
}

/// `max(0, margin - cos(c, d+) + cos(c, d-))`.
pub fn triplet_loss(c: &CodeVector, positive: &QueryVector, negative: &QueryVector, margin: f64) -> f64 {
    hinge(similarity(c, positive), similarity(c, negative), margin)
}

/// Propagates NaN rather than clamping it to zero.
pub fn hinge(cos_pos: f64, cos_neg: f64, margin: f64) -> f64 {
    let v = margin - cos_pos + cos_neg;
    if v.is_nan() { v } else { v.max(0.0) }
}
