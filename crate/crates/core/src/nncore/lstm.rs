use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::{sigmoid, NnError};

/// One LSTM direction. Gate rows are stacked as input, forget, candidate,
/// output (`4H` rows), with a single bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub w_ih: Array2<f64>,
    pub w_hh: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Activations of a forward run, one row per processed step.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    pub h: Array2<f64>,
    pub c: Array2<f64>,
    /// Post-activation gates `[i, f, g, o]`.
    gates: Array2<f64>,
}

impl Lstm {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Lstm {
            w_ih: Array2::zeros((4 * hidden, input)),
            w_hh: Array2::zeros((4 * hidden, hidden)),
            bias: Array1::zeros(4 * hidden),
        }
    }

    /// Uniform in `±1/sqrt(hidden)`.
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let k = 1.0 / (hidden as f64).sqrt();
        let mut u = |shape: (usize, usize)| Array2::from_shape_simple_fn(shape, || rng.random_range(-k..k));
        let w_ih = u((4 * hidden, input));
        let w_hh = u((4 * hidden, hidden));
        let bias = u((1, 4 * hidden)).into_shape_with_order(4 * hidden).unwrap();
        Lstm { w_ih, w_hh, bias }
    }

    pub fn input_size(&self) -> usize {
        self.w_ih.ncols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hh.ncols()
    }

    /// Run over the rows of `xs` in order, starting from zero state.
    pub fn forward(&self, xs: ArrayView2<f64>) -> LstmTrace {
        let hd = self.hidden_size();
        let steps = xs.nrows();
        let pre_x = xs.dot(&self.w_ih.t());
        let mut h = Array2::zeros((steps, hd));
        let mut c = Array2::zeros((steps, hd));
        let mut gates = Array2::zeros((steps, 4 * hd));
        let mut h_prev = Array1::<f64>::zeros(hd);
        let mut c_prev = Array1::<f64>::zeros(hd);
        for t in 0..steps {
            let z = &pre_x.row(t) + &self.w_hh.dot(&h_prev) + &self.bias;
            let mut g = gates.row_mut(t);
            for k in 0..4 * hd {
                g[k] = if (2 * hd..3 * hd).contains(&k) { z[k].tanh() } else { sigmoid(z[k]) };
            }
            for k in 0..hd {
                let (i, f, gg, o) = (g[k], g[hd + k], g[2 * hd + k], g[3 * hd + k]);
                let cn = f * c_prev[k] + i * gg;
                c[[t, k]] = cn;
                h[[t, k]] = o * cn.tanh();
            }
            h_prev = h.row(t).to_owned();
            c_prev = c.row(t).to_owned();
        }
        LstmTrace { h, c, gates }
    }

    /// Backpropagate `dh` (gradient on each step's output) through the run,
    /// accumulating parameter gradients into `grads`. Returns the input
    /// gradients.
    pub fn backward(&self, trace: &LstmTrace, xs: ArrayView2<f64>, dh: ArrayView2<f64>, grads: &mut Lstm) -> Array2<f64> {
        let hd = self.hidden_size();
        let steps = xs.nrows();
        let mut dz = Array2::zeros((steps, 4 * hd));
        let mut dh_next = Array1::<f64>::zeros(hd);
        let mut dc_next = Array1::<f64>::zeros(hd);
        for t in (0..steps).rev() {
            let g = trace.gates.row(t);
            let mut dzt = dz.row_mut(t);
            for k in 0..hd {
                let (i, f, gg, o) = (g[k], g[hd + k], g[2 * hd + k], g[3 * hd + k]);
                let dht = dh[[t, k]] + dh_next[k];
                let tc = trace.c[[t, k]].tanh();
                let c_prev = if t > 0 { trace.c[[t - 1, k]] } else { 0.0 };
                let dc = dc_next[k] + dht * o * (1.0 - tc * tc);
                dzt[k] = dc * gg * i * (1.0 - i);
                dzt[hd + k] = dc * c_prev * f * (1.0 - f);
                dzt[2 * hd + k] = dc * i * (1.0 - gg * gg);
                dzt[3 * hd + k] = dht * tc * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
            dh_next = dzt.dot(&self.w_hh);
        }
        grads.w_ih += &dz.t().dot(&xs);
        if steps > 1 {
            let h_prev = trace.h.slice(s![..steps - 1, ..]);
            grads.w_hh += &dz.slice(s![1.., ..]).t().dot(&h_prev);
        }
        grads.bias += &dz.sum_axis(Axis(0));
        dz.dot(&self.w_ih)
    }
}

/// Bidirectional LSTM: the forward direction reads steps `1..T'`, the
/// backward direction `T'..1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub fwd: Lstm,
    pub bwd: Lstm,
}

#[derive(Debug, Clone)]
pub struct BiLstmTrace {
    len: usize,
    fwd: LstmTrace,
    bwd: LstmTrace,
    /// `T × 2H` hidden states in position order; rows at and past `T'` are zero.
    pub states: Array2<f64>,
    /// Forward state at step `T'` followed by backward state at step 1.
    pub last: Array1<f64>,
}

impl BiLstmTrace {
    pub fn true_length(&self) -> usize {
        self.len
    }
}

fn reversed(xs: ArrayView2<f64>) -> Array2<f64> {
    xs.slice(s![..;-1, ..]).to_owned()
}

impl BiLstm {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        BiLstm { fwd: Lstm::zeros(input, hidden), bwd: Lstm::zeros(input, hidden) }
    }

    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let fwd = Lstm::init(input, hidden, rng);
        let bwd = Lstm::init(input, hidden, rng);
        BiLstm { fwd, bwd }
    }

    pub fn hidden_size(&self) -> usize {
        self.fwd.hidden_size()
    }

    /// Encode the first `true_len` rows of `xs`; later rows are padding.
    pub fn forward(&self, xs: ArrayView2<f64>, true_len: usize) -> Result<BiLstmTrace, NnError> {
        if true_len == 0 {
            return Err(NnError::EmptySequence);
        }
        if xs.ncols() != self.fwd.input_size() || true_len > xs.nrows() {
            return Err(NnError::Shape {
                what: "bi-lstm input".into(),
                expected: vec![true_len.max(xs.nrows()), self.fwd.input_size()],
                got: xs.shape().to_vec(),
            });
        }
        let hd = self.hidden_size();
        let seq = xs.slice(s![..true_len, ..]);
        let fwd = self.fwd.forward(seq);
        let bwd = self.bwd.forward(reversed(seq).view());
        let mut states = Array2::zeros((xs.nrows(), 2 * hd));
        states.slice_mut(s![..true_len, ..hd]).assign(&fwd.h);
        states.slice_mut(s![..true_len, hd..]).assign(&bwd.h.slice(s![..;-1, ..]));
        let last = concatenate![Axis(0), fwd.h.row(true_len - 1), bwd.h.row(true_len - 1)];
        Ok(BiLstmTrace { len: true_len, fwd, bwd, states, last })
    }

    /// Gradients for a forward run given upstream gradients on `states`
    /// (position order, padded rows ignored) and on `last`. Returns input
    /// gradients with the shape of `xs`.
    pub fn backward(
        &self,
        trace: &BiLstmTrace,
        xs: ArrayView2<f64>,
        d_states: ArrayView2<f64>,
        d_last: ArrayView1<f64>,
        grads: &mut BiLstm,
    ) -> Array2<f64> {
        let hd = self.hidden_size();
        let n = trace.len;
        let seq = xs.slice(s![..n, ..]);
        let mut dh_f = d_states.slice(s![..n, ..hd]).to_owned();
        let mut dh_b = d_states.slice(s![..n;-1, hd..]).to_owned();
        {
            let mut r = dh_f.row_mut(n - 1);
            r += &d_last.slice(s![..hd]);
            let mut r = dh_b.row_mut(n - 1);
            r += &d_last.slice(s![hd..]);
        }
        let dx_f = self.fwd.backward(&trace.fwd, seq, dh_f.view(), &mut grads.fwd);
        let rev = reversed(seq);
        let dx_b = self.bwd.backward(&trace.bwd, rev.view(), dh_b.view(), &mut grads.bwd);
        let mut dx = Array2::zeros(xs.raw_dim());
        dx.slice_mut(s![..n, ..]).assign(&(&dx_f + &dx_b.slice(s![..;-1, ..])));
        dx
    }
}
