use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Softmax over the positions where `mask` is true; masked positions get 0.
/// An all-masked input gives all zeros.
pub fn masked_softmax(scores: ArrayView1<f64>, mask: &[bool]) -> Array1<f64> {
    assert_eq!(scores.len(), mask.len());
    let kept: Vec<f64> = scores.iter().zip(mask).filter(|(_, &m)| m).map(|(&s, _)| s).collect();
    let mut out = Array1::zeros(scores.len());
    if kept.is_empty() {
        return out;
    }
    let mut probs = softmax(&kept).into_iter();
    for (o, &m) in out.iter_mut().zip(mask) {
        if m {
            *o = probs.next().unwrap();
        }
    }
    out
}

/// Attention pooling of the rows of `e` with context vector `a`:
/// `alpha = softmax(e · a)`, result `Σ_j alpha_j e_j`. No rows gives zeros.
pub fn attention_pool(e: ArrayView2<f64>, a: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>) {
    if e.nrows() == 0 {
        return (Array1::zeros(e.ncols()), Array1::zeros(0));
    }
    let scores = e.dot(&a);
    let alpha = Array1::from(softmax(scores.as_slice().unwrap()));
    (alpha.dot(&e), alpha)
}

/// Gradients of [`attention_pool`] with respect to `e` and `a`.
pub fn attention_pool_backward(
    e: ArrayView2<f64>,
    a: ArrayView1<f64>,
    alpha: ArrayView1<f64>,
    dt: ArrayView1<f64>,
) -> (Array2<f64>, Array1<f64>) {
    if e.nrows() == 0 {
        return (Array2::zeros(e.raw_dim()), Array1::zeros(a.len()));
    }
    let dalpha = e.dot(&dt);
    let mean = alpha.dot(&dalpha);
    let dz = &alpha * &(&dalpha - mean);
    let mut de = Array2::zeros(e.raw_dim());
    for (j, mut row) in de.axis_iter_mut(Axis(0)).enumerate() {
        row.scaled_add(alpha[j], &dt);
        row.scaled_add(dz[j], &a);
    }
    let da = dz.dot(&e);
    (de, da)
}

/// Column-wise max over the rows of `x`, with the winning row per column
/// (first one on ties). No rows gives zeros.
pub fn max_pool(x: ArrayView2<f64>) -> (Array1<f64>, Vec<usize>) {
    let mut out = Array1::zeros(x.ncols());
    let mut arg = vec![0; x.ncols()];
    if x.nrows() == 0 {
        return (out, Vec::new());
    }
    for k in 0..x.ncols() {
        let col = x.column(k);
        let (best, v) = col.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        out[k] = v;
        arg[k] = best;
    }
    (out, arg)
}

pub fn max_pool_backward(argmax: &[usize], rows: usize, dout: ArrayView1<f64>) -> Array2<f64> {
    let mut dx = Array2::zeros((rows, dout.len()));
    for (k, &r) in argmax.iter().enumerate() {
        dx[[r, k]] += dout[k];
    }
    dx
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(c: ArrayView1<f64>, d: ArrayView1<f64>) -> f64 {
    let nc = c.dot(&c).sqrt();
    let nd = d.dot(&d).sqrt();
    if nc == 0.0 || nd == 0.0 {
        return 0.0;
    }
    c.dot(&d) / (nc * nd)
}

/// Partial derivatives of [`cosine`] with respect to `c` and `d`.
pub fn cosine_backward(c: ArrayView1<f64>, d: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>) {
    let nc = c.dot(&c).sqrt();
    let nd = d.dot(&d).sqrt();
    if nc == 0.0 || nd == 0.0 {
        return (Array1::zeros(c.len()), Array1::zeros(d.len()));
    }
    let cos = c.dot(&d) / (nc * nd);
    let dc = &d / (nc * nd) - &c * (cos / (nc * nc));
    let dd = &c / (nc * nd) - &d * (cos / (nd * nd));
    (dc, dd)
}

/// Inverted-dropout multipliers: each entry is 0 with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Array1<f64> {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if rate == 0.0 {
        return Array1::ones(len);
    }
    let keep = 1.0 / (1.0 - rate);
    Array1::from_iter((0..len).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }))
}
