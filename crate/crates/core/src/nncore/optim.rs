use ndarray::{Array1, ArrayViewD, ArrayViewMutD};
use serde::{Deserialize, Serialize};

use super::{check_finite, BiLstm, Lstm, NnError};

/// A fixed, ordered collection of named parameter tensors.
pub trait Parameters {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)>;
    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)>;
}

fn prefixed<T>(prefix: &str, items: Vec<(String, T)>) -> Vec<(String, T)> {
    items.into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)).collect()
}

impl Parameters for Array1<f64> {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        vec![("value".into(), self.view().into_dyn())]
    }

    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        vec![("value".into(), self.view_mut().into_dyn())]
    }
}

impl Parameters for Lstm {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        vec![
            ("w_ih".into(), self.w_ih.view().into_dyn()),
            ("w_hh".into(), self.w_hh.view().into_dyn()),
            ("bias".into(), self.bias.view().into_dyn()),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        vec![
            ("w_ih".into(), self.w_ih.view_mut().into_dyn()),
            ("w_hh".into(), self.w_hh.view_mut().into_dyn()),
            ("bias".into(), self.bias.view_mut().into_dyn()),
        ]
    }
}

impl Parameters for BiLstm {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = prefixed("fwd", self.fwd.tensors());
        out.extend(prefixed("bwd", self.bwd.tensors()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let (f, b) = (&mut self.fwd, &mut self.bwd);
        let mut out = prefixed("fwd", f.tensors_mut());
        out.extend(prefixed("bwd", b.tensors_mut()));
        out
    }
}

pub fn param_count<P: Parameters + ?Sized>(p: &P) -> usize {
    p.tensors().iter().map(|(_, t)| t.len()).sum()
}

/// All values in tensor order, each tensor row-major.
pub fn flatten<P: Parameters + ?Sized>(p: &P) -> Vec<f64> {
    p.tensors().iter().flat_map(|(_, t)| t.iter().copied().collect::<Vec<_>>()).collect()
}

/// Inverse of [`flatten`].
pub fn unflatten<P: Parameters + ?Sized>(p: &mut P, values: &[f64]) {
    assert_eq!(values.len(), param_count(p), "flat parameter length");
    let mut it = values.iter();
    for (_, mut t) in p.tensors_mut() {
        for v in t.iter_mut() {
            *v = *it.next().unwrap();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Decoupled weight decay (AdamW). When false, decay is added to the
    /// gradient as an L2 term (plain Adam).
    pub decoupled: bool,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 2.08e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01, decoupled: true }
    }
}

#[derive(Debug, Clone)]
pub struct AdamW {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(config: AdamConfig) -> Self {
        AdamW { config, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update. A non-finite gradient aborts before anything changes.
    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) -> Result<(), NnError> {
        let gs = grads.tensors();
        for (name, g) in &gs {
            check_finite(&format!("gradient {name}"), g.iter())?;
        }
        let mut ps = params.tensors_mut();
        if self.m.is_empty() {
            self.m = ps.iter().map(|(_, p)| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        assert_eq!(ps.len(), gs.len(), "parameter/gradient tensor count");
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for (k, ((_, p), (_, g))) in ps.iter_mut().zip(&gs).enumerate() {
            assert_eq!(p.shape(), g.shape(), "parameter/gradient shape");
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (j, (w, &gj)) in p.iter_mut().zip(g.iter()).enumerate() {
                let gj = if c.decoupled { gj } else { gj + c.weight_decay * *w };
                m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * gj;
                v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * gj * gj;
                if c.decoupled {
                    *w -= c.lr * c.weight_decay * *w;
                }
                *w -= c.lr * (m[j] / bc1) / ((v[j] / bc2).sqrt() + c.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn cfg(lr: f64, wd: f64) -> AdamConfig {
        AdamConfig { lr, weight_decay: wd, ..AdamConfig::default() }
    }

    #[test]
    fn zero_gradient_no_decay_is_noop() {
        let mut p = array![1.5, -2.0, 0.25];
        let before = p.clone();
        let mut opt = AdamW::new(cfg(0.1, 0.0));
        opt.step(&mut p, &Array1::zeros(3)).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_closed_form() {
        let mut p = array![0.0];
        let mut opt = AdamW::new(cfg(0.1, 0.0));
        opt.step(&mut p, &array![1.0]).unwrap();
        // bias-corrected m = 1, v = 1
        let want = -0.1 * 1.0 / (1.0 + 1e-8);
        assert!((p[0] - want).abs() < 1e-15);
    }

    #[test]
    fn decoupled_decay_shrinks() {
        let mut p = array![2.0, -4.0];
        let mut opt = AdamW::new(cfg(0.1, 0.01));
        opt.step(&mut p, &Array1::zeros(2)).unwrap();
        assert_eq!(p, array![2.0 * (1.0 - 0.001), -4.0 * (1.0 - 0.001)]);
    }

    #[test]
    fn plain_adam_folds_decay_into_gradient() {
        let mut p = array![2.0];
        let mut opt = AdamW::new(AdamConfig { decoupled: false, ..cfg(0.1, 0.5) });
        opt.step(&mut p, &array![0.0]).unwrap();
        // effective gradient 1.0 -> first step moves by lr
        assert!((p[0] - (2.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = array![1.0, 2.0];
        let mut opt = AdamW::new(cfg(0.1, 0.01));
        let err = opt.step(&mut p, &array![0.5, f64::NAN]).unwrap_err();
        assert!(matches!(err, NnError::NonFinite { index: 1, .. }));
        assert_eq!(p, array![1.0, 2.0]);
        assert_eq!(opt.steps(), 0);
    }

    #[test]
    fn flatten_round_trip() {
        let mut l = Lstm::zeros(2, 3);
        let vals: Vec<f64> = (0..param_count(&l)).map(|k| k as f64).collect();
        unflatten(&mut l, &vals);
        assert_eq!(flatten(&l), vals);
        assert_eq!(l.bias[0], (4 * 3 * 2 + 4 * 3 * 3) as f64);
    }
}
