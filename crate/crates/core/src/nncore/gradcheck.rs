/// Denominator floor for [`relative_error`], so that components whose true
/// gradient is (numerically) zero are compared on an absolute scale.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compare the gradient returned by `f` at `params` against central
/// differences `(f(p + h e_k) - f(p - h e_k)) / 2h` on every coordinate.
pub fn grad_check<F>(f: F, params: &[f64], h: f64) -> GradCheck
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    assert!(h > 0.0, "perturbation must be positive");
    let (_, grad) = f(params);
    assert_eq!(grad.len(), params.len(), "gradient length");
    let mut p = params.to_vec();
    let mut out = GradCheck { max_rel_error: 0.0, worst_index: 0, analytic: 0.0, numeric: 0.0, checked: 0 };
    for k in 0..p.len() {
        let orig = p[k];
        p[k] = orig + h;
        let up = f(&p).0;
        p[k] = orig - h;
        let down = f(&p).0;
        p[k] = orig;
        let numeric = (up - down) / (2.0 * h);
        let err = relative_error(grad[k], numeric);
        if err > out.max_rel_error || out.checked == 0 {
            out = GradCheck { max_rel_error: err, worst_index: k, analytic: grad[k], numeric, checked: out.checked };
        }
        out.checked += 1;
    }
    out
}
