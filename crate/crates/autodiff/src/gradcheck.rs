//! Finite-difference verification of recorded gradients.

use crate::error::{AutodiffError, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Outcome of comparing analytic and central-difference gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// max over checked coordinates of `|analytic - numeric| / max(1, |analytic|)`.
    pub max_rel_error: f64,
    /// Flat index at which the maximum was attained.
    pub worst_index: usize,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
        (analytic - numeric).abs() / analytic.abs().max(1.0)
    }

    /// Folds one coordinate into the running maximum.
    pub fn record(&mut self, index: usize, analytic: f64, numeric: f64) {
        let e = Self::relative_error(analytic, numeric);
        if e > self.max_rel_error || self.checked == 0 {
            self.max_rel_error = e.max(self.max_rel_error);
            self.worst_index = index;
        }
        self.checked += 1;
    }

    pub fn empty() -> Self {
        Self {
            max_rel_error: 0.0,
            worst_index: 0,
            checked: 0,
        }
    }
}

fn eval_scalar<F>(f: &F, x: &Tensor) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::no_grad();
    let xv = tape.leaf(x);
    let out = f(&mut tape, xv)?;
    let v = tape.value(out).item()?;
    if !v.is_finite() {
        return Err(AutodiffError::NonFinite { op: "grad_check" });
    }
    Ok(v)
}

/// `(f(x + h·e_i) - f(x - h·e_i)) / 2h` for a scalar closure of one coordinate.
pub fn central_difference(f: impl Fn(f64) -> Result<f64>, x: f64, h: f64) -> Result<f64> {
    let plus = f(x + h)?;
    let minus = f(x - h)?;
    if !plus.is_finite() || !minus.is_finite() {
        return Err(AutodiffError::NonFinite { op: "central_difference" });
    }
    Ok((plus - minus) / (2.0 * h))
}

/// Compares the tape gradient of scalar `f` at `x` against central differences
/// on every coordinate of `x`.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if h <= 0.0 || !h.is_finite() {
        return Err(AutodiffError::Contract(format!("step h must be positive, got {h}")));
    }
    let mut tape = Tape::new();
    let leaf = x.clone().with_grad();
    let xv = tape.leaf(&leaf);
    let out = f(&mut tape, xv)?;
    let grads = tape.backward(out)?;
    let zeros = vec![0.0; x.len()];
    let analytic = grads.get(xv).unwrap_or(&zeros);

    let mut report = GradCheckReport::empty();
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        let numeric = central_difference(
            |v| {
                let mut p = probe.clone();
                p.data_mut()[i] = v;
                eval_scalar(&f, &p)
            },
            orig,
            h,
        )?;
        probe.data_mut()[i] = orig;
        report.record(i, analytic[i], numeric);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_nearly_exact() {
        let x = Tensor::from_vec(vec![4], vec![0.3, -1.2, 2.0, 0.7]).unwrap();
        let r = grad_check(
            |t, v| {
                let sq = t.mul(v, v)?;
                let s = t.scale(sq, 1.5)?;
                t.sum(s)
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert_eq!(r.checked, 4);
        assert!(r.max_rel_error < 1e-8, "{r:?}");
    }

    #[test]
    fn rejects_bad_step_and_non_finite() {
        let x = Tensor::scalar(1.0);
        assert!(grad_check(|t, v| t.sum(v), &x, 0.0).is_err());
        let zero = Tensor::scalar(0.0);
        assert!(grad_check(|t, v| { let l = t.log(v)?; t.sum(l) }, &zero, 1e-3).is_err());
    }
}
