//! Central finite differences against the tape's reverse mode.
//!
//! The closure rebuilds the computation from scratch on every call, so the
//! check is independent of any saved backward state. f64 only; the stencil
//! noise floor makes f32 comparisons meaningless.

use super::tape::{Tape, Vid};
use super::tensor::Tensor;
use super::NumericsError;

#[derive(Debug, Clone, Copy)]
pub struct FdReport {
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub coords: usize,
}

/// Compares reverse-mode gradients of `f` at `x` with central differences
/// `(f(x + h e_i) - f(x - h e_i)) / 2h`.
///
/// `f` receives a fresh tape and the input's id and must return a scalar
/// output id. Relative error per coordinate is `|ad - fd| / max(|ad|, |fd|, 1)`.
pub fn fd_check<F>(f: F, x: &Tensor<f64>, h: f64) -> Result<FdReport, NumericsError>
where
    F: Fn(&mut Tape<f64>, Vid) -> Result<Vid, NumericsError>,
{
    let mut tape = Tape::new();
    let xid = tape.input(x.clone());
    let out = f(&mut tape, xid)?;
    let grads = tape.backward(out)?;
    let analytic = grads.grad(xid);

    let mut report = FdReport { max_rel_err: 0.0, max_abs_err: 0.0, coords: x.len() };
    let eval = |data: Vec<f64>| -> Result<f64, NumericsError> {
        let mut t = Tape::new();
        let id = t.input(Tensor::from_parts(x.shape().to_vec(), data));
        let out = f(&mut t, id)?;
        Ok(t.value(out).item())
    };
    for i in 0..x.len() {
        let mut plus = x.data().to_vec();
        plus[i] += h;
        let mut minus = x.data().to_vec();
        minus[i] -= h;
        let fd = (eval(plus)? - eval(minus)?) / (2.0 * h);
        let ad = analytic.data()[i];
        let abs = (ad - fd).abs();
        let rel = abs / ad.abs().max(fd.abs()).max(1.0);
        report.max_abs_err = report.max_abs_err.max(abs);
        report.max_rel_err = report.max_rel_err.max(rel);
    }
    Ok(report)
}
