//! Task losses built on the tape. Cross entropy and BCE use log-sum-exp /
//! softplus forms that stay finite for any logit magnitude.

use crate::numerics::{NumericsError, ReduceOp, Tape, Tensor, UnaryOp, Vid};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Xent,
    Mae,
    Bce,
}

/// Ground truth for one prediction tensor.
#[derive(Debug, Clone)]
pub enum Target {
    /// Class index per prediction row (xent).
    Classes(Vec<usize>),
    /// Real value per prediction entry (mae).
    Values(Vec<f64>),
    /// 0/1 per prediction entry (bce on logits).
    Binary(Vec<f64>),
}

/// Mean-reduced scalar loss of `pred` against `target`.
pub fn loss_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    pred: Vid,
    target: &Target,
    kind: LossKind,
) -> Result<Vid, NumericsError> {
    let shape = tape.shape(pred).to_vec();
    match (kind, target) {
        (LossKind::Xent, Target::Classes(classes)) => {
            if shape.len() != 2 || shape[0] != classes.len() {
                return Err(NumericsError::ShapeMismatch(format!(
                    "xent: logits {:?} vs {} targets",
                    shape,
                    classes.len()
                )));
            }
            let (rows, k) = (shape[0], shape[1]);
            for &c in classes {
                if c >= k {
                    return Err(NumericsError::ShapeMismatch(format!(
                        "xent: class {c} out of {k}"
                    )));
                }
            }
            let mx = tape.reduce(ReduceOp::Max, pred, Some(1), true)?;
            let shifted = tape.sub(pred, mx)?;
            let ex = tape.unary(UnaryOp::Exp, shifted)?;
            let se = tape.reduce(ReduceOp::Sum, ex, Some(1), true)?;
            let lnse = tape.unary(UnaryOp::Ln, se)?;
            let lse = tape.add(lnse, mx)?; // (rows, 1)
            let mut onehot = vec![T::zero(); rows * k];
            for (r, &c) in classes.iter().enumerate() {
                onehot[r * k + c] = T::one();
            }
            let oh = tape.constant(Tensor::from_vec(&[rows, k], onehot)?);
            let picked_full = tape.mul(pred, oh)?;
            let picked = tape.reduce(ReduceOp::Sum, picked_full, Some(1), true)?;
            let nll = tape.sub(lse, picked)?;
            tape.reduce(ReduceOp::Mean, nll, None, false)
        }
        (LossKind::Mae, Target::Values(values)) => {
            let want: usize = shape.iter().product();
            if want != values.len() {
                return Err(NumericsError::ShapeMismatch(format!(
                    "mae: pred {:?} vs {} targets",
                    shape,
                    values.len()
                )));
            }
            let tv: Vec<T> = values.iter().map(|&v| T::from_f64(v)).collect();
            let tgt = tape.constant(Tensor::from_vec(&shape, tv)?);
            let diff = tape.sub(pred, tgt)?;
            let adiff = tape.unary(UnaryOp::Abs, diff)?;
            tape.reduce(ReduceOp::Mean, adiff, None, false)
        }
        (LossKind::Bce, Target::Binary(values)) => {
            let want: usize = shape.iter().product();
            if want != values.len() {
                return Err(NumericsError::ShapeMismatch(format!(
                    "bce: pred {:?} vs {} targets",
                    shape,
                    values.len()
                )));
            }
            // softplus(x) - t*x
            let sp = tape.unary(UnaryOp::Softplus, pred)?;
            let tv: Vec<T> = values.iter().map(|&v| T::from_f64(v)).collect();
            let tgt = tape.constant(Tensor::from_vec(&shape, tv)?);
            let tx = tape.mul(tgt, pred)?;
            let per = tape.sub(sp, tx)?;
            tape.reduce(ReduceOp::Mean, per, None, false)
        }
        _ => Err(NumericsError::ShapeMismatch(
            "loss kind does not match target kind".into(),
        )),
    }
}
