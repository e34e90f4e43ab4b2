//! Sequence-mode minimal GRU reference: the recurrence and its closed form
//! must agree, which is the oracle the graph layer's gating is built on.
//!
//! h_0 = 0. The closed form is evaluated with cumulative sums of log(1 - z)
//! so the per-step inverse products never overflow; a saturated gate
//! (z = 1) turns the log factor into -inf and the corresponding terms into
//! exact zeros rather than NaNs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numerics::Tensor;
use crate::scalar::Scalar;

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqMode {
    Recurrence,
    ClosedForm,
}

#[derive(Debug, Clone)]
pub struct MinGruParams<T> {
    /// Gate projection, (d_x, d_h).
    pub wz: Tensor<T>,
    pub bz: Tensor<T>,
    /// Candidate projection, (d_x, d_h).
    pub wh: Tensor<T>,
    pub bh: Tensor<T>,
}

impl<T: Scalar> MinGruParams<T> {
    /// State expansion d_h = alpha · d_x with alpha >= 1.
    pub fn init(d_x: usize, d_h: usize, seed: u64) -> Result<Self, ModelError> {
        if d_h < d_x {
            return Err(ModelError::TypeConstraintViolation(format!(
                "state expansion requires d_h >= d_x (got {d_h} < {d_x})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std = (2.0 / (d_x + d_h) as f64).sqrt();
        let mut mat = |r: usize, c: usize| {
            let data: Vec<T> = (0..r * c)
                .map(|_| {
                    let u1: f64 = 1.0 - rng.gen::<f64>();
                    let u2: f64 = rng.gen();
                    T::from_f64((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos() * std)
                })
                .collect();
            Tensor::from_vec(&[r, c], data).expect("shape")
        };
        Ok(MinGruParams {
            wz: mat(d_x, d_h),
            bz: Tensor::zeros(&[d_h]),
            wh: mat(d_x, d_h),
            bh: Tensor::zeros(&[d_h]),
        })
    }
}

/// x: (T, d_x) → h: (T, d_h). Gates are sigmoid-projected, candidates linear.
pub fn mingru_seq<T: Scalar>(
    x: &Tensor<T>,
    params: &MinGruParams<T>,
    mode: SeqMode,
) -> Result<Tensor<T>, ModelError> {
    if x.rank() != 2 || x.shape()[1] != params.wz.shape()[0] {
        return Err(ModelError::TypeConstraintViolation(format!(
            "input {:?} does not match gate projection {:?}",
            x.shape(),
            params.wz.shape()
        )));
    }
    let steps = x.shape()[0];
    let d_x = x.shape()[1];
    let d_h = params.wz.shape()[1];
    let mut z = vec![T::zero(); steps * d_h];
    let mut h_tilde = vec![T::zero(); steps * d_h];
    for t in 0..steps {
        for j in 0..d_h {
            let mut zp = params.bz.data()[j];
            let mut hp = params.bh.data()[j];
            for i in 0..d_x {
                let xi = x.data()[t * d_x + i];
                zp += xi * params.wz.data()[i * d_h + j];
                hp += xi * params.wh.data()[i * d_h + j];
            }
            z[t * d_h + j] = crate::numerics::sigmoid_scalar(zp);
            h_tilde[t * d_h + j] = hp;
        }
    }
    let h = mingru_scan(&z, &h_tilde, steps, d_h, mode);
    Ok(Tensor::from_vec(&[steps, d_h], h).expect("shape"))
}

/// Core scan over precomputed gates; `z` and `h_tilde` are (steps, d) flat.
pub fn mingru_scan<T: Scalar>(
    z: &[T],
    h_tilde: &[T],
    steps: usize,
    d: usize,
    mode: SeqMode,
) -> Vec<T> {
    debug_assert_eq!(z.len(), steps * d);
    debug_assert_eq!(h_tilde.len(), steps * d);
    let mut h = vec![T::zero(); steps * d];
    match mode {
        SeqMode::Recurrence => {
            let mut prev = vec![T::zero(); d];
            for t in 0..steps {
                for j in 0..d {
                    let zt = z[t * d + j];
                    let ht = (T::one() - zt) * prev[j] + zt * h_tilde[t * d + j];
                    h[t * d + j] = ht;
                    prev[j] = ht;
                }
            }
        }
        SeqMode::ClosedForm => {
            // h_t = Σ_{i<=t} z_i ⊙ h̃_i ⊙ exp(Σ_{j=i+1..t} log(1 - z_j))
            let mut acc = vec![T::zero(); d];
            for t in 0..steps {
                for a in acc.iter_mut() {
                    *a = T::zero();
                }
                for j in 0..d {
                    h[t * d + j] = z[t * d + j] * h_tilde[t * d + j];
                }
                for i in (0..t).rev() {
                    for j in 0..d {
                        acc[j] += (-z[(i + 1) * d + j]).ln_1p();
                        let w = acc[j].exp();
                        h[t * d + j] += z[i * d + j] * h_tilde[i * d + j] * w;
                    }
                }
            }
        }
    }
    h
}
