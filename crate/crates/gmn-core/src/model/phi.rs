//! Eigenvalue maps φ_1..φ_m producing the d×m matrix Φ whose column i is
//! φ_i(Λ_d). Padded eigenvalue slots are masked to zero in every mode so
//! zero-padding stays inert downstream.

use crate::numerics::{NumericsError, ReduceOp, Tape, Tensor, UnaryOp, Vid};
use crate::scalar::Scalar;

use super::PoolKind;

/// Power mode: Φ[j, i] = λ_j^{s_i}; the last `pad_count` rows are zeroed.
/// Constant (no learnable parameters), so the result is a plain tensor.
pub fn phi_eval_values<T: Scalar>(exponents: &[u32], lambda: &[T], pad_count: usize) -> Tensor<T> {
    let d = lambda.len();
    let m = exponents.len();
    let real = d - pad_count;
    let mut data = vec![T::zero(); d * m];
    for (j, &lam) in lambda.iter().enumerate().take(real) {
        for (i, &s) in exponents.iter().enumerate() {
            data[j * m + i] = lam.powi(s as i32);
        }
    }
    Tensor::from_vec(&[d, m], data).expect("phi shape")
}

/// Set-aggregation mode, on tape: Φ[j, i] = MLP1_i(λ_j) + pool_{j'} MLP2_i(λ_{j'}),
/// with the pool taken over non-pad slots only. Both MLPs are scalar→scalar
/// with one tanh hidden layer, batched over the m maps.
#[allow(clippy::too_many_arguments)]
pub(crate) fn phi_setagg_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    m1: [Vid; 4],
    m2: [Vid; 4],
    lambda: Vid,
    pad_mask: Vid,
    real_count: usize,
    pool: PoolKind,
) -> Result<Vid, NumericsError> {
    let per_eig = mlp_scalar(tape, m1, lambda)?; // (d, m)
    let pooled_in = mlp_scalar(tape, m2, lambda)?; // (d, m)
    let masked = tape.mul(pooled_in, pad_mask)?;
    let mut pooled = tape.reduce(ReduceOp::Sum, masked, Some(0), false)?; // (m,)
    if pool == PoolKind::Mean {
        pooled = tape.scale(T::from_f64(1.0 / real_count.max(1) as f64), pooled)?;
    }
    let phi = tape.add(per_eig, pooled)?;
    tape.mul(phi, pad_mask)
}

/// [w1 (m,h), b1 (m,h), w2 (m,h), b2 (m,)] applied per eigenvalue:
/// out[j, i] = Σ_q tanh(λ_j w1[i,q] + b1[i,q]) w2[i,q] + b2[i].
fn mlp_scalar<T: Scalar>(
    tape: &mut Tape<T>,
    [w1, b1, w2, b2]: [Vid; 4],
    lambda: Vid,
) -> Result<Vid, NumericsError> {
    let pre = tape.contract("j,iq->jiq", lambda, w1)?;
    let pre = tape.add(pre, b1)?;
    let hid = tape.unary(UnaryOp::Tanh, pre)?;
    let out = tape.contract("jiq,iq->ji", hid, w2)?;
    tape.add(out, b2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_zero_order_is_constant_one() {
        let phi = phi_eval_values::<f64>(&[0], &[0.5, 2.0], 0);
        assert_eq!(phi.data(), &[1.0, 1.0]);
    }

    #[test]
    fn power_identity() {
        let phi = phi_eval_values::<f64>(&[1], &[0.5, 2.0], 0);
        assert_eq!(phi.data(), &[0.5, 2.0]);
    }

    #[test]
    fn power_masks_padding_even_for_zero_exponent() {
        let phi = phi_eval_values::<f64>(&[0, 2], &[0.5, 2.0, 0.0], 1);
        assert_eq!(phi.shape(), &[3, 2]);
        assert_eq!(phi.data(), &[1.0, 0.25, 1.0, 4.0, 0.0, 0.0]);
    }

    #[test]
    fn setagg_with_zero_pooled_mlp_is_per_eigenvalue() {
        let mut tape = Tape::<f64>::new();
        let (m, h, d) = (2usize, 3usize, 2usize);
        let w1 = tape.constant(Tensor::filled(&[m, h], 0.7));
        let b1 = tape.constant(Tensor::filled(&[m, h], 0.1));
        let w2 = tape.constant(Tensor::filled(&[m, h], 0.5));
        let b2 = tape.constant(Tensor::filled(&[m], 0.2));
        let zw = tape.constant(Tensor::zeros(&[m, h]));
        let zb = tape.constant(Tensor::zeros(&[m]));
        let lambda = tape.constant(Tensor::from_vec(&[d], vec![0.3, 1.2]).unwrap());
        let mask = tape.constant(Tensor::ones(&[d, 1]));
        let phi = phi_setagg_on_tape(
            &mut tape,
            [w1, b1, w2, b2],
            [zw, zw, zw, zb],
            lambda,
            mask,
            d,
            PoolKind::Mean,
        )
        .unwrap();
        let expect = |lam: f64| 3.0 * (0.7 * lam + 0.1).tanh() * 0.5 + 0.2;
        let got = tape.value(phi);
        for i in 0..m {
            assert!((got.data()[i] - expect(0.3)).abs() < 1e-12);
            assert!((got.data()[m + i] - expect(1.2)).abs() < 1e-12);
        }
        let _ = zb;
    }
}
