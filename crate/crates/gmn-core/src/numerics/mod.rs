//! Dense tensors with a minimal reverse-mode tape.
//!
//! The op set is exactly what the model needs: elementwise maps, broadcasted
//! add/sub/mul, a whitelist of labeled contractions, reductions, reshape,
//! dropout, row gather/scatter, and multiplication by a constant sparse
//! matrix. [`fd_check`] is the independent finite-difference oracle used to
//! validate every backward rule.

mod contract;
mod fd;
mod tape;
mod tensor;

pub use contract::{ContractSpec, CONTRACT_WHITELIST};
pub use fd::{fd_check, FdReport};
pub use tape::{sigmoid as sigmoid_scalar, BinOp, GradientMap, ReduceOp, Tape, UnaryOp, Vid};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("reciprocal of zero")]
    DivByZero,
    #[error("contraction spec not in the whitelist: {0}")]
    UnsupportedSpec(String),
    #[error("axis {axis} out of range for rank {rank}")]
    AxisError { axis: usize, rank: usize },
    #[error("output value is not on this tape")]
    DetachedOutput,
    #[error("non-finite value produced")]
    NonFinite,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], data: Vec<f64>) -> Tensor<f64> {
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn sigmoid_at_zero() {
        let mut tape = Tape::new();
        let x = tape.input(t(&[1], vec![0.0]));
        let y = tape.sigmoid(x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.5]);
    }

    #[test]
    fn elementwise_mul() {
        let mut tape = Tape::new();
        let a = tape.input(t(&[2], vec![1.0, 2.0]));
        let b = tape.input(t(&[2], vec![3.0, 4.0]));
        let y = tape.mul(a, b).unwrap();
        assert_eq!(tape.value(y).data(), &[3.0, 8.0]);
    }

    #[test]
    fn reciprocal_of_zero_trapped() {
        let mut tape = Tape::<f64>::new().with_finite_checks(true);
        let x = tape.input(t(&[1], vec![0.0]));
        assert!(matches!(
            tape.unary(UnaryOp::Reciprocal, x),
            Err(NumericsError::DivByZero)
        ));
    }

    #[test]
    fn reduce_examples() {
        let mut tape = Tape::new();
        let x = tape.input(t(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]));
        let s = tape.reduce(ReduceOp::Sum, x, Some(0), false).unwrap();
        assert_eq!(tape.value(s).data(), &[4.0, 6.0]);
        assert_eq!(tape.value(s).shape(), &[2]);
        let one = tape.input(t(&[1], vec![7.5]));
        let m = tape.reduce(ReduceOp::Mean, one, Some(0), false).unwrap();
        assert_eq!(tape.value(m).data(), &[7.5]);
        assert!(matches!(
            tape.reduce(ReduceOp::Sum, x, Some(2), false),
            Err(NumericsError::AxisError { axis: 2, rank: 2 })
        ));
    }

    #[test]
    fn max_backward_routes_to_argmax_lowest_tie() {
        let mut tape = Tape::new();
        let x = tape.input(t(&[3], vec![2.0, 5.0, 5.0]));
        let m = tape.reduce(ReduceOp::Max, x, Some(0), false).unwrap();
        let grads = tape.backward(m).unwrap();
        assert_eq!(grads.grad(x).data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn backward_sum_of_squares() {
        let mut tape = Tape::new();
        let x = tape.input(t(&[2], vec![1.0, 2.0]));
        let sq = tape.unary(UnaryOp::Square, x).unwrap();
        let y = tape.reduce(ReduceOp::Sum, sq, None, false).unwrap();
        let grads = tape.backward(y).unwrap();
        assert_eq!(grads.grad(x).data(), &[2.0, 4.0]);
    }

    #[test]
    fn backward_sigmoid_at_zero() {
        let mut tape = Tape::new();
        let x = tape.input(t(&[], vec![0.0]));
        let y = tape.sigmoid(x).unwrap();
        let grads = tape.backward(y).unwrap();
        assert_eq!(grads.grad(x).data(), &[0.25]);
    }

    #[test]
    fn off_path_inputs_get_zero_grads() {
        let mut tape = Tape::new();
        let x = tape.input(t(&[2], vec![1.0, 2.0]));
        let unused = tape.input(t(&[3], vec![0.0; 3]));
        let y = tape.reduce(ReduceOp::Sum, x, None, false).unwrap();
        let grads = tape.backward(y).unwrap();
        assert_eq!(grads.grad(unused).data(), &[0.0; 3]);
        assert!(!grads.has_grad(unused));
    }

    #[test]
    fn detached_output_rejected() {
        let tape = Tape::<f64>::new();
        assert!(matches!(tape.backward(Vid(5)), Err(NumericsError::DetachedOutput)));
    }

    #[test]
    fn fd_quadratic_form() {
        // f(x) = sum(x ⊙ x ⊙ [1, 2, 3]) has gradient 2 c x.
        let x = t(&[3], vec![0.3, -0.7, 1.1]);
        let report = fd_check(
            |tape, xid| {
                let c = tape.constant(t(&[3], vec![1.0, 2.0, 3.0]));
                let sq = tape.unary(UnaryOp::Square, xid)?;
                let w = tape.mul(sq, c)?;
                tape.reduce(ReduceOp::Sum, w, None, false)
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_err <= 1e-9, "{report:?}");
    }

    #[test]
    fn fd_constant_function() {
        let x = t(&[2], vec![1.0, 2.0]);
        let report = fd_check(
            |tape, _| {
                let c = tape.constant(t(&[], vec![4.0]));
                Ok(c)
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert_eq!(report.max_abs_err, 0.0);
        assert_eq!(report.max_rel_err, 0.0);
    }

    /// Every op's backward rule against the stencil on random shapes.
    #[test]
    fn fd_over_op_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let unaries = [
            UnaryOp::Sigmoid,
            UnaryOp::Relu,
            UnaryOp::Gelu,
            UnaryOp::Silu,
            UnaryOp::Exp,
            UnaryOp::Softplus,
            UnaryOp::Square,
            UnaryOp::Abs,
        ];
        for trial in 0..20 {
            let rows = rng.gen_range(1..4usize);
            let cols = rng.gen_range(1..5usize);
            let data: Vec<f64> = (0..rows * cols)
                // keep away from relu/abs kinks
                .map(|_| {
                    let v: f64 = rng.gen::<f64>() - 0.5;
                    v + 0.2 * v.signum()
                })
                .collect();
            let x = t(&[rows, cols], data);
            let op = unaries[trial % unaries.len()];
            let report = fd_check(
                |tape, xid| {
                    let u = tape.unary(op, xid)?;
                    let w = tape.mul(u, xid)?; // mix in a binary op
                    tape.reduce(ReduceOp::Sum, w, None, false)
                },
                &x,
                1e-5,
            )
            .unwrap();
            assert!(report.max_rel_err <= 1e-5, "{op:?}: {report:?}");
        }
    }

    #[test]
    fn fd_contract_and_broadcast() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = t(&[3, 4], (0..12).map(|_| rng.gen::<f64>() - 0.5).collect());
        let w = t(&[4, 2], (0..8).map(|_| rng.gen::<f64>() - 0.5).collect());
        let bias = t(&[2], vec![0.3, -0.1]);
        let report = fd_check(
            |tape, xid| {
                let wid = tape.constant(w.clone());
                let bid = tape.constant(bias.clone());
                let y = tape.contract("ij,jk->ik", xid, wid)?;
                let y = tape.add(y, bid)?; // broadcast along rows
                let y = tape.sigmoid(y)?;
                tape.reduce(ReduceOp::Mean, y, None, false)
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_err <= 1e-7, "{report:?}");
    }

    #[test]
    fn dropout_mask_deterministic_and_scaled() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::ones(&[1000]));
        let y = tape.dropout(x, 0.25, 99).unwrap();
        let kept: Vec<f64> = tape.value(y).data().iter().copied().filter(|&v| v != 0.0).collect();
        // inverted dropout scale
        for v in &kept {
            assert!((v - 1.0 / 0.75).abs() < 1e-12);
        }
        let frac = kept.len() as f64 / 1000.0;
        assert!((frac - 0.75).abs() < 0.05, "kept {frac}");
        // same key → identical mask; different key → different mask
        let mut tape2 = Tape::new();
        let x2 = tape2.input(Tensor::ones(&[1000]));
        let y2 = tape2.dropout(x2, 0.25, 99).unwrap();
        assert_eq!(tape.value(y).data(), tape2.value(y2).data());
        let y3 = tape2.dropout(x2, 0.25, 100).unwrap();
        assert_ne!(tape2.value(y2).data(), tape2.value(y3).data());
        // rate 0 is the identity, rate 1 zeroes everything
        let same = tape2.dropout(x2, 0.0, 1).unwrap();
        assert_eq!(same, x2);
        let dead = tape2.dropout(x2, 1.0, 1).unwrap();
        assert!(tape2.value(dead).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gather_scatter_spmm_backward() {
        use crate::spectral::SparseMatrix;
        use std::sync::Arc;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = t(&[4, 2], (0..8).map(|_| rng.gen::<f64>() - 0.5).collect());
        let idx = Arc::new(vec![2u32, 0, 2, 3]);
        let mut triplets = vec![
            (0u32, 1u32, 0.5),
            (1, 0, 0.5),
            (1, 2, -0.25),
            (2, 1, -0.25),
            (3, 3, 1.0),
        ];
        let m = Arc::new(SparseMatrix::from_triplets(4, &mut triplets));
        let report = fd_check(
            |tape, xid| {
                let g = tape.gather_rows(xid, Arc::clone(&idx))?;
                let s = tape.scatter_add_rows(g, Arc::clone(&idx), 4)?;
                let sp = tape.spmm(Arc::clone(&m), s)?;
                let sq = tape.unary(UnaryOp::Square, sp)?;
                tape.reduce(ReduceOp::Sum, sq, None, false)
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_err <= 1e-7, "{report:?}");
    }

    #[test]
    fn replay_is_bit_identical() {
        let run = || {
            let mut tape = Tape::new();
            let x = tape.input(t(&[3, 3], (0..9).map(|i| i as f64 * 0.37 - 1.0).collect()));
            let w = tape.constant(t(&[3, 3], (0..9).map(|i| (i as f64).sin()).collect()));
            let h = tape.contract("ij,jk->ik", x, w).unwrap();
            let h = tape.unary(UnaryOp::Gelu, h).unwrap();
            let h = tape.dropout(h, 0.5, 1234).unwrap();
            let y = tape.reduce(ReduceOp::Sum, h, None, false).unwrap();
            let grads = tape.backward(y).unwrap();
            (tape.value(y).item(), grads.grad(x).data().to_vec())
        };
        let (y1, g1) = run();
        let (y2, g2) = run();
        assert_eq!(y1.to_bits(), y2.to_bits());
        assert_eq!(g1.len(), g2.len());
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn flops_and_bytes_counted() {
        let mut tape = Tape::<f64>::new();
        let a = tape.input(Tensor::ones(&[10, 10]));
        let b = tape.input(Tensor::ones(&[10, 10]));
        let before = tape.flops();
        tape.contract("ij,jk->ik", a, b).unwrap();
        assert_eq!(tape.flops() - before, 2 * 10 * 10 * 10);
        assert_eq!(tape.peak_bytes(), 3 * 100 * 8);
    }
}
