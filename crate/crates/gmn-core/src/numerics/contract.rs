//! Labeled-axis contractions over two operands.
//!
//! The public surface accepts only the fixed whitelist below — every product
//! the model needs and nothing else. Backward passes reuse the same engine
//! with mechanically derived label strings, so each rule is one line.

use crate::scalar::Scalar;

use super::tensor::Tensor;
use super::NumericsError;

/// Contractions accepted from callers. Backward-derived specs bypass the
/// list but share the engine.
pub const CONTRACT_WHITELIST: &[&str] = &[
    "ij,jk->ik",  // matmul
    "ij,kj->ik",  // x · W^T
    "ji,jk->ik",  // A^T · B
    "ij,ik->jk",  // gram-style
    "ij,j->i",    // matrix · vector
    "uk,ki->uki", // per-node column scaling (encodings)
    "ik,ukj->uij", // batched left-multiply by a matrix
    "uij,ij->ui", // row-wise inner products against a shared matrix
    "uij,ij->uj", // column-wise inner products against a shared matrix
    "uij,ij->u",  // full (vectorized) inner product against a shared matrix
    "uij,uij->ui", // row-wise inner products of paired tensors
    "uij,uij->u", // full inner products of paired tensors
    "u,i->ui",    // outer product with a vector
    "vij,vp->ijp", // node-summed outer products (moment tensor)
    "up,ijp->uij", // contraction against the moment tensor
    "j,iq->jiq",  // eigenvalue outer product with per-map MLP weights
    "jiq,iq->ji", // per-map MLP output contraction
];

#[derive(Debug, Clone, PartialEq)]
pub struct ContractSpec {
    pub a_labels: Vec<u8>,
    pub b_labels: Vec<u8>,
    pub out_labels: Vec<u8>,
    text: String,
}

impl ContractSpec {
    /// Parses `"ab,bc->ac"`. Labels may not repeat within one operand, the
    /// output may only use input labels, and every input label must appear
    /// in the output or the other operand.
    pub fn parse(spec: &str) -> Result<Self, NumericsError> {
        let bad = || NumericsError::UnsupportedSpec(spec.to_string());
        let (inputs, out) = spec.split_once("->").ok_or_else(bad)?;
        let (a, b) = inputs.split_once(',').ok_or_else(bad)?;
        let a_labels: Vec<u8> = a.bytes().collect();
        let b_labels: Vec<u8> = b.bytes().collect();
        let out_labels: Vec<u8> = out.bytes().collect();
        for ls in [&a_labels, &b_labels, &out_labels] {
            if ls.len() > 4 {
                return Err(bad());
            }
            for (i, l) in ls.iter().enumerate() {
                if !l.is_ascii_lowercase() || ls[..i].contains(l) {
                    return Err(bad());
                }
            }
        }
        for l in &out_labels {
            if !a_labels.contains(l) && !b_labels.contains(l) {
                return Err(bad());
            }
        }
        for l in &a_labels {
            if !out_labels.contains(l) && !b_labels.contains(l) {
                return Err(bad());
            }
        }
        for l in &b_labels {
            if !out_labels.contains(l) && !a_labels.contains(l) {
                return Err(bad());
            }
        }
        Ok(ContractSpec {
            a_labels,
            b_labels,
            out_labels,
            text: spec.to_string(),
        })
    }

    pub fn parse_whitelisted(spec: &str) -> Result<Self, NumericsError> {
        if !CONTRACT_WHITELIST.contains(&spec) {
            return Err(NumericsError::UnsupportedSpec(spec.to_string()));
        }
        Self::parse(spec)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Label string for d(a): contract the output gradient with `b`.
    pub fn grad_a_spec(&self) -> String {
        format!(
            "{},{}->{}",
            to_str(&self.out_labels),
            to_str(&self.b_labels),
            to_str(&self.a_labels)
        )
    }

    pub fn grad_b_spec(&self) -> String {
        format!(
            "{},{}->{}",
            to_str(&self.out_labels),
            to_str(&self.a_labels),
            to_str(&self.b_labels)
        )
    }

    /// Multiply-add count: 2 per point of the full label space.
    pub fn flops(&self, a: &[usize], b: &[usize]) -> u64 {
        let mut dims = LabelDims::default();
        let _ = dims.merge(&self.a_labels, a);
        let _ = dims.merge(&self.b_labels, b);
        2 * dims.entries.iter().map(|&(_, d)| d as u64).product::<u64>()
    }
}

fn to_str(labels: &[u8]) -> String {
    labels.iter().map(|&b| b as char).collect()
}

#[derive(Default)]
struct LabelDims {
    entries: Vec<(u8, usize)>,
}

impl LabelDims {
    fn merge(&mut self, labels: &[u8], shape: &[usize]) -> Result<(), String> {
        if labels.len() != shape.len() {
            return Err(format!(
                "operand rank {} does not match labels '{}'",
                shape.len(),
                to_str(labels)
            ));
        }
        for (&l, &d) in labels.iter().zip(shape) {
            match self.entries.iter().find(|&&(el, _)| el == l) {
                Some(&(_, prev)) if prev != d => {
                    return Err(format!("label '{}' bound to both {prev} and {d}", l as char))
                }
                Some(_) => {}
                None => self.entries.push((l, d)),
            }
        }
        Ok(())
    }

    fn dim(&self, l: u8) -> usize {
        self.entries.iter().find(|&&(el, _)| el == l).map(|&(_, d)| d).unwrap_or(1)
    }
}

/// Executes the contraction. The output is freshly allocated and zeroed.
pub fn contract<T: Scalar>(
    spec: &ContractSpec,
    a: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<Tensor<T>, NumericsError> {
    let mut dims = LabelDims::default();
    dims.merge(&spec.a_labels, a.shape())
        .and_then(|_| dims.merge(&spec.b_labels, b.shape()))
        .map_err(|msg| NumericsError::ShapeMismatch(format!("{}: {msg}", spec.text)))?;

    // Loop order: output labels, then contracted labels (innermost).
    let mut loop_labels: Vec<u8> = spec.out_labels.clone();
    for &(l, _) in &dims.entries {
        if !loop_labels.contains(&l) {
            loop_labels.push(l);
        }
    }
    let loop_dims: Vec<usize> = loop_labels.iter().map(|&l| dims.dim(l)).collect();
    let stride_of = |labels: &[u8], shape: &[usize]| -> Vec<usize> {
        // row-major strides per label, 0 when absent
        let mut per_axis = vec![1usize; labels.len()];
        for i in (0..labels.len().saturating_sub(1)).rev() {
            per_axis[i] = per_axis[i + 1] * shape[i + 1];
        }
        loop_labels
            .iter()
            .map(|l| {
                labels
                    .iter()
                    .position(|al| al == l)
                    .map(|i| per_axis[i])
                    .unwrap_or(0)
            })
            .collect()
    };
    let sa = stride_of(&spec.a_labels, a.shape());
    let sb = stride_of(&spec.b_labels, b.shape());
    let out_shape: Vec<usize> = spec.out_labels.iter().map(|&l| dims.dim(l)).collect();
    let so = stride_of(&spec.out_labels, &out_shape);

    let mut out = vec![T::zero(); out_shape.iter().product()];
    if loop_dims.iter().all(|&d| d > 0) {
        rec(
            0,
            &loop_dims,
            &sa,
            &sb,
            &so,
            a.data(),
            b.data(),
            &mut out,
            0,
            0,
            0,
        );
    }
    Ok(Tensor::from_parts(out_shape, out))
}

#[allow(clippy::too_many_arguments)]
fn rec<T: Scalar>(
    level: usize,
    dims: &[usize],
    sa: &[usize],
    sb: &[usize],
    so: &[usize],
    a: &[T],
    b: &[T],
    out: &mut [T],
    ao: usize,
    bo: usize,
    oo: usize,
) {
    if level + 1 == dims.len() {
        let (n, za, zb, zo) = (dims[level], sa[level], sb[level], so[level]);
        if zo == 0 {
            let mut acc = T::zero();
            for i in 0..n {
                acc = acc + a[ao + i * za] * b[bo + i * zb];
            }
            out[oo] += acc;
        } else {
            for i in 0..n {
                out[oo + i * zo] += a[ao + i * za] * b[bo + i * zb];
            }
        }
        return;
    }
    for i in 0..dims[level] {
        rec(
            level + 1,
            dims,
            sa,
            sb,
            so,
            a,
            b,
            out,
            ao + i * sa[level],
            bo + i * sb[level],
            oo + i * so[level],
        );
    }
}
