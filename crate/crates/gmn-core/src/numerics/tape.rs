//! Append-only tape of tensor ops with reverse-mode gradients.
//!
//! The tape owns every intermediate value; ops push a node and return a
//! [`Vid`]. `backward` walks the nodes in reverse, visiting each once.
//! Analytic FLOP and byte counters feed the scaling benchmarks.

use std::sync::Arc;

use crate::scalar::Scalar;
use crate::spectral::SparseMatrix;

use super::contract::{contract, ContractSpec};
use super::tensor::{broadcast_shape, broadcast_strides, Tensor};
use super::NumericsError;

/// Handle to a value on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Vid(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Reciprocal,
    Sigmoid,
    Relu,
    Gelu,
    Silu,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Softplus,
    Square,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Mean,
    Max,
}

enum Op<T> {
    Input,
    Unary(UnaryOp, Vid),
    Scale(T, Vid),
    Clamp(T, T, Vid),
    Binary(BinOp, Vid, Vid),
    Contract(Arc<ContractSpec>, Vid, Vid),
    Reduce(ReduceOp, Option<usize>, bool, Vid, Option<Vec<usize>>),
    Reshape(Vid),
    Dropout(Vid, Arc<Vec<T>>),
    GatherRows(Vid, Arc<Vec<u32>>),
    ScatterAddRows(Vid, Arc<Vec<u32>>),
    /// Multiplication by a constant symmetric sparse matrix.
    SpMM(Arc<SparseMatrix<T>>, Vid),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    bytes: usize,
    peak_bytes: usize,
    flops: u64,
    check_finite: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            bytes: 0,
            peak_bytes: 0,
            flops: 0,
            check_finite: cfg!(debug_assertions),
        }
    }

    /// Enables NaN/Inf trapping on every op result (on by default in debug).
    pub fn with_finite_checks(mut self, on: bool) -> Self {
        self.check_finite = on;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Multiply-add count of everything recorded so far.
    pub fn flops(&self) -> u64 {
        self.flops
    }

    /// High-water mark of tensor bytes held by the tape.
    pub fn peak_bytes(&self) -> usize {
        self.peak_bytes
    }

    pub fn value(&self, id: Vid) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: Vid) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Result<Vid, NumericsError> {
        if self.check_finite && !value.all_finite() {
            return Err(NumericsError::NonFinite);
        }
        self.bytes += value.len() * std::mem::size_of::<T>();
        self.peak_bytes = self.peak_bytes.max(self.bytes);
        self.nodes.push(Node { value, op });
        Ok(Vid(self.nodes.len() - 1))
    }

    pub fn input(&mut self, value: Tensor<T>) -> Vid {
        self.bytes += value.len() * std::mem::size_of::<T>();
        self.peak_bytes = self.peak_bytes.max(self.bytes);
        self.nodes.push(Node { value, op: Op::Input });
        Vid(self.nodes.len() - 1)
    }

    /// Alias of [`Tape::input`] for values nothing differentiates against.
    pub fn constant(&mut self, value: Tensor<T>) -> Vid {
        self.input(value)
    }

    pub fn unary(&mut self, op: UnaryOp, a: Vid) -> Result<Vid, NumericsError> {
        let x = &self.nodes[a.0].value;
        if self.check_finite && op == UnaryOp::Reciprocal && x.data().iter().any(|v| *v == T::zero())
        {
            return Err(NumericsError::DivByZero);
        }
        let data: Vec<T> = x.data().iter().map(|&v| eval_unary(op, v)).collect();
        let value = Tensor::from_parts(x.shape().to_vec(), data);
        self.flops += value.len() as u64;
        self.push(value, Op::Unary(op, a))
    }

    pub fn scale(&mut self, c: T, a: Vid) -> Result<Vid, NumericsError> {
        let x = &self.nodes[a.0].value;
        let data: Vec<T> = x.data().iter().map(|&v| c * v).collect();
        let value = Tensor::from_parts(x.shape().to_vec(), data);
        self.flops += value.len() as u64;
        self.push(value, Op::Scale(c, a))
    }

    pub fn clamp(&mut self, lo: T, hi: T, a: Vid) -> Result<Vid, NumericsError> {
        let x = &self.nodes[a.0].value;
        let data: Vec<T> = x
            .data()
            .iter()
            .map(|&v| if v < lo { lo } else if v > hi { hi } else { v })
            .collect();
        let value = Tensor::from_parts(x.shape().to_vec(), data);
        self.flops += value.len() as u64;
        self.push(value, Op::Clamp(lo, hi, a))
    }

    /// Elementwise add/sub/mul with right-aligned broadcasting.
    pub fn binary(&mut self, op: BinOp, a: Vid, b: Vid) -> Result<Vid, NumericsError> {
        let xa = &self.nodes[a.0].value;
        let xb = &self.nodes[b.0].value;
        let out_shape = broadcast_shape(xa.shape(), xb.shape()).ok_or_else(|| {
            NumericsError::ShapeMismatch(format!(
                "cannot broadcast {:?} with {:?}",
                xa.shape(),
                xb.shape()
            ))
        })?;
        let sa = broadcast_strides(xa.shape(), &out_shape);
        let sb = broadcast_strides(xb.shape(), &out_shape);
        let len: usize = out_shape.iter().product();
        let mut data = vec![T::zero(); len];
        let da = xa.data();
        let db = xb.data();
        let mut idx = vec![0usize; out_shape.len()];
        let mut oa = 0usize;
        let mut ob = 0usize;
        for slot in data.iter_mut() {
            *slot = match op {
                BinOp::Add => da[oa] + db[ob],
                BinOp::Sub => da[oa] - db[ob],
                BinOp::Mul => da[oa] * db[ob],
            };
            // odometer increment
            for ax in (0..out_shape.len()).rev() {
                idx[ax] += 1;
                oa += sa[ax];
                ob += sb[ax];
                if idx[ax] < out_shape[ax] {
                    break;
                }
                idx[ax] = 0;
                oa -= sa[ax] * out_shape[ax];
                ob -= sb[ax] * out_shape[ax];
            }
        }
        let value = Tensor::from_parts(out_shape, data);
        self.flops += value.len() as u64;
        self.push(value, Op::Binary(op, a, b))
    }

    pub fn contract(&mut self, spec: &str, a: Vid, b: Vid) -> Result<Vid, NumericsError> {
        let spec = ContractSpec::parse_whitelisted(spec)?;
        self.contract_spec(Arc::new(spec), a, b)
    }

    fn contract_spec(
        &mut self,
        spec: Arc<ContractSpec>,
        a: Vid,
        b: Vid,
    ) -> Result<Vid, NumericsError> {
        let xa = &self.nodes[a.0].value;
        let xb = &self.nodes[b.0].value;
        let value = contract(&spec, xa, xb)?;
        self.flops += spec.flops(xa.shape(), xb.shape());
        self.push(value, Op::Contract(spec, a, b))
    }

    pub fn reduce(
        &mut self,
        op: ReduceOp,
        a: Vid,
        axis: Option<usize>,
        keepdims: bool,
    ) -> Result<Vid, NumericsError> {
        let x = &self.nodes[a.0].value;
        let shape = x.shape().to_vec();
        if let Some(ax) = axis {
            if ax >= shape.len() {
                return Err(NumericsError::AxisError { axis: ax, rank: shape.len() });
            }
        }
        let (value, argmax) = reduce_forward(op, x, axis, keepdims);
        self.flops += x.len() as u64;
        self.push(value, Op::Reduce(op, axis, keepdims, a, argmax))
    }

    pub fn reshape(&mut self, a: Vid, shape: &[usize]) -> Result<Vid, NumericsError> {
        let value = self.nodes[a.0].value.reshaped(shape)?;
        // shares the buffer; no byte cost
        self.nodes.push(Node { value, op: Op::Reshape(a) });
        Ok(Vid(self.nodes.len() - 1))
    }

    /// Inverted dropout: kept entries are scaled by 1/(1-rate). `rate == 0`
    /// returns the input unchanged; the mask stream is a pure function of
    /// `key` and the element index.
    pub fn dropout(&mut self, a: Vid, rate: f64, key: u64) -> Result<Vid, NumericsError> {
        if rate == 0.0 {
            return Ok(a);
        }
        if !(0.0..=1.0).contains(&rate) {
            return Err(NumericsError::ShapeMismatch(format!("dropout rate {rate}")));
        }
        let x = &self.nodes[a.0].value;
        let keep_scale = if rate < 1.0 { T::from_f64(1.0 / (1.0 - rate)) } else { T::zero() };
        let mask: Vec<T> = (0..x.len())
            .map(|i| {
                if counter_uniform(key, i as u64) >= rate {
                    keep_scale
                } else {
                    T::zero()
                }
            })
            .collect();
        let data: Vec<T> = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let value = Tensor::from_parts(x.shape().to_vec(), data);
        self.flops += value.len() as u64;
        self.push(value, Op::Dropout(a, Arc::new(mask)))
    }

    /// out[i, :] = a[indices[i], :]
    pub fn gather_rows(&mut self, a: Vid, indices: Arc<Vec<u32>>) -> Result<Vid, NumericsError> {
        let x = &self.nodes[a.0].value;
        if x.rank() != 2 {
            return Err(NumericsError::ShapeMismatch("gather_rows needs rank 2".into()));
        }
        let (rows, cols) = (x.shape()[0], x.shape()[1]);
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices.iter() {
            let i = i as usize;
            if i >= rows {
                return Err(NumericsError::ShapeMismatch(format!(
                    "gather index {i} out of {rows} rows"
                )));
            }
            data.extend_from_slice(&x.data()[i * cols..(i + 1) * cols]);
        }
        let value = Tensor::from_parts(vec![indices.len(), cols], data);
        self.push(value, Op::GatherRows(a, indices))
    }

    /// out[indices[i], :] += a[i, :]; out has `n_out` rows.
    pub fn scatter_add_rows(
        &mut self,
        a: Vid,
        indices: Arc<Vec<u32>>,
        n_out: usize,
    ) -> Result<Vid, NumericsError> {
        let x = &self.nodes[a.0].value;
        if x.rank() != 2 || x.shape()[0] != indices.len() {
            return Err(NumericsError::ShapeMismatch("scatter_add_rows shape".into()));
        }
        let cols = x.shape()[1];
        let mut data = vec![T::zero(); n_out * cols];
        for (row, &i) in indices.iter().enumerate() {
            let i = i as usize;
            if i >= n_out {
                return Err(NumericsError::ShapeMismatch(format!(
                    "scatter index {i} out of {n_out} rows"
                )));
            }
            for c in 0..cols {
                data[i * cols + c] += x.data()[row * cols + c];
            }
        }
        self.flops += x.len() as u64;
        let value = Tensor::from_parts(vec![n_out, cols], data);
        self.push(value, Op::ScatterAddRows(a, indices))
    }

    /// out = M · a for a constant symmetric sparse matrix M (n×n times n×c).
    pub fn spmm(&mut self, m: Arc<SparseMatrix<T>>, a: Vid) -> Result<Vid, NumericsError> {
        let x = &self.nodes[a.0].value;
        if x.rank() != 2 || x.shape()[0] != m.n() {
            return Err(NumericsError::ShapeMismatch(format!(
                "spmm: matrix is {0}x{0}, operand {1:?}",
                m.n(),
                x.shape()
            )));
        }
        let value = spmm_forward(&m, x);
        self.flops += 2 * m.nnz() as u64 * x.shape()[1] as u64;
        self.push(value, Op::SpMM(m, a))
    }

    // ---- convenience wrappers ----

    pub fn add(&mut self, a: Vid, b: Vid) -> Result<Vid, NumericsError> {
        self.binary(BinOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Vid, b: Vid) -> Result<Vid, NumericsError> {
        self.binary(BinOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Vid, b: Vid) -> Result<Vid, NumericsError> {
        self.binary(BinOp::Mul, a, b)
    }

    pub fn sigmoid(&mut self, a: Vid) -> Result<Vid, NumericsError> {
        self.unary(UnaryOp::Sigmoid, a)
    }

    /// Gradients of `output` with respect to every tape value. Inputs not on
    /// a path to the output get zero gradients.
    pub fn backward(&self, output: Vid) -> Result<GradientMap<T>, NumericsError> {
        self.backward_seeded(output, None)
    }

    pub fn backward_seeded(
        &self,
        output: Vid,
        seed: Option<Tensor<T>>,
    ) -> Result<GradientMap<T>, NumericsError> {
        if output.0 >= self.nodes.len() {
            return Err(NumericsError::DetachedOutput);
        }
        let out_val = &self.nodes[output.0].value;
        let seed = match seed {
            Some(s) => {
                if s.shape() != out_val.shape() {
                    return Err(NumericsError::ShapeMismatch(format!(
                        "seed gradient {:?} vs output {:?}",
                        s.shape(),
                        out_val.shape()
                    )));
                }
                s
            }
            None => {
                if out_val.len() != 1 {
                    return Err(NumericsError::ShapeMismatch(
                        "backward without a seed needs a scalar output".into(),
                    ));
                }
                Tensor::from_parts(out_val.shape().to_vec(), vec![T::one()])
            }
        };
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(seed.data().to_vec());
        for id in (0..=output.0).rev() {
            let Some(gdata) = grads[id].take() else { continue };
            let g = Tensor::from_parts(self.nodes[id].value.shape().to_vec(), gdata);
            self.accumulate(id, &g, &mut grads)?;
            grads[id] = Some(g.data().to_vec());
        }
        Ok(GradientMap {
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
            grads,
        })
    }

    fn accumulate(
        &self,
        id: usize,
        g: &Tensor<T>,
        grads: &mut [Option<Vec<T>>],
    ) -> Result<(), NumericsError> {
        let node = &self.nodes[id];
        let add_to = |vid: Vid, delta: Tensor<T>, grads: &mut [Option<Vec<T>>]| {
            let slot = &mut grads[vid.0];
            match slot {
                Some(acc) => {
                    for (a, d) in acc.iter_mut().zip(delta.data()) {
                        *a += *d;
                    }
                }
                None => *slot = Some(delta.data().to_vec()),
            }
        };
        match &node.op {
            Op::Input => {}
            Op::Unary(op, a) => {
                let x = &self.nodes[a.0].value;
                let y = &node.value;
                let data: Vec<T> = g
                    .data()
                    .iter()
                    .zip(x.data().iter().zip(y.data()))
                    .map(|(&gi, (&xi, &yi))| gi * unary_grad(*op, xi, yi))
                    .collect();
                add_to(*a, Tensor::from_parts(x.shape().to_vec(), data), grads);
            }
            Op::Scale(c, a) => {
                let data: Vec<T> = g.data().iter().map(|&gi| gi * *c).collect();
                add_to(*a, Tensor::from_parts(g.shape().to_vec(), data), grads);
            }
            Op::Clamp(lo, hi, a) => {
                let x = &self.nodes[a.0].value;
                let data: Vec<T> = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .map(|(&gi, &xi)| if xi >= *lo && xi <= *hi { gi } else { T::zero() })
                    .collect();
                add_to(*a, Tensor::from_parts(x.shape().to_vec(), data), grads);
            }
            Op::Binary(op, a, b) => {
                let xa = &self.nodes[a.0].value;
                let xb = &self.nodes[b.0].value;
                match op {
                    BinOp::Add => {
                        add_to(*a, reduce_to_shape(g, xa.shape()), grads);
                        add_to(*b, reduce_to_shape(g, xb.shape()), grads);
                    }
                    BinOp::Sub => {
                        add_to(*a, reduce_to_shape(g, xa.shape()), grads);
                        let neg: Vec<T> = g.data().iter().map(|&v| -v).collect();
                        let neg = Tensor::from_parts(g.shape().to_vec(), neg);
                        add_to(*b, reduce_to_shape(&neg, xb.shape()), grads);
                    }
                    BinOp::Mul => {
                        let ga = broadcast_mul(g, xb);
                        add_to(*a, reduce_to_shape(&ga, xa.shape()), grads);
                        let gb = broadcast_mul(g, xa);
                        add_to(*b, reduce_to_shape(&gb, xb.shape()), grads);
                    }
                }
            }
            Op::Contract(spec, a, b) => {
                let xa = &self.nodes[a.0].value;
                let xb = &self.nodes[b.0].value;
                let sa = ContractSpec::parse(&spec.grad_a_spec())?;
                let sb = ContractSpec::parse(&spec.grad_b_spec())?;
                add_to(*a, contract(&sa, g, xb)?, grads);
                add_to(*b, contract(&sb, g, xa)?, grads);
            }
            Op::Reduce(op, axis, keepdims, a, argmax) => {
                let x = &self.nodes[a.0].value;
                let delta = reduce_backward(*op, *axis, *keepdims, x, g, argmax.as_deref());
                add_to(*a, delta, grads);
            }
            Op::Reshape(a) => {
                let x = &self.nodes[a.0].value;
                add_to(*a, g.reshaped(x.shape())?, grads);
            }
            Op::Dropout(a, mask) => {
                let data: Vec<T> = g.data().iter().zip(mask.iter()).map(|(&gi, &m)| gi * m).collect();
                add_to(*a, Tensor::from_parts(g.shape().to_vec(), data), grads);
            }
            Op::GatherRows(a, indices) => {
                let x = &self.nodes[a.0].value;
                let cols = x.shape()[1];
                let mut data = vec![T::zero(); x.len()];
                for (row, &i) in indices.iter().enumerate() {
                    let i = i as usize;
                    for c in 0..cols {
                        data[i * cols + c] += g.data()[row * cols + c];
                    }
                }
                add_to(*a, Tensor::from_parts(x.shape().to_vec(), data), grads);
            }
            Op::ScatterAddRows(a, indices) => {
                let x = &self.nodes[a.0].value;
                let cols = x.shape()[1];
                let mut data = Vec::with_capacity(x.len());
                for &i in indices.iter() {
                    let i = i as usize;
                    data.extend_from_slice(&g.data()[i * cols..(i + 1) * cols]);
                }
                add_to(*a, Tensor::from_parts(x.shape().to_vec(), data), grads);
            }
            Op::SpMM(m, a) => {
                // M is symmetric, so d(a) = M^T g = M g.
                add_to(*a, spmm_forward(m, g), grads);
            }
        }
        Ok(())
    }
}

/// Gradients by tape id; off-path values read as zeros.
pub struct GradientMap<T> {
    shapes: Vec<Vec<usize>>,
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> GradientMap<T> {
    pub fn grad(&self, id: Vid) -> Tensor<T> {
        match &self.grads[id.0] {
            Some(g) => Tensor::from_parts(self.shapes[id.0].clone(), g.clone()),
            None => Tensor::zeros(&self.shapes[id.0]),
        }
    }

    pub fn has_grad(&self, id: Vid) -> bool {
        self.grads[id.0].is_some()
    }
}

fn eval_unary<T: Scalar>(op: UnaryOp, v: T) -> T {
    match op {
        UnaryOp::Reciprocal => T::one() / v,
        UnaryOp::Sigmoid => sigmoid(v),
        UnaryOp::Relu => {
            if v > T::zero() {
                v
            } else {
                T::zero()
            }
        }
        UnaryOp::Gelu => gelu(v),
        UnaryOp::Silu => v * sigmoid(v),
        UnaryOp::Exp => v.exp(),
        UnaryOp::Ln => v.ln(),
        UnaryOp::Sqrt => v.sqrt(),
        UnaryOp::Abs => v.abs(),
        UnaryOp::Softplus => softplus(v),
        UnaryOp::Square => v * v,
        UnaryOp::Tanh => v.tanh(),
    }
}

fn unary_grad<T: Scalar>(op: UnaryOp, x: T, y: T) -> T {
    match op {
        UnaryOp::Reciprocal => -y * y,
        UnaryOp::Sigmoid => y * (T::one() - y),
        UnaryOp::Relu => {
            if x > T::zero() {
                T::one()
            } else {
                T::zero()
            }
        }
        UnaryOp::Gelu => gelu_grad(x),
        UnaryOp::Silu => {
            let s = sigmoid(x);
            s * (T::one() + x * (T::one() - s))
        }
        UnaryOp::Exp => y,
        UnaryOp::Ln => T::one() / x,
        UnaryOp::Sqrt => T::from_f64(0.5) / y,
        UnaryOp::Abs => {
            if x > T::zero() {
                T::one()
            } else if x < T::zero() {
                -T::one()
            } else {
                T::zero()
            }
        }
        UnaryOp::Softplus => sigmoid(x),
        UnaryOp::Square => T::from_f64(2.0) * x,
        UnaryOp::Tanh => T::one() - y * y,
    }
}

/// Numerically stable logistic function.
pub fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

fn softplus<T: Scalar>(v: T) -> T {
    // max(v, 0) + ln(1 + exp(-|v|))
    let m = if v > T::zero() { v } else { T::zero() };
    m + (T::one() + (-v.abs()).exp()).ln()
}

/// tanh-form GELU; the backward rule differentiates this exact expression.
fn gelu<T: Scalar>(x: T) -> T {
    let c = T::from_f64(0.7978845608028654); // sqrt(2/pi)
    let k = T::from_f64(0.044715);
    let half = T::from_f64(0.5);
    half * x * (T::one() + (c * (x + k * x * x * x)).tanh())
}

fn gelu_grad<T: Scalar>(x: T) -> T {
    let c = T::from_f64(0.7978845608028654);
    let k = T::from_f64(0.044715);
    let half = T::from_f64(0.5);
    let three = T::from_f64(3.0);
    let u = c * (x + k * x * x * x);
    let t = u.tanh();
    let du = c * (T::one() + three * k * x * x);
    half * (T::one() + t) + half * x * (T::one() - t * t) * du
}

fn reduce_forward<T: Scalar>(
    op: ReduceOp,
    x: &Tensor<T>,
    axis: Option<usize>,
    keepdims: bool,
) -> (Tensor<T>, Option<Vec<usize>>) {
    let shape = x.shape();
    let (outer, dim, inner) = match axis {
        None => (1usize, x.len().max(1), 1usize),
        Some(ax) => {
            let outer: usize = shape[..ax].iter().product();
            let inner: usize = shape[ax + 1..].iter().product();
            (outer, shape[ax], inner)
        }
    };
    let mut out = vec![T::zero(); outer * inner];
    let mut argmax = if op == ReduceOp::Max { Some(vec![0usize; outer * inner]) } else { None };
    for o in 0..outer {
        for i in 0..inner {
            let mut acc = match op {
                ReduceOp::Sum | ReduceOp::Mean => T::zero(),
                ReduceOp::Max => T::neg_infinity(),
            };
            let mut arg = 0usize;
            for d in 0..dim {
                let v = x.data()[(o * dim + d) * inner + i];
                match op {
                    ReduceOp::Sum | ReduceOp::Mean => acc += v,
                    ReduceOp::Max => {
                        if v > acc {
                            acc = v;
                            arg = d;
                        }
                    }
                }
            }
            if op == ReduceOp::Mean {
                acc = acc / T::from_f64(dim as f64);
            }
            out[o * inner + i] = acc;
            if let Some(am) = argmax.as_mut() {
                am[o * inner + i] = arg;
            }
        }
    }
    let out_shape: Vec<usize> = match axis {
        None => {
            if keepdims {
                vec![1; shape.len()]
            } else {
                vec![]
            }
        }
        Some(ax) => {
            let mut s = shape.to_vec();
            if keepdims {
                s[ax] = 1;
            } else {
                s.remove(ax);
            }
            s
        }
    };
    (Tensor::from_parts(out_shape, out), argmax)
}

fn reduce_backward<T: Scalar>(
    op: ReduceOp,
    axis: Option<usize>,
    _keepdims: bool,
    x: &Tensor<T>,
    g: &Tensor<T>,
    argmax: Option<&[usize]>,
) -> Tensor<T> {
    let shape = x.shape();
    let (outer, dim, inner) = match axis {
        None => (1usize, x.len().max(1), 1usize),
        Some(ax) => {
            let outer: usize = shape[..ax].iter().product();
            let inner: usize = shape[ax + 1..].iter().product();
            (outer, shape[ax], inner)
        }
    };
    let mut out = vec![T::zero(); x.len()];
    let scale = if op == ReduceOp::Mean { T::one() / T::from_f64(dim as f64) } else { T::one() };
    for o in 0..outer {
        for i in 0..inner {
            let gi = g.data()[o * inner + i];
            match op {
                ReduceOp::Sum | ReduceOp::Mean => {
                    for d in 0..dim {
                        out[(o * dim + d) * inner + i] = gi * scale;
                    }
                }
                ReduceOp::Max => {
                    let d = argmax.expect("max reduce saved argmax")[o * inner + i];
                    out[(o * dim + d) * inner + i] = gi;
                }
            }
        }
    }
    Tensor::from_parts(shape.to_vec(), out)
}

/// Sums `g` down to `shape` (undoing broadcast), assuming `shape` right-aligns
/// into `g.shape()`.
fn reduce_to_shape<T: Scalar>(g: &Tensor<T>, shape: &[usize]) -> Tensor<T> {
    if g.shape() == shape {
        return g.clone();
    }
    let gshape = g.shape();
    let offset = gshape.len() - shape.len();
    let mut out = vec![T::zero(); shape.iter().product()];
    // destination stride per g-axis; 0 where the destination broadcasts
    let mut dst_strides = vec![0usize; gshape.len()];
    {
        let mut s = 1usize;
        for i in (0..shape.len()).rev() {
            if shape[i] != 1 {
                dst_strides[offset + i] = s;
            }
            s *= shape[i];
        }
    }
    let mut idx = vec![0usize; gshape.len()];
    let mut dst = 0usize;
    for (flat, _) in g.data().iter().enumerate() {
        out[dst] += g.data()[flat];
        for ax in (0..gshape.len()).rev() {
            idx[ax] += 1;
            dst += dst_strides[ax];
            if idx[ax] < gshape[ax] {
                break;
            }
            idx[ax] = 0;
            dst -= dst_strides[ax] * gshape[ax];
        }
    }
    Tensor::from_parts(shape.to_vec(), out)
}

/// g (full shape) ⊙ other (broadcastable into it), result in full shape.
fn broadcast_mul<T: Scalar>(g: &Tensor<T>, other: &Tensor<T>) -> Tensor<T> {
    let out_shape = g.shape().to_vec();
    let so = broadcast_strides(other.shape(), &out_shape);
    let mut data = vec![T::zero(); g.len()];
    let mut idx = vec![0usize; out_shape.len()];
    let mut oo = 0usize;
    for (flat, slot) in data.iter_mut().enumerate() {
        *slot = g.data()[flat] * other.data()[oo];
        for ax in (0..out_shape.len()).rev() {
            idx[ax] += 1;
            oo += so[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            idx[ax] = 0;
            oo -= so[ax] * out_shape[ax];
        }
    }
    Tensor::from_parts(out_shape, data)
}

fn spmm_forward<T: Scalar>(m: &SparseMatrix<T>, x: &Tensor<T>) -> Tensor<T> {
    let n = m.n();
    let cols = x.shape()[1];
    let mut out = vec![T::zero(); n * cols];
    for (r, c, v) in m.entries() {
        let src = &x.data()[c * cols..(c + 1) * cols];
        let dst = &mut out[r * cols..(r + 1) * cols];
        for (d, &s) in dst.iter_mut().zip(src) {
            *d += v * s;
        }
    }
    Tensor::from_parts(vec![n, cols], out)
}

/// Counter-based uniform in [0, 1): splitmix64 of (key, counter).
pub(crate) fn counter_uniform(key: u64, counter: u64) -> f64 {
    let mut z = key ^ counter.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x243F_6A88_85A3_08D3);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
