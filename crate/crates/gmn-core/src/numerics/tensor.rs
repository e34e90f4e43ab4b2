//! Dense row-major tensors, up to 4 axes. Values are immutable once built;
//! clones share the buffer.

use std::sync::Arc;

use crate::scalar::Scalar;

use super::NumericsError;

pub const MAX_RANK: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Arc<Vec<T>>,
}

impl<T: Scalar> Tensor<T> {
    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self, NumericsError> {
        if shape.len() > MAX_RANK {
            return Err(NumericsError::ShapeMismatch(format!(
                "rank {} exceeds {MAX_RANK}",
                shape.len()
            )));
        }
        let expect: usize = shape.iter().product();
        if data.len() != expect {
            return Err(NumericsError::ShapeMismatch(format!(
                "shape {shape:?} needs {expect} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape: shape.to_vec(), data: Arc::new(data) })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: Arc::new(vec![T::zero(); len]) }
    }

    pub fn ones(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: Arc::new(vec![T::one(); len]) }
    }

    pub fn filled(shape: &[usize], v: T) -> Self {
        let len = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: Arc::new(vec![v; len]) }
    }

    /// Rank-0 tensor holding one value.
    pub fn scalar(v: T) -> Self {
        Tensor { shape: vec![], data: Arc::new(vec![v]) }
    }

    pub fn from_f64_slice(shape: &[usize], data: &[f64]) -> Result<Self, NumericsError> {
        Self::from_vec(shape, data.iter().map(|&v| T::from_f64(v)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// The single value of a rank-0 or one-element tensor.
    pub fn item(&self) -> T {
        debug_assert_eq!(self.len(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.as_f64()).collect()
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.shape.len()];
        for i in (0..self.shape.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.shape[i + 1];
        }
        s
    }

    pub fn reshaped(&self, shape: &[usize]) -> Result<Self, NumericsError> {
        let expect: usize = shape.iter().product();
        if expect != self.len() || shape.len() > MAX_RANK {
            return Err(NumericsError::ShapeMismatch(format!(
                "cannot reshape {:?} to {shape:?}",
                self.shape
            )));
        }
        Ok(Tensor { shape: shape.to_vec(), data: Arc::clone(&self.data) })
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<T>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data: Arc::new(data) }
    }
}

/// Right-aligned broadcast of two shapes (each axis equal or 1).
pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0usize; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() { 1 } else { a[i - (rank - a.len())] };
        let db = if i < rank - b.len() { 1 } else { b[i - (rank - b.len())] };
        out[i] = if da == db {
            da
        } else if da == 1 {
            db
        } else if db == 1 {
            da
        } else {
            return None;
        };
    }
    Some(out)
}

/// Strides of `shape` viewed in a broadcast `target` frame (0 on broadcast
/// axes).
pub(crate) fn broadcast_strides(shape: &[usize], target: &[usize]) -> Vec<usize> {
    let mut strides = vec![0usize; target.len()];
    let offset = target.len() - shape.len();
    let mut s = 1usize;
    for i in (0..shape.len()).rev() {
        if shape[i] != 1 {
            strides[offset + i] = s;
        }
        s *= shape[i];
    }
    strides
}
