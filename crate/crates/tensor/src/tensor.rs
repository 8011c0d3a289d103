use crate::error::{invalid, shape_err, Result, TensorError};
use crate::rng::RngState;

/// Dense row-major array of `f64`.
///
/// Gradient state is not stored here: a [`crate::Graph`] node wraps a tensor
/// value and tracks `requires_grad`, and [`crate::Grads`] holds the
/// same-shape gradient buffers after a backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self> {
        let shape = shape.into();
        let n = numel(&shape);
        if n != data.len() {
            return shape_err(
                "tensor",
                format!("shape {shape:?} holds {n} values, got {}", data.len()),
            );
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: f64) -> Self {
        let shape = shape.into();
        let n = numel(&shape);
        Self {
            shape,
            data: vec![value; n],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    /// Standard-normal entries drawn from `rng` in row-major order.
    pub fn randn(shape: impl Into<Vec<usize>>, rng: &mut RngState) -> Self {
        let shape = shape.into();
        let n = numel(&shape);
        let data = (0..n).map(|_| rng.normal()).collect();
        Self { shape, data }
    }

    /// Uniform entries in `[lo, hi)`.
    pub fn rand_uniform(shape: impl Into<Vec<usize>>, lo: f64, hi: f64, rng: &mut RngState) -> Self {
        let shape = shape.into();
        let n = numel(&shape);
        let data = (0..n).map(|_| lo + (hi - lo) * rng.uniform()).collect();
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() != 1 {
            return invalid("item", format!("tensor has {} elements", self.data.len()));
        }
        Ok(self.data[0])
    }

    pub fn reshape(self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        if numel(&shape) != self.data.len() {
            return shape_err(
                "reshape",
                format!("{:?} -> {:?}", self.shape, shape),
            );
        }
        Ok(Self {
            shape,
            data: self.data,
        })
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[offset(&self.shape, index)]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Contiguous sub-block `start..start+len` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Self> {
        let view = AxisView::new(&self.shape, axis, "narrow")?;
        if start + len > view.len {
            return invalid(
                "narrow",
                format!("range {start}..{} exceeds extent {}", start + len, view.len),
            );
        }
        let mut data = Vec::with_capacity(view.outer * len * view.inner);
        for o in 0..view.outer {
            let base = o * view.len * view.inner + start * view.inner;
            data.extend_from_slice(&self.data[base..base + len * view.inner]);
        }
        let mut shape = self.shape.clone();
        shape[axis] = len;
        Ok(Self { shape, data })
    }
}

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

pub fn offset(shape: &[usize], index: &[usize]) -> usize {
    debug_assert_eq!(shape.len(), index.len());
    index
        .iter()
        .zip(strides(shape))
        .map(|(i, s)| i * s)
        .sum()
}

pub(crate) fn check_finite(op: &'static str, data: &[f64]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(TensorError::NonFinite { op })
    }
}

/// A tensor viewed as `[outer, len, inner]` around one axis.
#[derive(Clone, Copy, Debug)]
pub(crate) struct AxisView {
    pub outer: usize,
    pub len: usize,
    pub inner: usize,
}

impl AxisView {
    pub fn new(shape: &[usize], axis: usize, op: &'static str) -> Result<Self> {
        if axis >= shape.len() {
            return Err(TensorError::AxisOutOfRange {
                op,
                axis,
                rank: shape.len(),
            });
        }
        Ok(Self {
            outer: shape[..axis].iter().product(),
            len: shape[axis],
            inner: shape[axis + 1..].iter().product(),
        })
    }
}

/// Numpy-style broadcast of two shapes (right-aligned).
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let n = a.len().max(b.len());
    let mut out = vec![0; n];
    for i in 0..n {
        let da = if i + a.len() >= n { a[i + a.len() - n] } else { 1 };
        let db = if i + b.len() >= n { b[i + b.len() - n] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Strides of `src` when read through a broadcast to `out` (zero on
/// broadcast axes).
pub(crate) fn broadcast_strides(src: &[usize], out: &[usize]) -> Vec<usize> {
    let s = strides(src);
    let lead = out.len() - src.len();
    (0..out.len())
        .map(|i| {
            if i < lead || src[i - lead] == 1 {
                0
            } else {
                s[i - lead]
            }
        })
        .collect()
}

/// Walks every index of `shape` in row-major order, yielding the offset into
/// a buffer read with `strides`.
pub(crate) struct StridedOffsets<'a> {
    shape: &'a [usize],
    strides: &'a [usize],
    counter: Vec<usize>,
    offset: usize,
    remaining: usize,
}

impl<'a> StridedOffsets<'a> {
    pub fn new(shape: &'a [usize], strides: &'a [usize]) -> Self {
        Self {
            shape,
            strides,
            counter: vec![0; shape.len()],
            offset: 0,
            remaining: numel(shape),
        }
    }
}

impl Iterator for StridedOffsets<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let current = self.offset;
        for d in (0..self.shape.len()).rev() {
            self.counter[d] += 1;
            self.offset += self.strides[d];
            if self.counter[d] < self.shape[d] {
                break;
            }
            self.offset -= self.strides[d] * self.counter[d];
            self.counter[d] = 0;
        }
        Some(current)
    }
}

/// Expand `src` (broadcast-compatible) to `out_shape`.
pub(crate) fn broadcast_to_data(src: &Tensor, out_shape: &[usize]) -> Vec<f64> {
    if src.shape() == out_shape {
        return src.data().to_vec();
    }
    let st = broadcast_strides(src.shape(), out_shape);
    StridedOffsets::new(out_shape, &st)
        .map(|o| src.data()[o])
        .collect()
}

/// Sum `grad` (shaped `out_shape`) back down to `src_shape`.
pub(crate) fn reduce_to(grad: &[f64], out_shape: &[usize], src_shape: &[usize]) -> Vec<f64> {
    if out_shape == src_shape {
        return grad.to_vec();
    }
    let st = broadcast_strides(src_shape, out_shape);
    let mut acc = vec![0.0; numel(src_shape)];
    for (g, o) in grad.iter().zip(StridedOffsets::new(out_shape, &st)) {
        acc[o] += g;
    }
    acc
}
