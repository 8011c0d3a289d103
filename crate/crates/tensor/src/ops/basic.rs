//! Element-wise arithmetic, reductions and shape manipulation.

use crate::error::{invalid, shape_err, Result, TensorError};
use crate::graph::{Graph, Op, Unary, Var};
use crate::tensor::{
    broadcast_shape, broadcast_strides, check_finite, strides, AxisView, StridedOffsets, Tensor,
};

impl Graph {
    fn binary(
        &mut self,
        a: Var,
        b: Var,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
        make: impl FnOnce(Var, Var) -> Op,
    ) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let out_shape = broadcast_shape(&sa, &sb)
            .ok_or_else(|| TensorError::ShapeMismatch {
                op,
                detail: format!("cannot broadcast {sa:?} with {sb:?}"),
            })?;
        let (xa, xb) = (self.value(a).data(), self.value(b).data());
        let data: Vec<f64> = if sa == sb {
            xa.iter().zip(xb).map(|(&x, &y)| f(x, y)).collect()
        } else {
            let (ta, tb) = (
                broadcast_strides(&sa, &out_shape),
                broadcast_strides(&sb, &out_shape),
            );
            StridedOffsets::new(&out_shape, &ta)
                .zip(StridedOffsets::new(&out_shape, &tb))
                .map(|(i, j)| f(xa[i], xb[j]))
                .collect()
        };
        check_finite(op, &data)?;
        let value = Tensor::new(out_shape, data)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, make(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "div", |x, y| x / y, Op::Div)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let value = self.value(a).map(|v| v * c);
        check_finite("scale", value.data())?;
        let rg = self.requires_grad(a);
        Ok(self.push(value, Op::Scale(a, c), rg))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let value = self.value(a).map(|v| v + c);
        check_finite("add_scalar", value.data())?;
        let rg = self.requires_grad(a);
        Ok(self.push(value, Op::Offset(a), rg))
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.scale(a, -1.0)
    }

    pub fn unary(&mut self, a: Var, kind: Unary) -> Result<Var> {
        let f: fn(f64) -> f64 = match kind {
            Unary::Sigmoid => sigmoid,
            Unary::Relu => |x| x.max(0.0),
            Unary::Exp => f64::exp,
            Unary::Ln => f64::ln,
            Unary::Sqrt => f64::sqrt,
            Unary::Abs => f64::abs,
            Unary::Tanh => f64::tanh,
        };
        let value = self.value(a).map(f);
        check_finite("unary", value.data())?;
        let rg = self.requires_grad(a);
        Ok(self.push(value, Op::Unary(a, kind), rg))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Unary::Sigmoid)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Unary::Relu)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Unary::Exp)
    }

    pub fn ln(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Unary::Ln)
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Unary::Sqrt)
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Unary::Abs)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Unary::Tanh)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.mul(a, a)
    }

    /// Sum over `axes`; with `keepdim` the reduced axes remain as size 1.
    pub fn sum_axes(&mut self, a: Var, axes: &[usize], keepdim: bool) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let rank = shape.len();
        if let Some(&bad) = axes.iter().find(|&&ax| ax >= rank) {
            return Err(TensorError::AxisOutOfRange {
                op: "sum",
                axis: bad,
                rank,
            });
        }
        let mut keep = shape.clone();
        for &ax in axes {
            keep[ax] = 1;
        }
        // Accumulate in input row-major order into the keepdim layout.
        let st = broadcast_strides(&keep, &shape);
        let mut acc = vec![0.0; keep.iter().product()];
        for (x, o) in self.value(a).data().iter().zip(StridedOffsets::new(&shape, &st)) {
            acc[o] += x;
        }
        check_finite("sum", &acc)?;
        let out_shape = if keepdim {
            keep.clone()
        } else {
            shape
                .iter()
                .enumerate()
                .filter(|(i, _)| !axes.contains(i))
                .map(|(_, &d)| d)
                .collect()
        };
        let value = Tensor::new(out_shape, acc)?;
        let rg = self.requires_grad(a);
        Ok(self.push(value, Op::Sum { input: a, keep }, rg))
    }

    pub fn mean_axes(&mut self, a: Var, axes: &[usize], keepdim: bool) -> Result<Var> {
        let shape = self.shape(a);
        let count: usize = axes.iter().map(|&ax| shape.get(ax).copied().unwrap_or(1)).product();
        let s = self.sum_axes(a, axes, keepdim)?;
        self.scale(s, 1.0 / count as f64)
    }

    /// Sum of every element, as a scalar.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let axes: Vec<usize> = (0..self.shape(a).len()).collect();
        self.sum_axes(a, &axes, false)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).numel();
        let s = self.sum(a)?;
        self.scale(s, 1.0 / n as f64)
    }

    pub fn reshape(&mut self, a: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        let value = self.value(a).clone().reshape(shape)?;
        let rg = self.requires_grad(a);
        Ok(self.push(value, Op::Reshape(a), rg))
    }

    pub fn broadcast_to(&mut self, a: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        let shape = shape.into();
        let src = self.shape(a).to_vec();
        if broadcast_shape(&src, &shape).as_deref() != Some(&shape[..]) {
            return shape_err("broadcast_to", format!("{src:?} -> {shape:?}"));
        }
        let data = crate::tensor::broadcast_to_data(self.value(a), &shape);
        let value = Tensor::new(shape, data)?;
        let rg = self.requires_grad(a);
        Ok(self.push(value, Op::BroadcastTo(a), rg))
    }

    /// Reorders axes: output axis `i` is input axis `perm[i]`.
    pub fn permute(&mut self, a: Var, perm: &[usize]) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let mut seen = perm.to_vec();
        seen.sort_unstable();
        if seen != (0..shape.len()).collect::<Vec<_>>() {
            return invalid("permute", format!("{perm:?} is not a permutation of rank {}", shape.len()));
        }
        let in_strides = strides(&shape);
        let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
        let read: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        let x = self.value(a).data();
        let data: Vec<f64> = StridedOffsets::new(&out_shape, &read).map(|o| x[o]).collect();
        let value = Tensor::new(out_shape, data)?;
        let rg = self.requires_grad(a);
        Ok(self.push(value, Op::Permute(a, perm.to_vec()), rg))
    }

    /// Swap the last two axes.
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let rank = self.shape(a).len();
        if rank < 2 {
            return invalid("transpose", "rank < 2");
        }
        let mut perm: Vec<usize> = (0..rank).collect();
        perm.swap(rank - 2, rank - 1);
        self.permute(a, &perm)
    }

    pub fn narrow(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let value = self.value(a).narrow(axis, start, len)?;
        let rg = self.requires_grad(a);
        Ok(self.push(value, Op::Narrow { input: a, axis, start }, rg))
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let Some(&first) = inputs.first() else {
            return invalid("concat", "no inputs");
        };
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return Err(TensorError::AxisOutOfRange {
                op: "concat",
                axis,
                rank: base.len(),
            });
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return shape_err(
                    "concat",
                    format!("{s:?} does not match {base:?} outside axis {axis}"),
                );
            }
            total += s[axis];
        }
        let mut out_shape = base;
        out_shape[axis] = total;
        let view = AxisView::new(&out_shape, axis, "concat")?;
        let mut data = Vec::with_capacity(view.outer * view.len * view.inner);
        for o in 0..view.outer {
            for &v in inputs {
                let len = self.shape(v)[axis];
                let chunk = len * view.inner;
                data.extend_from_slice(&self.value(v).data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let value = Tensor::new(out_shape, data)?;
        let rg = self.any_grad(inputs);
        Ok(self.push(
            value,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// `[m,k] x [k,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return shape_err("matmul", format!("{sa:?} x {sb:?}"));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let (xa, xb) = (self.value(a).data(), self.value(b).data());
        let mut y = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let av = xa[i * k + p];
                for j in 0..n {
                    y[i * n + j] += av * xb[p * n + j];
                }
            }
        }
        check_finite("matmul", &y)?;
        let value = Tensor::new(vec![m, n], y)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// `y = x Wᵀ + b` over the last axis; `weight [out, in]`, `bias [out]`.
    pub fn linear(&mut self, x: Var, weight: Var, bias: Option<Var>) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(weight).to_vec();
        if ws.len() != 2 || xs.last() != Some(&ws[1]) {
            return shape_err("linear", format!("input {xs:?}, weight {ws:?}"));
        }
        let (out_f, in_f) = (ws[0], ws[1]);
        if let Some(b) = bias {
            if self.shape(b) != [out_f] {
                return shape_err("linear", format!("bias {:?}", self.shape(b)));
            }
        }
        let rows = self.value(x).numel() / in_f;
        let (xd, wd) = (self.value(x).data(), self.value(weight).data());
        let bd = bias.map(|b| self.value(b).data());
        let mut y = vec![0.0; rows * out_f];
        for r in 0..rows {
            let xrow = &xd[r * in_f..(r + 1) * in_f];
            for o in 0..out_f {
                let wrow = &wd[o * in_f..(o + 1) * in_f];
                let mut s = bd.map_or(0.0, |b| b[o]);
                for (xi, wi) in xrow.iter().zip(wrow) {
                    s += xi * wi;
                }
                y[r * out_f + o] = s;
            }
        }
        check_finite("linear", &y)?;
        let mut out_shape = xs;
        *out_shape.last_mut().unwrap() = out_f;
        let value = Tensor::new(out_shape, y)?;
        let mut deps = vec![x, weight];
        deps.extend(bias);
        let rg = self.any_grad(&deps);
        Ok(self.push(
            value,
            Op::Linear {
                input: x,
                weight,
                bias,
            },
            rg,
        ))
    }

    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let view = AxisView::new(&shape, axis, "softmax")?;
        let x = self.value(a).data();
        let mut y = vec![0.0; x.len()];
        for o in 0..view.outer {
            for inn in 0..view.inner {
                let idx = |l: usize| (o * view.len + l) * view.inner + inn;
                let m = (0..view.len).map(|l| x[idx(l)]).fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for l in 0..view.len {
                    let e = (x[idx(l)] - m).exp();
                    y[idx(l)] = e;
                    z += e;
                }
                for l in 0..view.len {
                    y[idx(l)] /= z;
                }
            }
        }
        check_finite("softmax", &y)?;
        let value = Tensor::new(shape, y)?;
        let rg = self.requires_grad(a);
        Ok(self.push(value, Op::Softmax { input: a, axis }, rg))
    }

    /// Normalization to zero mean and unit population variance along `axis`
    /// (no affine parameters).
    pub fn layernorm(&mut self, a: Var, axis: usize, eps: f64) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let view = AxisView::new(&shape, axis, "layernorm")?;
        let x = self.value(a).data();
        let n = view.len as f64;
        let mut y = vec![0.0; x.len()];
        let mut inv_std = vec![0.0; view.outer * view.inner];
        for o in 0..view.outer {
            for inn in 0..view.inner {
                let idx = |l: usize| (o * view.len + l) * view.inner + inn;
                let mean = (0..view.len).map(|l| x[idx(l)]).sum::<f64>() / n;
                let var = (0..view.len).map(|l| (x[idx(l)] - mean).powi(2)).sum::<f64>() / n;
                let inv = 1.0 / (var + eps).sqrt();
                inv_std[o * view.inner + inn] = inv;
                for l in 0..view.len {
                    y[idx(l)] = (x[idx(l)] - mean) * inv;
                }
            }
        }
        check_finite("layernorm", &y)?;
        let value = Tensor::new(shape, y)?;
        let rg = self.requires_grad(a);
        Ok(self.push(
            value,
            Op::LayerNorm {
                input: a,
                axis,
                inv_std,
            },
            rg,
        ))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
