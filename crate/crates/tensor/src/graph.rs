//! Tape of tensor operations and the reverse sweep over it.

use crate::error::{Result, TensorError};
use crate::ops::{conv, pool};
use crate::tensor::{reduce_to, strides, AxisView, StridedOffsets, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unary {
    Sigmoid,
    Relu,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Tanh,
}

#[derive(Debug)]
pub(crate) enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Unary(Var, Unary),
    /// Sum over axes; `keep` is the keepdim shape of the result.
    Sum { input: Var, keep: Vec<usize> },
    Reshape(Var),
    Permute(Var, Vec<usize>),
    Narrow { input: Var, axis: usize, start: usize },
    Concat { inputs: Vec<Var>, axis: usize },
    BroadcastTo(Var),
    MatMul(Var, Var),
    Linear { input: Var, weight: Var, bias: Option<Var> },
    Softmax { input: Var, axis: usize },
    LayerNorm { input: Var, axis: usize, inv_std: Vec<f64> },
    Conv3d { input: Var, weight: Var, bias: Option<Var>, geom: conv::ConvGeom },
    MaxPoolAxis { input: Var, argmax: Vec<usize> },
    AvgPoolAxis { input: Var, axis: usize, window: usize, stride: usize },
    AdaptiveAvgAxis { input: Var, axis: usize },
    InterpAxis { input: Var, axis: usize, taps: Vec<pool::Tap> },
}

pub(crate) struct Node {
    pub value: Tensor,
    pub op: Op,
    pub requires_grad: bool,
}

/// Records values and the operations that produced them.
///
/// A graph is built fresh for each forward pass. Parameters enter as
/// [`Graph::param`] leaves, constants as [`Graph::constant`].
#[derive(Default)]
pub struct Graph {
    pub(crate) nodes: Vec<Node>,
}

/// Gradients of one backward sweep, indexed by leaf [`Var`].
pub struct Grads {
    grads: Vec<Option<Tensor>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub(crate) fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub(crate) fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Reverse sweep from a single-element `output`.
    pub fn backward(&self, output: Var) -> Result<Grads> {
        let out = &self.nodes[output.0].value;
        if out.numel() != 1 {
            return Err(TensorError::NonScalarOutput(out.shape().to_vec()));
        }
        let mut acc: Vec<Option<Vec<f64>>> = vec![None; output.0 + 1];
        acc[output.0] = Some(vec![1.0]);
        let mut leaves: Vec<Option<Tensor>> = vec![None; output.0 + 1];

        for i in (0..=output.0).rev() {
            let Some(g) = acc[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                leaves[i] = Some(Tensor::new(node.value.shape().to_vec(), g)?);
                continue;
            }
            self.propagate(i, &g, &mut acc)?;
        }
        Ok(Grads { grads: leaves })
    }

    fn send(&self, acc: &mut [Option<Vec<f64>>], to: Var, contrib: Vec<f64>) {
        if !self.nodes[to.0].requires_grad {
            return;
        }
        match &mut acc[to.0] {
            Some(existing) => {
                for (e, c) in existing.iter_mut().zip(contrib) {
                    *e += c;
                }
            }
            slot => *slot = Some(contrib),
        }
    }

    fn propagate(&self, i: usize, g: &[f64], acc: &mut [Option<Vec<f64>>]) -> Result<()> {
        let node = &self.nodes[i];
        let out_shape = node.value.shape();
        let y = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.send(acc, *a, reduce_to(g, out_shape, self.shape(*a)));
                self.send(acc, *b, reduce_to(g, out_shape, self.shape(*b)));
            }
            Op::Sub(a, b) => {
                self.send(acc, *a, reduce_to(g, out_shape, self.shape(*a)));
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                self.send(acc, *b, reduce_to(&neg, out_shape, self.shape(*b)));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.requires_grad(*a) {
                    let bb = crate::tensor::broadcast_to_data(bv, out_shape);
                    let ga: Vec<f64> = g.iter().zip(&bb).map(|(g, b)| g * b).collect();
                    self.send(acc, *a, reduce_to(&ga, out_shape, av.shape()));
                }
                if self.requires_grad(*b) {
                    let aa = crate::tensor::broadcast_to_data(av, out_shape);
                    let gb: Vec<f64> = g.iter().zip(&aa).map(|(g, a)| g * a).collect();
                    self.send(acc, *b, reduce_to(&gb, out_shape, bv.shape()));
                }
            }
            Op::Div(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let bb = crate::tensor::broadcast_to_data(bv, out_shape);
                if self.requires_grad(*a) {
                    let ga: Vec<f64> = g.iter().zip(&bb).map(|(g, b)| g / b).collect();
                    self.send(acc, *a, reduce_to(&ga, out_shape, av.shape()));
                }
                if self.requires_grad(*b) {
                    // d(a/b)/db = -y/b
                    let gb: Vec<f64> = g
                        .iter()
                        .zip(y)
                        .zip(&bb)
                        .map(|((g, y), b)| -g * y / b)
                        .collect();
                    self.send(acc, *b, reduce_to(&gb, out_shape, bv.shape()));
                }
            }
            Op::Scale(a, c) => {
                self.send(acc, *a, g.iter().map(|v| v * c).collect());
            }
            Op::Offset(a) => {
                self.send(acc, *a, g.to_vec());
            }
            Op::Unary(a, kind) => {
                let x = self.value(*a).data();
                let gx = g
                    .iter()
                    .zip(x)
                    .zip(y)
                    .map(|((&g, &x), &y)| g * unary_derivative(*kind, x, y))
                    .collect();
                self.send(acc, *a, gx);
            }
            Op::Sum { input, keep } => {
                let src = Tensor::new(keep.clone(), g.to_vec())?;
                let gx = crate::tensor::broadcast_to_data(&src, self.shape(*input));
                self.send(acc, *input, gx);
            }
            Op::Reshape(a) => {
                self.send(acc, *a, g.to_vec());
            }
            Op::BroadcastTo(a) => {
                let gx = reduce_to(g, out_shape, self.shape(*a));
                self.send(acc, *a, gx);
            }
            Op::Permute(a, perm) => {
                let in_shape = self.shape(*a);
                let in_strides = strides(in_shape);
                let read: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
                let mut gx = vec![0.0; g.len()];
                for (gv, o) in g.iter().zip(StridedOffsets::new(out_shape, &read)) {
                    gx[o] = *gv;
                }
                self.send(acc, *a, gx);
            }
            Op::Narrow { input, axis, start } => {
                let in_shape = self.shape(*input);
                let full = AxisView::new(in_shape, *axis, "narrow")?;
                let len = out_shape[*axis];
                let mut gx = vec![0.0; full.outer * full.len * full.inner];
                for o in 0..full.outer {
                    let dst = o * full.len * full.inner + start * full.inner;
                    let src = o * len * full.inner;
                    gx[dst..dst + len * full.inner]
                        .copy_from_slice(&g[src..src + len * full.inner]);
                }
                self.send(acc, *input, gx);
            }
            Op::Concat { inputs, axis } => {
                let view = AxisView::new(out_shape, *axis, "concat")?;
                let mut start = 0;
                for v in inputs {
                    let len = self.shape(*v)[*axis];
                    if self.requires_grad(*v) {
                        let mut gx = Vec::with_capacity(view.outer * len * view.inner);
                        for o in 0..view.outer {
                            let base = o * view.len * view.inner + start * view.inner;
                            gx.extend_from_slice(&g[base..base + len * view.inner]);
                        }
                        self.send(acc, *v, gx);
                    }
                    start += len;
                }
            }
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                if self.requires_grad(*a) {
                    // gA = g · Bᵀ
                    let mut ga = vec![0.0; m * k];
                    for i in 0..m {
                        for p in 0..k {
                            let mut s = 0.0;
                            for j in 0..n {
                                s += g[i * n + j] * bv.data()[p * n + j];
                            }
                            ga[i * k + p] = s;
                        }
                    }
                    self.send(acc, *a, ga);
                }
                if self.requires_grad(*b) {
                    // gB = Aᵀ · g
                    let mut gb = vec![0.0; k * n];
                    for i in 0..m {
                        for p in 0..k {
                            let a_ip = av.data()[i * k + p];
                            for j in 0..n {
                                gb[p * n + j] += a_ip * g[i * n + j];
                            }
                        }
                    }
                    self.send(acc, *b, gb);
                }
            }
            Op::Linear {
                input,
                weight,
                bias,
            } => {
                let x = self.value(*input);
                let w = self.value(*weight);
                let (out_f, in_f) = (w.shape()[0], w.shape()[1]);
                let rows = x.numel() / in_f;
                if self.requires_grad(*input) {
                    let mut gx = vec![0.0; x.numel()];
                    for r in 0..rows {
                        for o in 0..out_f {
                            let gv = g[r * out_f + o];
                            let wrow = &w.data()[o * in_f..(o + 1) * in_f];
                            for (gxi, wi) in gx[r * in_f..(r + 1) * in_f].iter_mut().zip(wrow) {
                                *gxi += gv * wi;
                            }
                        }
                    }
                    self.send(acc, *input, gx);
                }
                if self.requires_grad(*weight) {
                    let mut gw = vec![0.0; w.numel()];
                    for r in 0..rows {
                        let xrow = &x.data()[r * in_f..(r + 1) * in_f];
                        for o in 0..out_f {
                            let gv = g[r * out_f + o];
                            for (gwi, xi) in gw[o * in_f..(o + 1) * in_f].iter_mut().zip(xrow) {
                                *gwi += gv * xi;
                            }
                        }
                    }
                    self.send(acc, *weight, gw);
                }
                if let Some(b) = bias {
                    let mut gb = vec![0.0; out_f];
                    for r in 0..rows {
                        for o in 0..out_f {
                            gb[o] += g[r * out_f + o];
                        }
                    }
                    self.send(acc, *b, gb);
                }
            }
            Op::Softmax { input, axis } => {
                let view = AxisView::new(out_shape, *axis, "softmax")?;
                let mut gx = vec![0.0; g.len()];
                for o in 0..view.outer {
                    for inn in 0..view.inner {
                        let idx = |l: usize| (o * view.len + l) * view.inner + inn;
                        let dot: f64 = (0..view.len).map(|l| g[idx(l)] * y[idx(l)]).sum();
                        for l in 0..view.len {
                            gx[idx(l)] = y[idx(l)] * (g[idx(l)] - dot);
                        }
                    }
                }
                self.send(acc, *input, gx);
            }
            Op::LayerNorm {
                input,
                axis,
                inv_std,
            } => {
                let view = AxisView::new(out_shape, *axis, "layernorm")?;
                let n = view.len as f64;
                let mut gx = vec![0.0; g.len()];
                for o in 0..view.outer {
                    for inn in 0..view.inner {
                        let idx = |l: usize| (o * view.len + l) * view.inner + inn;
                        let inv = inv_std[o * view.inner + inn];
                        let mean_g: f64 = (0..view.len).map(|l| g[idx(l)]).sum::<f64>() / n;
                        let mean_gy: f64 =
                            (0..view.len).map(|l| g[idx(l)] * y[idx(l)]).sum::<f64>() / n;
                        for l in 0..view.len {
                            gx[idx(l)] = inv * (g[idx(l)] - mean_g - y[idx(l)] * mean_gy);
                        }
                    }
                }
                self.send(acc, *input, gx);
            }
            Op::Conv3d {
                input,
                weight,
                bias,
                geom,
            } => {
                if self.requires_grad(*input) {
                    let gx = conv::backward_input(g, self.value(*weight).data(), geom);
                    self.send(acc, *input, gx);
                }
                if self.requires_grad(*weight) {
                    let gw = conv::backward_weight(g, self.value(*input).data(), geom);
                    self.send(acc, *weight, gw);
                }
                if let Some(b) = bias {
                    if self.requires_grad(*b) {
                        self.send(acc, *b, conv::backward_bias(g, geom));
                    }
                }
            }
            Op::MaxPoolAxis { input, argmax } => {
                let mut gx = vec![0.0; self.value(*input).numel()];
                for (gv, &src) in g.iter().zip(argmax) {
                    gx[src] += gv;
                }
                self.send(acc, *input, gx);
            }
            Op::AvgPoolAxis {
                input,
                axis,
                window,
                stride,
            } => {
                let in_shape = self.shape(*input);
                let gx = pool::avg_backward(g, in_shape, *axis, *window, *stride)?;
                self.send(acc, *input, gx);
            }
            Op::AdaptiveAvgAxis { input, axis } => {
                let in_shape = self.shape(*input);
                let gx = pool::adaptive_backward(g, in_shape, *axis, out_shape[*axis])?;
                self.send(acc, *input, gx);
            }
            Op::InterpAxis { input, axis, taps } => {
                let in_shape = self.shape(*input);
                let gx = pool::interp_backward(g, in_shape, *axis, taps)?;
                self.send(acc, *input, gx);
            }
        }
        Ok(())
    }
}

fn unary_derivative(kind: Unary, x: f64, y: f64) -> f64 {
    match kind {
        Unary::Sigmoid => y * (1.0 - y),
        Unary::Relu => {
            if x > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Unary::Exp => y,
        Unary::Ln => 1.0 / x,
        Unary::Sqrt => 0.5 / y,
        Unary::Abs => {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
        Unary::Tanh => 1.0 - y * y,
    }
}
