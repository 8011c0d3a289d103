//! Pooling and linear interpolation, built from one-axis primitives.
//!
//! Box pooling and separable interpolation factor exactly over axes, so the
//! multi-axis operators are compositions of the single-axis ones.

use crate::error::{invalid, Result, TensorError};
use crate::graph::{Graph, Op, Var};
use crate::tensor::{check_finite, AxisView, Tensor};

/// Two-point interpolation stencil: `(1 - frac) * x[lo] + frac * x[hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tap {
    pub lo: usize,
    pub hi: usize,
    pub frac: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Avg,
}

/// Half-pixel (align-corners = false) source positions for resampling
/// `in_len` samples to `out_len`.
pub fn linear_taps(in_len: usize, out_len: usize) -> Vec<Tap> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|i| {
            let src = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
            let lo = (src.floor() as usize).min(in_len - 1);
            let hi = (lo + 1).min(in_len - 1);
            let frac = if lo == hi { 0.0 } else { src - lo as f64 };
            Tap { lo, hi, frac }
        })
        .collect()
}

/// Bucket `i` of `out_len` adaptive bins covers `floor(i*n/out)..ceil((i+1)*n/out)`.
pub fn adaptive_bins(in_len: usize, out_len: usize) -> Vec<(usize, usize)> {
    (0..out_len)
        .map(|i| {
            let start = i * in_len / out_len;
            let end = ((i + 1) * in_len).div_ceil(out_len);
            (start, end)
        })
        .collect()
}

fn pooled_len(op: &'static str, len: usize, window: usize, stride: usize) -> Result<usize> {
    if window == 0 || stride == 0 {
        return Err(TensorError::EmptyWindow { op });
    }
    if window > len {
        return invalid(op, format!("window {window} exceeds extent {len}"));
    }
    Ok((len - window) / stride + 1)
}

pub(crate) fn avg_backward(
    g: &[f64],
    in_shape: &[usize],
    axis: usize,
    window: usize,
    stride: usize,
) -> Result<Vec<f64>> {
    let v = AxisView::new(in_shape, axis, "avg_pool")?;
    let out_len = (v.len - window) / stride + 1;
    let mut gx = vec![0.0; v.outer * v.len * v.inner];
    let inv = 1.0 / window as f64;
    for o in 0..v.outer {
        for i in 0..out_len {
            for inn in 0..v.inner {
                let gv = g[(o * out_len + i) * v.inner + inn] * inv;
                for k in 0..window {
                    gx[(o * v.len + i * stride + k) * v.inner + inn] += gv;
                }
            }
        }
    }
    Ok(gx)
}

pub(crate) fn adaptive_backward(
    g: &[f64],
    in_shape: &[usize],
    axis: usize,
    out_len: usize,
) -> Result<Vec<f64>> {
    let v = AxisView::new(in_shape, axis, "adaptive_avg")?;
    let bins = adaptive_bins(v.len, out_len);
    let mut gx = vec![0.0; v.outer * v.len * v.inner];
    for o in 0..v.outer {
        for (i, &(s, e)) in bins.iter().enumerate() {
            let inv = 1.0 / (e - s) as f64;
            for inn in 0..v.inner {
                let gv = g[(o * out_len + i) * v.inner + inn] * inv;
                for k in s..e {
                    gx[(o * v.len + k) * v.inner + inn] += gv;
                }
            }
        }
    }
    Ok(gx)
}

pub(crate) fn interp_backward(
    g: &[f64],
    in_shape: &[usize],
    axis: usize,
    taps: &[Tap],
) -> Result<Vec<f64>> {
    let v = AxisView::new(in_shape, axis, "interp")?;
    let out_len = taps.len();
    let mut gx = vec![0.0; v.outer * v.len * v.inner];
    for o in 0..v.outer {
        for (i, t) in taps.iter().enumerate() {
            let src = (o * out_len + i) * v.inner;
            let lo = (o * v.len + t.lo) * v.inner;
            let hi = (o * v.len + t.hi) * v.inner;
            for inn in 0..v.inner {
                let gv = g[src + inn];
                gx[lo + inn] += (1.0 - t.frac) * gv;
                gx[hi + inn] += t.frac * gv;
            }
        }
    }
    Ok(gx)
}

impl Graph {
    /// Windowed pooling along one axis (no padding, floor mode).
    pub fn pool_axis(
        &mut self,
        input: Var,
        axis: usize,
        kind: PoolKind,
        window: usize,
        stride: usize,
    ) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        let v = AxisView::new(&shape, axis, "pool")?;
        let out_len = pooled_len("pool", v.len, window, stride)?;
        let x = self.value(input).data();
        let mut y = vec![0.0; v.outer * out_len * v.inner];
        let mut argmax = Vec::new();
        if kind == PoolKind::Max {
            argmax = vec![0; y.len()];
        }
        for o in 0..v.outer {
            for i in 0..out_len {
                for inn in 0..v.inner {
                    let dst = (o * out_len + i) * v.inner + inn;
                    let at = |k: usize| (o * v.len + i * stride + k) * v.inner + inn;
                    match kind {
                        PoolKind::Max => {
                            let mut best = at(0);
                            for k in 1..window {
                                if x[at(k)] > x[best] {
                                    best = at(k);
                                }
                            }
                            y[dst] = x[best];
                            argmax[dst] = best;
                        }
                        PoolKind::Avg => {
                            let s: f64 = (0..window).map(|k| x[at(k)]).sum();
                            y[dst] = s / window as f64;
                        }
                    }
                }
            }
        }
        check_finite("pool", &y)?;
        let mut out_shape = shape;
        out_shape[axis] = out_len;
        let value = Tensor::new(out_shape, y)?;
        let rg = self.requires_grad(input);
        let op = match kind {
            PoolKind::Max => Op::MaxPoolAxis { input, argmax },
            PoolKind::Avg => Op::AvgPoolAxis {
                input,
                axis,
                window,
                stride,
            },
        };
        Ok(self.push(value, op, rg))
    }

    /// Windowed pooling over the trailing `window.len()` axes.
    pub fn pool(
        &mut self,
        input: Var,
        kind: PoolKind,
        window: &[usize],
        stride: &[usize],
    ) -> Result<Var> {
        let rank = self.shape(input).len();
        if window.len() != stride.len() || window.len() > rank {
            return invalid("pool", "window/stride rank mismatch");
        }
        let first = rank - window.len();
        let mut x = input;
        for (d, (&w, &s)) in window.iter().zip(stride).enumerate() {
            if w == 1 && s == 1 {
                continue;
            }
            x = self.pool_axis(x, first + d, kind, w, s)?;
        }
        Ok(x)
    }

    pub fn adaptive_avg_axis(&mut self, input: Var, axis: usize, out_len: usize) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        let v = AxisView::new(&shape, axis, "adaptive_avg")?;
        if out_len == 0 || v.len == 0 {
            return Err(TensorError::EmptyWindow { op: "adaptive_avg" });
        }
        if out_len > v.len {
            return invalid(
                "adaptive_avg",
                format!("target {out_len} exceeds extent {}", v.len),
            );
        }
        let bins = adaptive_bins(v.len, out_len);
        let x = self.value(input).data();
        let mut y = vec![0.0; v.outer * out_len * v.inner];
        for o in 0..v.outer {
            for (i, &(s, e)) in bins.iter().enumerate() {
                for inn in 0..v.inner {
                    let sum: f64 = (s..e).map(|k| x[(o * v.len + k) * v.inner + inn]).sum();
                    y[(o * out_len + i) * v.inner + inn] = sum / (e - s) as f64;
                }
            }
        }
        check_finite("adaptive_avg", &y)?;
        let mut out_shape = shape;
        out_shape[axis] = out_len;
        let value = Tensor::new(out_shape, y)?;
        let rg = self.requires_grad(input);
        Ok(self.push(value, Op::AdaptiveAvgAxis { input, axis }, rg))
    }

    /// Adaptive average pooling of the trailing `target.len()` axes.
    pub fn adaptive_avg(&mut self, input: Var, target: &[usize]) -> Result<Var> {
        let rank = self.shape(input).len();
        if target.len() > rank {
            return invalid("adaptive_avg", "target rank exceeds input rank");
        }
        let first = rank - target.len();
        let mut x = input;
        for (d, &t) in target.iter().enumerate() {
            if self.shape(x)[first + d] != t {
                x = self.adaptive_avg_axis(x, first + d, t)?;
            }
        }
        Ok(x)
    }

    /// Mean over the trailing `spatial_axes` axes, kept as size-1 axes.
    pub fn global_avg(&mut self, input: Var, spatial_axes: usize) -> Result<Var> {
        let rank = self.shape(input).len();
        if spatial_axes == 0 || spatial_axes > rank {
            return invalid("global_avg", format!("{spatial_axes} axes of rank {rank}"));
        }
        let axes: Vec<usize> = (rank - spatial_axes..rank).collect();
        self.mean_axes(input, &axes, true)
    }

    /// Linear resampling along one axis with half-pixel centers.
    pub fn interp_axis(&mut self, input: Var, axis: usize, out_len: usize) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        let v = AxisView::new(&shape, axis, "interp")?;
        if out_len == 0 || v.len == 0 {
            return invalid("interp", "zero extent");
        }
        let taps = linear_taps(v.len, out_len);
        let x = self.value(input).data();
        let mut y = vec![0.0; v.outer * out_len * v.inner];
        for o in 0..v.outer {
            for (i, t) in taps.iter().enumerate() {
                let dst = (o * out_len + i) * v.inner;
                let lo = (o * v.len + t.lo) * v.inner;
                let hi = (o * v.len + t.hi) * v.inner;
                for inn in 0..v.inner {
                    y[dst + inn] = (1.0 - t.frac) * x[lo + inn] + t.frac * x[hi + inn];
                }
            }
        }
        check_finite("interp", &y)?;
        let mut out_shape = shape;
        out_shape[axis] = out_len;
        let value = Tensor::new(out_shape, y)?;
        let rg = self.requires_grad(input);
        Ok(self.push(value, Op::InterpAxis { input, axis, taps }, rg))
    }

    fn interp_trailing(&mut self, input: Var, target: &[usize], op: &'static str) -> Result<Var> {
        let rank = self.shape(input).len();
        if target.len() > rank {
            return invalid(op, format!("target {target:?} for rank {rank}"));
        }
        let first = rank - target.len();
        let mut x = input;
        for (d, &t) in target.iter().enumerate() {
            if self.shape(x)[first + d] != t {
                x = self.interp_axis(x, first + d, t)?;
            }
        }
        Ok(x)
    }

    /// Bilinear resize of the last two axes.
    pub fn resize_bilinear(&mut self, input: Var, target: [usize; 2]) -> Result<Var> {
        self.interp_trailing(input, &target, "resize_bilinear")
    }

    /// Trilinear resize of the last three axes.
    pub fn upsample_trilinear(&mut self, input: Var, target: [usize; 3]) -> Result<Var> {
        self.interp_trailing(input, &target, "upsample_trilinear")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph_with(shape: &[usize], data: &[f64]) -> (Graph, Var) {
        let mut g = Graph::new();
        let v = g.constant(Tensor::new(shape.to_vec(), data.to_vec()).unwrap());
        (g, v)
    }

    #[test]
    fn small_pools() {
        let (mut g, x) = graph_with(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let m = g.pool(x, PoolKind::Max, &[2, 2], &[2, 2]).unwrap();
        assert_eq!(g.value(m).data(), &[4.0]);
        let a = g.pool(x, PoolKind::Avg, &[2, 2], &[2, 2]).unwrap();
        assert_eq!(g.value(a).data(), &[2.5]);
        let ga = g.global_avg(x, 2).unwrap();
        assert_eq!(g.shape(ga), &[1, 1, 1, 1]);
        assert_eq!(g.value(ga).data(), &[2.5]);
    }

    #[test]
    fn adaptive_bucket_means() {
        let (mut g, x) = graph_with(&[4], &[1.0, 2.0, 3.0, 4.0]);
        let y = g.adaptive_avg(x, &[2]).unwrap();
        assert_eq!(g.value(y).data(), &[1.5, 3.5]);
        // uneven: 5 -> 3 buckets [0,2) [1,4) [3,5)
        let (mut g, x) = graph_with(&[5], &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = g.adaptive_avg(x, &[3]).unwrap();
        assert_eq!(g.value(y).data(), &[1.5, 3.0, 4.5]);
    }

    #[test]
    fn empty_or_oversized_window() {
        let (mut g, x) = graph_with(&[1, 3], &[1.0, 2.0, 3.0]);
        assert!(matches!(
            g.pool_axis(x, 1, PoolKind::Max, 0, 1),
            Err(TensorError::EmptyWindow { .. })
        ));
        assert!(g.pool_axis(x, 1, PoolKind::Avg, 4, 1).is_err());
    }

    #[test]
    fn bilinear_upsample_hand_values() {
        // 2 -> 4 half-pixel taps: src = -0.25 (clamped 0), 0.25, 0.75, 1.25 (clamped hi)
        let taps = linear_taps(2, 4);
        assert_eq!(taps[0], Tap { lo: 0, hi: 1, frac: 0.0 });
        assert_eq!(taps[1], Tap { lo: 0, hi: 1, frac: 0.25 });
        assert_eq!(taps[2], Tap { lo: 0, hi: 1, frac: 0.75 });
        assert_eq!(taps[3], Tap { lo: 1, hi: 1, frac: 0.0 });
        let (mut g, x) = graph_with(&[1, 2, 2], &[0.0, 1.0, 2.0, 3.0]);
        let y = g.resize_bilinear(x, [4, 4]).unwrap();
        let row = |r: f64| -> [f64; 4] { [r, r + 0.25, r + 0.75, r + 1.0] };
        let rows = [0.0, 0.5, 1.5, 2.0];
        let expect: Vec<f64> = rows.iter().flat_map(|&r| row(r)).collect();
        let got = g.value(y).data();
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12, "{got:?}");
        }
    }

    #[test]
    fn identity_resize() {
        let data: Vec<f64> = (0..12).map(|v| v as f64 / 11.0).collect();
        let (mut g, x) = graph_with(&[1, 3, 4], &data);
        let y = g.resize_bilinear(x, [3, 4]).unwrap();
        assert_eq!(g.value(y).data(), &data[..]);
        let z = g.interp_axis(x, 2, 4).unwrap();
        assert_eq!(g.value(z).data(), &data[..]);
    }
}
