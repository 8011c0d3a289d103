//! 3D cross-correlation (no kernel flip). 2D convolution is the `T = 1`
//! special case.

use crate::error::{shape_err, Result};
use crate::graph::{Graph, Op, Var};
use crate::tensor::{check_finite, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub batch: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub input: [usize; 3],
    pub kernel: [usize; 3],
    pub output: [usize; 3],
    pub stride: [usize; 3],
    pub padding: [usize; 3],
}

impl ConvGeom {
    pub fn new(
        input_shape: &[usize],
        weight_shape: &[usize],
        stride: [usize; 3],
        padding: [usize; 3],
    ) -> Result<Self> {
        if input_shape.len() != 5 || weight_shape.len() != 5 {
            return shape_err(
                "conv3d",
                format!("expected 5-d input and weight, got {input_shape:?} and {weight_shape:?}"),
            );
        }
        if input_shape[1] != weight_shape[1] {
            return shape_err(
                "conv3d",
                format!(
                    "input has {} channels, weight expects {}",
                    input_shape[1], weight_shape[1]
                ),
            );
        }
        if stride.iter().any(|&s| s == 0) {
            return shape_err("conv3d", "stride must be positive");
        }
        let mut output = [0; 3];
        for d in 0..3 {
            let padded = input_shape[2 + d] + 2 * padding[d];
            let k = weight_shape[2 + d];
            if k == 0 || k > padded {
                return shape_err(
                    "conv3d",
                    format!("kernel extent {k} exceeds padded input extent {padded} on axis {d}"),
                );
            }
            output[d] = (padded - k) / stride[d] + 1;
        }
        Ok(Self {
            batch: input_shape[0],
            in_ch: input_shape[1],
            out_ch: weight_shape[0],
            input: [input_shape[2], input_shape[3], input_shape[4]],
            kernel: [weight_shape[2], weight_shape[3], weight_shape[4]],
            output,
            stride,
            padding,
        })
    }

    fn in_size(&self) -> usize {
        self.input.iter().product()
    }

    fn out_size(&self) -> usize {
        self.output.iter().product()
    }

    fn kernel_size(&self) -> usize {
        self.kernel.iter().product()
    }

    pub fn output_shape(&self) -> Vec<usize> {
        vec![
            self.batch,
            self.out_ch,
            self.output[0],
            self.output[1],
            self.output[2],
        ]
    }

    /// Output positions `lo..hi` on axis `d` for which kernel tap `k` lands
    /// inside the unpadded input.
    fn valid(&self, d: usize, k: usize) -> (usize, usize) {
        let (s, p, n) = (self.stride[d], self.padding[d], self.input[d]);
        let lo = if p > k { (p - k).div_ceil(s) } else { 0 };
        let hi = if n + p > k {
            ((n + p - k - 1) / s + 1).min(self.output[d])
        } else {
            0
        };
        (lo, hi.max(lo))
    }

    /// Visits every (output offset, input offset) pair touched by tap
    /// `(kt, kh, kw)`, within one (batch, channel) plane.
    #[inline]
    fn for_each_tap(&self, kt: usize, kh: usize, kw: usize, mut f: impl FnMut(usize, usize)) {
        let (t0, t1) = self.valid(0, kt);
        let (h0, h1) = self.valid(1, kh);
        let (w0, w1) = self.valid(2, kw);
        let [_, oh_n, ow_n] = self.output;
        let [_, ih_n, iw_n] = self.input;
        for ot in t0..t1 {
            let it = ot * self.stride[0] + kt - self.padding[0];
            for oh in h0..h1 {
                let ih = oh * self.stride[1] + kh - self.padding[1];
                let orow = (ot * oh_n + oh) * ow_n;
                let irow = (it * ih_n + ih) * iw_n;
                for ow in w0..w1 {
                    let iw = ow * self.stride[2] + kw - self.padding[2];
                    f(orow + ow, irow + iw);
                }
            }
        }
    }
}

pub(crate) fn forward(x: &[f64], w: &[f64], bias: Option<&[f64]>, g: &ConvGeom) -> Vec<f64> {
    let (isz, osz, ksz) = (g.in_size(), g.out_size(), g.kernel_size());
    let [_, kh_n, kw_n] = g.kernel;
    let mut y = vec![0.0; g.batch * g.out_ch * osz];
    for b in 0..g.batch {
        for o in 0..g.out_ch {
            let ys = &mut y[(b * g.out_ch + o) * osz..][..osz];
            if let Some(bias) = bias {
                ys.fill(bias[o]);
            }
            for c in 0..g.in_ch {
                let xs = &x[(b * g.in_ch + c) * isz..][..isz];
                let ws = &w[(o * g.in_ch + c) * ksz..][..ksz];
                for kt in 0..g.kernel[0] {
                    for kh in 0..kh_n {
                        for kw in 0..kw_n {
                            let wv = ws[(kt * kh_n + kh) * kw_n + kw];
                            g.for_each_tap(kt, kh, kw, |oi, ii| ys[oi] += wv * xs[ii]);
                        }
                    }
                }
            }
        }
    }
    y
}

pub(crate) fn backward_input(gy: &[f64], w: &[f64], g: &ConvGeom) -> Vec<f64> {
    let (isz, osz, ksz) = (g.in_size(), g.out_size(), g.kernel_size());
    let [_, kh_n, kw_n] = g.kernel;
    let mut gx = vec![0.0; g.batch * g.in_ch * isz];
    for b in 0..g.batch {
        for c in 0..g.in_ch {
            let gxs = &mut gx[(b * g.in_ch + c) * isz..][..isz];
            for o in 0..g.out_ch {
                let gys = &gy[(b * g.out_ch + o) * osz..][..osz];
                let ws = &w[(o * g.in_ch + c) * ksz..][..ksz];
                for kt in 0..g.kernel[0] {
                    for kh in 0..kh_n {
                        for kw in 0..kw_n {
                            let wv = ws[(kt * kh_n + kh) * kw_n + kw];
                            g.for_each_tap(kt, kh, kw, |oi, ii| gxs[ii] += wv * gys[oi]);
                        }
                    }
                }
            }
        }
    }
    gx
}

pub(crate) fn backward_weight(gy: &[f64], x: &[f64], g: &ConvGeom) -> Vec<f64> {
    let (isz, osz, ksz) = (g.in_size(), g.out_size(), g.kernel_size());
    let [_, kh_n, kw_n] = g.kernel;
    let mut gw = vec![0.0; g.out_ch * g.in_ch * ksz];
    for o in 0..g.out_ch {
        for c in 0..g.in_ch {
            let gws = &mut gw[(o * g.in_ch + c) * ksz..][..ksz];
            for b in 0..g.batch {
                let gys = &gy[(b * g.out_ch + o) * osz..][..osz];
                let xs = &x[(b * g.in_ch + c) * isz..][..isz];
                for kt in 0..g.kernel[0] {
                    for kh in 0..kh_n {
                        for kw in 0..kw_n {
                            let mut s = 0.0;
                            g.for_each_tap(kt, kh, kw, |oi, ii| s += gys[oi] * xs[ii]);
                            gws[(kt * kh_n + kh) * kw_n + kw] += s;
                        }
                    }
                }
            }
        }
    }
    gw
}

pub(crate) fn backward_bias(gy: &[f64], g: &ConvGeom) -> Vec<f64> {
    let osz = g.out_size();
    let mut gb = vec![0.0; g.out_ch];
    for b in 0..g.batch {
        for (o, acc) in gb.iter_mut().enumerate() {
            *acc += gy[(b * g.out_ch + o) * osz..][..osz].iter().sum::<f64>();
        }
    }
    gb
}

impl Graph {
    /// `input [B,C,T,H,W]`, `weight [O,C,kt,kh,kw]`, `bias [O]`.
    pub fn conv3d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        stride: [usize; 3],
        padding: [usize; 3],
    ) -> Result<Var> {
        let geom = ConvGeom::new(self.shape(input), self.shape(weight), stride, padding)?;
        if let Some(b) = bias {
            if self.shape(b) != [geom.out_ch] {
                return shape_err(
                    "conv3d",
                    format!("bias shape {:?}, expected [{}]", self.shape(b), geom.out_ch),
                );
            }
        }
        let y = forward(
            self.value(input).data(),
            self.value(weight).data(),
            bias.map(|b| self.value(b).data()),
            &geom,
        );
        check_finite("conv3d", &y)?;
        let value = Tensor::new(geom.output_shape(), y)?;
        let mut deps = vec![input, weight];
        deps.extend(bias);
        let rg = self.any_grad(&deps);
        Ok(self.push(
            value,
            Op::Conv3d {
                input,
                weight,
                bias,
                geom,
            },
            rg,
        ))
    }

    /// `input [B,C,H,W]`, `weight [O,C,kh,kw]`, `bias [O]`.
    pub fn conv2d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        stride: [usize; 2],
        padding: [usize; 2],
    ) -> Result<Var> {
        let (is, ws) = (self.shape(input).to_vec(), self.shape(weight).to_vec());
        if is.len() != 4 || ws.len() != 4 {
            return shape_err(
                "conv2d",
                format!("expected 4-d input and weight, got {is:?} and {ws:?}"),
            );
        }
        let x5 = self.reshape(input, [is[0], is[1], 1, is[2], is[3]])?;
        let w5 = self.reshape(weight, [ws[0], ws[1], 1, ws[2], ws[3]])?;
        let y5 = self.conv3d(
            x5,
            w5,
            bias,
            [1, stride[0], stride[1]],
            [0, padding[0], padding[1]],
        )?;
        let s = self.shape(y5).to_vec();
        self.reshape(y5, [s[0], s[1], s[3], s[4]])
    }
}
