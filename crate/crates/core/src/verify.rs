//! Finite-difference verification suite: every differentiable operation on
//! randomized small shapes, plus three composed pipelines.

use dagr_tensor::{grad_check, Graph, PoolKind, Result as TResult, RngState, Tensor, Var};
use serde::Serialize;

use crate::error::Result;
use crate::objectives::{saliency_loss, SaliencyLossConfig};
use crate::params::{Bound, ParamStore};
use crate::register_tokens::{augment_input, init_tokens, project_tokens};
use crate::saliency::{SaliencyConfig, SaliencyNet};
use crate::vqa::{vqa_loss, SpatialEncoderConfig, TemporalEncoderConfig, VqaConfig, VqaLossConfig, VqaModel};

pub const EPS: f64 = 1e-5;
/// Step for the second probe of a failing check. A ReLU or max-pool kink
/// within `EPS` of the base point shrinks away here; a wrong gradient does not.
pub const FINE_EPS: f64 = 1e-7;
pub const TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub seed: u64,
    pub max_relative_error: f64,
    pub eps: f64,
    pub checked: usize,
    pub passed: bool,
}

fn weighted_sum(g: &mut Graph, y: Var, seed: u64) -> TResult<Var> {
    let w = Tensor::randn(g.shape(y).to_vec(), &mut RngState::new(seed ^ 0x5eed));
    let w = g.constant(w);
    let p = g.mul(y, w)?;
    g.sum(p)
}

fn check<F>(out: &mut Vec<CheckResult>, name: &str, params: Vec<Tensor>, seed: u64, f: F) -> Result<()>
where
    F: Fn(&mut Graph, &[Var]) -> TResult<Var>,
{
    let run = |eps| {
        grad_check(
            |g, p| {
                let y = f(g, p)?;
                weighted_sum(g, y, seed)
            },
            &params,
            eps,
        )
    };
    let mut eps = EPS;
    let mut r = run(eps)?;
    if r.max_relative_error >= TOLERANCE {
        eps = FINE_EPS;
        r = run(eps)?;
    }
    out.push(CheckResult {
        name: name.to_string(),
        seed,
        max_relative_error: r.max_relative_error,
        eps,
        checked: r.checked,
        passed: r.max_relative_error < TOLERANCE,
    });
    Ok(())
}

fn dim(rng: &mut RngState, lo: usize, hi: usize) -> usize {
    lo + rng.below(hi - lo + 1)
}

/// Moves values off the kink at zero.
fn off_kink(t: Tensor) -> Tensor {
    t.map(|v| if v.abs() < 0.05 { v + 0.2 } else { v })
}

pub fn op_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let o = &mut out;
    let mut rng = RngState::new(seed);
    let (m, n) = (dim(&mut rng, 1, 4), dim(&mut rng, 1, 4));
    let a = Tensor::randn([m, n], &mut rng);
    let b = Tensor::randn([1, n], &mut rng);
    let pos = Tensor::rand_uniform([m, n], 0.5, 2.0, &mut rng);
    check(o, "add", vec![a.clone(), b.clone()], seed, |g, p| g.add(p[0], p[1]))?;
    check(o, "sub", vec![a.clone(), b.clone()], seed, |g, p| g.sub(p[0], p[1]))?;
    check(o, "mul", vec![a.clone(), b.clone()], seed, |g, p| g.mul(p[0], p[1]))?;
    check(o, "div", vec![a.clone(), pos.clone()], seed, |g, p| g.div(p[0], p[1]))?;
    check(o, "scale", vec![a.clone()], seed, |g, p| g.scale(p[0], -1.7))?;
    check(o, "add_scalar", vec![a.clone()], seed, |g, p| g.add_scalar(p[0], 0.3))?;
    check(o, "neg", vec![a.clone()], seed, |g, p| g.neg(p[0]))?;
    check(o, "sigmoid", vec![a.clone()], seed, |g, p| g.sigmoid(p[0]))?;
    check(o, "tanh", vec![a.clone()], seed, |g, p| g.tanh(p[0]))?;
    check(o, "exp", vec![a.clone()], seed, |g, p| g.exp(p[0]))?;
    check(o, "square", vec![a.clone()], seed, |g, p| g.square(p[0]))?;
    check(o, "relu", vec![off_kink(a.clone())], seed, |g, p| g.relu(p[0]))?;
    check(o, "abs", vec![off_kink(a.clone())], seed, |g, p| g.abs(p[0]))?;
    check(o, "ln", vec![pos.clone()], seed, |g, p| g.ln(p[0]))?;
    check(o, "sqrt", vec![pos], seed, |g, p| g.sqrt(p[0]))?;
    check(o, "transpose", vec![a.clone()], seed, |g, p| g.transpose(p[0]))?;

    let s = [dim(&mut rng, 1, 3), dim(&mut rng, 2, 4), dim(&mut rng, 1, 3)];
    let x = Tensor::randn(s, &mut rng);
    check(o, "sum_axes", vec![x.clone()], seed, |g, p| g.sum_axes(p[0], &[0, 2], false))?;
    check(o, "mean_axes", vec![x.clone()], seed, |g, p| g.mean_axes(p[0], &[1], true))?;
    check(o, "sum", vec![x.clone()], seed, |g, p| g.sum(p[0]))?;
    check(o, "mean", vec![x.clone()], seed, |g, p| g.mean(p[0]))?;
    check(o, "reshape", vec![x.clone()], seed, |g, p| g.reshape(p[0], [s[0] * s[1], s[2]]))?;
    check(o, "permute", vec![x.clone()], seed, |g, p| g.permute(p[0], &[2, 0, 1]))?;
    check(o, "narrow", vec![x.clone()], seed, |g, p| g.narrow(p[0], 1, 1, s[1] - 1))?;
    check(o, "broadcast_to", vec![x.clone()], seed, |g, p| {
        let r = g.sum_axes(p[0], &[1], true)?;
        g.broadcast_to(r, [2, s[0], 3, s[2]])
    })?;
    let y = Tensor::randn([s[0], 2, s[2]], &mut rng);
    check(o, "concat", vec![x, y], seed, |g, p| g.concat(&[p[0], p[1]], 1))?;

    let (m, k, n) = (dim(&mut rng, 1, 4), dim(&mut rng, 1, 4), dim(&mut rng, 1, 4));
    let a = Tensor::randn([m, k], &mut rng);
    let b = Tensor::randn([k, n], &mut rng);
    check(o, "matmul", vec![a.clone(), b], seed, |g, p| g.matmul(p[0], p[1]))?;
    let w = Tensor::randn([n, k], &mut rng);
    let bias = Tensor::randn([n], &mut rng);
    check(o, "linear", vec![a, w, bias], seed, |g, p| g.linear(p[0], p[1], Some(p[2])))?;
    let x = Tensor::randn([m, k + 1], &mut rng);
    check(o, "softmax", vec![x.clone()], seed, |g, p| g.softmax(p[0], 1))?;
    check(o, "layernorm", vec![x], seed, |g, p| g.layernorm(p[0], 1, 1e-5))?;

    let (c, oc) = (dim(&mut rng, 1, 2), dim(&mut rng, 1, 2));
    let stride = [1, dim(&mut rng, 1, 2), 1];
    let x = Tensor::randn([1, c, 2, 4, 3], &mut rng);
    let w = Tensor::randn([oc, c, 2, 3, 2], &mut rng);
    let b = Tensor::randn([oc], &mut rng);
    check(o, "conv3d", vec![x, w, b], seed, |g, p| g.conv3d(p[0], p[1], Some(p[2]), stride, [1, 1, 0]))?;
    let x = Tensor::randn([2, c, 4, 4], &mut rng);
    let w = Tensor::randn([oc, c, 3, 3], &mut rng);
    let b = Tensor::randn([oc], &mut rng);
    check(o, "conv2d", vec![x, w, b], seed, |g, p| {
        g.conv2d(p[0], p[1], Some(p[2]), [stride[1], 1], [1, 1])
    })?;

    let x = Tensor::randn([1, 2, 3, 4, 6], &mut rng);
    check(o, "max_pool", vec![x.clone()], seed, |g, p| g.pool(p[0], PoolKind::Max, &[1, 2, 2], &[1, 2, 2]))?;
    check(o, "avg_pool", vec![x.clone()], seed, |g, p| g.pool(p[0], PoolKind::Avg, &[2, 2, 3], &[1, 2, 2]))?;
    check(o, "global_avg", vec![x.clone()], seed, |g, p| g.global_avg(p[0], 3))?;
    check(o, "adaptive_avg", vec![x.clone()], seed, |g, p| g.adaptive_avg(p[0], &[2, 3, 4]))?;
    check(o, "resize_bilinear", vec![x.clone()], seed, |g, p| g.resize_bilinear(p[0], [7, 5]))?;
    check(o, "upsample_trilinear", vec![x], seed, |g, p| g.upsample_trilinear(p[0], [5, 8, 9]))?;
    Ok(out)
}

fn bind_named(names: &[String], vars: &[Var]) -> Bound {
    Bound::from_pairs(names.iter().cloned().zip(vars.iter().copied()))
}

/// Splits a store into names and tensors, replacing the zero-initialized
/// biases with small positive random values so no ReLU input sits exactly
/// on zero and no unit starts dead.
fn split_store(store: &ParamStore, rng: &RngState) -> (Vec<String>, Vec<Tensor>) {
    store
        .iter()
        .map(|(k, v)| {
            let t = if k.ends_with(".b") {
                Tensor::randn(v.shape().to_vec(), &mut rng.fork(crate::params::name_stream(k))).map(|x| 0.05 + 0.1 * x.abs())
            } else {
                v.clone()
            };
            (k.clone(), t)
        })
        .unzip()
}

/// Saliency network forward plus the combined KL/CC loss, differentiated
/// with respect to every network parameter and the input video.
pub fn saliency_pipeline_check(seed: u64) -> Result<CheckResult> {
    let cfg = SaliencyConfig {
        tokens: 2,
        token_dim: 3,
        stage_channels: vec![2, 3],
        bottleneck_channels: 3,
        attention_kernel: [3, 3, 3],
        ..SaliencyConfig::default()
    };
    let rng = RngState::new(seed);
    let net = SaliencyNet::new(cfg, &rng)?;
    let (names, mut params) = split_store(&net.params, &rng.fork(13));
    let video = Tensor::rand_uniform([1, 3, 2, 4, 4], 0.0, 1.0, &mut rng.fork(11));
    let target = Tensor::rand_uniform([1, 2, 4, 4], 0.05, 1.0, &mut rng.fork(12));
    params.push(video);
    let loss_cfg = SaliencyLossConfig { gamma: 1.0, ..SaliencyLossConfig::default() };
    let mut out = Vec::new();
    let n = names.len();
    check(&mut out, "pipeline:saliency_loss", params, seed, |g, p| {
        let bound = bind_named(&names, &p[..n]);
        let fwd = net.forward(g, &bound, p[n]).map_err(to_tensor_err)?;
        let pred = g.reshape(fwd.map, [1, 2, 4, 4])?;
        let s = g.constant(target.clone());
        Ok(saliency_loss(g, s, pred, &loss_cfg).map_err(to_tensor_err)?.total)
    })?;
    Ok(out.remove(0))
}

/// Fusion, spatial and temporal encoders, regressor and the L1 plus soft
/// rank loss over a batch of three clips.
pub fn vqa_pipeline_check(seed: u64) -> Result<CheckResult> {
    let cfg = VqaConfig {
        spatial: SpatialEncoderConfig {
            stage_channels: vec![2, 8],
            ..SpatialEncoderConfig::default()
        },
        temporal: TemporalEncoderConfig {
            layers: 1,
            heads: 2,
            ffn_dim: 4,
            ..TemporalEncoderConfig::default()
        },
        ..VqaConfig::default()
    };
    let rng = RngState::new(seed);
    let model = VqaModel::new(cfg, &rng)?;
    let (names, params) = split_store(&model.params, &rng.fork(13));
    let clips: Vec<(Tensor, Tensor)> = (0..3)
        .map(|i| {
            let mut r = rng.fork(100 + i);
            (
                Tensor::rand_uniform([3, 2, 4, 4], 0.0, 1.0, &mut r),
                Tensor::rand_uniform([2, 4, 4], 0.0, 1.0, &mut r),
            )
        })
        .collect();
    let mos = Tensor::from_vec(vec![1.5, 4.0, 2.5]);
    let loss_cfg = VqaLossConfig::default();
    let mut out = Vec::new();
    check(&mut out, "pipeline:vqa_loss", params, seed, |g, p| {
        let bound = bind_named(&names, p);
        let mut preds = Vec::new();
        for (frames, sal) in &clips {
            preds.push(model.forward(g, &bound, frames, Some(sal)).map_err(to_tensor_err)?.y_hat);
        }
        let y_hat = g.concat(&preds, 0)?;
        let y = g.constant(mos.clone());
        Ok(vqa_loss(g, y_hat, y, &loss_cfg).map_err(to_tensor_err)?.value)
    })?;
    Ok(out.remove(0))
}

/// Token projection, channel augmentation and a convolution on top.
pub fn register_token_check(seed: u64) -> Result<CheckResult> {
    let rng = RngState::new(seed);
    let tokens = init_tokens(3, 4, &rng)?;
    let mut r = rng.fork(7);
    let video = Tensor::rand_uniform([2, 3, 2, 3, 3], 0.0, 1.0, &mut r);
    let w = Tensor::randn([2, 6, 1, 3, 3], &mut r);
    let proj_b = Tensor::randn([3], &mut r);
    let mut out = Vec::new();
    check(&mut out, "pipeline:register_tokens", vec![tokens.r, tokens.proj_w, proj_b, w], seed, |g, p| {
        let projected = project_tokens(g, p[0], p[1], p[2], 2, 3, 3).map_err(to_tensor_err)?;
        let v = g.constant(video.clone());
        let aug = augment_input(g, v, Some(projected)).map_err(to_tensor_err)?;
        let y = g.conv3d(aug, p[3], None, [1, 1, 1], [0, 1, 1])?;
        g.tanh(y)
    })?;
    Ok(out.remove(0))
}

fn to_tensor_err(e: crate::error::Error) -> dagr_tensor::TensorError {
    match e {
        crate::error::Error::Tensor(t) => t,
        other => dagr_tensor::TensorError::InvalidArgument {
            op: "pipeline",
            detail: other.to_string(),
        },
    }
}

pub fn pipeline_checks(seed: u64) -> Result<Vec<CheckResult>> {
    Ok(vec![
        saliency_pipeline_check(seed)?,
        vqa_pipeline_check(seed)?,
        register_token_check(seed)?,
    ])
}

/// Every operation and pipeline over seeds `0..seeds`.
pub fn run_suite(seeds: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for seed in 0..seeds {
        out.extend(op_checks(seed)?);
        out.extend(pipeline_checks(seed)?);
    }
    Ok(out)
}
