//! Saliency training losses and fixation metrics.
//!
//! A "frame" is the last two axes of a tensor; a rank-1 tensor is a single
//! frame. Multi-frame losses and metrics average per-frame values.

use dagr_tensor::{Graph, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::eval::stats::pearson;

pub const DEFAULT_GAMMA: f64 = 0.01;
pub const DEFAULT_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaliencyLossConfig {
    pub gamma: f64,
    pub eps: f64,
}

impl Default for SaliencyLossConfig {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            eps: DEFAULT_EPS,
        }
    }
}

impl SaliencyLossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !(self.eps > 0.0) {
            return config_err(format!("gamma {} must be >= 0 and eps {} > 0", self.gamma, self.eps));
        }
        Ok(())
    }
}

/// `(frames, pixels per frame)` for a map shape.
pub fn frame_layout(shape: &[usize]) -> Result<(usize, usize)> {
    match shape.len() {
        0 => config_err("saliency map must have at least one axis"),
        1 => Ok((1, shape[0])),
        n => Ok((shape[..n - 2].iter().product(), shape[n - 2] * shape[n - 1])),
    }
}

fn frames<'a>(t: &'a Tensor) -> Result<impl Iterator<Item = &'a [f64]>> {
    let (f, p) = frame_layout(t.shape())?;
    if f == 0 || p == 0 {
        return Err(Error::Degenerate("empty saliency map".into()));
    }
    Ok(t.data().chunks(p))
}

fn same_shape(op: &str, a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return config_err(format!("{op}: extents {a:?} and {b:?} differ"));
    }
    Ok(())
}

/// `(v + eps) / sum(v + eps)` per frame.
pub fn normalize_map(map: &Tensor, eps: f64) -> Result<Tensor> {
    if map.data().iter().any(|&v| v < 0.0) {
        return Err(Error::Degenerate("saliency map has negative entries".into()));
    }
    let mut out = Vec::with_capacity(map.numel());
    for frame in frames(map)? {
        let total: f64 = frame.iter().map(|v| v + eps).sum();
        if !(total > 0.0) {
            return Err(Error::Degenerate("frame sums to zero".into()));
        }
        out.extend(frame.iter().map(|v| (v + eps) / total));
    }
    Ok(Tensor::new(map.shape().to_vec(), out)?)
}

fn as_frames(g: &mut Graph, x: Var) -> Result<(Var, usize, usize)> {
    let (f, p) = frame_layout(g.shape(x))?;
    Ok((g.reshape(x, [f, p])?, f, p))
}

/// Differentiable per-frame normalization; returns `[F, P]`.
pub fn normalize_frames(g: &mut Graph, x: Var, eps: f64) -> Result<Var> {
    let (x2, _, _) = as_frames(g, x)?;
    let shifted = g.add_scalar(x2, eps)?;
    let total = g.sum_axes(shifted, &[1], true)?;
    Ok(g.div(shifted, total)?)
}

/// `(1/P) sum_j S_j ln(S_j / S_hat_j)` per frame after normalizing both maps.
pub fn kl_loss(g: &mut Graph, s: Var, s_hat: Var, eps: f64) -> Result<Var> {
    same_shape("kl_loss", g.shape(s), g.shape(s_hat))?;
    let (_, p) = frame_layout(g.shape(s))?;
    let sn = normalize_frames(g, s, eps)?;
    let hn = normalize_frames(g, s_hat, eps)?;
    let ls = g.ln(sn)?;
    let lh = g.ln(hn)?;
    let diff = g.sub(ls, lh)?;
    let terms = g.mul(sn, diff)?;
    let per_frame = g.sum_axes(terms, &[1], false)?;
    let scaled = g.scale(per_frame, 1.0 / p as f64)?;
    Ok(g.mean(scaled)?)
}

fn centered(g: &mut Graph, x: Var) -> Result<Var> {
    let m = g.mean_axes(x, &[1], true)?;
    Ok(g.sub(x, m)?)
}

fn check_variance(g: &Graph, c: Var, which: &str) -> Result<()> {
    let p = g.shape(c)[1];
    for frame in g.value(c).data().chunks(p) {
        if frame.iter().all(|&v| v.abs() <= 1e-12) {
            return Err(Error::Degenerate(format!("{which} map has a zero-variance frame")));
        }
    }
    Ok(())
}

/// Negative per-frame Pearson correlation, averaged over frames.
pub fn cc_loss(g: &mut Graph, s: Var, s_hat: Var) -> Result<Var> {
    same_shape("cc_loss", g.shape(s), g.shape(s_hat))?;
    let (a, _, _) = as_frames(g, s)?;
    let (b, _, _) = as_frames(g, s_hat)?;
    let ac = centered(g, a)?;
    let bc = centered(g, b)?;
    check_variance(g, ac, "ground-truth")?;
    check_variance(g, bc, "predicted")?;
    let ab = g.mul(ac, bc)?;
    let cov = g.mean_axes(ab, &[1], false)?;
    let aa = g.square(ac)?;
    let va = g.mean_axes(aa, &[1], false)?;
    let bb = g.square(bc)?;
    let vb = g.mean_axes(bb, &[1], false)?;
    let vv = g.mul(va, vb)?;
    let denom = g.sqrt(vv)?;
    let r = g.div(cov, denom)?;
    let mean_r = g.mean(r)?;
    Ok(g.neg(mean_r)?)
}

#[derive(Clone, Copy, Debug)]
pub struct SaliencyLossTerms {
    pub kl: Var,
    pub cc: Var,
    pub total: Var,
}

/// `gamma * KL + CC`.
pub fn saliency_loss(g: &mut Graph, s: Var, s_hat: Var, cfg: &SaliencyLossConfig) -> Result<SaliencyLossTerms> {
    cfg.validate()?;
    let kl = kl_loss(g, s, s_hat, cfg.eps)?;
    let cc = cc_loss(g, s, s_hat)?;
    let total = if cfg.gamma == 0.0 {
        cc
    } else {
        let wkl = g.scale(kl, cfg.gamma)?;
        g.add(wkl, cc)?
    };
    Ok(SaliencyLossTerms { kl, cc, total })
}

fn fixation_frames<'a>(map: &'a Tensor, fix: &'a Tensor) -> Result<Vec<(&'a [f64], &'a [f64])>> {
    same_shape("fixations", map.shape(), fix.shape())?;
    if fix.data().iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Degenerate("fixation map must be binary".into()));
    }
    Ok(frames(map)?.zip(frames(fix)?).collect())
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Normalized scanpath saliency of one frame.
pub fn nss_frame(map: &[f64], fix: &[f64]) -> Result<f64> {
    let (m, sd) = mean_std(map);
    if sd == 0.0 {
        return Err(Error::Degenerate("NSS of a constant map".into()));
    }
    let (mut total, mut count) = (0.0, 0usize);
    for (&v, &f) in map.iter().zip(fix) {
        if f > 0.0 {
            total += (v - m) / sd;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Degenerate("frame without fixations".into()));
    }
    Ok(total / count as f64)
}

pub fn nss(map: &Tensor, fix: &Tensor) -> Result<f64> {
    let fr = fixation_frames(map, fix)?;
    let n = fr.len() as f64;
    fr.into_iter()
        .map(|(m, f)| nss_frame(m, f))
        .sum::<Result<f64>>()
        .map(|s| s / n)
}

/// Pearson correlation averaged over frames.
pub fn cc_metric(s: &Tensor, s_hat: &Tensor) -> Result<f64> {
    same_shape("cc_metric", s.shape(), s_hat.shape())?;
    let fr: Vec<_> = frames(s)?.zip(frames(s_hat)?).collect();
    let n = fr.len() as f64;
    fr.into_iter()
        .map(|(a, b)| pearson(a, b))
        .sum::<Result<f64>>()
        .map(|s| s / n)
}

/// ROC area with fixated pixels as positives, one threshold per fixation value.
pub fn auc_judd_frame(map: &[f64], fix: &[f64]) -> Result<f64> {
    let mut pos: Vec<f64> = map.iter().zip(fix).filter(|(_, &f)| f > 0.0).map(|(&v, _)| v).collect();
    let n_pos = pos.len();
    let n_neg = map.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Degenerate(
            "AUC-Judd needs fixated and non-fixated pixels".into(),
        ));
    }
    pos.sort_by(|a, b| b.total_cmp(a));
    let mut sorted_all: Vec<f64> = map.to_vec();
    sorted_all.sort_by(|a, b| b.total_cmp(a));

    let mut tpr = vec![0.0];
    let mut fpr = vec![0.0];
    let (mut above_all, mut above_pos) = (0usize, 0usize);
    for (i, &thr) in pos.iter().enumerate() {
        if i > 0 && pos[i - 1] == thr {
            continue;
        }
        while above_pos < n_pos && pos[above_pos] >= thr {
            above_pos += 1;
        }
        while above_all < sorted_all.len() && sorted_all[above_all] >= thr {
            above_all += 1;
        }
        tpr.push(above_pos as f64 / n_pos as f64);
        fpr.push((above_all - above_pos) as f64 / n_neg as f64);
    }
    tpr.push(1.0);
    fpr.push(1.0);
    let area = fpr
        .windows(2)
        .zip(tpr.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
        .sum();
    Ok(area)
}

pub fn auc_judd(map: &Tensor, fix: &Tensor) -> Result<f64> {
    let fr = fixation_frames(map, fix)?;
    let n = fr.len() as f64;
    fr.into_iter()
        .map(|(m, f)| auc_judd_frame(m, f))
        .sum::<Result<f64>>()
        .map(|s| s / n)
}
