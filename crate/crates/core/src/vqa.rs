//! Saliency-fused spatio-temporal quality regressor.
//!
//! Per frame: `F_t = GAP(f((1 - a) I_t + a (I_t * S_t)))` with a residual CNN
//! `f`. Sinusoidal positions are added and the sequence runs through
//! post-norm transformer layers `Z = MHSA(X) + X`, `Y = LN(FFN(Z) + Z)`.
//! The time-averaged `F` and `Y` are concatenated and mapped to one score.

use dagr_tensor::{Graph, RngState, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::params::{he_normal, name_stream, Bound, ParamStore};
use crate::saliency::SaliencyNet;

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_BETA: f64 = 0.1;
pub const DEFAULT_TEMPERATURE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpatialEncoderConfig {
    /// Widths of the residual stages; the stem uses the first width and the
    /// last width is the feature dimension.
    pub stage_channels: Vec<usize>,
    pub bias: bool,
}

impl Default for SpatialEncoderConfig {
    fn default() -> Self {
        Self {
            stage_channels: vec![8, 8, 16, 16],
            bias: true,
        }
    }
}

impl SpatialEncoderConfig {
    pub fn feature_dim(&self) -> usize {
        self.stage_channels.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage_channels.len() < 2 {
            return config_err("spatial encoder needs at least two stages");
        }
        if self.stage_channels.contains(&0) {
            return config_err("spatial stage widths must be positive");
        }
        if self.feature_dim() < 8 {
            return config_err(format!("feature dimension {} below 8", self.feature_dim()));
        }
        Ok(())
    }

    fn stride(stage: usize) -> usize {
        if stage == 0 {
            1
        } else {
            2
        }
    }

    fn has_projection(&self, stage: usize) -> bool {
        let prev = if stage == 0 {
            self.stage_channels[0]
        } else {
            self.stage_channels[stage - 1]
        };
        Self::stride(stage) != 1 || prev != self.stage_channels[stage]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemporalEncoderConfig {
    pub layers: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub eps: f64,
}

impl Default for TemporalEncoderConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            heads: 2,
            ffn_dim: 32,
            eps: 1e-5,
        }
    }
}

/// Which pooled features reach the regressor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    Both,
    SpatialOnly,
    TemporalOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VqaConfig {
    pub spatial: SpatialEncoderConfig,
    pub temporal: TemporalEncoderConfig,
    pub alpha: f64,
    pub use_saliency: bool,
    pub readout: Readout,
}

impl Default for VqaConfig {
    fn default() -> Self {
        Self {
            spatial: SpatialEncoderConfig::default(),
            temporal: TemporalEncoderConfig::default(),
            alpha: DEFAULT_ALPHA,
            use_saliency: true,
            readout: Readout::Both,
        }
    }
}

impl VqaConfig {
    pub fn validate(&self) -> Result<()> {
        self.spatial.validate()?;
        let d = self.spatial.feature_dim();
        let t = &self.temporal;
        if t.layers == 0 || t.heads == 0 || t.ffn_dim == 0 {
            return config_err("temporal layers, heads and ffn_dim must be positive");
        }
        if d % t.heads != 0 {
            return config_err(format!("feature dimension {d} not divisible by {} heads", t.heads));
        }
        if !(t.eps > 0.0) {
            return config_err("layer-norm eps must be positive");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return config_err(format!("alpha {} outside [0, 1]", self.alpha));
        }
        Ok(())
    }

    pub fn parameter_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let sp = &self.spatial;
        let mut out = Vec::new();
        let conv = |out: &mut Vec<(String, Vec<usize>)>, name: String, o: usize, i: usize, k: usize| {
            out.push((format!("{name}.w"), vec![o, i, k, k]));
            if sp.bias {
                out.push((format!("{name}.b"), vec![o]));
            }
        };
        let c0 = sp.stage_channels[0];
        conv(&mut out, "vqa.stem".into(), c0, 3, 3);
        let mut prev = c0;
        for (i, &c) in sp.stage_channels.iter().enumerate() {
            conv(&mut out, format!("vqa.s{i}.conv1"), c, prev, 3);
            conv(&mut out, format!("vqa.s{i}.conv2"), c, c, 3);
            if sp.has_projection(i) {
                conv(&mut out, format!("vqa.s{i}.proj"), c, prev, 1);
            }
            prev = c;
        }
        let d = sp.feature_dim();
        let f = self.temporal.ffn_dim;
        for l in 0..self.temporal.layers {
            for (name, o, i) in [("q", d, d), ("k", d, d), ("v", d, d), ("o", d, d), ("ffn1", f, d), ("ffn2", d, f)] {
                out.push((format!("vqa.t{l}.{name}.w"), vec![o, i]));
                out.push((format!("vqa.t{l}.{name}.b"), vec![o]));
            }
        }
        out.push(("vqa.head.w".into(), vec![1, 2 * d]));
        out.push(("vqa.head.b".into(), vec![1]));
        out
    }
}

#[derive(Clone, Debug)]
pub struct VqaModel {
    pub cfg: VqaConfig,
    pub params: ParamStore,
}

#[derive(Clone, Copy, Debug)]
pub struct VqaForward {
    /// Predicted score, shape `[1]`.
    pub y_hat: Var,
    /// Per-frame spatial features `[T, d]`.
    pub features: Var,
    /// Temporal encoder output `[T, d]`.
    pub temporal: Var,
}

/// `(1 - alpha) I + alpha (I * S)` with `S` broadcast over channels.
///
/// `frames` is `[3,H,W]` with `saliency` `[H,W]`, or `[T,3,H,W]` with
/// `saliency` `[T,H,W]` or `[T,1,H,W]`. `alpha = 0` returns `frames` itself.
pub fn fuse_frame(g: &mut Graph, frames: Var, saliency: Var, alpha: f64) -> Result<Var> {
    if !(0.0..=1.0).contains(&alpha) {
        return config_err(format!("alpha {alpha} outside [0, 1]"));
    }
    let fs = g.shape(frames).to_vec();
    let ss = g.shape(saliency).to_vec();
    let target: Vec<usize> = match fs.len() {
        3 => vec![1, fs[1], fs[2]],
        4 => vec![fs[0], 1, fs[2], fs[3]],
        _ => return config_err(format!("frames {fs:?} must be [3,H,W] or [T,3,H,W]")),
    };
    if ss.iter().product::<usize>() != target.iter().product::<usize>()
        || ss[ss.len().saturating_sub(2)..] != fs[fs.len() - 2..]
    {
        return Err(Error::Config(format!("saliency {ss:?} does not match frames {fs:?}")));
    }
    if alpha == 0.0 {
        return Ok(frames);
    }
    let s = g.reshape(saliency, target)?;
    let weighted = g.mul(frames, s)?;
    let keep = g.scale(frames, 1.0 - alpha)?;
    let add = g.scale(weighted, alpha)?;
    Ok(g.add(keep, add)?)
}

fn conv2(g: &mut Graph, b: &Bound, cfg: &SpatialEncoderConfig, name: &str, x: Var, stride: usize, pad: usize) -> Result<Var> {
    let w = b.get(&format!("{name}.w"))?;
    let bias = if cfg.bias {
        Some(b.get(&format!("{name}.b"))?)
    } else {
        None
    };
    Ok(g.conv2d(x, w, bias, [stride, stride], [pad, pad])?)
}

/// Residual CNN with global average pooling: `[T,3,H,W] -> [T,d]`.
pub fn spatial_features(g: &mut Graph, b: &Bound, cfg: &SpatialEncoderConfig, fused: Var) -> Result<Var> {
    let s = g.shape(fused).to_vec();
    if s.len() != 4 || s[1] != 3 || s[2] == 0 || s[3] == 0 {
        return config_err(format!("spatial encoder input {s:?}, expected [T,3,H,W]"));
    }
    let stem = conv2(g, b, cfg, "vqa.stem", fused, 1, 1)?;
    let mut x = g.relu(stem)?;
    for i in 0..cfg.stage_channels.len() {
        let stride = SpatialEncoderConfig::stride(i);
        let h = conv2(g, b, cfg, &format!("vqa.s{i}.conv1"), x, stride, 1)?;
        let h = g.relu(h)?;
        let h = conv2(g, b, cfg, &format!("vqa.s{i}.conv2"), h, 1, 1)?;
        let short = if cfg.has_projection(i) {
            conv2(g, b, cfg, &format!("vqa.s{i}.proj"), x, stride, 0)?
        } else {
            x
        };
        let sum = g.add(h, short)?;
        x = g.relu(sum)?;
    }
    let pooled = g.global_avg(x, 2)?;
    let d = g.shape(pooled)[1];
    Ok(g.reshape(pooled, [s[0], d])?)
}

/// Sinusoidal position code: `P[2i] = sin(t / 10000^(2i/d))`,
/// `P[2i+1] = cos(t / 10000^(2i/d))`.
pub fn positional_encoding(t: usize, d: usize) -> Tensor {
    let data = (0..d)
        .map(|j| {
            let pair = (j / 2) as f64;
            let angle = t as f64 / 10000f64.powf(2.0 * pair / d as f64);
            if j % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect();
    Tensor::from_vec(data)
}

/// `[T, d]` table of [`positional_encoding`] rows.
pub fn positional_table(t: usize, d: usize) -> Tensor {
    let data = (0..t).flat_map(|i| positional_encoding(i, d).into_data()).collect();
    Tensor::new([t, d], data).expect("table shape")
}

fn dense(g: &mut Graph, b: &Bound, name: &str, x: Var) -> Result<Var> {
    let w = b.get(&format!("{name}.w"))?;
    let bias = b.get(&format!("{name}.b"))?;
    Ok(g.linear(x, w, Some(bias))?)
}

/// Multi-head scaled dot-product self-attention over the rows of `x [T,d]`.
pub fn self_attention(g: &mut Graph, b: &Bound, prefix: &str, x: Var, heads: usize) -> Result<Var> {
    let d = g.shape(x)[1];
    if heads == 0 || d % heads != 0 {
        return config_err(format!("dimension {d} not divisible by {heads} heads"));
    }
    let dh = d / heads;
    let q = dense(g, b, &format!("{prefix}.q"), x)?;
    let k = dense(g, b, &format!("{prefix}.k"), x)?;
    let v = dense(g, b, &format!("{prefix}.v"), x)?;
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = g.narrow(q, 1, h * dh, dh)?;
        let kh = g.narrow(k, 1, h * dh, dh)?;
        let vh = g.narrow(v, 1, h * dh, dh)?;
        let kt = g.transpose(kh)?;
        let scores = g.matmul(qh, kt)?;
        let scaled = g.scale(scores, 1.0 / (dh as f64).sqrt())?;
        let attn = g.softmax(scaled, 1)?;
        outs.push(g.matmul(attn, vh)?);
    }
    let cat = if heads == 1 { outs[0] } else { g.concat(&outs, 1)? };
    dense(g, b, &format!("{prefix}.o"), cat)
}

/// Stack of post-norm encoder layers on `x [T,d]`.
pub fn temporal_encode(g: &mut Graph, b: &Bound, cfg: &TemporalEncoderConfig, x: Var) -> Result<Var> {
    let s = g.shape(x).to_vec();
    if s.len() != 2 || s[0] == 0 {
        return config_err(format!("temporal input {s:?}, expected [T,d] with T >= 1"));
    }
    let mut h = x;
    for l in 0..cfg.layers {
        let p = format!("vqa.t{l}");
        let att = self_attention(g, b, &p, h, cfg.heads)?;
        let z = g.add(att, h)?;
        let f1 = dense(g, b, &format!("{p}.ffn1"), z)?;
        let f1 = g.relu(f1)?;
        let f2 = dense(g, b, &format!("{p}.ffn2"), f1)?;
        let r = g.add(f2, z)?;
        h = g.layernorm(r, 1, cfg.eps)?;
    }
    Ok(h)
}

/// `f_w([mean_t F; mean_t Y])`, shape `[1]`.
pub fn predict_quality(g: &mut Graph, b: &Bound, features: Var, temporal: Var, readout: Readout) -> Result<Var> {
    let fs = g.shape(features).to_vec();
    if fs.len() != 2 || fs[0] == 0 || g.shape(temporal) != fs.as_slice() {
        return config_err(format!(
            "features {fs:?} and temporal {:?} must both be [T,d] with T >= 1",
            g.shape(temporal)
        ));
    }
    let d = fs[1];
    let mut ys = g.mean_axes(features, &[0], false)?;
    let mut yt = g.mean_axes(temporal, &[0], false)?;
    match readout {
        Readout::Both => {}
        Readout::SpatialOnly => yt = g.constant(Tensor::zeros([d])),
        Readout::TemporalOnly => ys = g.constant(Tensor::zeros([d])),
    }
    let cat = g.concat(&[ys, yt], 0)?;
    let row = g.reshape(cat, [1, 2 * d])?;
    let out = dense(g, b, "vqa.head", row)?;
    Ok(g.reshape(out, [1])?)
}

impl VqaModel {
    pub fn new(cfg: VqaConfig, rng: &RngState) -> Result<Self> {
        cfg.validate()?;
        let mut params = ParamStore::new();
        for (name, shape) in cfg.parameter_shapes() {
            let t = if name.ends_with(".b") {
                Tensor::zeros(shape)
            } else if name.starts_with("vqa.t") || name.starts_with("vqa.head") {
                let fan_in = shape[1];
                let mut r = rng.fork(name_stream(&name));
                let std = (1.0 / fan_in as f64).sqrt();
                Tensor::randn(shape, &mut r).map(|v| v * std)
            } else {
                let fan_in = shape[1..].iter().product();
                let mut w = he_normal(&shape, fan_in, rng, &name);
                if name.contains(".conv2") {
                    w = w.map(|v| 0.5 * v);
                }
                w
            };
            params.insert(name, t);
        }
        Ok(Self { cfg, params })
    }

    pub fn from_params(cfg: VqaConfig, params: ParamStore) -> Result<Self> {
        cfg.validate()?;
        for (name, shape) in cfg.parameter_shapes() {
            let t = params.get(&name)?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Config(format!(
                    "{name} has shape {:?}, config expects {shape:?}",
                    t.shape()
                )));
            }
        }
        Ok(Self { cfg, params })
    }

    /// Score one clip. `frames` is `[3,T,H,W]`; `saliency` is `[T,H,W]` and
    /// is ignored when saliency fusion is disabled.
    pub fn forward(&self, g: &mut Graph, b: &Bound, frames: &Tensor, saliency: Option<&Tensor>) -> Result<VqaForward> {
        let s = frames.shape();
        if s.len() != 4 || s[0] != 3 || s[1] == 0 {
            return config_err(format!("clip frames {s:?}, expected [3,T,H,W] with T >= 1"));
        }
        let t = s[1];
        let raw = g.constant(frames.clone());
        let per_frame = g.permute(raw, &[1, 0, 2, 3])?;
        let fused = match (self.cfg.use_saliency, saliency) {
            (false, _) => per_frame,
            (true, Some(sal)) => {
                let sv = g.constant(sal.clone());
                fuse_frame(g, per_frame, sv, self.cfg.alpha)?
            }
            (true, None) => return config_err("saliency fusion enabled but no saliency maps given"),
        };
        let features = spatial_features(g, b, &self.cfg.spatial, fused)?;
        let d = self.cfg.spatial.feature_dim();
        let pe = g.constant(positional_table(t, d));
        let with_pos = g.add(features, pe)?;
        let temporal = temporal_encode(g, b, &self.cfg.temporal, with_pos)?;
        let y_hat = predict_quality(g, b, features, temporal, self.cfg.readout)?;
        Ok(VqaForward {
            y_hat,
            features,
            temporal,
        })
    }

    pub fn predict(&self, frames: &Tensor, saliency: Option<&Tensor>) -> Result<f64> {
        let mut g = Graph::new();
        let b = self.params.bind(&mut g, false);
        let out = self.forward(&mut g, &b, frames, saliency)?;
        Ok(g.value(out.y_hat).data()[0])
    }
}

/// Frozen saliency maps for a `[3,T,H,W]` clip, returned as `[T,H,W]`.
pub fn infer_saliency_for_vqa(frames: &Tensor, net: &SaliencyNet) -> Result<Tensor> {
    let s = frames.shape();
    if s.len() != 4 || s[0] != net.cfg.video_channels {
        return config_err(format!(
            "clip {s:?} does not match a {}-channel saliency model",
            net.cfg.video_channels
        ));
    }
    let map = net.predict(frames)?;
    Ok(map.values.reshape([s[1], s[2], s[3]])?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VqaLossConfig {
    pub beta: f64,
    pub rank_temperature: f64,
}

impl Default for VqaLossConfig {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            rank_temperature: DEFAULT_TEMPERATURE,
        }
    }
}

impl VqaLossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !(self.rank_temperature > 0.0) {
            return config_err(format!(
                "beta {} must be >= 0 and temperature {} > 0",
                self.beta, self.rank_temperature
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VqaLoss {
    pub value: Var,
    pub l1: Var,
    /// Set when the batch was too small for the correlation term.
    pub correlation_skipped: bool,
}

/// `r_i = sum_j sigmoid((x_i - x_j) / temperature)` for `x [n]`.
pub fn soft_ranks(g: &mut Graph, x: Var, temperature: f64) -> Result<Var> {
    let n = g.shape(x)[0];
    let col = g.reshape(x, [n, 1])?;
    let row = g.reshape(x, [1, n])?;
    let diff = g.sub(col, row)?;
    let scaled = g.scale(diff, 1.0 / temperature)?;
    let s = g.sigmoid(scaled)?;
    Ok(g.sum_axes(s, &[1], false)?)
}

fn has_variance(t: &Tensor) -> bool {
    let d = t.data();
    d.iter().any(|&v| v != d[0])
}

/// Differentiable Spearman surrogate: Pearson correlation of soft ranks.
/// Returns `None` when either side has no rank variance.
pub fn soft_spearman(g: &mut Graph, a: Var, b: Var, temperature: f64) -> Result<Option<Var>> {
    let ra = soft_ranks(g, a, temperature)?;
    let rb = soft_ranks(g, b, temperature)?;
    if !has_variance(g.value(ra)) || !has_variance(g.value(rb)) {
        return Ok(None);
    }
    let ma = g.mean_axes(ra, &[0], true)?;
    let ca = g.sub(ra, ma)?;
    let mb = g.mean_axes(rb, &[0], true)?;
    let cb = g.sub(rb, mb)?;
    let ab = g.mul(ca, cb)?;
    let cov = g.mean(ab)?;
    let aa = g.square(ca)?;
    let va = g.mean(aa)?;
    let bb = g.square(cb)?;
    let vb = g.mean(bb)?;
    let vv = g.mul(va, vb)?;
    let den = g.sqrt(vv)?;
    Ok(Some(g.div(cov, den)?))
}

/// `mean|y_hat - y| + beta (1 - rho_soft(y_hat, y))` over a batch `[n]`.
pub fn vqa_loss(g: &mut Graph, y_hat: Var, y: Var, cfg: &VqaLossConfig) -> Result<VqaLoss> {
    cfg.validate()?;
    let (hs, ys) = (g.shape(y_hat).to_vec(), g.shape(y).to_vec());
    if hs.len() != 1 || hs != ys || hs[0] == 0 {
        return config_err(format!("prediction {hs:?} and target {ys:?} must be equal non-empty vectors"));
    }
    let diff = g.sub(y_hat, y)?;
    let abs = g.abs(diff)?;
    let l1 = g.mean(abs)?;
    if cfg.beta == 0.0 {
        return Ok(VqaLoss {
            value: l1,
            l1,
            correlation_skipped: false,
        });
    }
    if hs[0] < 2 {
        log::warn!("batch of one: rank-correlation term skipped");
        return Ok(VqaLoss {
            value: l1,
            l1,
            correlation_skipped: true,
        });
    }
    let value = match soft_spearman(g, y_hat, y, cfg.rank_temperature)? {
        Some(rho) => {
            let one_minus = {
                let neg = g.neg(rho)?;
                g.add_scalar(neg, 1.0)?
            };
            let corr = g.scale(one_minus, cfg.beta)?;
            g.add(l1, corr)?
        }
        None => g.add_scalar(l1, cfg.beta)?,
    };
    Ok(VqaLoss {
        value,
        l1,
        correlation_skipped: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn micro_cfg() -> VqaConfig {
        VqaConfig {
            spatial: SpatialEncoderConfig {
                stage_channels: vec![4, 8],
                bias: true,
            },
            temporal: TemporalEncoderConfig {
                layers: 2,
                heads: 2,
                ffn_dim: 6,
                eps: 1e-5,
            },
            ..VqaConfig::default()
        }
    }

    fn scalar(g: &Graph, v: Var) -> f64 {
        g.value(v).data()[0]
    }

    #[test]
    fn fusion_extremes() {
        let mut rng = RngState::new(1);
        let frame = Tensor::rand_uniform([3, 4, 5], 0.0, 1.0, &mut rng);
        let sal = Tensor::rand_uniform([4, 5], 0.0, 1.0, &mut rng);
        let mut g = Graph::new();
        let f = g.constant(frame.clone());
        let s = g.constant(sal.clone());
        let zero = fuse_frame(&mut g, f, s, 0.0).unwrap();
        assert_eq!(g.value(zero).data(), frame.data());
        let one = fuse_frame(&mut g, f, s, 1.0).unwrap();
        for c in 0..3 {
            for i in 0..4 {
                for j in 0..5 {
                    assert_eq!(g.value(one).get(&[c, i, j]), frame.get(&[c, i, j]) * sal.get(&[i, j]));
                }
            }
        }
        let half = fuse_frame(&mut g, f, s, 0.5).unwrap();
        let want = 0.5 * frame.get(&[1, 2, 3]) + 0.5 * frame.get(&[1, 2, 3]) * sal.get(&[2, 3]);
        assert!((g.value(half).get(&[1, 2, 3]) - want).abs() < 1e-15);
        let bad = g.constant(Tensor::zeros([4, 6]));
        assert!(fuse_frame(&mut g, f, bad, 0.5).is_err());
        assert!(fuse_frame(&mut g, f, s, 1.5).is_err());
    }

    #[test]
    fn positional_examples() {
        let p0 = positional_encoding(0, 6);
        assert_eq!(p0.data(), &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        let p1 = positional_encoding(1, 4);
        let want = [1f64.sin(), 1f64.cos(), 0.01f64.sin(), 0.01f64.cos()];
        for (a, b) in p1.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        for a in 0..8 {
            for b in a + 1..8 {
                assert_ne!(positional_encoding(a, 2), positional_encoding(b, 2));
            }
        }
    }

    #[test]
    fn spatial_features_shape_and_zero() {
        let mut cfg = micro_cfg();
        let model = VqaModel::new(cfg.clone(), &RngState::new(2)).unwrap();
        let mut g = Graph::new();
        let b = model.params.bind(&mut g, false);
        for (h, w) in [(8, 8), (5, 11)] {
            let x = g.constant(Tensor::ones([2, 3, h, w]));
            let f = spatial_features(&mut g, &b, &cfg.spatial, x).unwrap();
            assert_eq!(g.shape(f), &[2, 8]);
        }
        cfg.spatial.bias = false;
        let mut m = VqaModel::new(cfg.clone(), &RngState::new(2)).unwrap();
        for name in m.params.names() {
            m.params.get_mut(&name).unwrap().data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let mut g = Graph::new();
        let b = m.params.bind(&mut g, false);
        let x = g.constant(Tensor::ones([1, 3, 6, 6]));
        let f = spatial_features(&mut g, &b, &cfg.spatial, x).unwrap();
        assert!(g.value(f).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_temporal_weights_reduce_to_layernorm() {
        let cfg = micro_cfg();
        let mut m = VqaModel::new(cfg.clone(), &RngState::new(3)).unwrap();
        for name in m.params.names() {
            if name.starts_with("vqa.t") {
                m.params.get_mut(&name).unwrap().data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let x = Tensor::randn([3, 8], &mut RngState::new(4));
        let mut g = Graph::new();
        let b = m.params.bind(&mut g, false);
        let xv = g.constant(x);
        let y = temporal_encode(&mut g, &b, &cfg.temporal, xv).unwrap();
        let once = g.layernorm(xv, 1, cfg.temporal.eps).unwrap();
        let twice = g.layernorm(once, 1, cfg.temporal.eps).unwrap();
        assert!(g.value(y).max_abs_diff(g.value(twice)) < 1e-12);
    }

    #[test]
    fn output_rows_are_normalized() {
        let cfg = micro_cfg();
        let m = VqaModel::new(cfg.clone(), &RngState::new(5)).unwrap();
        let mut g = Graph::new();
        let b = m.params.bind(&mut g, false);
        let x = g.constant(Tensor::randn([4, 8], &mut RngState::new(6)));
        let y = temporal_encode(&mut g, &b, &cfg.temporal, x).unwrap();
        for row in g.value(y).data().chunks(8) {
            let mean = row.iter().sum::<f64>() / 8.0;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn regressor_bias_only() {
        let cfg = micro_cfg();
        let mut m = VqaModel::new(cfg, &RngState::new(7)).unwrap();
        m.params.get_mut("vqa.head.w").unwrap().data_mut().iter_mut().for_each(|v| *v = 0.0);
        m.params.get_mut("vqa.head.b").unwrap().data_mut()[0] = 3.25;
        let frames = Tensor::rand_uniform([3, 2, 8, 8], 0.0, 1.0, &mut RngState::new(8));
        let sal = Tensor::full([2, 8, 8], 0.5);
        assert_eq!(m.predict(&frames, Some(&sal)).unwrap(), 3.25);
        assert!(m.predict(&frames, None).is_err());
    }

    #[test]
    fn frame_permutation_changes_score() {
        let m = VqaModel::new(micro_cfg(), &RngState::new(9)).unwrap();
        let frames = Tensor::rand_uniform([3, 3, 8, 8], 0.0, 1.0, &mut RngState::new(10));
        let sal = Tensor::rand_uniform([3, 8, 8], 0.0, 1.0, &mut RngState::new(11));
        let perm = |t: &Tensor, axis: usize| {
            let parts: Vec<Tensor> = [2, 0, 1].iter().map(|&i| t.narrow(axis, i, 1).unwrap()).collect();
            let mut g = Graph::new();
            let vs: Vec<Var> = parts.into_iter().map(|p| g.constant(p)).collect();
            let c = g.concat(&vs, axis).unwrap();
            g.value(c).clone()
        };
        let a = m.predict(&frames, Some(&sal)).unwrap();
        let b = m.predict(&perm(&frames, 1), Some(&perm(&sal, 0))).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn loss_identities() {
        let mut g = Graph::new();
        let y = g.constant(Tensor::from_vec(vec![1.0, 4.0, 2.5, 3.0]));
        let l = vqa_loss(&mut g, y, y, &VqaLossConfig::default()).unwrap();
        assert_eq!(scalar(&g, l.value), 0.0);

        let one = g.constant(Tensor::from_vec(vec![2.0]));
        let t = g.constant(Tensor::from_vec(vec![3.0]));
        let l = vqa_loss(&mut g, one, t, &VqaLossConfig::default()).unwrap();
        assert!(l.correlation_skipped);
        assert_eq!(scalar(&g, l.value), 1.0);
    }

    #[test]
    fn hard_limit_reversed_ranking() {
        let mut g = Graph::new();
        let yh = g.constant(Tensor::from_vec(vec![3.0, 2.0, 1.0]));
        let y = g.constant(Tensor::from_vec(vec![1.0, 2.0, 3.0]));
        let cfg = VqaLossConfig {
            beta: 1.0,
            rank_temperature: 1e-4,
        };
        let l = vqa_loss(&mut g, yh, y, &cfg).unwrap();
        assert!((scalar(&g, l.l1) - 4.0 / 3.0).abs() < 1e-12);
        assert!((scalar(&g, l.value) - (4.0 / 3.0 + 2.0)).abs() < 1e-9);
    }

    #[test]
    fn parameter_shapes_cover_model() {
        let cfg = micro_cfg();
        let m = VqaModel::new(cfg.clone(), &RngState::new(0)).unwrap();
        assert_eq!(m.params.len(), cfg.parameter_shapes().len());
        assert!(VqaConfig {
            temporal: TemporalEncoderConfig { heads: 3, ..TemporalEncoderConfig::default() },
            ..cfg
        }
        .validate()
        .is_err());
    }
}
