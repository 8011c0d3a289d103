//! 3D encoder-decoder saliency network with bottleneck attention.
//!
//! Each encoder stage is a 3x3x3 convolution with ReLU whose output is kept
//! as a skip before 1x2x2 max pooling. The bottleneck block is gated by a
//! sigmoid attention map computed from the same encoder output. Decoder
//! stages upsample trilinearly to the matching skip extents, concatenate
//! the skip, and convolve; a 1x1x1 head with a sigmoid gives one map per frame.

use dagr_tensor::{Graph, PoolKind, RngState, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::params::{he_normal, Bound, ParamStore};
use crate::register_tokens::{augment_input, init_tokens, project_bound};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaliencyConfig {
    pub video_channels: usize,
    pub tokens: usize,
    pub token_dim: usize,
    pub stage_channels: Vec<usize>,
    pub bottleneck_channels: usize,
    pub attention_kernel: [usize; 3],
    pub skip_connections: bool,
}

impl Default for SaliencyConfig {
    fn default() -> Self {
        Self {
            video_channels: 3,
            tokens: 4,
            token_dim: 8,
            stage_channels: vec![16, 32],
            bottleneck_channels: 64,
            attention_kernel: [1, 1, 1],
            skip_connections: true,
        }
    }
}

impl SaliencyConfig {
    pub fn in_channels(&self) -> usize {
        self.video_channels + self.tokens
    }

    pub fn depth(&self) -> usize {
        self.stage_channels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.video_channels == 0 {
            return config_err("video_channels must be >= 1");
        }
        if self.tokens > 0 && self.token_dim == 0 {
            return config_err("token_dim must be >= 1 when tokens are enabled");
        }
        if self.stage_channels.len() < 2 {
            return config_err("saliency net needs at least two encoder stages");
        }
        if self.stage_channels[0] == 0
            || self.stage_channels.windows(2).any(|w| w[1] <= w[0])
        {
            return config_err(format!(
                "stage_channels {:?} must be strictly increasing",
                self.stage_channels
            ));
        }
        if self.bottleneck_channels == 0 {
            return config_err("bottleneck_channels must be >= 1");
        }
        if self.attention_kernel.iter().any(|&k| k == 0 || k % 2 == 0) {
            return config_err(format!(
                "attention_kernel {:?} must be odd",
                self.attention_kernel
            ));
        }
        Ok(())
    }

    /// Smallest `H` and `W` the pooling chain accepts.
    pub fn min_spatial(&self) -> usize {
        1 << self.depth()
    }

    /// Parameter names and shapes, in the order they are created.
    pub fn parameter_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        if self.tokens > 0 {
            out.push(("reg.R".into(), vec![1, self.tokens, self.token_dim, 1, 1]));
            out.push(("reg.proj_w".into(), vec![self.tokens, self.token_dim, 1, 1, 1]));
            out.push(("reg.proj_b".into(), vec![self.tokens]));
        }
        let mut prev = self.in_channels();
        for (i, &c) in self.stage_channels.iter().enumerate() {
            out.push((format!("sal.enc{i}.w"), vec![c, prev, 3, 3, 3]));
            out.push((format!("sal.enc{i}.b"), vec![c]));
            prev = c;
        }
        let bc = self.bottleneck_channels;
        out.push(("sal.bottleneck.w".into(), vec![bc, prev, 3, 3, 3]));
        out.push(("sal.bottleneck.b".into(), vec![bc]));
        let [ka, kb, kc] = self.attention_kernel;
        out.push(("sal.attn.w".into(), vec![bc, prev, ka, kb, kc]));
        out.push(("sal.attn.b".into(), vec![bc]));
        let mut up = bc;
        for (i, &c) in self.stage_channels.iter().enumerate().rev() {
            let cin = up + if self.skip_connections { c } else { 0 };
            out.push((format!("sal.dec{i}.w"), vec![c, cin, 3, 3, 3]));
            out.push((format!("sal.dec{i}.b"), vec![c]));
            up = c;
        }
        out.push(("sal.head.w".into(), vec![1, up, 1, 1, 1]));
        out.push(("sal.head.b".into(), vec![1]));
        out
    }
}

/// Per-frame map in `[0, 1]`, shape `[B, 1, T, H, W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    pub values: Tensor,
    pub normalized: bool,
}

impl SaliencyMap {
    pub fn normalize(&self, eps: f64) -> Result<SaliencyMap> {
        Ok(SaliencyMap {
            values: crate::objectives::normalize_map(&self.values, eps)?,
            normalized: true,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SaliencyNet {
    pub cfg: SaliencyConfig,
    pub params: ParamStore,
}

/// Intermediate handles of one forward pass.
#[derive(Clone, Debug)]
pub struct SaliencyForward {
    pub map: Var,
    pub attention: Var,
    pub z: Var,
}

fn conv_block(g: &mut Graph, bound: &Bound, prefix: &str, x: Var, pad: [usize; 3]) -> Result<Var> {
    let w = bound.get(&format!("{prefix}.w"))?;
    let b = bound.get(&format!("{prefix}.b"))?;
    Ok(g.conv3d(x, w, Some(b), [1, 1, 1], pad)?)
}

/// Encoder `E`. Returns the pooled deepest features and the per-stage
/// activations taken before pooling.
pub fn encode(
    g: &mut Graph,
    bound: &Bound,
    cfg: &SaliencyConfig,
    aug: Var,
) -> Result<(Var, Vec<Var>)> {
    let s = g.shape(aug).to_vec();
    if s.len() != 5 || s[1] != cfg.in_channels() {
        return Err(Error::Config(format!(
            "encoder input {s:?}, expected [B,{},T,H,W]",
            cfg.in_channels()
        )));
    }
    let min = cfg.min_spatial();
    if s[3] < min || s[4] < min {
        return Err(Error::Config(format!(
            "spatial extents {}x{} below {min}x{min} required by {} pooling stages",
            s[3],
            s[4],
            cfg.depth()
        )));
    }
    let mut x = aug;
    let mut skips = Vec::with_capacity(cfg.depth());
    for i in 0..cfg.depth() {
        let c = conv_block(g, bound, &format!("sal.enc{i}"), x, [1, 1, 1])?;
        let a = g.relu(c)?;
        skips.push(a);
        x = g.pool(a, PoolKind::Max, &[1, 2, 2], &[1, 2, 2])?;
    }
    Ok((x, skips))
}

/// Bottleneck block `B` gated by `A = sigmoid(conv(Z))`. Returns `(Z', A)`.
pub fn bottleneck_attention(g: &mut Graph, bound: &Bound, cfg: &SaliencyConfig, z: Var) -> Result<(Var, Var)> {
    let bz = conv_block(g, bound, "sal.bottleneck", z, [1, 1, 1])?;
    let bz = g.relu(bz)?;
    let k = cfg.attention_kernel;
    let logits = conv_block(g, bound, "sal.attn", z, [k[0] / 2, k[1] / 2, k[2] / 2])?;
    let a = g.sigmoid(logits)?;
    let zp = g.mul(bz, a)?;
    Ok((zp, a))
}

/// Decoder `D`, ending in a sigmoid map `[B, 1, T, H, W]`.
pub fn decode(g: &mut Graph, bound: &Bound, cfg: &SaliencyConfig, zp: Var, skips: &[Var]) -> Result<Var> {
    if skips.len() != cfg.depth() {
        return Err(Error::Config(format!(
            "{} skips for {} encoder stages",
            skips.len(),
            cfg.depth()
        )));
    }
    let mut x = zp;
    for i in (0..cfg.depth()).rev() {
        let ss = g.shape(skips[i]).to_vec();
        if ss.len() != 5 || ss[1] != cfg.stage_channels[i] {
            return Err(Error::Config(format!(
                "skip {i} has shape {ss:?}, expected {} channels",
                cfg.stage_channels[i]
            )));
        }
        x = g.upsample_trilinear(x, [ss[2], ss[3], ss[4]])?;
        if cfg.skip_connections {
            x = g.concat(&[x, skips[i]], 1)?;
        }
        let c = conv_block(g, bound, &format!("sal.dec{i}"), x, [1, 1, 1])?;
        x = g.relu(c)?;
    }
    let head = conv_block(g, bound, "sal.head", x, [0, 0, 0])?;
    Ok(g.sigmoid(head)?)
}

impl SaliencyNet {
    pub fn new(cfg: SaliencyConfig, rng: &RngState) -> Result<Self> {
        cfg.validate()?;
        let mut params = ParamStore::new();
        if cfg.tokens > 0 {
            init_tokens(cfg.tokens, cfg.token_dim, rng)?.insert_into(&mut params);
        }
        for (name, shape) in cfg.parameter_shapes() {
            if name.starts_with("reg.") {
                continue;
            }
            let t = if name.ends_with(".b") {
                Tensor::zeros(shape)
            } else {
                let fan_in = shape[1..].iter().product();
                he_normal(&shape, fan_in, rng, &name)
            };
            params.insert(name, t);
        }
        Ok(Self { cfg, params })
    }

    pub fn from_params(cfg: SaliencyConfig, params: ParamStore) -> Result<Self> {
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

    /// Full pass: token augmentation, encoder, attention, decoder.
    /// `video` is `[B, C, T, H, W]`.
    pub fn forward(&self, g: &mut Graph, bound: &Bound, video: Var) -> Result<SaliencyForward> {
        let vs = g.shape(video).to_vec();
        if vs.len() != 5 || vs[1] != self.cfg.video_channels {
            return Err(Error::Config(format!(
                "video {vs:?}, expected [B,{},T,H,W]",
                self.cfg.video_channels
            )));
        }
        let projected = if self.cfg.tokens > 0 {
            Some(project_bound(g, bound, vs[2], vs[3], vs[4])?)
        } else {
            None
        };
        let aug = augment_input(g, video, projected)?;
        let (z, skips) = encode(g, bound, &self.cfg, aug)?;
        let (zp, attention) = bottleneck_attention(g, bound, &self.cfg, z)?;
        let map = decode(g, bound, &self.cfg, zp, &skips)?;
        Ok(SaliencyForward { map, attention, z })
    }

    /// Gradient-free prediction. Accepts `[C,T,H,W]` or `[B,C,T,H,W]` and
    /// returns `[B,1,T,H,W]`.
    pub fn predict(&self, video: &Tensor) -> Result<SaliencyMap> {
        let v = match video.ndim() {
            4 => {
                let mut s = vec![1];
                s.extend_from_slice(video.shape());
                video.clone().reshape(s)?
            }
            5 => video.clone(),
            n => return config_err(format!("video rank {n} not 4 or 5")),
        };
        let mut g = Graph::new();
        let bound = self.params.bind(&mut g, false);
        let x = g.constant(v);
        let out = self.forward(&mut g, &bound, x)?;
        Ok(SaliencyMap {
            values: g.value(out.map).clone(),
            normalized: false,
        })
    }
}
