//! Closed-form cost models.
//!
//! Convention: one multiply-accumulate counts as one FLOP, activations and
//! normalization are free, and results are reported in GFLOPs (1e9).
//! Every model is linear in `d`.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Width of the backbone's last stage.
pub const RESNET50_DIM: usize = 2048;
/// Hidden width of the ViT-Base style encoders.
pub const VIT_BASE_DIM: usize = 768;
pub const VIT_PATCH: usize = 16;
pub const VIT_LAYERS: usize = 12;
pub const VIVIT_TEMPORAL_LAYERS: usize = 4;
pub const TEMPORAL_LAYERS: usize = 2;
/// Cost of one fragment-token at `d = 1` for the grid-sampling model, taken
/// from its published 279 GFLOPs at `G_f = 7`, `T = 8`, `d = 768`.
pub const FRAGMENT_TOKEN_COST: f64 = 279.0e9 / (8.0 * 49.0 * 768.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    Dagr,
    Vivit,
    Fastvqa,
    FastvqaM,
}

impl CostModel {
    pub const ALL: [CostModel; 4] = [CostModel::Dagr, CostModel::Vivit, CostModel::Fastvqa, CostModel::FastvqaM];

    pub fn name(self) -> &'static str {
        match self {
            CostModel::Dagr => "dagr",
            CostModel::Vivit => "vivit",
            CostModel::Fastvqa => "fastvqa",
            CostModel::FastvqaM => "fastvqa_m",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    /// The configuration each model is usually quoted at.
    pub fn default_config(self) -> CostModelConfig {
        match self {
            CostModel::Dagr => CostModelConfig {
                frames: 8,
                height: 224,
                width: 398,
                d: RESNET50_DIM,
                g_f: 7,
            },
            CostModel::Vivit => CostModelConfig {
                frames: 8,
                height: 224,
                width: 224,
                d: VIT_BASE_DIM,
                g_f: 7,
            },
            CostModel::Fastvqa => CostModelConfig {
                frames: 8,
                height: 224,
                width: 224,
                d: VIT_BASE_DIM,
                g_f: 7,
            },
            CostModel::FastvqaM => CostModelConfig {
                frames: 8,
                height: 224,
                width: 224,
                d: VIT_BASE_DIM,
                g_f: 4,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModelConfig {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub d: usize,
    pub g_f: usize,
}

impl CostModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.height == 0 || self.width == 0 || self.d == 0 || self.g_f == 0 {
            return config_err("cost model config fields must be positive");
        }
        Ok(())
    }

    /// Spatial positions per frame.
    pub fn tokens(&self) -> usize {
        self.height * self.width
    }
}

fn conv_out(n: usize, k: usize, s: usize, p: usize) -> usize {
    (n + 2 * p - k) / s + 1
}

/// Multiply-accumulates of the ResNet-50 convolutional trunk (no classifier)
/// on one `h x w` RGB image.
pub fn resnet50_macs(h: usize, w: usize) -> f64 {
    let mut macs = 0.0;
    let mut conv = |h: &mut usize, w: &mut usize, cin: usize, cout: usize, k: usize, s: usize| {
        let p = k / 2;
        *h = conv_out(*h, k, s, p);
        *w = conv_out(*w, k, s, p);
        macs += (*h * *w * cin * cout * k * k) as f64;
    };
    let (mut h, mut w) = (h, w);
    conv(&mut h, &mut w, 3, 64, 7, 2);
    h = conv_out(h, 3, 2, 1);
    w = conv_out(w, 3, 2, 1);
    let mut cin = 64;
    for (stage, &blocks) in [3usize, 4, 6, 3].iter().enumerate() {
        let width = 64 << stage;
        let cout = width * 4;
        for b in 0..blocks {
            let stride = if b == 0 && stage > 0 { 2 } else { 1 };
            let (mut h1, mut w1) = (h, w);
            conv(&mut h1, &mut w1, cin, width, 1, 1);
            conv(&mut h1, &mut w1, width, width, 3, stride);
            conv(&mut h1, &mut w1, width, cout, 1, 1);
            if b == 0 {
                let (mut hs, mut ws) = (h, w);
                conv(&mut hs, &mut ws, cin, cout, 1, stride);
            }
            h = h1;
            w = w1;
            cin = cout;
        }
    }
    macs
}

/// Per-position, per-channel backbone cost, calibrated once on a 224x224
/// frame so the spatial term reads `kappa * T * N * d`.
pub fn backbone_kappa() -> f64 {
    resnet50_macs(224, 224) / (224.0 * 224.0 * RESNET50_DIM as f64)
}

/// Convolutional trunk over every frame plus the temporal encoder over `T`
/// frame tokens.
pub fn dagr_flops(cfg: &CostModelConfig) -> f64 {
    let (t, n, d) = (cfg.frames as f64, cfg.tokens() as f64, cfg.d as f64);
    let spatial = backbone_kappa() * t * n * d;
    let temporal = 2.0 * TEMPORAL_LAYERS as f64 * t * t * d;
    spatial + temporal
}

/// Encoder layer cost for `s` tokens: the QK and AV products plus the four
/// projections and a 4x MLP, each `d_ref x d`.
fn encoder_layer(s: f64, d: f64) -> f64 {
    2.0 * s * s * d + 12.0 * VIT_BASE_DIM as f64 * s * d
}

/// Factorised encoder: spatial encoder per frame on 16x16 patches, then a
/// temporal encoder over the frame tokens.
pub fn vivit_flops(cfg: &CostModelConfig) -> f64 {
    let (t, d) = (cfg.frames as f64, cfg.d as f64);
    let n = ((cfg.height / VIT_PATCH) * (cfg.width / VIT_PATCH)) as f64;
    let embed = t * n * (3 * VIT_PATCH * VIT_PATCH) as f64 * d;
    let spatial = VIT_LAYERS as f64 * t * encoder_layer(n, d);
    let temporal = VIVIT_TEMPORAL_LAYERS as f64 * encoder_layer(t, d);
    embed + spatial + temporal
}

pub fn fastvqa_flops(cfg: &CostModelConfig) -> f64 {
    let g = cfg.g_f as f64;
    FRAGMENT_TOKEN_COST * cfg.frames as f64 * g * g * cfg.d as f64
}

/// The lightweight variant also halves the temporal sampling.
pub fn fastvqa_m_flops(cfg: &CostModelConfig) -> f64 {
    let g = cfg.g_f as f64;
    FRAGMENT_TOKEN_COST * (cfg.frames as f64 / 2.0) * g * g * cfg.d as f64
}

/// Estimated GFLOPs of `model` at `cfg`.
pub fn flops_estimate(model: CostModel, cfg: &CostModelConfig) -> Result<f64> {
    cfg.validate()?;
    let f = match model {
        CostModel::Dagr => dagr_flops(cfg),
        CostModel::Vivit => vivit_flops(cfg),
        CostModel::Fastvqa => fastvqa_flops(cfg),
        CostModel::FastvqaM => fastvqa_m_flops(cfg),
    };
    Ok(f / 1e9)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlopsRow {
    pub model: String,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub d: usize,
    pub g_f: usize,
    pub gflops: f64,
}

/// All four models at their default configurations.
pub fn flops_table() -> Vec<FlopsRow> {
    CostModel::ALL
        .into_iter()
        .map(|m| {
            let c = m.default_config();
            FlopsRow {
                model: m.name().to_string(),
                frames: c.frames,
                height: c.height,
                width: c.width,
                d: c.d,
                g_f: c.g_f,
                gflops: flops_estimate(m, &c).expect("defaults are valid"),
            }
        })
        .collect()
}

/// Transformer over full frames versus the convolutional pipeline at its
/// own resolution.
pub fn vivit_dagr_ratio() -> f64 {
    let v = flops_estimate(CostModel::Vivit, &CostModel::Vivit.default_config()).expect("valid");
    let d = flops_estimate(CostModel::Dagr, &CostModel::Dagr.default_config()).expect("valid");
    v / d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resnet50_trunk_is_about_four_gmacs() {
        let m = resnet50_macs(224, 224) / 1e9;
        assert!((m - 4.09).abs() < 0.05, "{m}");
    }

    #[test]
    fn linear_in_d_and_quadratic_attention() {
        for model in CostModel::ALL {
            let c = model.default_config();
            let c2 = CostModelConfig { d: c.d * 3, ..c };
            let (a, b) = (flops_estimate(model, &c).unwrap(), flops_estimate(model, &c2).unwrap());
            assert!((b / a - 3.0).abs() < 1e-12, "{model:?}");
        }
        let c = CostModel::Dagr.default_config();
        let attn = |t: usize| {
            let c = CostModelConfig { frames: t, ..c };
            dagr_flops(&c) - backbone_kappa() * (t * c.tokens() * c.d) as f64
        };
        assert!((attn(16) / attn(8) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn zero_field_is_rejected() {
        let c = CostModelConfig { g_f: 0, ..CostModel::Fastvqa.default_config() };
        assert!(flops_estimate(CostModel::Fastvqa, &c).is_err());
    }
}
