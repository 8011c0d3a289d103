//! Small configurations sized for a laptop CPU.

use crate::data::SyntheticSpec;
use crate::saliency::SaliencyConfig;
use crate::train::{SaliencyTrainConfig, VqaTrainConfig};
use crate::vqa::{SpatialEncoderConfig, TemporalEncoderConfig, VqaConfig};

/// Four short clips for the saliency overfit.
pub fn saliency_overfit_data() -> SyntheticSpec {
    SyntheticSpec {
        num_videos: 4,
        frames_per_video: 4,
        height: 16,
        width: 16,
        ..SyntheticSpec::default()
    }
}

pub fn saliency_model() -> SaliencyConfig {
    SaliencyConfig {
        tokens: 4,
        token_dim: 8,
        stage_channels: vec![4, 8],
        bottleneck_channels: 16,
        ..SaliencyConfig::default()
    }
}

/// One full batch per iteration.
pub fn saliency_overfit() -> SaliencyTrainConfig {
    SaliencyTrainConfig {
        model: saliency_model(),
        lr: 5e-3,
        batch_size: 4,
        epochs: 500,
        ..SaliencyTrainConfig::default()
    }
}

/// Sixteen labelled clips.
pub fn vqa_overfit_data() -> SyntheticSpec {
    SyntheticSpec::default()
}

pub fn vqa_model() -> VqaConfig {
    VqaConfig {
        spatial: SpatialEncoderConfig {
            stage_channels: vec![8, 8, 16, 16],
            ..SpatialEncoderConfig::default()
        },
        temporal: TemporalEncoderConfig::default(),
        ..VqaConfig::default()
    }
}

pub fn vqa_overfit() -> VqaTrainConfig {
    VqaTrainConfig {
        model: vqa_model(),
        lr: 3e-3,
        min_lr: 1e-4,
        batch_size: 8,
        epochs: 60,
        ..VqaTrainConfig::default()
    }
}
