//! Clips, frame sampling, synthetic data, on-disk datasets and checkpoints.

pub mod checkpoint;
pub mod dataset;
pub mod sampling;
pub mod synthetic;

use dagr_tensor::Tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use sampling::{resize_clip, resize_frame, sample_frames};
pub use synthetic::{generate_synthetic, SaliencySample, SyntheticData, SyntheticSpec};

pub const SALIENCY_FRAMES: usize = 60;
pub const VQA_FRAMES: usize = 8;
pub const FRAME_HEIGHT: usize = 224;
pub const FRAME_WIDTH: usize = 398;

/// Frames `[C, T, H, W]` in `[0, 1]` plus where they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoClip {
    pub frames: Tensor,
    pub source_id: String,
    pub frame_indices: Vec<usize>,
    pub mos: Option<f64>,
}

impl VideoClip {
    pub fn num_frames(&self) -> usize {
        self.frames.shape()[1]
    }

    pub fn height(&self) -> usize {
        self.frames.shape()[2]
    }

    pub fn width(&self) -> usize {
        self.frames.shape()[3]
    }

    /// `[1, C, T, H, W]` view for the saliency network.
    pub fn batched(&self) -> Tensor {
        let mut s = vec![1];
        s.extend_from_slice(self.frames.shape());
        self.frames.clone().reshape(s).expect("same element count")
    }
}
