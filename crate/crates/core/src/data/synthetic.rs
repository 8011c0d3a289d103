//! Seeded synthetic videos: a Gaussian blob drifting over a smooth
//! background. The blob density is the ground-truth saliency and the pixel
//! nearest its centre is the fixation. Quality-labelled copies add Gaussian
//! pixel noise whose level sets the opinion score.

use dagr_tensor::{RngState, Tensor};
use serde::{Deserialize, Serialize};

use super::sampling::sample_frames;
use super::VideoClip;
use crate::error::{config_err, Result};

pub const MOS_MAX: f64 = 5.0;
pub const MOS_MIN: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub num_videos: usize,
    pub frames_per_video: usize,
    pub source_length: usize,
    pub height: usize,
    pub width: usize,
    /// Blob standard deviation in pixels.
    pub blob_sigma: f64,
    /// Largest blob speed in pixels per source frame.
    pub max_speed: f64,
    /// Noise level of the worst grade.
    pub sigma_max: f64,
    /// Number of distinct noise grades; 0 gives every video its own grade.
    pub grades: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            num_videos: 16,
            frames_per_video: 8,
            source_length: 48,
            height: 16,
            width: 16,
            blob_sigma: 2.0,
            max_speed: 0.4,
            sigma_max: 0.25,
            grades: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_videos == 0 || self.frames_per_video == 0 || self.source_length == 0 {
            return config_err("synthetic spec needs videos, frames and a source length");
        }
        if self.height < 2 || self.width < 2 {
            return config_err("synthetic frames must be at least 2x2");
        }
        if !(self.blob_sigma > 0.0) || !(self.sigma_max > 0.0) || !(self.max_speed >= 0.0) {
            return config_err("blob_sigma and sigma_max must be positive, max_speed non-negative");
        }
        Ok(())
    }

    pub fn grade_count(&self) -> usize {
        if self.grades == 0 {
            self.num_videos
        } else {
            self.grades
        }
    }

    /// Noise level of grade `g`, from 0 up to `sigma_max`.
    pub fn grade_sigma(&self, g: usize) -> f64 {
        let n = self.grade_count();
        if n <= 1 {
            0.0
        } else {
            self.sigma_max * g as f64 / (n - 1) as f64
        }
    }

    /// Opinion score for noise level `sigma`: 5 at zero noise, 1 at `sigma_max`.
    pub fn mos_for(&self, sigma: f64) -> f64 {
        MOS_MAX - (MOS_MAX - MOS_MIN) * sigma / self.sigma_max
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaliencySample {
    pub clip: VideoClip,
    /// Ground-truth density `[T, H, W]`, peak 1 at the blob centre.
    pub saliency: Tensor,
    /// Binary fixation map `[T, H, W]`, one fixation per frame.
    pub fixations: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub saliency: Vec<SaliencySample>,
    pub quality: Vec<VideoClip>,
    /// Noise level of each quality clip.
    pub noise: Vec<f64>,
}

fn reflect(p: f64, hi: f64) -> f64 {
    if hi <= 0.0 {
        return 0.0;
    }
    let period = 2.0 * hi;
    let m = p.rem_euclid(period);
    if m > hi {
        period - m
    } else {
        m
    }
}

struct Scene {
    start: [f64; 2],
    velocity: [f64; 2],
    blob_color: [f64; 3],
    base: [f64; 3],
    amp: [f64; 3],
    freq: [f64; 2],
    phase: f64,
}

impl Scene {
    fn draw(spec: &SyntheticSpec, rng: &mut RngState) -> Self {
        let (h, w) = ((spec.height - 1) as f64, (spec.width - 1) as f64);
        let angle = 2.0 * std::f64::consts::PI * rng.uniform();
        let speed = spec.max_speed * (0.5 + 0.5 * rng.uniform());
        let mut c3 = |lo: f64, hi: f64| [0, 1, 2].map(|_| lo + (hi - lo) * rng.uniform());
        let blob_color = c3(0.75, 1.0);
        let base = c3(0.15, 0.35);
        let amp = c3(0.02, 0.1);
        Scene {
            start: [h * (0.2 + 0.6 * rng.uniform()), w * (0.2 + 0.6 * rng.uniform())],
            velocity: [speed * angle.sin(), speed * angle.cos()],
            blob_color,
            base,
            amp,
            freq: [
                std::f64::consts::PI * rng.uniform() / spec.height as f64,
                std::f64::consts::PI * rng.uniform() / spec.width as f64,
            ],
            phase: 2.0 * std::f64::consts::PI * rng.uniform(),
        }
    }

    fn centre(&self, spec: &SyntheticSpec, t: usize) -> [f64; 2] {
        let (h, w) = ((spec.height - 1) as f64, (spec.width - 1) as f64);
        [
            reflect(self.start[0] + self.velocity[0] * t as f64, h),
            reflect(self.start[1] + self.velocity[1] * t as f64, w),
        ]
    }
}

/// Renders frames `[3,T,H,W]`, density `[T,H,W]` and fixations `[T,H,W]`.
fn render(spec: &SyntheticSpec, scene: &Scene, indices: &[usize]) -> (Tensor, Tensor, Tensor) {
    let (h, w, t) = (spec.height, spec.width, indices.len());
    let plane = h * w;
    let mut frames = vec![0.0; 3 * t * plane];
    let mut density = vec![0.0; t * plane];
    let mut fix = vec![0.0; t * plane];
    let inv = 1.0 / (2.0 * spec.blob_sigma * spec.blob_sigma);
    for (ti, &src) in indices.iter().enumerate() {
        let [cy, cx] = scene.centre(spec, src);
        for y in 0..h {
            for x in 0..w {
                let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                let gval = (-d2 * inv).exp();
                density[ti * plane + y * w + x] = gval;
                let wave = (scene.freq[0] * y as f64 + scene.freq[1] * x as f64 + scene.phase).cos();
                for c in 0..3 {
                    let bg = scene.base[c] + scene.amp[c] * wave;
                    let v = bg * (1.0 - gval) + scene.blob_color[c] * gval;
                    frames[((c * t + ti) * h + y) * w + x] = v.clamp(0.0, 1.0);
                }
            }
        }
        let fy = (cy.round() as usize).min(h - 1);
        let fx = (cx.round() as usize).min(w - 1);
        fix[ti * plane + fy * w + fx] = 1.0;
    }
    (
        Tensor::new([3, t, h, w], frames).expect("frame shape"),
        Tensor::new([t, h, w], density).expect("density shape"),
        Tensor::new([t, h, w], fix).expect("fixation shape"),
    )
}

pub fn video_id(i: usize) -> String {
    format!("vid{i:04}")
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let root = RngState::new(spec.seed);
    let indices = sample_frames(spec.source_length, spec.frames_per_video)?;

    let mut order: Vec<usize> = (0..spec.num_videos).collect();
    root.fork(u64::MAX).shuffle(&mut order);

    let mut data = SyntheticData {
        saliency: Vec::with_capacity(spec.num_videos),
        quality: Vec::with_capacity(spec.num_videos),
        noise: Vec::with_capacity(spec.num_videos),
    };
    for i in 0..spec.num_videos {
        let mut rng = root.fork(i as u64);
        let scene = Scene::draw(spec, &mut rng);
        let (frames, density, fix) = render(spec, &scene, &indices);
        let id = video_id(i);

        let sigma = spec.grade_sigma(order[i] % spec.grade_count());
        let mut noise_rng = root.fork(1_000_000 + i as u64);
        let noisy = frames.map(|v| (v + sigma * noise_rng.normal()).clamp(0.0, 1.0));

        data.quality.push(VideoClip {
            frames: noisy,
            source_id: id.clone(),
            frame_indices: indices.clone(),
            mos: Some(spec.mos_for(sigma)),
        });
        data.noise.push(sigma);
        data.saliency.push(SaliencySample {
            clip: VideoClip {
                frames,
                source_id: id,
                frame_indices: indices.clone(),
                mos: None,
            },
            saliency: density,
            fixations: fix,
        });
    }
    Ok(data)
}
