//! Training loops for the saliency network and the quality pipeline.
//!
//! Both loops are single-threaded and draw batch order from the seed alone,
//! so a fixed `(config, seed)` yields bit-identical parameters.

use dagr_tensor::{Graph, RngState, Tensor};
use serde::{Deserialize, Serialize};

use crate::data::{SaliencySample, VideoClip};
use crate::error::{config_err, Error, Result};
use crate::eval::stats::{plcc, srcc};
use crate::objectives::{saliency_loss, SaliencyLossConfig};
use crate::params::{Adam, CosineSchedule};
use crate::saliency::{SaliencyConfig, SaliencyNet};
use crate::vqa::{infer_saliency_for_vqa, vqa_loss, VqaConfig, VqaLossConfig, VqaModel};

pub const SALIENCY_LR: f64 = 5e-3;
pub const SALIENCY_BATCH: usize = 4;
pub const SALIENCY_EPOCHS: usize = 180;
pub const VQA_LR: f64 = 1e-5;
pub const VQA_BATCH: usize = 5;
pub const VQA_EPOCHS: usize = 300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaliencyTrainConfig {
    pub model: SaliencyConfig,
    pub loss: SaliencyLossConfig,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SaliencyTrainConfig {
    fn default() -> Self {
        Self {
            model: SaliencyConfig::default(),
            loss: SaliencyLossConfig::default(),
            lr: SALIENCY_LR,
            batch_size: SALIENCY_BATCH,
            epochs: SALIENCY_EPOCHS,
            seed: 0,
        }
    }
}

impl SaliencyTrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.loss.validate()?;
        if !(self.lr > 0.0) || self.batch_size == 0 || self.epochs == 0 {
            return config_err("lr, batch_size and epochs must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaliencyEpoch {
    pub epoch: usize,
    pub kl: f64,
    pub cc: f64,
    pub total: f64,
    /// Batches left out because a predicted frame was constant.
    pub skipped: usize,
}

#[derive(Clone, Debug)]
pub struct TrainedSaliency {
    pub net: SaliencyNet,
    pub history: Vec<SaliencyEpoch>,
}

/// Seeded permutation of `0..n` cut into batches.
fn epoch_batches(n: usize, batch: usize, rng: &RngState, epoch: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.fork(epoch as u64).shuffle(&mut order);
    order.chunks(batch).map(<[usize]>::to_vec).collect()
}

fn stack(parts: &[&Tensor], lead: &[usize]) -> Result<Tensor> {
    let first = parts.first().ok_or_else(|| Error::Config("empty batch".into()))?;
    let mut data = Vec::with_capacity(first.numel() * parts.len());
    for p in parts {
        if p.shape() != first.shape() {
            return config_err(format!("batch mixes shapes {:?} and {:?}", first.shape(), p.shape()));
        }
        data.extend_from_slice(p.data());
    }
    let mut shape = lead.to_vec();
    shape.extend_from_slice(first.shape());
    Ok(Tensor::new(shape, data)?)
}

pub fn train_saliency(samples: &[SaliencySample], cfg: &SaliencyTrainConfig) -> Result<TrainedSaliency> {
    cfg.validate()?;
    if samples.is_empty() {
        return config_err("no saliency training samples");
    }
    let root = RngState::new(cfg.seed);
    let mut net = SaliencyNet::new(cfg.model.clone(), &root.fork(0))?;
    let order_rng = root.fork(1);
    let mut adam = Adam::new();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (mut kl, mut cc, mut total, mut count) = (0.0, 0.0, 0.0, 0.0);
        let mut skipped = 0;
        for batch in epoch_batches(samples.len(), cfg.batch_size, &order_rng, epoch) {
            let b = batch.len();
            let videos: Vec<&Tensor> = batch.iter().map(|&i| &samples[i].clip.frames).collect();
            let targets: Vec<&Tensor> = batch.iter().map(|&i| &samples[i].saliency).collect();
            let video = stack(&videos, &[b])?;
            let target = stack(&targets, &[b])?;

            let mut g = Graph::new();
            let bound = net.params.bind(&mut g, true);
            let v = g.constant(video);
            let out = net.forward(&mut g, &bound, v)?;
            let ts = target.shape().to_vec();
            let pred = g.reshape(out.map, ts)?;
            let s = g.constant(target);
            let terms = match saliency_loss(&mut g, s, pred, &cfg.loss) {
                Ok(t) => t,
                Err(Error::Degenerate(msg)) if msg.starts_with("predicted") => {
                    log::warn!("saliency epoch {epoch}: skipping batch, {msg}");
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let w = b as f64;
            kl += w * g.value(terms.kl).item()?;
            cc += w * g.value(terms.cc).item()?;
            total += w * g.value(terms.total).item()?;
            count += w;
            let mut grads = g.backward(terms.total)?;
            let grads = bound.collect(&g, &mut grads);
            adam.step(&mut net.params, &grads, cfg.lr)?;
        }
        if count == 0.0 {
            return Err(Error::Degenerate(format!(
                "saliency epoch {epoch}: every batch predicted a constant frame"
            )));
        }
        let row = SaliencyEpoch {
            epoch,
            kl: kl / count,
            cc: cc / count,
            total: total / count,
            skipped,
        };
        log::debug!("saliency epoch {epoch}: total {:.5}", row.total);
        history.push(row);
    }
    Ok(TrainedSaliency { net, history })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VqaTrainConfig {
    pub model: VqaConfig,
    pub loss: VqaLossConfig,
    pub lr: f64,
    pub min_lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Start the regressor bias at the mean training score.
    pub init_bias_to_mean: bool,
    pub seed: u64,
}

impl Default for VqaTrainConfig {
    fn default() -> Self {
        Self {
            model: VqaConfig::default(),
            loss: VqaLossConfig::default(),
            lr: VQA_LR,
            min_lr: 0.0,
            batch_size: VQA_BATCH,
            epochs: VQA_EPOCHS,
            init_bias_to_mean: true,
            seed: 0,
        }
    }
}

impl VqaTrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.loss.validate()?;
        if !(self.lr > 0.0) || !(self.min_lr >= 0.0) || self.min_lr > self.lr {
            return config_err(format!("need 0 <= min_lr {} <= lr {}", self.min_lr, self.lr));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return config_err("batch_size and epochs must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqaEpoch {
    pub epoch: usize,
    pub loss: f64,
    pub l1: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub video_id: String,
    pub mos: f64,
    pub predicted: f64,
}

#[derive(Clone, Debug)]
pub struct TrainedVqa {
    pub model: VqaModel,
    pub history: Vec<VqaEpoch>,
}

/// A clip ready for the quality model: frames, frozen saliency and label.
#[derive(Clone, Debug)]
pub struct PreparedClip {
    pub video_id: String,
    pub frames: Tensor,
    pub saliency: Option<Tensor>,
    pub mos: f64,
}

/// Runs the frozen saliency network once per clip. `net = None` leaves the
/// saliency slot empty for models that do not fuse it.
pub fn prepare_clips(clips: &[VideoClip], net: Option<&SaliencyNet>) -> Result<Vec<PreparedClip>> {
    clips
        .iter()
        .map(|c| {
            let mos = c
                .mos
                .ok_or_else(|| Error::Config(format!("clip {} has no MOS label", c.source_id)))?;
            let saliency = net.map(|n| infer_saliency_for_vqa(&c.frames, n)).transpose()?;
            Ok(PreparedClip {
                video_id: c.source_id.clone(),
                frames: c.frames.clone(),
                saliency,
                mos,
            })
        })
        .collect()
}

pub fn train_vqa(clips: &[PreparedClip], cfg: &VqaTrainConfig) -> Result<TrainedVqa> {
    cfg.validate()?;
    if clips.is_empty() {
        return config_err("no quality training clips");
    }
    let root = RngState::new(cfg.seed);
    let mut model = VqaModel::new(cfg.model.clone(), &root.fork(0))?;
    if cfg.init_bias_to_mean {
        let mean = clips.iter().map(|c| c.mos).sum::<f64>() / clips.len() as f64;
        *model.params.get_mut("vqa.head.b")? = Tensor::from_vec(vec![mean]);
    }
    let order_rng = root.fork(1);
    let steps_per_epoch = clips.len().div_ceil(cfg.batch_size);
    let schedule = CosineSchedule {
        base_lr: cfg.lr,
        min_lr: cfg.min_lr,
        total_steps: steps_per_epoch * cfg.epochs,
    };
    let mut adam = Adam::new();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let (mut loss_sum, mut l1_sum, mut count) = (0.0, 0.0, 0.0);
        let lr_epoch = schedule.lr_at(step);
        for batch in epoch_batches(clips.len(), cfg.batch_size, &order_rng, epoch) {
            let mut g = Graph::new();
            let bound = model.params.bind(&mut g, true);
            let mut preds = Vec::with_capacity(batch.len());
            for &i in &batch {
                let c = &clips[i];
                preds.push(model.forward(&mut g, &bound, &c.frames, c.saliency.as_ref())?.y_hat);
            }
            let y_hat = g.concat(&preds, 0)?;
            let y = g.constant(Tensor::from_vec(batch.iter().map(|&i| clips[i].mos).collect()));
            let loss = vqa_loss(&mut g, y_hat, y, &cfg.loss)?;
            let w = batch.len() as f64;
            loss_sum += w * g.value(loss.value).item()?;
            l1_sum += w * g.value(loss.l1).item()?;
            count += w;
            let mut grads = g.backward(loss.value)?;
            let grads = bound.collect(&g, &mut grads);
            adam.step(&mut model.params, &grads, schedule.lr_at(step))?;
            step += 1;
        }
        let row = VqaEpoch {
            epoch,
            loss: loss_sum / count,
            l1: l1_sum / count,
            lr: lr_epoch,
        };
        log::debug!("vqa epoch {epoch}: loss {:.5}", row.loss);
        history.push(row);
    }
    Ok(TrainedVqa { model, history })
}

pub fn predict_clips(model: &VqaModel, clips: &[PreparedClip]) -> Result<Vec<Prediction>> {
    clips
        .iter()
        .map(|c| {
            Ok(Prediction {
                video_id: c.video_id.clone(),
                mos: c.mos,
                predicted: model.predict(&c.frames, c.saliency.as_ref())?,
            })
        })
        .collect()
}

/// `(SRCC, PLCC)` of predictions against their labels.
pub fn correlations(preds: &[Prediction]) -> Result<(f64, f64)> {
    let p: Vec<f64> = preds.iter().map(|r| r.predicted).collect();
    let y: Vec<f64> = preds.iter().map(|r| r.mos).collect();
    Ok((srcc(&p, &y)?, plcc(&p, &y)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};
    use crate::vqa::SpatialEncoderConfig;

    fn tiny_data() -> crate::data::SyntheticData {
        generate_synthetic(&SyntheticSpec {
            num_videos: 4,
            frames_per_video: 2,
            height: 8,
            width: 8,
            ..SyntheticSpec::default()
        })
        .unwrap()
    }

    fn tiny_saliency() -> SaliencyTrainConfig {
        SaliencyTrainConfig {
            model: SaliencyConfig {
                tokens: 2,
                token_dim: 4,
                stage_channels: vec![2, 4],
                bottleneck_channels: 4,
                ..SaliencyConfig::default()
            },
            epochs: 3,
            batch_size: 2,
            ..SaliencyTrainConfig::default()
        }
    }

    #[test]
    fn saliency_training_is_deterministic() {
        let data = tiny_data();
        let a = train_saliency(&data.saliency, &tiny_saliency()).unwrap();
        let b = train_saliency(&data.saliency, &tiny_saliency()).unwrap();
        assert_eq!(a.net.params, b.net.params);
        assert_eq!(a.history, b.history);
        assert_eq!(a.history.len(), 3);
    }

    #[test]
    fn vqa_training_runs_and_beta_matters() {
        let data = tiny_data();
        let clips = prepare_clips(&data.quality, None).unwrap();
        let mut cfg = VqaTrainConfig {
            model: VqaConfig {
                spatial: SpatialEncoderConfig {
                    stage_channels: vec![4, 8],
                    ..SpatialEncoderConfig::default()
                },
                use_saliency: false,
                ..VqaConfig::default()
            },
            lr: 1e-3,
            epochs: 2,
            batch_size: 2,
            ..VqaTrainConfig::default()
        };
        let a = train_vqa(&clips, &cfg).unwrap();
        cfg.loss.beta = 0.0;
        let b = train_vqa(&clips, &cfg).unwrap();
        assert_ne!(a.history, b.history);
        let preds = predict_clips(&a.model, &clips).unwrap();
        assert_eq!(preds.len(), 4);
    }

    #[test]
    fn missing_label_or_saliency() {
        let data = tiny_data();
        let mut clip = data.quality[0].clone();
        clip.mos = None;
        assert!(prepare_clips(&[clip], None).is_err());
        let clips = prepare_clips(&data.quality, None).unwrap();
        let cfg = VqaTrainConfig {
            epochs: 1,
            ..VqaTrainConfig::default()
        };
        assert!(train_vqa(&clips, &cfg).is_err());
    }
}
