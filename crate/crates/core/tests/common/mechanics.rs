//! Register-token, fusion and sweep checks on tiny models.

use dagr_tensor::{Graph, RngState, Tensor};
use dagr_vqa::data::{generate_synthetic, SyntheticSpec};
use dagr_vqa::data::dataset::split_synthetic;
use dagr_vqa::eval::ablation::{sweep_ablation, AblationAxis, AblationRow, PipelineRunner};
use dagr_vqa::presets;
use dagr_vqa::saliency::{bottleneck_attention, decode, encode, SaliencyConfig, SaliencyNet};
use dagr_vqa::vqa::{SpatialEncoderConfig, TemporalEncoderConfig, VqaConfig, VqaModel};

pub const VIDEO: [usize; 5] = [1, 3, 4, 8, 12];

pub fn tiny_saliency(tokens: usize) -> SaliencyConfig {
    SaliencyConfig {
        tokens,
        token_dim: 4,
        stage_channels: vec![2, 4],
        bottleneck_channels: 4,
        ..SaliencyConfig::default()
    }
}

pub fn video(seed: u64) -> Tensor {
    Tensor::rand_uniform(VIDEO, 0.0, 1.0, &mut RngState::new(seed))
}

/// Predicted map shape for each token count.
pub fn token_output_shapes(counts: &[usize], seed: u64) -> Vec<(usize, Vec<usize>)> {
    let v = video(seed);
    counts
        .iter()
        .map(|&n| {
            let net = SaliencyNet::new(tiny_saliency(n), &RngState::new(seed)).unwrap();
            (n, net.predict(&v).unwrap().values.shape().to_vec())
        })
        .collect()
}

/// A tokenless network against encoder, attention and decoder applied by
/// hand to the raw video with the same weights.
pub fn tokenless_matches_baseline(seed: u64) -> bool {
    let net = SaliencyNet::new(tiny_saliency(0), &RngState::new(seed)).unwrap();
    let v = video(seed + 1);
    let got = net.predict(&v).unwrap().values;

    let mut g = Graph::new();
    let bound = net.params.bind(&mut g, false);
    let x = g.constant(v);
    let (z, skips) = encode(&mut g, &bound, &net.cfg, x).unwrap();
    let (zp, _) = bottleneck_attention(&mut g, &bound, &net.cfg, z).unwrap();
    let map = decode(&mut g, &bound, &net.cfg, zp, &skips).unwrap();
    let want = g.value(map);
    got.shape() == want.shape() && got.data().iter().zip(want.data()).all(|(a, b)| a.to_bits() == b.to_bits())
}

pub fn tiny_vqa(alpha: f64, use_saliency: bool) -> VqaConfig {
    VqaConfig {
        spatial: SpatialEncoderConfig {
            stage_channels: vec![4, 8],
            bias: true,
        },
        temporal: TemporalEncoderConfig {
            layers: 1,
            heads: 2,
            ffn_dim: 8,
            eps: 1e-5,
        },
        alpha,
        use_saliency,
        ..VqaConfig::default()
    }
}

/// Scores with alpha = 0 fusion and with fusion disabled, same weights.
pub fn alpha_zero_scores(seed: u64) -> (f64, f64) {
    let mut rng = RngState::new(seed);
    let frames = Tensor::rand_uniform([3, 4, 8, 8], 0.0, 1.0, &mut rng);
    let sal = Tensor::rand_uniform([4, 8, 8], 0.0, 1.0, &mut rng);
    let fused = VqaModel::new(tiny_vqa(0.0, true), &RngState::new(seed)).unwrap();
    let plain = VqaModel::from_params(tiny_vqa(0.0, false), fused.params.clone()).unwrap();
    (fused.predict(&frames, Some(&sal)).unwrap(), plain.predict(&frames, None).unwrap())
}

fn sweep_data() -> SyntheticSpec {
    SyntheticSpec {
        num_videos: 12,
        frames_per_video: 4,
        height: 16,
        width: 16,
        ..SyntheticSpec::default()
    }
}

/// Full pipeline sweep with a few epochs per stage.
pub fn tiny_sweep(axis: &AblationAxis) -> dagr_vqa::Result<Vec<AblationRow>> {
    let spec = sweep_data();
    let data = generate_synthetic(&spec)?;
    let splits = split_synthetic(&spec, &data);
    let mut sal = presets::saliency_overfit();
    sal.model.stage_channels = vec![8, 12];
    sal.epochs = 3;
    let mut vqa = presets::vqa_overfit();
    vqa.epochs = 3;
    let mut runner = PipelineRunner::new(
        splits.saliency.train.clone(),
        splits.quality.train.clone(),
        splits.quality.held_out(),
        sal,
        vqa,
    );
    sweep_ablation(axis, &mut runner)
}
