mod common;

use common::mechanics::*;
use dagr_vqa::eval::ablation::{AblationAxis, ALPHA_GRID, TOKEN_GRID};

#[test]
fn output_shape_ignores_token_count() {
    for (n, shape) in token_output_shapes(&TOKEN_GRID, 3) {
        assert_eq!(shape, vec![1, 1, VIDEO[2], VIDEO[3], VIDEO[4]], "tokens {n}");
    }
}

#[test]
fn tokenless_net_is_the_plain_unet() {
    for seed in 0..3 {
        assert!(tokenless_matches_baseline(seed));
    }
}

#[test]
fn alpha_zero_equals_no_fusion() {
    for seed in 0..3 {
        let (a, b) = alpha_zero_scores(seed);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn token_and_alpha_sweeps_emit_full_tables() {
    let rows = tiny_sweep(&AblationAxis::tokens()).unwrap();
    let labels: Vec<String> = rows.iter().map(|r| r.config.clone()).collect();
    let want: Vec<String> = TOKEN_GRID.iter().map(|n| format!("tokens={n}")).collect();
    assert_eq!(labels, want);
    let rows = tiny_sweep(&AblationAxis::alpha()).unwrap();
    assert_eq!(rows.len(), ALPHA_GRID.len());
    assert!(rows.iter().all(|r| r.srcc.is_finite() && r.plcc.is_finite()));
}

#[test]
#[ignore = "full-resolution forward pass, about 20 s"]
fn full_resolution_clip_maps_to_full_resolution() {
    use dagr_tensor::{RngState, Tensor};
    use dagr_vqa::saliency::SaliencyNet;
    let net = SaliencyNet::new(tiny_saliency(4), &RngState::new(0)).unwrap();
    let video = Tensor::rand_uniform([1, 3, 60, 224, 398], 0.0, 1.0, &mut RngState::new(1));
    let map = net.predict(&video).unwrap().values;
    assert_eq!(map.shape(), &[1, 1, 60, 224, 398]);
    assert!(map.data().iter().all(|&v| v > 0.0 && v < 1.0));
}
