//! Register tokens at the saliency bottleneck: output shape for several
//! token counts, and the attention each token receives on one clip.
//!
//! ```text
//! cargo run -p dagr-vqa --example register_tokens
//! ```

use dagr_tensor::{RngState, Tensor};
use dagr_vqa::eval::embeddings::token_activation_means;
use dagr_vqa::data::VideoClip;
use dagr_vqa::saliency::{SaliencyConfig, SaliencyNet};

fn main() -> dagr_vqa::Result<()> {
    let mut rng = RngState::new(3);
    let frames = Tensor::rand_uniform([3, 4, 16, 16], 0.0, 1.0, &mut rng);
    let video = frames.clone().reshape(vec![1, 3, 4, 16, 16])?;
    let clip = VideoClip {
        frames,
        source_id: "demo".into(),
        frame_indices: (0..4).collect(),
        mos: None,
    };

    for tokens in [0, 2, 4, 8, 16] {
        let cfg = SaliencyConfig {
            tokens,
            token_dim: 8,
            stage_channels: vec![4, 8],
            bottleneck_channels: 8,
            ..SaliencyConfig::default()
        };
        let net = SaliencyNet::new(cfg, &RngState::new(tokens as u64))?;
        let map = net.predict(&video)?;
        let means = if tokens > 0 { token_activation_means(&net, &clip)? } else { Vec::new() };
        let shown: Vec<String> = means.iter().map(|m| format!("{m:.3}")).collect();
        println!(
            "N_tok {tokens:>2}: {} parameters, map {:?}, token means [{}]",
            net.params.scalar_count(),
            map.values.shape(),
            shown.join(", ")
        );
    }
    Ok(())
}
