//! Saves a saliency network, reloads it and checks the prediction is
//! unchanged, then shows that a corrupted blob is rejected.
//!
//! ```text
//! cargo run -p dagr-vqa --example checkpoint_roundtrip
//! ```

use dagr_tensor::{RngState, Tensor};
use dagr_vqa::data::checkpoint::{load_saliency_net, read_manifest, save_saliency_net};
use dagr_vqa::presets;
use dagr_vqa::saliency::SaliencyNet;
use serde_json::json;

fn main() -> dagr_vqa::Result<()> {
    let dir = std::env::temp_dir().join(format!("dagr-checkpoint-{}", std::process::id()));
    let net = SaliencyNet::new(presets::saliency_model(), &RngState::new(1))?;
    let manifest = save_saliency_net(&dir, &net, json!({"note": "example"}))?;
    println!("{} tensors, hash {}", manifest.tensors.len(), manifest.content_hash);

    let video = Tensor::rand_uniform([1, 3, 4, 16, 16], 0.0, 1.0, &mut RngState::new(2));
    let before = net.predict(&video)?.values;
    let after = load_saliency_net(&dir)?.predict(&video)?.values;
    println!("prediction after reload identical: {}", before == after);

    let entry = &read_manifest(&dir)?.tensors[0];
    let blob = dir.join(&entry.file);
    let mut bytes = std::fs::read(&blob).map_err(|e| dagr_vqa::Error::io(&blob, e))?;
    bytes[0] ^= 1;
    std::fs::write(&blob, bytes).map_err(|e| dagr_vqa::Error::io(&blob, e))?;
    match load_saliency_net(&dir) {
        Ok(_) => println!("corrupted checkpoint loaded (unexpected)"),
        Err(e) => println!("corrupted checkpoint rejected: {e}"),
    }
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
