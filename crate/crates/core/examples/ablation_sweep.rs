//! Ablation over register-token count, fusion weight or model components on
//! a small synthetic dataset.
//!
//! ```text
//! cargo run --release -p dagr-vqa --example ablation_sweep [tokens|alpha|components]
//! ```

use dagr_vqa::data::dataset::split_synthetic;
use dagr_vqa::data::{generate_synthetic, SyntheticSpec};
use dagr_vqa::eval::ablation::{ablation_csv, sweep_ablation, AblationAxis, PipelineRunner};
use dagr_vqa::{presets, Error};

fn main() -> dagr_vqa::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "tokens".into());
    let axis = AblationAxis::parse(&name).ok_or_else(|| Error::Config(format!("unknown axis {name}")))?;
    let spec = SyntheticSpec {
        num_videos: 20,
        frames_per_video: 4,
        height: 16,
        width: 16,
        ..SyntheticSpec::default()
    };
    let data = generate_synthetic(&spec)?;
    let splits = split_synthetic(&spec, &data);

    let mut sal = presets::saliency_overfit();
    sal.model.stage_channels = vec![8, 12];
    sal.epochs = 10;
    let mut vqa = presets::vqa_overfit();
    vqa.epochs = 10;
    let mut runner = PipelineRunner::new(
        splits.saliency.train.clone(),
        splits.quality.train.clone(),
        splits.quality.held_out(),
        sal,
        vqa,
    );
    let start = std::time::Instant::now();
    let rows = sweep_ablation(&axis, &mut runner)?;
    print!("{}", ablation_csv(&rows)?);
    eprintln!("{} rows in {:.1?}", rows.len(), start.elapsed());
    Ok(())
}
