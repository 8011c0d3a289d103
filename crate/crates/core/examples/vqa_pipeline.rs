//! Two-stage pipeline on synthetic data: pretrain saliency, freeze it, then
//! fit the quality model on sixteen noisy clips and report train SRCC/PLCC.
//!
//! ```text
//! cargo run --release -p dagr-vqa --example vqa_pipeline [epochs]
//! ```

use std::time::Instant;

use dagr_vqa::data::generate_synthetic;
use dagr_vqa::presets;
use dagr_vqa::train::{correlations, predict_clips, prepare_clips, train_saliency, train_vqa};

fn main() -> dagr_vqa::Result<()> {
    let start = Instant::now();
    let data = generate_synthetic(&presets::vqa_overfit_data())?;

    let mut sal_cfg = presets::saliency_overfit();
    sal_cfg.epochs = 50;
    let sal = train_saliency(&data.saliency, &sal_cfg)?;
    println!(
        "saliency: final loss {:+.4} ({:.1?})",
        sal.history.last().map_or(f64::NAN, |r| r.total),
        start.elapsed()
    );

    let clips = prepare_clips(&data.quality, Some(&sal.net))?;
    let mut cfg = presets::vqa_overfit();
    if let Some(e) = std::env::args().nth(1).and_then(|a| a.parse().ok()) {
        cfg.epochs = e;
    }
    let trained = train_vqa(&clips, &cfg)?;
    for row in trained.history.iter().step_by((cfg.epochs / 10).max(1)) {
        println!("epoch {:4}  loss {:.4}  l1 {:.4}  lr {:.2e}", row.epoch, row.loss, row.l1, row.lr);
    }
    let preds = predict_clips(&trained.model, &clips)?;
    for p in &preds {
        println!("{}  mos {:.3}  predicted {:.3}", p.video_id, p.mos, p.predicted);
    }
    let (srcc, plcc) = correlations(&preds)?;
    println!("train SRCC {srcc:.4}  PLCC {plcc:.4}  ({:.1?})", start.elapsed());
    Ok(())
}
