//! Overfits the saliency network on four synthetic clips and prints the
//! loss curve.
//!
//! ```text
//! cargo run --release -p dagr-vqa --example saliency_overfit [iterations]
//! ```

use dagr_vqa::data::generate_synthetic;
use dagr_vqa::presets;

fn main() -> dagr_vqa::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(500);
    let data = generate_synthetic(&presets::saliency_overfit_data())?;
    let mut cfg = presets::saliency_overfit();
    cfg.epochs = epochs;
    let start = std::time::Instant::now();
    let trained = dagr_vqa::train::train_saliency(&data.saliency, &cfg)?;
    for row in trained.history.iter().step_by((epochs / 20).max(1)) {
        println!("epoch {:4}  kl {:.4}  cc {:+.4}  total {:+.4}", row.epoch, row.kl, row.cc, row.total);
    }
    let last = trained.history.last().expect("at least one epoch");
    println!("final total {:+.4} after {epochs} iterations in {:.1?}", last.total, start.elapsed());
    Ok(())
}
