//! Finite-difference gradient checks over every op and the three
//! differentiable pipelines.
//!
//! ```text
//! cargo run --release -p dagr-vqa --example gradcheck [seeds]
//! ```

use dagr_vqa::verify::{run_suite, TOLERANCE};

fn main() -> dagr_vqa::Result<()> {
    let seeds = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3);
    let start = std::time::Instant::now();
    let results = run_suite(seeds)?;
    for r in results.iter().filter(|r| r.seed == 0) {
        println!("{:<28} {:>6} entries  rel err {:.2e}", r.name, r.checked, r.max_relative_error);
    }
    let worst = results.iter().max_by(|a, b| a.max_relative_error.total_cmp(&b.max_relative_error));
    let failed = results.iter().filter(|r| !r.passed).count();
    if let Some(w) = worst {
        println!("\nworst over {seeds} seeds: {} seed {} at {:.2e}", w.name, w.seed, w.max_relative_error);
    }
    println!(
        "{} checks, {failed} above {TOLERANCE:e}, {:.1?}",
        results.len(),
        start.elapsed()
    );
    Ok(())
}
