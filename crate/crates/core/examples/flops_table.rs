//! Analytical GFLOPs for the four cost models, plus a sweep over frame count.
//!
//! ```text
//! cargo run -p dagr-vqa --example flops_table
//! ```

use dagr_vqa::eval::flops::{flops_estimate, flops_table, vivit_dagr_ratio, CostModel};

fn main() -> dagr_vqa::Result<()> {
    println!("{:<10} {:>6} {:>6} {:>6} {:>5} {:>4} {:>9}", "model", "frames", "h", "w", "d", "g_f", "GFLOPs");
    for r in flops_table() {
        println!(
            "{:<10} {:>6} {:>6} {:>6} {:>5} {:>4} {:>9.2}",
            r.model, r.frames, r.height, r.width, r.d, r.g_f, r.gflops
        );
    }
    println!("vivit / dagr = {:.3}", vivit_dagr_ratio());

    println!("\nscaling with frames:");
    for frames in [4, 8, 16, 32] {
        let costs: Vec<String> = CostModel::ALL
            .into_iter()
            .map(|m| {
                let mut c = m.default_config();
                c.frames = frames;
                flops_estimate(m, &c).map(|g| format!("{} {g:.1}", m.name()))
            })
            .collect::<dagr_vqa::Result<_>>()?;
        println!("  {frames:>2}: {}", costs.join(", "));
    }
    Ok(())
}
