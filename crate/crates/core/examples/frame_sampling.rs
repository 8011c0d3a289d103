//! Uniform frame sampling for a few source lengths.
//!
//! ```text
//! cargo run -p dagr-vqa --example frame_sampling [length] [count]
//! ```

use dagr_vqa::data::sampling::sample_frames;

fn main() -> dagr_vqa::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().ok());
    if let (Some(Some(l)), Some(Some(n))) = (args.next(), args.next()) {
        println!("L={l} N={n}: {:?}", sample_frames(l, n)?);
        return Ok(());
    }
    for (l, n) in [(240, 8), (8, 8), (100, 8), (30, 16), (5, 8)] {
        println!("L={l:<4} N={n:<3} {:?}", sample_frames(l, n)?);
    }
    Ok(())
}
