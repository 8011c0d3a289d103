use dagr_tensor::{Graph, Tensor};

use crate::error::{config_err, Result};

/// Centre frame of each of `n` equal segments of a length-`l` video:
/// `clamp(round((i + 0.5) l / n - 0.5), 0, l - 1)`.
pub fn sample_frames(l: usize, n: usize) -> Result<Vec<usize>> {
    if l == 0 || n == 0 {
        return config_err(format!("cannot sample {n} frames from length {l}"));
    }
    Ok((0..n)
        .map(|i| {
            let pos = (i as f64 + 0.5) * l as f64 / n as f64 - 0.5;
            (pos.round().max(0.0) as usize).min(l - 1)
        })
        .collect())
}

/// Bilinear resize of `[C, h, w]` (half-pixel centres).
pub fn resize_frame(frame: &Tensor, target: [usize; 2]) -> Result<Tensor> {
    if frame.ndim() != 3 || frame.numel() == 0 || target.contains(&0) {
        return config_err(format!("cannot resize {:?} to {target:?}", frame.shape()));
    }
    let mut g = Graph::new();
    let x = g.constant(frame.clone());
    let y = g.resize_bilinear(x, target)?;
    Ok(g.value(y).clone())
}

/// Bilinear resize of every frame of a `[C, T, h, w]` clip.
pub fn resize_clip(frames: &Tensor, target: [usize; 2]) -> Result<Tensor> {
    if frames.ndim() != 4 || frames.numel() == 0 || target.contains(&0) {
        return config_err(format!("cannot resize {:?} to {target:?}", frames.shape()));
    }
    let mut g = Graph::new();
    let x = g.constant(frames.clone());
    let y = g.resize_bilinear(x, target)?;
    Ok(g.value(y).clone())
}
