//! Per-video register-token embeddings for external visualization.
//!
//! Token parameters do not depend on the clip, so each token row is shifted
//! by a clip statistic: the mean, over active first-stage units, of that
//! token channel's contribution `R'_n * sum_taps W1[o, C+n]`.

use dagr_tensor::Graph;
use serde::Serialize;

use crate::data::VideoClip;
use crate::error::{config_err, Error, Result};
use crate::register_tokens::{project_bound, token_scalars, RegisterTokens, PROJ_B_NAME, PROJ_W_NAME, R_NAME};
use crate::saliency::SaliencyNet;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmbeddingRow {
    pub video_id: String,
    /// Mean over tokens of `tokens`.
    pub vector: Vec<f64>,
    /// One clip-conditioned row per token, `[N][d]`.
    pub tokens: Vec<Vec<f64>>,
}

/// Clip statistic `mu_n` for every token.
pub fn token_activation_means(net: &SaliencyNet, clip: &VideoClip) -> Result<Vec<f64>> {
    let cfg = &net.cfg;
    if cfg.tokens == 0 {
        return config_err("embedding export needs a model with register tokens");
    }
    let video = clip.batched();
    let vs = video.shape().to_vec();
    if vs[1] != cfg.video_channels {
        return config_err(format!("clip has {} channels, model expects {}", vs[1], cfg.video_channels));
    }
    let mut g = Graph::new();
    let bound = net.params.bind(&mut g, false);
    let v = g.constant(video);
    let projected = project_bound(&mut g, &bound, vs[2], vs[3], vs[4])?;
    let aug = crate::register_tokens::augment_input(&mut g, v, Some(projected))?;
    let (w, b) = (bound.get("sal.enc0.w")?, bound.get("sal.enc0.b")?);
    let z = g.conv3d(aug, w, Some(b), [1, 1, 1], [1, 1, 1])?;
    let (r, pw, pb) = (bound.get(R_NAME)?, bound.get(PROJ_W_NAME)?, bound.get(PROJ_B_NAME)?);
    let s = token_scalars(&mut g, r, pw, pb)?;
    let scalars = g.value(s).data().to_vec();

    let w1 = net.params.get("sal.enc0.w")?;
    let ws = w1.shape();
    let (o_ch, in_ch, taps) = (ws[0], ws[1], ws[2] * ws[3] * ws[4]);
    let z = g.value(z);
    let per_o = z.numel() / o_ch;
    let active: Vec<f64> = z
        .data()
        .chunks(per_o)
        .map(|c| c.iter().filter(|&&v| v > 0.0).count() as f64)
        .collect();
    let total = z.numel() as f64;
    Ok((0..cfg.tokens)
        .map(|n| {
            let ch = cfg.video_channels + n;
            let contrib: f64 = (0..o_ch)
                .map(|o| {
                    let start = (o * in_ch + ch) * taps;
                    let wsum: f64 = w1.data()[start..start + taps].iter().sum();
                    active[o] * wsum
                })
                .sum();
            scalars[n] * contrib / total
        })
        .collect())
}

pub fn export_register_embeddings(net: &SaliencyNet, clips: &[VideoClip]) -> Result<Vec<EmbeddingRow>> {
    let tokens = RegisterTokens::from_store(&net.params)?;
    let rows = tokens.rows();
    let d = tokens.dim();
    clips
        .iter()
        .map(|clip| {
            let mu = token_activation_means(net, clip)?;
            let shifted: Vec<Vec<f64>> = rows
                .iter()
                .zip(&mu)
                .map(|(r, m)| r.iter().map(|v| v + m).collect())
                .collect();
            let n = shifted.len() as f64;
            let vector = (0..d).map(|k| shifted.iter().map(|r| r[k]).sum::<f64>() / n).collect();
            Ok(EmbeddingRow {
                video_id: clip.source_id.clone(),
                vector,
                tokens: shifted,
            })
        })
        .collect()
}

fn header(d: usize, lead: &[&str]) -> Vec<String> {
    lead.iter().map(|s| s.to_string()).chain((0..d).map(|k| format!("e{k}"))).collect()
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::format("embedding csv", e))?;
    String::from_utf8(bytes).map_err(|e| Error::format("embedding csv", e))
}

/// `video_id,e0,..` with one row per video.
pub fn embeddings_csv(rows: &[EmbeddingRow]) -> Result<String> {
    let d = rows.first().map_or(0, |r| r.vector.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::format("embedding csv", e);
    w.write_record(header(d, &["video_id"])).map_err(err)?;
    for r in rows {
        let rec: Vec<String> = std::iter::once(r.video_id.clone())
            .chain(r.vector.iter().map(|v| format!("{v}")))
            .collect();
        w.write_record(rec).map_err(err)?;
    }
    finish(w)
}

/// `video_id,token,e0,..` with one row per (video, token).
pub fn token_rows_csv(rows: &[EmbeddingRow]) -> Result<String> {
    let d = rows.first().map_or(0, |r| r.vector.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::format("embedding csv", e);
    w.write_record(header(d, &["video_id", "token"])).map_err(err)?;
    for r in rows {
        for (n, t) in r.tokens.iter().enumerate() {
            let rec: Vec<String> = [r.video_id.clone(), n.to_string()]
                .into_iter()
                .chain(t.iter().map(|v| format!("{v}")))
                .collect();
            w.write_record(rec).map_err(err)?;
        }
    }
    finish(w)
}
