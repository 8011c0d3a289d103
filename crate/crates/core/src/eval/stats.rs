//! Correlation coefficients and paired significance tests.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{config_err, Error, Result};

/// Largest sample size that uses the exact Wilcoxon null distribution.
pub const WILCOXON_EXACT_MAX: usize = 15;

fn check_pair(a: &[f64], b: &[f64], min: usize) -> Result<()> {
    if a.len() != b.len() {
        return config_err(format!("sample lengths {} and {} differ", a.len(), b.len()));
    }
    if a.len() < min {
        return config_err(format!("need at least {min} samples, got {}", a.len()));
    }
    Ok(())
}

/// Pearson correlation with population moments.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b, 2)?;
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Degenerate("correlation with zero variance".into()));
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties sharing their average rank.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn srcc(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth, 2)?;
    pearson(&midranks(pred), &midranks(truth))
}

pub fn plcc(pred: &[f64], truth: &[f64]) -> Result<f64> {
    pearson(pred, truth)
}

/// Two-sided paired t-test. Identical samples give `p = 1`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b, 2)?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        if mean == 0.0 {
            return Ok(1.0);
        }
        return Err(Error::Degenerate("paired differences have zero variance".into()));
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| Error::Degenerate(e.to_string()))?;
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

/// Nonzero differences, their midranks, and `W+`.
fn signed_ranks(a: &[f64], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    check_pair(a, b, 1)?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    if d.is_empty() {
        return Err(Error::Degenerate("all paired differences are zero".into()));
    }
    if d.len() < 5 {
        return Err(Error::Degenerate(format!(
            "{} nonzero differences, Wilcoxon needs at least 5",
            d.len()
        )));
    }
    let mags: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = midranks(&mags);
    let w_plus = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    Ok((ranks, w_plus))
}

/// Exact two-sided p-value of `W+` by dynamic programming over doubled
/// (integer) midranks.
fn wilcoxon_exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let all = 2f64.powi(ranks.len() as i32);
    let w2 = (2.0 * w_plus).round() as usize;
    let lower: f64 = counts[..=w2].iter().sum::<f64>() / all;
    let upper: f64 = counts[w2..].iter().sum::<f64>() / all;
    (2.0 * lower.min(upper)).min(1.0)
}

fn wilcoxon_normal_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut ties = 0.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * normal.sf(z)).min(1.0)
}

/// Two-sided Wilcoxon signed-rank test: exact for up to
/// [`WILCOXON_EXACT_MAX`] nonzero differences, normal approximation with
/// continuity and tie correction above.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<f64> {
    let (ranks, w) = signed_ranks(a, b)?;
    Ok(if ranks.len() <= WILCOXON_EXACT_MAX {
        wilcoxon_exact_p(&ranks, w)
    } else {
        wilcoxon_normal_p(&ranks, w)
    })
}

pub fn wilcoxon_exact(a: &[f64], b: &[f64]) -> Result<f64> {
    let (ranks, w) = signed_ranks(a, b)?;
    Ok(wilcoxon_exact_p(&ranks, w))
}

pub fn wilcoxon_normal(a: &[f64], b: &[f64]) -> Result<f64> {
    let (ranks, w) = signed_ranks(a, b)?;
    Ok(wilcoxon_normal_p(&ranks, w))
}
