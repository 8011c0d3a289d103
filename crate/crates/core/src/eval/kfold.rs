//! Seeded k-fold partitions.

use dagr_tensor::RngState;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

fn chunks(ids: &[String], k: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    if k < 2 {
        return config_err(format!("k-fold needs k >= 2, got {k}"));
    }
    if ids.len() < k {
        return config_err(format!("k = {k} exceeds {} ids", ids.len()));
    }
    let mut order = ids.to_vec();
    RngState::new(seed).shuffle(&mut order);
    let (base, extra) = (order.len() / k, order.len() % k);
    let mut out = Vec::with_capacity(k);
    let mut rest = order.as_slice();
    for i in 0..k {
        let (head, tail) = rest.split_at(base + usize::from(i < extra));
        out.push(head.to_vec());
        rest = tail;
    }
    Ok(out)
}

/// Fold `i` tests on chunk `i` and trains on the others.
pub fn kfold_split(ids: &[String], k: usize, seed: u64) -> Result<Vec<Fold>> {
    let parts = chunks(ids, k, seed)?;
    Ok((0..k)
        .map(|i| Fold {
            train: parts
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .flat_map(|(_, p)| p.iter().cloned())
                .collect(),
            test: parts[i].clone(),
        })
        .collect())
}

/// Cross-dataset protocol: each fold trains on a different k-1 of k chunks
/// of `source` and always tests on the whole of `target`.
pub fn cross_dataset_folds(source: &[String], target: &[String], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if target.is_empty() {
        return config_err("cross-dataset target set is empty");
    }
    Ok(kfold_split(source, k, seed)?
        .into_iter()
        .map(|f| Fold {
            train: f.train,
            test: target.to_vec(),
        })
        .collect())
}
