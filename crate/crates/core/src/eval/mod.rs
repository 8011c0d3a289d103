//! Evaluation: statistics, cost models, cross-validation, ablations and
//! embedding export.

pub mod ablation;
pub mod embeddings;
pub mod flops;
pub mod kfold;
pub mod stats;

pub use stats::{paired_t_test, plcc, srcc, wilcoxon_signed_rank};
