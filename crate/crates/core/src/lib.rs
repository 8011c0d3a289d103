//! Saliency-guided video quality assessment with learnable register tokens.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod objectives;
pub mod params;
pub mod presets;
pub mod register_tokens;
pub mod saliency;
pub mod train;
pub mod verify;
pub mod vqa;

pub use error::{Error, Result};
