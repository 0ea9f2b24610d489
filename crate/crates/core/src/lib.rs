//! Zero-shot learning with two mutually distilled attention sub-nets.
//!
//! An attribute→visual sub-net attends over image regions for each attribute;
//! a visual→attribute sub-net attends over attributes for each region. Both
//! map an image to a per-attribute embedding that is scored against class
//! semantic vectors. Training combines a self-calibrated cross-entropy per
//! sub-net with a distillation loss that aligns their class posteriors.
//!
//! Everything runs in `f64` with hand-derived gradients, each verified
//! against central finite differences.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ablation;
pub mod check;
pub mod cli;
pub mod data;
mod error;
pub mod eval;
pub mod losses;
pub mod model;
pub mod ndmath;
pub mod training;

pub use error::{Error, Result};
