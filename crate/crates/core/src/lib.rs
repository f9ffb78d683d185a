//! Weakly-supervised convolutive analysis dictionary learning.
//!
//! A signal is scored against one analysis word per class; a softmax over
//! the scores gives per-instance label priors. Training only sees the set of
//! labels present in each signal and a cap on how many instances carry a
//! label, and the instance labels are inferred exactly by dynamic programming
//! over (label subset, count) states.

pub mod bench;
pub mod chain;
pub mod conv;
pub mod datagen;
pub mod em;
pub mod error;
pub mod inference;
pub mod init;
pub mod io;
pub mod metrics;
pub mod parallel;
pub mod predict;
pub mod prior;
pub mod tree;
pub mod types;

pub use error::{Error, Result};
pub use em::{em_fit, EmState, TrainConfig};
pub use inference::{Backend, Posterior};
pub use parallel::ExecMode;
pub use types::{ClassSet, LabelState, MessageTable, ModelParams, PriorField, Signal, WeakExample};
