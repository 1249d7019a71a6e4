//! Ordinal classification via contrastive representation learning with
//! learnable inter-rank margins.
//!
//! The crate trains a small MLP encoder so that embeddings of adjacent ranks
//! are separated by per-boundary margins that are themselves learned, with the
//! separation required between two ranks growing as the sum of the margins of
//! every boundary between them. Training runs in two phases: margins and
//! encoder jointly first, then the encoder alone with margins frozen.
//!
//! Everything numeric is `f64` and deterministic under a seed. The crate is
//! `no_std`-compatible (it allocates, but performs no IO); file formats and
//! the command-line front end live in the companion `ordmargin-cli` crate.
//!
//! Module map:
//!
//! * [`autodiff`] — define-by-run reverse-mode differentiation on dense `f64`
//!   tensors, plus a finite-difference gradient checker.
//! * [`margins`] — rank schema, margin parameterization/activation, cumulative
//!   inter-rank margins.
//! * [`loss`] — multi-margin n-pair contrastive loss, fused softmax
//!   cross-entropy, the combined batch objective, and an independent
//!   reference implementation used for cross-checking.
//! * [`model`] — MLP encoder + classifier head with seeded initialization.
//! * [`sampler`] — rank-stratified batch construction and validation.
//! * [`train`] — Adam and the two-phase training loop.
//! * [`datagen`] — synthetic ordinal Gaussian data and label-bias injection.
//! * [`metrics`] — evaluation reports, margin reports, embedding exports.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod datagen;
pub mod error;
pub mod loss;
pub mod margins;
pub mod metrics;
pub mod model;
mod num;
pub mod sampler;
pub mod train;

pub use error::{Error, Result};
