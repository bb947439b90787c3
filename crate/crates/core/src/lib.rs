//! Log-likelihood geometry for autoregressive language models.
//!
//! Every model is a point: the vector of its log-likelihoods over a fixed
//! text set. Double centering that vector yields coordinates whose squared
//! Euclidean distances estimate KL divergence between the models. This crate
//! holds the numerical side of that pipeline and is `no_std` (it needs
//! `alloc`). File formats, the command line and anything else touching IO
//! live in the `llmap` crate.
//!
//! Module map:
//!
//! * [`matrix`]: records, validation, clipping, chunking, sampling and the
//!   ℓ → ξ → q centering pipeline.
//! * [`geometry`]: KL matrices, unit conversion, neighbor tables and the
//!   height/horizontal decomposition.
//! * [`mapping`]: PCA, exact t-SNE, Lance–Williams clustering, TSP hue order.
//! * [`analysis`]: z-score analytics, correlations, error decomposition.
//! * [`predict`]: dual-form ridge, grouped folds, nested cross-validation.
//! * [`oracle`]: finite exponential families and Markov token models with
//!   exact KL, used as ground truth.
//! * [`validate`]: gate-style checks that tie the above together.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod error;
pub mod geometry;
pub mod mapping;
pub mod math;
pub mod matrix;
pub mod oracle;
pub mod predict;
pub mod rng;
pub mod validate;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};
