//! Few-shot contrastive abundance estimation for hyperspectral pixels.
//!
//! A one-dimensional CNN encoder is pretrained with a SimCLR objective on
//! unlabeled spectra, its projection head is fine-tuned on a handful of
//! labeled pixels, and three independent RBF support vector regressors map
//! the 16-dimensional embedding to healthy / affected / dead tree fractions.
//! Predictions are clamped and renormalized onto the probability simplex.
//!
//! The crate also ships everything needed to exercise the pipeline without
//! real imagery: a linear-mixture scene generator, raw-band SVR baselines
//! (full hyperspectral and a 13-band aggregated multispectral emulation),
//! a k-fold evaluation harness, binary file formats and the command
//! implementations behind the `barkscan` CLI.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod contrastive;
pub mod error;
pub mod io;
pub mod nn;
pub mod pipeline;
pub mod render;
pub mod rng;
pub mod spectra;
pub mod svr;
pub mod synth;

pub use error::{Error, Result};
pub use spectra::{AbundanceClass, AbundanceVector, Dataset, LabeledSample, Spectrum};
