//! Image classification through an oriented filter bank and a kernel
//! subspace chosen by entropy contribution.
//!
//! The processing chain:
//!
//! 1. [`image`] — 8-bit PGM I/O, bilinear resizing, manifest-driven
//!    datasets.
//! 2. [`gabor`] — a bank of complex band-pass filters applied by circular
//!    FFT convolution; per-filter response magnitudes.
//! 3. [`features`] — block-max features over the magnitudes, floored at the
//!    global mean and concatenated across the bank.
//! 4. [`kernel`] — kernel functions and Gram matrices over feature vectors.
//! 5. [`keca`] — eigendecomposition (cyclic Jacobi), axis selection by
//!    entropy contribution, out-of-sample projection, model files.
//! 6. [`classify`] — nearest class mean under four distance measures.
//! 7. [`eval`] — accept/reject protocol, confusion counts, report
//!    rendering.
//! 8. [`config`] / [`pipeline`] — configuration and end-to-end glue.

pub mod classify;
pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod gabor;
pub mod image;
pub mod kernel;
pub mod keca;
pub mod pipeline;
mod util;

pub use classify::{fit_classes, ClassModel, Measure};
pub use config::{KernelChoice, MeasureChoice, PipelineConfig, TauSweep};
pub use error::{Error, Result};
pub use eval::{compute_metrics, ConfusionCounts, Metrics, Rate, ReportRow};
pub use features::{FeatureParams, FeatureVector};
pub use gabor::{GaborParams, GaborTransform, MagnitudeImage};
pub use image::{Dataset, GrayImage, LabeledImage, Role};
pub use keca::{KecaModel, Retention};
pub use kernel::{KernelKind, KernelMatrix, KernelSpec};
pub use pipeline::{run_protocol, FittedPipeline, Pipeline};
