//! Texture analysis with exponent-weighted triangular prism fractal descriptors.
//!
//! The gray-level surface of an image is tessellated into ε×ε cells. Each cell
//! becomes four triangles meeting at an apex whose height is the mean of the
//! cell's corners, and the summed triangle areas, raised to an exponent α and
//! accumulated over the grid, yield one descriptor value `ln S^α(ε)` per
//! `(α, ε)` pair.
//!
//! Modules:
//!
//! * [`image`]: grayscale images, PGM/PNG I/O, windowing, perturbations and
//!   fBm synthesis.
//! * [`prism`]: cell geometry, weighted area sums, descriptor vectors and the
//!   triangular prism fractal dimension.
//! * [`stats`]: covariance, Karhunen-Loève transform, LDA and stratified
//!   cross-validation.
//! * [`eval`]: retrieval rankings, precision/recall curves, AUC and confusion
//!   matrices.
//! * [`cli`]: the experiment driver behind the `triprism` binary.

pub mod cli;
pub mod error;
pub mod eval;
pub mod image;
pub mod prism;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
pub use image::GrayImage;
pub use prism::{DescriptorVector, ExponentRange, ScaleSchedule};
pub use stats::{FeatureMatrix, KlModel, LabeledDataset, LdaModel};
