//! Geographically weighted modelling: summary statistics, PCA, and regression.
//!
//! Every model in this crate follows the same moving-window template: at each
//! target location a diagonal weight matrix is built from distances through a
//! kernel, and a weighted version of the classical statistic or model is
//! fitted there. Modules:
//!
//! - [`spatial`]: datasets (coordinates + attributes) and variable selection.
//! - [`distance`]: Minkowski and great-circle metrics, distance matrices, and
//!   a binary on-disk cache.
//! - [`weighting`]: kernel functions, fixed/adaptive bandwidths, and the
//!   golden-section bandwidth optimizer.
//! - [`gwss`]: weighted local means, spreads, skews, quantiles, and
//!   Pearson/Spearman correlations.
//! - [`gwpca`]: locally weighted principal components, with an optional
//!   minimum-covariance-determinant robustification.
//! - [`gwr`]: local regression with AICc/CV bandwidth selection, robust
//!   variants, stepwise specification search, and out-of-sample prediction.
//! - [`collin`]: local collinearity diagnostics and the locally compensated
//!   ridge variant of the regression.

pub mod collin;
pub mod distance;
pub mod error;
pub mod gwpca;
pub mod gwr;
pub mod gwss;
pub mod spatial;
mod util;
pub mod weighting;

pub use error::{GwError, Result};
