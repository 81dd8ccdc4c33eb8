//! Seeded sampling and the small linear-algebra kernels the rest of the crate builds on.

mod dataset;
mod ols;
mod rng;
mod stats;

pub use dataset::Dataset;
pub use ols::{ols_fit, OlsFit, MAX_CONDITION};
pub use rng::{gaussian, stream_key, SeededRng};
pub use stats::{ci95_halfwidth, mean, median, sample_variance, sum, unbiased_variance, CompensatedSum, Z95};
