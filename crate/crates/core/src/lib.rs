//! Tools for measuring how much a trained regression model reveals about the
//! distribution its training data came from.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: seeded random streams, datasets, least squares, summary statistics.
//! - [`nets`]: small MLPs with exact gradients, ERM and IRM training.
//! - [`datagen`]: the families of training distributions `D^r`.
//! - [`game`]: the distribution inference game and the adversary advantage.
//! - [`attacks`]: shadow-model corpora and white-/black-box meta-models.
//! - [`theory`]: Monte Carlo checks of the closed-form linear-regression leakage results.
//! - [`experiments`]: pre-wired sweeps that tie everything together.
//! - [`cli`]: configuration loading and the `distleak` command-line front end.

pub mod error;
pub mod numerics;
pub mod nets;
pub mod datagen;
pub mod game;
pub mod attacks;
pub mod theory;
pub mod experiments;
pub mod cli;

pub use error::{Error, Result};
