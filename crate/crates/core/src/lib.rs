//! Coverage-guided metamorphic testing for neural steering models.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: a small inference engine (Dense, Conv2D, Flatten, LSTM) whose
//!   forward pass records every layer's raw output.
//! - [`coverage`]: neuron activation sets, coverage ratios and set algebra.
//! - [`imgproc`]: the pixel-level transformations used to synthesize test
//!   images (linear, affine, blur, fog and rain).
//! - [`search`]: greedy coverage-guided combination of transformations.
//! - [`oracle`]: metamorphic relations over steering predictions.
//! - [`stats`]: rank correlation, rank-sum test and effect sizes.

pub mod coverage;
pub mod error;
pub mod imgproc;
pub mod nn;
pub mod oracle;
pub mod rng;
pub mod search;
pub mod stats;

pub use error::{Error, Result};
