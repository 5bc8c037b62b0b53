//! Gated convolutional networks for cross-domain sentiment classification.
//!
//! Reviews are embedded, convolved with kernels of several widths, filtered by a
//! gate branch (GLU, GTU or GTRU), max-pooled over time and fed to a sigmoid
//! output unit. Training uses Adadelta with early stopping on validation loss.
//! The [`harness`] module runs the train-on-one-domain, test-on-another
//! protocol, including bag-of-words and TF-IDF logistic-regression baselines.

pub mod baselines;
pub mod checks;
pub mod config;
pub mod error;
pub mod harness;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod text;
pub mod train;

pub use error::{Error, Result};
pub use rng::Rng;
