//! Discrete-time survival analysis with a recurrent conditional-hazard model.
//!
//! The model predicts, for each sample and each interval of a uniform time
//! grid, the conditional probability that the event occurs in that interval
//! given it has not occurred before. The probability chain rule then composes
//! those hazards into survival curves, event rates and per-interval event
//! probabilities, and maximum-likelihood training handles right-censored
//! observations through dedicated partial-likelihood terms.
//!
//! Modules:
//! - [`grid`], [`sample`]: the time grid and observation types.
//! - [`survival`]: chain-rule probability algebra and the loss terms with
//!   analytic hazard gradients.
//! - [`nn`]: the LSTM hazard network with exact backpropagation through time.
//! - [`baseline`]: Kaplan-Meier product-limit estimator.
//! - [`metrics`]: time-dependent C-index, ANLP, significance tests.
//! - [`data`]: CSV ingestion, feature encoding, splitting, and a synthetic
//!   generator with known ground-truth hazards.
//! - [`train`]: mini-batch Adam training with early stopping.
//! - [`checkpoint`]: versioned, portable model serialization.

pub mod baseline;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod exec;
pub mod grid;
pub mod metrics;
pub mod nn;
pub mod sample;
pub mod survival;
pub mod train;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use sample::{Dataset, Features, Sample};
