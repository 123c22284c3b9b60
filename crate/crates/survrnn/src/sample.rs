//! Observations and datasets.
//!
//! A [`Sample`] is one tracked object: its encoded features, the observation
//! time `t`, and — for uncensored samples only — the event time `z`. Right
//! censoring means the event had not occurred by `t`, so `z` is unknown and
//! only the lower bound `t` is kept.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Sparse feature vector: strictly increasing `(index, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pairs: Vec<(usize, f64)>,
}

impl Features {
    pub fn new(pairs: Vec<(usize, f64)>) -> Result<Self> {
        for window in pairs.windows(2) {
            if window[0].0 >= window[1].0 {
                return Err(Error::InvalidArgument(format!(
                    "feature indices must be strictly increasing, got {} then {}",
                    window[0].0, window[1].0
                )));
            }
        }
        if let Some((i, v)) = pairs.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature {i} = {v}")));
        }
        Ok(Self { pairs })
    }

    /// Builds a sparse vector from a dense slice, dropping exact zeros.
    pub fn from_dense(values: &[f64]) -> Result<Self> {
        Self::new(
            values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, *v))
                .collect(),
        )
    }

    pub fn empty() -> Self {
        Self { pairs: Vec::new() }
    }

    pub fn pairs(&self) -> &[(usize, f64)] {
        &self.pairs
    }

    pub fn max_index(&self) -> Option<usize> {
        self.pairs.last().map(|(i, _)| *i)
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.pairs.iter().map(|(i, v)| v * weights[*i]).sum()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (i, v) in &self.pairs {
            out[*i] = *v;
        }
        out
    }
}

/// One observation. `event_time` is `Some` exactly when the sample is
/// uncensored; the explicit censor flag is kept in sync by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    features: Features,
    observed_time: f64,
    event_time: Option<f64>,
    censored: bool,
}

impl Sample {
    pub fn new(features: Features, observed_time: f64, event_time: Option<f64>) -> Result<Self> {
        if !(observed_time > 0.0) || !observed_time.is_finite() {
            return Err(Error::InvalidTime(observed_time));
        }
        if let Some(z) = event_time {
            if !(z > 0.0) || !z.is_finite() {
                return Err(Error::InvalidTime(z));
            }
            if z > observed_time {
                return Err(Error::InvalidArgument(format!(
                    "event time {z} exceeds observed time {observed_time}; \
                     an uncensored event must lie within the tracking window"
                )));
            }
        }
        Ok(Self {
            features,
            observed_time,
            censored: event_time.is_none(),
            event_time,
        })
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    /// Observation time `t`.
    pub fn observed_time(&self) -> f64 {
        self.observed_time
    }

    /// True event time `z`, known only for uncensored samples.
    pub fn event_time(&self) -> Option<f64> {
        self.event_time
    }

    pub fn is_censored(&self) -> bool {
        self.censored
    }

    /// The time that places this sample in a risk set: `z` when the event was
    /// observed, otherwise the censoring time `t`.
    pub fn relevant_time(&self) -> f64 {
        self.event_time.unwrap_or(self.observed_time)
    }
}

/// An ordered collection of samples over a shared feature space and grid.
#[derive(Debug, Clone)]
pub struct Dataset {
    samples: Vec<Sample>,
    feature_dim: usize,
    grid: TimeGrid,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, feature_dim: usize, grid: TimeGrid) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::InvalidArgument("feature_dim must be positive".into()));
        }
        for (i, sample) in samples.iter().enumerate() {
            if sample.observed_time() > grid.horizon() {
                return Err(Error::OutOfGrid {
                    time: sample.observed_time(),
                    horizon: grid.horizon(),
                });
            }
            if let Some(max) = sample.features().max_index() {
                if max >= feature_dim {
                    return Err(Error::InvalidArgument(format!(
                        "sample {i} uses feature index {max}, feature_dim is {feature_dim}"
                    )));
                }
            }
        }
        Ok(Self {
            samples,
            feature_dim,
            grid,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn censored_fraction(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().filter(|s| s.is_censored()).count() as f64 / self.samples.len() as f64
    }
}
