//! Synthetic data with known ground truth.
//!
//! Per-sample hazards are `h*_l = sigmoid(w . x + b_l)` over uniform features
//! `x in [0,1)^d`. The event interval is drawn by walking the intervals and
//! firing at the first `l` whose uniform draw falls below `h*_l`, capped at
//! `L`. Observation times come from a mixture: with probability `m` the
//! sample is observed through the full horizon `t_L` (never censored), and
//! otherwise `t` is uniform over the boundaries `{t_1..t_L}`. The weight `m`
//! is solved from the requested censor fraction and the uniform-observation
//! censoring probability, which is known exactly from the drawn event
//! intervals; a target of zero forces `t = t_L` for every sample.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::sample::{Dataset, Features, Sample};
use crate::survival::{HazardSequence, HAZARD_FLOOR};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub feature_dim: usize,
    pub num_samples: usize,
    pub grid: TimeGrid,
    /// Feature weights `w`, length `feature_dim`.
    pub hazard_weights: Vec<f64>,
    /// Per-interval bias `b_l`, length `num_intervals`.
    pub hazard_bias: Vec<f64>,
    /// Requested fraction of censored samples, in `[0, 1)`. Best effort: the
    /// uniform-observation mixture cannot censor more than its natural rate.
    pub censor_fraction_target: f64,
    pub rng_seed: u64,
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.num_samples == 0 {
            return Err(Error::InvalidArgument(
                "feature_dim and num_samples must be positive".into(),
            ));
        }
        if self.hazard_weights.len() != self.feature_dim {
            return Err(Error::ShapeMismatch(format!(
                "hazard_weights has length {}, feature_dim is {}",
                self.hazard_weights.len(),
                self.feature_dim
            )));
        }
        if self.hazard_bias.len() != self.grid.num_intervals() {
            return Err(Error::ShapeMismatch(format!(
                "hazard_bias has length {}, grid has {} intervals",
                self.hazard_bias.len(),
                self.grid.num_intervals()
            )));
        }
        if !(0.0..1.0).contains(&self.censor_fraction_target) {
            return Err(Error::InvalidArgument(format!(
                "censor_fraction_target must lie in [0, 1), got {}",
                self.censor_fraction_target
            )));
        }
        Ok(())
    }
}

/// Generation summary. `clamp_warnings` counts hazards that fell outside the
/// clamp range (degenerate weights produce warnings, not failures).
#[derive(Debug, Clone, PartialEq)]
pub struct SynthReport {
    pub clamp_warnings: usize,
    pub censored: usize,
    pub censor_rate: f64,
    /// Probability a uniform observation time censors a sample, computed
    /// exactly from the drawn event intervals.
    pub uniform_censor_prob: f64,
    /// Mixture weight on full-horizon observation.
    pub horizon_weight: f64,
}

/// Generates a dataset. Identical configs produce identical datasets.
pub fn synthesize(config: &SyntheticConfig) -> Result<(Dataset, SynthReport)> {
    config.validate()?;
    let grid = config.grid;
    let l_full = grid.num_intervals();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut clamp_warnings = 0usize;

    // Pass 1: features and event intervals.
    let mut drawn: Vec<(Features, usize)> = Vec::with_capacity(config.num_samples);
    let mut uniform_censor_sum = 0.0;
    for _ in 0..config.num_samples {
        let dense: Vec<f64> = (0..config.feature_dim)
            .map(|_| rng.gen_range(0.0..1.0))
            .collect();
        let features = Features::from_dense(&dense)?;
        let score = features.dot(&config.hazard_weights);

        let mut event_interval = l_full;
        for l in 1..=l_full {
            let raw = sigmoid(score + config.hazard_bias[l - 1]);
            if !(HAZARD_FLOOR..=1.0 - HAZARD_FLOOR).contains(&raw) {
                clamp_warnings += 1;
            }
            let hazard = raw.clamp(HAZARD_FLOOR, 1.0 - HAZARD_FLOOR);
            if rng.gen_range(0.0..1.0) < hazard {
                event_interval = l;
                break;
            }
        }
        // A uniform draw over {t_1..t_L} censors iff t < z, i.e. the drawn
        // boundary index is below the event interval.
        uniform_censor_sum += (event_interval - 1) as f64 / l_full as f64;
        drawn.push((features, event_interval));
    }

    let uniform_censor_prob = uniform_censor_sum / config.num_samples as f64;
    let horizon_weight = if config.censor_fraction_target == 0.0 {
        1.0
    } else if uniform_censor_prob <= config.censor_fraction_target {
        0.0
    } else {
        1.0 - config.censor_fraction_target / uniform_censor_prob
    };

    // Pass 2: observation times and censor status.
    let mut samples = Vec::with_capacity(config.num_samples);
    let mut censored = 0usize;
    for (features, event_interval) in drawn {
        let observed_interval = if rng.gen_range(0.0..1.0) < horizon_weight {
            l_full
        } else {
            rng.gen_range(1..=l_full)
        };
        let t = grid.boundary(observed_interval);
        let z = if observed_interval >= event_interval {
            Some(grid.boundary(event_interval))
        } else {
            censored += 1;
            None
        };
        samples.push(Sample::new(features, t, z)?);
    }

    let report = SynthReport {
        clamp_warnings,
        censored,
        censor_rate: censored as f64 / config.num_samples as f64,
        uniform_censor_prob,
        horizon_weight,
    };
    Ok((Dataset::new(samples, config.feature_dim, grid)?, report))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Generator manifest: everything needed to recompute the true hazards of
/// any sample, written next to generated datasets for later oracle
/// comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub feature_dim: usize,
    pub interval_size: f64,
    pub num_intervals: usize,
    pub hazard_weights: Vec<f64>,
    pub hazard_bias: Vec<f64>,
    pub rng_seed: u64,
    pub censor_fraction_target: f64,
}

impl GroundTruth {
    pub fn from_config(config: &SyntheticConfig) -> Self {
        Self {
            feature_dim: config.feature_dim,
            interval_size: config.grid.interval_size(),
            num_intervals: config.grid.num_intervals(),
            hazard_weights: config.hazard_weights.clone(),
            hazard_bias: config.hazard_bias.clone(),
            rng_seed: config.rng_seed,
            censor_fraction_target: config.censor_fraction_target,
        }
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.interval_size, self.num_intervals)
    }

    /// True generative hazard sequence of a sample over the full grid.
    ///
    /// Matches the sampling process exactly: the parametric field
    /// `sigmoid(w . x + b_l)` below the horizon, and hazard 1 (clamped) at
    /// the last interval, where the generator caps undrawn events — all
    /// remaining mass belongs to `V_L`.
    pub fn hazards(&self, features: &Features) -> HazardSequence {
        let score = features.dot(&self.hazard_weights);
        let mut values: Vec<f64> = self
            .hazard_bias
            .iter()
            .map(|b| sigmoid(score + b))
            .collect();
        if let Some(last) = values.last_mut() {
            *last = 1.0;
        }
        HazardSequence::new(values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidArgument(format!("manifest serialization: {e}")))?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidArgument(format!("manifest parse: {e}")))
    }
}
