//! Mini-batch maximum-likelihood training.
//!
//! Each epoch shuffles the training set under the run seed, groups samples of
//! similar unroll length into batches (a throughput decision only — the math
//! is per-sample), and for every batch runs forward/backward per sample,
//! clips the global gradient norm, and applies an Adam update. Validation
//! C-index drives early stopping and selects the returned parameters.

use crate::error::{Error, Result};
use crate::exec;
use crate::metrics;
use crate::nn::{self, ModelParams};
use crate::sample::Dataset;
use crate::survival::{self, Ablation, LossBreakdown, Reduction, SampleTarget};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Balance between the event-interval loss and the partial-likelihood
    /// pair in the total objective.
    pub alpha: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop once validation C-index has failed to improve for more than this
    /// many consecutive epochs.
    pub patience: usize,
    pub grad_clip_norm: f64,
    pub seed: u64,
    pub ablation: Ablation,
    pub reduction: Reduction,
    pub d_emb: usize,
    pub d_hid: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 128,
            max_epochs: 30,
            patience: 5,
            grad_clip_norm: 5.0,
            seed: 0,
            ablation: Ablation::Full,
            reduction: Reduction::Mean,
            d_emb: 32,
            d_hid: 64,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("grad_clip_norm", self.grad_clip_norm),
            ("adam_eps", self.adam_eps),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidArgument(
                "Adam betas must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Adam optimizer state (first/second moment estimates, step counter).
pub struct Adam {
    m: ModelParams,
    v: ModelParams,
    step: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(template: &ModelParams, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            m: template.zeros_like(),
            v: template.zeros_like(),
            step: 0,
            beta1,
            beta2,
            eps,
        }
    }

    /// One update: `p -= lr * m_hat / (sqrt(v_hat) + eps)` with bias-corrected
    /// moment estimates.
    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        self.m.zip_apply(grads, |m, g| *m = b1 * *m + (1.0 - b1) * g);
        self.v.zip_apply(grads, |v, g| *v = b2 * *v + (1.0 - b2) * g * g);
        let corr1 = 1.0 - b1.powi(self.step as i32);
        let corr2 = 1.0 - b2.powi(self.step as i32);
        let eps = self.eps;
        params.zip2_apply(&self.m, &self.v, |p, m, v| {
            let m_hat = m / corr1;
            let v_hat = v / corr2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        });
    }
}

/// Scales all gradients so the global norm does not exceed `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut ModelParams, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm {
        let scale = max_norm / norm;
        grads.apply(|g| *g *= scale);
    }
    norm
}

/// Loss and parameter gradients of one batch: every sample is unrolled to its
/// own observed interval, per-sample work runs through the parallel seam, and
/// gradients reduce in sample order so results are bitwise reproducible.
pub fn batch_gradient(
    params: &ModelParams,
    dataset: &Dataset,
    indices: &[usize],
    alpha: f64,
    ablation: Ablation,
    reduction: Reduction,
) -> Result<(LossBreakdown, ModelParams)> {
    if indices.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let grid = dataset.grid();
    let l_full = grid.num_intervals();

    let forward_results = exec::par_map(indices, |&i| {
        let sample = &dataset.samples()[i];
        let target = SampleTarget::for_sample(sample, grid)?;
        let (hazards, cache) =
            nn::forward(params, sample.features(), target.observed_interval, l_full)?;
        Ok::<_, Error>((hazards, cache, target))
    });

    let mut hazards = Vec::with_capacity(indices.len());
    let mut caches = Vec::with_capacity(indices.len());
    let mut targets = Vec::with_capacity(indices.len());
    for result in forward_results {
        let (h, c, t) = result?;
        hazards.push(h);
        caches.push(c);
        targets.push(t);
    }

    let batch_loss = survival::loss_total(&hazards, &targets, alpha, ablation, reduction)?;

    let per_sample = exec::par_map_range(indices.len(), |i| {
        nn::backward(params, &caches[i], &batch_loss.hazard_grads[i])
    });

    let mut grads = params.zeros_like();
    for g in per_sample {
        grads.zip_apply(&g?, |acc, v| *acc += v);
    }
    Ok((batch_loss.breakdown, grads))
}

/// Loss terms and validation score of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub val_c_index: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Parameters from the best-validation epoch (the initial parameters if
    /// no epoch ran).
    pub params: ModelParams,
    pub history: Vec<EpochStats>,
    pub best_epoch: Option<usize>,
    pub best_val_c_index: Option<f64>,
}

/// Runs the training loop and returns the best-validation parameters.
pub fn train(
    train_set: &Dataset,
    validation_set: &Dataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() || validation_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train_set.feature_dim() != validation_set.feature_dim() {
        return Err(Error::ShapeMismatch(format!(
            "train feature_dim {} vs validation feature_dim {}",
            train_set.feature_dim(),
            validation_set.feature_dim()
        )));
    }
    if train_set.grid() != validation_set.grid() {
        return Err(Error::ShapeMismatch(
            "train and validation sets use different grids".into(),
        ));
    }

    let mut params = nn::init_params(
        train_set.feature_dim(),
        config.d_emb,
        config.d_hid,
        config.seed,
    )?;
    let mut adam = Adam::new(&params, config.beta1, config.beta2, config.adam_eps);
    // Separate stream from parameter initialization.
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);

    // Unroll lengths for length-grouped batching.
    let grid = train_set.grid();
    let mut unroll = Vec::with_capacity(train_set.len());
    for sample in train_set.samples() {
        unroll.push(grid.bucketize(sample.observed_time())?);
    }

    let mut history: Vec<EpochStats> = Vec::new();
    let mut best: Option<(usize, f64, ModelParams)> = None;
    let mut stale = 0usize;

    for epoch in 0..config.max_epochs {
        let mut indices: Vec<usize> = (0..train_set.len()).collect();
        indices.shuffle(&mut shuffle_rng);
        // Group similar unroll lengths; the shuffle decides order within a
        // length and the batch order is reshuffled below.
        indices.sort_by_key(|&i| unroll[i]);
        let mut batches: Vec<&[usize]> = indices.chunks(config.batch_size).collect();
        batches.shuffle(&mut shuffle_rng);

        let mut sums = LossSums::default();
        for (batch_idx, batch) in batches.iter().enumerate() {
            let (breakdown, mut grads) = batch_gradient(
                &params,
                train_set,
                batch,
                config.alpha,
                config.ablation,
                config.reduction,
            )?;
            if !breakdown.total.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            sums.add(&breakdown, batch.len(), config.reduction);
            clip_global_norm(&mut grads, config.grad_clip_norm);
            adam.step(&mut params, &grads, config.learning_rate);
        }

        let val_c_index = validation_c_index(&params, validation_set)?;
        history.push(EpochStats {
            epoch,
            loss: sums.breakdown(config.alpha, train_set.len(), config.reduction),
            val_c_index,
        });

        let improved = best
            .as_ref()
            .map(|(_, best_val, _)| val_c_index > *best_val)
            .unwrap_or(true);
        if improved {
            best = Some((epoch, val_c_index, params.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale > config.patience {
                break;
            }
        }
    }

    match best {
        Some((epoch, val, best_params)) => Ok(TrainOutcome {
            params: best_params,
            history,
            best_epoch: Some(epoch),
            best_val_c_index: Some(val),
        }),
        None => Ok(TrainOutcome {
            params,
            history,
            best_epoch: None,
            best_val_c_index: None,
        }),
    }
}

/// C-index of the model on a dataset, from full-grid event-rate curves.
pub fn validation_c_index(params: &ModelParams, dataset: &Dataset) -> Result<f64> {
    let predictions = nn::predict(params, dataset)?;
    let curves: Vec<Vec<f64>> = predictions.into_iter().map(|p| p.event_rate).collect();
    metrics::c_index(&curves, dataset)
}

/// Accumulates per-batch loss terms back into whole-epoch terms.
#[derive(Default)]
struct LossSums {
    l_z: f64,
    l_uncensored: f64,
    l_censored: f64,
    samples: usize,
}

impl LossSums {
    fn add(&mut self, b: &LossBreakdown, batch_len: usize, reduction: Reduction) {
        let w = match reduction {
            Reduction::Mean => batch_len as f64, // undo the per-batch mean
            Reduction::Sum => 1.0,
        };
        self.l_z += b.l_z * w;
        self.l_uncensored += b.l_uncensored * w;
        self.l_censored += b.l_censored * w;
        self.samples += batch_len;
    }

    fn breakdown(&self, alpha: f64, total_samples: usize, reduction: Reduction) -> LossBreakdown {
        debug_assert_eq!(self.samples, total_samples);
        let scale = match reduction {
            Reduction::Mean => 1.0 / total_samples as f64,
            Reduction::Sum => 1.0,
        };
        let l_z = self.l_z * scale;
        let l_uncensored = self.l_uncensored * scale;
        let l_censored = self.l_censored * scale;
        let l_c = l_uncensored + l_censored;
        LossBreakdown {
            l_z,
            l_uncensored,
            l_censored,
            l_c,
            total: alpha * l_z + (1.0 - alpha) * l_c,
            alpha,
        }
    }
}

/// Writes the epoch history as CSV.
pub fn write_history_csv(history: &[EpochStats], path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "epoch,l_z,l_uncensored,l_censored,l_c,total,val_c_index")?;
    for e in history {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            e.epoch,
            e.loss.l_z,
            e.loss.l_uncensored,
            e.loss.l_censored,
            e.loss.l_c,
            e.loss.total,
            e.val_c_index
        )?;
    }
    out.flush()?;
    Ok(())
}
