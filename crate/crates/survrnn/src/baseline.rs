//! Kaplan-Meier product-limit estimator.
//!
//! A non-parametric, feature-free baseline: per interval `l`, the risk set
//! counts samples whose relevant time (event time for uncensored, observation
//! time for censored) falls in interval `l` or later, and the survival
//! estimate multiplies the factors `1 - d_l / n_l`. Censored samples tied
//! with events at the same interval stay in the risk set for that interval.

use crate::error::{Error, Result};
use crate::sample::{Dataset, Sample};
use crate::survival::SurvivalCurve;

/// Fitted product-limit curve, with the per-interval counts retained.
#[derive(Debug, Clone)]
pub struct KMCurve {
    survival: Vec<f64>,
    event_prob: Vec<f64>,
    at_risk: Vec<u64>,
    events: Vec<u64>,
}

impl KMCurve {
    /// `S_KM(t_1)..S_KM(t_L)`.
    pub fn survival(&self) -> &[f64] {
        &self.survival
    }

    /// `p_KM,l = S_KM(t_{l-1}) - S_KM(t_l)`; zero mass is kept as written and
    /// only clamped when consumed by the ANLP metric.
    pub fn event_prob(&self) -> &[f64] {
        &self.event_prob
    }

    /// Risk-set size `n_l` per interval.
    pub fn at_risk(&self) -> &[u64] {
        &self.at_risk
    }

    /// Event count `d_l` per interval.
    pub fn events(&self) -> &[u64] {
        &self.events
    }

    pub fn num_intervals(&self) -> usize {
        self.survival.len()
    }
}

/// Running product of integer factors `(n_l - d_l) / n_l`, kept as an exact
/// rational as long as it fits in `u128` so that the product-limit telescopes
/// without float drift (with no censoring the estimate is exactly the
/// survivor fraction). Falls back to float multiplication on overflow.
enum ProductLimit {
    Exact { num: u128, den: u128 },
    Float(f64),
}

impl ProductLimit {
    fn new() -> Self {
        Self::Exact { num: 1, den: 1 }
    }

    fn push(&mut self, survived: u64, at_risk: u64) {
        match self {
            Self::Exact { num, den } => {
                let (s, n) = (survived as u128, at_risk as u128);
                if num.checked_mul(s).is_some() && den.checked_mul(n).is_some() {
                    *num *= s;
                    *den *= n;
                    let g = gcd(*num, *den);
                    *num /= g;
                    *den /= g;
                } else {
                    *self =
                        Self::Float(*num as f64 / *den as f64 * (survived as f64 / at_risk as f64));
                }
            }
            Self::Float(v) => *v *= survived as f64 / at_risk as f64,
        }
    }

    fn value(&self) -> f64 {
        match self {
            Self::Exact { num, den } => *num as f64 / *den as f64,
            Self::Float(v) => *v,
        }
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Fits the product-limit curve over the dataset's grid.
pub fn km_fit(dataset: &Dataset) -> Result<KMCurve> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let grid = dataset.grid();
    let l_max = grid.num_intervals();

    // exits[l-1]: samples whose relevant time falls in interval l (they leave
    // the risk set after l); events[l-1]: uncensored events in interval l.
    let mut exits = vec![0u64; l_max];
    let mut events = vec![0u64; l_max];
    for sample in dataset.samples() {
        let l = grid.bucketize(sample.relevant_time())?;
        exits[l - 1] += 1;
        if !sample.is_censored() {
            events[l - 1] += 1;
        }
    }

    let mut at_risk = vec![0u64; l_max];
    let mut remaining = dataset.len() as u64;
    for l in 0..l_max {
        at_risk[l] = remaining;
        remaining -= exits[l];
    }

    let mut product = ProductLimit::new();
    let mut survival = Vec::with_capacity(l_max);
    let mut event_prob = Vec::with_capacity(l_max);
    let mut prev = 1.0;
    for l in 0..l_max {
        if at_risk[l] > 0 && events[l] > 0 {
            product.push(at_risk[l] - events[l], at_risk[l]);
        }
        let s = product.value();
        survival.push(s);
        event_prob.push(prev - s);
        prev = s;
    }

    Ok(KMCurve {
        survival,
        event_prob,
        at_risk,
        events,
    })
}

/// The product-limit estimator is not personalized: every sample receives the
/// population curve. The sample argument only fixes the call shape shared
/// with model predictors.
pub fn km_predict(curve: &KMCurve, _sample: &Sample) -> (SurvivalCurve, Vec<f64>) {
    (
        SurvivalCurve::from_values(curve.survival.clone()),
        curve.event_prob.clone(),
    )
}
