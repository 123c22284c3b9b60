//! Probability algebra over per-interval conditional hazards.
//!
//! Given hazards `h_l = Pr(z in V_l | z > t_{l-1})`, the chain rule composes
//!
//! - survival      `S(t_l) = prod_{j<=l} (1 - h_j)`
//! - event rate    `W(t_l) = 1 - S(t_l)`
//! - event mass    `p_l    = h_l * prod_{j<l} (1 - h_j) = S(t_{l-1}) - S(t_l)`
//!
//! and the censorship-aware losses
//!
//! - `loss_z`          = -log p_{l_z}                       (uncensored, event interval)
//! - `loss_uncensored` = -log W(t_{l_t})                    (uncensored, window edge)
//! - `loss_censored`   = -log S(t_{l_t})                    (censored, window edge)
//!
//! with exact analytic gradients w.r.t. the hazards. Running products are kept
//! in log space so that sequences hundreds of intervals long do not underflow.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::sample::Sample;

/// Hazards are clamped into `[HAZARD_FLOOR, 1 - HAZARD_FLOOR]` before any log.
pub const HAZARD_FLOOR: f64 = 1e-7;

/// Probability masses (`W`, `p`) are clamped to at least this before any log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Per-sample vector of conditional hazards, one per interval `1..=l_max`.
/// Values are clamped into the open unit interval on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardSequence {
    values: Vec<f64>,
}

impl HazardSequence {
    pub fn new(values: Vec<f64>) -> Self {
        let values = values
            .into_iter()
            .map(|h| {
                debug_assert!(h.is_finite(), "hazard must be finite, got {h}");
                h.clamp(HAZARD_FLOOR, 1.0 - HAZARD_FLOOR)
            })
            .collect();
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-interval survival values `S(t_1)..S(t_l)`, monotone non-increasing
/// from the implied `S(t_0) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    values: Vec<f64>,
}

impl SurvivalCurve {
    /// Wraps precomputed survival values. Callers own the monotonicity
    /// invariant; the product-limit constructions in this crate satisfy it.
    pub(crate) fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `S(t_l)`, with `at(0) = 1`.
    pub fn at(&self, l: usize) -> f64 {
        if l == 0 {
            1.0
        } else {
            self.values[l - 1]
        }
    }
}

/// Running log-survival prefix: entry `l` is `sum_{j<=l} log(1 - h_j)`,
/// with an implicit 0 at `l = 0`.
fn log_survival_prefix(h: &HazardSequence) -> Vec<f64> {
    let mut acc = 0.0;
    h.values
        .iter()
        .map(|&hj| {
            acc += (-hj).ln_1p();
            acc
        })
        .collect()
}

/// Chain-rule survival curve `S(t_l) = prod_{j<=l} (1 - h_j)`.
///
/// An empty sequence yields an empty curve (`S` is implicitly 1).
pub fn survival_from_hazards(h: &HazardSequence) -> SurvivalCurve {
    SurvivalCurve::from_values(log_survival_prefix(h).iter().map(|c| c.exp()).collect())
}

/// Event rate `W(t_l) = 1 - S(t_l)`, elementwise complement of the survival
/// curve so that `S + W = 1` holds by construction.
pub fn event_rate_from_hazards(h: &HazardSequence) -> Vec<f64> {
    survival_from_hazards(h)
        .values()
        .iter()
        .map(|s| 1.0 - s)
        .collect()
}

/// Probability mass of the event falling in interval `l` (1-based):
/// `p_l = h_l * prod_{j<l} (1 - h_j)`.
pub fn event_prob_at(h: &HazardSequence, l: usize) -> Result<f64> {
    if l == 0 || l > h.len() {
        return Err(Error::IndexOutOfRange {
            index: l,
            len: h.len(),
        });
    }
    let prefix = log_survival_prefix(h);
    let log_prev = if l >= 2 { prefix[l - 2] } else { 0.0 };
    Ok(h.values[l - 1] * log_prev.exp())
}

/// All interval masses `p_1..p_l_max` in one pass.
pub fn event_probs(h: &HazardSequence) -> Vec<f64> {
    let mut log_prev = 0.0f64;
    h.values
        .iter()
        .map(|&hl| {
            let p = hl * log_prev.exp();
            log_prev += (-hl).ln_1p();
            p
        })
        .collect()
}

/// A loss value together with its gradient w.r.t. every hazard entry.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Negative log-likelihood of the event landing in its true interval `l_z`:
/// `-[log h_{l_z} + sum_{l<l_z} log(1 - h_l)]`.
pub fn loss_z(h: &HazardSequence, l_z: usize) -> Result<LossGrad> {
    if l_z == 0 || l_z > h.len() {
        return Err(Error::IndexOutOfRange {
            index: l_z,
            len: h.len(),
        });
    }
    let hs = h.values();
    let mut value = -hs[l_z - 1].ln();
    let mut grad = vec![0.0; hs.len()];
    grad[l_z - 1] = -1.0 / hs[l_z - 1];
    for l in 0..l_z - 1 {
        value -= (-hs[l]).ln_1p();
        grad[l] = 1.0 / (1.0 - hs[l]);
    }
    Ok(LossGrad { value, grad })
}

/// Negative partial log-likelihood of the event rate at the window edge:
/// `-log W(t_{l_t})` with `W = 1 - prod_{l<=l_t} (1 - h_l)`.
///
/// `W` is clamped to at least [`PROB_FLOOR`] before the log, which also
/// bounds the gradient when every hazard sits at the clamp floor.
pub fn loss_uncensored(h: &HazardSequence, l_t: usize) -> Result<LossGrad> {
    if l_t == 0 || l_t > h.len() {
        return Err(Error::IndexOutOfRange {
            index: l_t,
            len: h.len(),
        });
    }
    let hs = h.values();
    let log_surv: f64 = hs[..l_t].iter().map(|&hl| (-hl).ln_1p()).sum();
    let w = (-log_surv.exp_m1()).max(PROB_FLOOR);
    let value = -w.ln();
    let mut grad = vec![0.0; hs.len()];
    for l in 0..l_t {
        // dW/dh_l = prod_{j<=l_t, j!=l} (1 - h_j)
        let dw = (log_surv - (-hs[l]).ln_1p()).exp();
        grad[l] = -dw / w;
    }
    Ok(LossGrad { value, grad })
}

/// Negative partial log-likelihood of surviving past the window edge:
/// `-log S(t_{l_t}) = -sum_{l<=l_t} log(1 - h_l)`.
pub fn loss_censored(h: &HazardSequence, l_t: usize) -> Result<LossGrad> {
    if l_t == 0 || l_t > h.len() {
        return Err(Error::IndexOutOfRange {
            index: l_t,
            len: h.len(),
        });
    }
    let hs = h.values();
    let mut value = 0.0;
    let mut grad = vec![0.0; hs.len()];
    for l in 0..l_t {
        value -= (-hs[l]).ln_1p();
        grad[l] = 1.0 / (1.0 - hs[l]);
    }
    Ok(LossGrad { value, grad })
}

/// Which loss terms participate in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    /// All three terms.
    Full,
    /// Keep `loss_z` + `loss_uncensored`; censored samples contribute nothing.
    UncensoredOnly,
    /// Keep `loss_z` + `loss_censored`; drop the event-rate term.
    CensoredOnly,
}

/// How per-sample terms are reduced over a batch before the alpha mix.
///
/// `Mean` divides every term by the full batch size, so the balance set by
/// alpha does not depend on batch size; `Sum` leaves the raw sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

/// Interval targets for one sample: `l_z = bucketize(z)` when uncensored,
/// and `l_t = bucketize(t)` always.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleTarget {
    pub event_interval: Option<usize>,
    pub observed_interval: usize,
}

impl SampleTarget {
    pub fn for_sample(sample: &Sample, grid: &TimeGrid) -> Result<Self> {
        let event_interval = match sample.event_time() {
            Some(z) => Some(grid.bucketize(z)?),
            None => None,
        };
        Ok(Self {
            event_interval,
            observed_interval: grid.bucketize(sample.observed_time())?,
        })
    }
}

/// Loss terms of a batch. `l_c = l_uncensored + l_censored` and
/// `total = alpha * l_z + (1 - alpha) * l_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub l_z: f64,
    pub l_uncensored: f64,
    pub l_censored: f64,
    pub l_c: f64,
    pub total: f64,
    pub alpha: f64,
}

/// Batch loss with one hazard-gradient vector per sample (same length as
/// that sample's hazard sequence).
#[derive(Debug, Clone)]
pub struct BatchLoss {
    pub breakdown: LossBreakdown,
    pub hazard_grads: Vec<Vec<f64>>,
}

/// Routes every sample by censor status, reduces each term over the batch,
/// and mixes them as `alpha * l_z + (1 - alpha) * (l_uncensored + l_censored)`.
///
/// Uncensored samples contribute `loss_z` at their event interval and
/// `loss_uncensored` at the window edge; censored samples contribute
/// `loss_censored` at the window edge. [`Ablation`] drops one partial term.
pub fn loss_total(
    hazards: &[HazardSequence],
    targets: &[SampleTarget],
    alpha: f64,
    ablation: Ablation,
    reduction: Reduction,
) -> Result<BatchLoss> {
    if hazards.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if hazards.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} hazard sequences vs {} targets",
            hazards.len(),
            targets.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }

    let scale = match reduction {
        Reduction::Mean => 1.0 / hazards.len() as f64,
        Reduction::Sum => 1.0,
    };

    let mut sum_z = 0.0;
    let mut sum_unc = 0.0;
    let mut sum_cen = 0.0;
    let mut hazard_grads = Vec::with_capacity(hazards.len());

    for (h, target) in hazards.iter().zip(targets) {
        let mut grad = vec![0.0; h.len()];
        match target.event_interval {
            Some(l_z) => {
                let lz = loss_z(h, l_z)?;
                sum_z += lz.value;
                axpy(&mut grad, alpha * scale, &lz.grad);
                if ablation != Ablation::CensoredOnly {
                    let lu = loss_uncensored(h, target.observed_interval)?;
                    sum_unc += lu.value;
                    axpy(&mut grad, (1.0 - alpha) * scale, &lu.grad);
                }
            }
            None => {
                if ablation != Ablation::UncensoredOnly {
                    let lc = loss_censored(h, target.observed_interval)?;
                    sum_cen += lc.value;
                    axpy(&mut grad, (1.0 - alpha) * scale, &lc.grad);
                }
            }
        }
        hazard_grads.push(grad);
    }

    let l_z = sum_z * scale;
    let l_uncensored = sum_unc * scale;
    let l_censored = sum_cen * scale;
    let l_c = l_uncensored + l_censored;
    Ok(BatchLoss {
        breakdown: LossBreakdown {
            l_z,
            l_uncensored,
            l_censored,
            l_c,
            total: alpha * l_z + (1.0 - alpha) * l_c,
            alpha,
        },
        hazard_grads,
    })
}

fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (dst, src) in acc.iter_mut().zip(x) {
        *dst += a * src;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hazards(rng: &mut ChaCha8Rng, len: usize) -> HazardSequence {
        HazardSequence::new((0..len).map(|_| rng.gen_range(0.05..0.95)).collect())
    }

    /// Independent oracle: naive sequential multiplication, no log space.
    fn naive_survival(h: &HazardSequence) -> Vec<f64> {
        let mut out = Vec::new();
        let mut prod = 1.0;
        for &hl in h.values() {
            prod *= 1.0 - hl;
            out.push(prod);
        }
        out
    }

    /// Central finite difference of `f` w.r.t. hazard entry `idx`.
    fn finite_diff(
        h: &HazardSequence,
        idx: usize,
        step: f64,
        f: impl Fn(&HazardSequence) -> f64,
    ) -> f64 {
        let mut lo = h.values().to_vec();
        let mut hi = lo.clone();
        lo[idx] -= step;
        hi[idx] += step;
        (f(&HazardSequence::new(hi)) - f(&HazardSequence::new(lo))) / (2.0 * step)
    }

    fn assert_close(actual: f64, expected: f64, rel: f64, what: &str) {
        let denom = actual.abs().max(expected.abs()).max(1e-9);
        assert!(
            (actual - expected).abs() / denom < rel,
            "{what}: actual {actual} vs expected {expected}"
        );
    }

    #[test]
    fn survival_direct_product() {
        let h = HazardSequence::new(vec![0.5, 0.5, 0.5]);
        let s = survival_from_hazards(&h);
        assert_close(s.values()[0], 0.5, 1e-12, "S1");
        assert_close(s.values()[1], 0.25, 1e-12, "S2");
        assert_close(s.values()[2], 0.125, 1e-12, "S3");
    }

    #[test]
    fn survival_no_hazard_limit() {
        let h = HazardSequence::new(vec![0.0; 8]); // clamped up to the floor
        let s = survival_from_hazards(&h);
        for &v in s.values() {
            assert!((v - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn survival_matches_naive_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_hazards(&mut rng, 20);
        let s = survival_from_hazards(&h);
        for (a, b) in s.values().iter().zip(naive_survival(&h)) {
            assert_close(*a, b, 1e-12, "naive product");
        }
    }

    #[test]
    fn empty_sequence_gives_empty_curve() {
        let h = HazardSequence::new(vec![]);
        assert!(survival_from_hazards(&h).is_empty());
        assert!(event_rate_from_hazards(&h).is_empty());
    }

    #[test]
    fn event_rate_complement() {
        let h = HazardSequence::new(vec![0.5, 0.5]);
        let w = event_rate_from_hazards(&h);
        assert_close(w[0], 0.5, 1e-12, "W1");
        assert_close(w[1], 0.75, 1e-12, "W2");
    }

    #[test]
    fn event_rate_plus_survival_is_exactly_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for len in [1, 5, 40] {
            let h = random_hazards(&mut rng, len);
            let s = survival_from_hazards(&h);
            let w = event_rate_from_hazards(&h);
            for (sv, wv) in s.values().iter().zip(&w) {
                assert_eq!(sv + wv, 1.0);
            }
        }
    }

    #[test]
    fn event_rate_certain_event_limit() {
        let h = HazardSequence::new(vec![1.0 - 1e-9]); // clamped to the ceiling
        let w = event_rate_from_hazards(&h);
        assert!(w[0] > 0.9999998);
    }

    #[test]
    fn event_prob_examples() {
        let h = HazardSequence::new(vec![0.2, 0.5]);
        assert_close(event_prob_at(&h, 2).unwrap(), 0.4, 1e-12, "p2");
        assert_close(event_prob_at(&h, 1).unwrap(), 0.2, 1e-12, "p1");
        assert!(event_prob_at(&h, 0).is_err());
        assert!(event_prob_at(&h, 3).is_err());
    }

    #[test]
    fn event_probs_partition_with_survivor_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hazards(&mut rng, 12);
        let p = event_probs(&h);
        let s = survival_from_hazards(&h);
        let total: f64 = p.iter().sum::<f64>() + s.values()[11];
        assert!((total - 1.0).abs() < 1e-12, "partition sum {total}");
        for l in 1..=12 {
            assert_close(
                event_prob_at(&h, l).unwrap(),
                p[l - 1],
                1e-14,
                "event_probs vs event_prob_at",
            );
        }
    }

    #[test]
    fn consistency_mass_equals_survival_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hazards(&mut rng, 30);
        let s = survival_from_hazards(&h);
        for l in 1..=30 {
            let p = event_prob_at(&h, l).unwrap();
            assert!((p - (s.at(l - 1) - s.at(l))).abs() < 1e-12);
        }
    }

    #[test]
    fn hazard_recovery_from_mass_and_survival() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_hazards(&mut rng, 25);
        let s = survival_from_hazards(&h);
        for l in 1..=25 {
            if s.at(l - 1) > 1e-8 {
                let recovered = event_prob_at(&h, l).unwrap() / s.at(l - 1);
                assert!((recovered - h.values()[l - 1]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn loss_z_example() {
        let h = HazardSequence::new(vec![0.2, 0.5]);
        let lg = loss_z(&h, 2).unwrap();
        assert_close(lg.value, -(0.4f64.ln()), 1e-12, "loss_z value");
        // Frozen from the central finite-difference oracle (step 1e-6); the
        // analytic values are 1/(1-0.2) and -1/0.5.
        assert_close(lg.grad[0], 1.25, 1e-9, "dL/dh1");
        assert_close(lg.grad[1], -2.0, 1e-9, "dL/dh2");
    }

    #[test]
    fn loss_z_confident_correct_prediction() {
        let h = HazardSequence::new(vec![0.9999999]);
        let lg = loss_z(&h, 1).unwrap();
        assert!(lg.value >= 0.0 && lg.value < 1e-6);
    }

    #[test]
    fn loss_uncensored_example() {
        let h = HazardSequence::new(vec![0.5, 0.5]);
        let lg = loss_uncensored(&h, 2).unwrap();
        assert_close(lg.value, -(0.75f64.ln()), 1e-12, "loss_uncensored value");
        assert_close(lg.grad[0], -0.5 / 0.75, 1e-9, "dL/dh1");
        assert_close(lg.grad[1], -0.5 / 0.75, 1e-9, "dL/dh2");
    }

    #[test]
    fn loss_uncensored_clamped_floor_stays_finite() {
        let h = HazardSequence::new(vec![0.0; 3]); // all at clamp floor
        let lg = loss_uncensored(&h, 3).unwrap();
        assert!(lg.value.is_finite());
        assert!(lg.value > 10.0);
        for g in &lg.grad {
            assert!(g.is_finite());
        }
    }

    #[test]
    fn loss_censored_example() {
        let h = HazardSequence::new(vec![0.5, 0.5]);
        let lg = loss_censored(&h, 2).unwrap();
        assert_close(lg.value, -(0.25f64.ln()), 1e-12, "loss_censored value");
        assert_close(lg.grad[0], 2.0, 1e-9, "dL/dh1");
        assert_close(lg.grad[1], 2.0, 1e-9, "dL/dh2");
    }

    #[test]
    fn degenerate_prefix_rejected() {
        let h = HazardSequence::new(vec![0.5, 0.5]);
        assert!(loss_censored(&h, 0).is_err());
        assert!(loss_uncensored(&h, 0).is_err());
        assert!(loss_z(&h, 0).is_err());
    }

    #[test]
    fn all_loss_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let step = 1e-6;
        for _ in 0..100 {
            let len = rng.gen_range(1..12);
            let h = random_hazards(&mut rng, len);
            let l = rng.gen_range(1..=len);

            let cases: [(&str, LossGrad, Box<dyn Fn(&HazardSequence) -> f64>); 3] = [
                (
                    "loss_z",
                    loss_z(&h, l).unwrap(),
                    Box::new(move |hh| loss_z(hh, l).unwrap().value),
                ),
                (
                    "loss_uncensored",
                    loss_uncensored(&h, l).unwrap(),
                    Box::new(move |hh| loss_uncensored(hh, l).unwrap().value),
                ),
                (
                    "loss_censored",
                    loss_censored(&h, l).unwrap(),
                    Box::new(move |hh| loss_censored(hh, l).unwrap().value),
                ),
            ];
            for (name, lg, f) in cases {
                assert!(lg.value >= 0.0 && lg.value.is_finite(), "{name} value");
                for idx in 0..len {
                    let fd = finite_diff(&h, idx, step, &f);
                    let denom = lg.grad[idx].abs().max(fd.abs());
                    if denom > 1e-6 {
                        assert!(
                            (lg.grad[idx] - fd).abs() / denom < 1e-5,
                            "{name} grad[{idx}]: analytic {} vs fd {fd}",
                            lg.grad[idx]
                        );
                    } else {
                        assert!((lg.grad[idx] - fd).abs() < 1e-9, "{name} grad[{idx}]");
                    }
                }
            }
        }
    }

    #[test]
    fn loss_total_single_uncensored_example() {
        // One uncensored sample, l_z = l_t = 2: the event-interval term is
        // -ln p_2 = -ln 0.4 and the event-rate term is -ln W(t_2) = -ln 0.6,
        // mixed as 0.25 * 0.916291 + 0.75 * 0.510826 = 0.612192.
        let h = vec![HazardSequence::new(vec![0.2, 0.5])];
        let t = vec![SampleTarget {
            event_interval: Some(2),
            observed_interval: 2,
        }];
        let batch = loss_total(&h, &t, 0.25, Ablation::Full, Reduction::Mean).unwrap();
        let expected = 0.25 * -(0.4f64.ln()) + 0.75 * -(0.6f64.ln());
        assert_close(batch.breakdown.total, expected, 1e-12, "total");
        assert!((batch.breakdown.total - 0.612192).abs() < 1e-6);
        assert_close(batch.breakdown.l_z, 0.916291, 1e-6, "l_z");
        assert_close(batch.breakdown.l_uncensored, 0.510826, 1e-6, "l_uncensored");
    }

    #[test]
    fn loss_total_alpha_one_is_pure_event_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let (hazards, targets) = random_batch(&mut rng, 20);
        let batch = loss_total(&hazards, &targets, 1.0, Ablation::Full, Reduction::Mean).unwrap();
        assert_eq!(batch.breakdown.total, batch.breakdown.l_z);
    }

    fn random_batch(
        rng: &mut ChaCha8Rng,
        n: usize,
    ) -> (Vec<HazardSequence>, Vec<SampleTarget>) {
        let mut hazards = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..n {
            let len = rng.gen_range(1..10);
            hazards.push(random_hazards(rng, len));
            let observed = rng.gen_range(1..=len);
            let censored = rng.gen_bool(0.4);
            targets.push(SampleTarget {
                event_interval: if censored {
                    None
                } else {
                    Some(rng.gen_range(1..=observed))
                },
                observed_interval: observed,
            });
        }
        (hazards, targets)
    }

    #[test]
    fn loss_total_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (hazards, targets) = random_batch(&mut rng, 50);
        let batch =
            loss_total(&hazards, &targets, 0.25, Ablation::Full, Reduction::Mean).unwrap();
        let step = 1e-6;
        for i in 0..hazards.len() {
            for idx in 0..hazards[i].len() {
                let mut lo = hazards.to_vec();
                let mut hi = hazards.to_vec();
                let mut lo_vals = lo[i].values().to_vec();
                let mut hi_vals = hi[i].values().to_vec();
                lo_vals[idx] -= step;
                hi_vals[idx] += step;
                lo[i] = HazardSequence::new(lo_vals);
                hi[i] = HazardSequence::new(hi_vals);
                let f_lo = loss_total(&lo, &targets, 0.25, Ablation::Full, Reduction::Mean)
                    .unwrap()
                    .breakdown
                    .total;
                let f_hi = loss_total(&hi, &targets, 0.25, Ablation::Full, Reduction::Mean)
                    .unwrap()
                    .breakdown
                    .total;
                let fd = (f_hi - f_lo) / (2.0 * step);
                let analytic = batch.hazard_grads[i][idx];
                // Central differences of an O(1) batch loss carry ~1e-10 of
                // rounding noise, so entries near that floor get an absolute
                // bound instead of the relative one.
                let denom = analytic.abs().max(fd.abs());
                if denom > 1e-4 {
                    assert!(
                        (analytic - fd).abs() / denom < 1e-5,
                        "sample {i} grad[{idx}]: analytic {analytic} vs fd {fd}"
                    );
                } else {
                    assert!((analytic - fd).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn loss_total_ablation_routing() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (hazards, targets) = random_batch(&mut rng, 30);

        let unc = loss_total(&hazards, &targets, 0.25, Ablation::UncensoredOnly, Reduction::Mean)
            .unwrap();
        assert_eq!(unc.breakdown.l_censored, 0.0);
        assert!(unc.breakdown.l_uncensored > 0.0);
        // Censored samples must contribute no gradient at all.
        for (grad, target) in unc.hazard_grads.iter().zip(&targets) {
            if target.event_interval.is_none() {
                assert!(grad.iter().all(|g| *g == 0.0));
            }
        }

        let cen =
            loss_total(&hazards, &targets, 0.25, Ablation::CensoredOnly, Reduction::Mean).unwrap();
        assert_eq!(cen.breakdown.l_uncensored, 0.0);
        assert!(cen.breakdown.l_censored > 0.0);
    }

    #[test]
    fn loss_total_breakdown_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (hazards, targets) = random_batch(&mut rng, 25);
        let b = loss_total(&hazards, &targets, 0.25, Ablation::Full, Reduction::Mean)
            .unwrap()
            .breakdown;
        assert_eq!(b.l_c, b.l_uncensored + b.l_censored);
        assert!((b.total - (0.25 * b.l_z + 0.75 * b.l_c)).abs() < 1e-15);
        assert!(b.l_z >= 0.0 && b.l_uncensored >= 0.0 && b.l_censored >= 0.0);
    }

    #[test]
    fn loss_total_rejects_empty_batch() {
        assert!(matches!(
            loss_total(&[], &[], 0.25, Ablation::Full, Reduction::Mean),
            Err(Error::EmptyDataset)
        ));
    }

    /// The two partial terms together are the cross-entropy of the survival
    /// status indicator against S(t) evaluated at the window edge.
    #[test]
    fn partial_losses_are_survival_status_cross_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let (hazards, targets) = random_batch(&mut rng, 40);
        let b = loss_total(&hazards, &targets, 0.25, Ablation::Full, Reduction::Mean)
            .unwrap()
            .breakdown;

        let mut ce = 0.0;
        for (h, target) in hazards.iter().zip(&targets) {
            let s = survival_from_hazards(h).at(target.observed_interval);
            ce -= if target.event_interval.is_some() {
                (1.0 - s).max(PROB_FLOOR).ln()
            } else {
                s.max(PROB_FLOOR).ln()
            };
        }
        ce /= hazards.len() as f64;
        assert!(
            (b.l_c - ce).abs() < 1e-10,
            "l_c {} vs direct cross-entropy {ce}",
            b.l_c
        );
    }

    proptest::proptest! {
        #[test]
        fn survival_curve_monotone_nonincreasing(
            values in proptest::collection::vec(0.0..1.0f64, 1..100)
        ) {
            let h = HazardSequence::new(values);
            let s = survival_from_hazards(&h);
            let mut prev = 1.0;
            for &v in s.values() {
                proptest::prop_assert!(v <= prev + 1e-15);
                proptest::prop_assert!((0.0..=1.0).contains(&v));
                prev = v;
            }
        }

        #[test]
        fn partition_of_unity_holds(
            values in proptest::collection::vec(0.0..1.0f64, 1..200)
        ) {
            let h = HazardSequence::new(values);
            let p = event_probs(&h);
            let s_last = survival_from_hazards(&h).values().last().copied().unwrap();
            let total: f64 = p.iter().sum::<f64>() + s_last;
            proptest::prop_assert!((total - 1.0).abs() < 1e-10);
        }
    }
}
