//! Evaluation metrics: time-dependent concordance index, average negative
//! log probability, and significance tests over bootstrap score vectors.

use crate::error::{Error, Result};
use crate::exec;
use crate::sample::Dataset;
use crate::survival::PROB_FLOOR;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// Time-dependent concordance index.
///
/// A pair `(i, j)` is comparable when `i` is uncensored and its event time
/// strictly precedes `j`'s relevant time (event time if uncensored, censoring
/// time otherwise). The pair scores 1 when the predicted event rate at `i`'s
/// event interval ranks `i` above `j`, 0.5 on an exact tie, 0 otherwise.
///
/// `event_rate_curves[k]` must hold `W(t_1|x_k)..W(t_L|x_k)` over the full
/// grid of `test`.
pub fn c_index(event_rate_curves: &[Vec<f64>], test: &Dataset) -> Result<f64> {
    validate_curves(event_rate_curves, test)?;
    let grid = test.grid();
    let samples = test.samples();

    // (event interval of i when uncensored, relevant interval-free time).
    let mut event_intervals = Vec::with_capacity(samples.len());
    for sample in samples {
        event_intervals.push(match sample.event_time() {
            Some(z) => Some(grid.bucketize(z)?),
            None => None,
        });
    }

    let per_i = exec::par_map_range(samples.len(), |i| {
        let Some(l_i) = event_intervals[i] else {
            return (0.0f64, 0u64);
        };
        let z_i = samples[i].event_time().expect("uncensored");
        let w_i = event_rate_curves[i][l_i - 1];
        let mut score = 0.0;
        let mut pairs = 0u64;
        for (j, sample_j) in samples.iter().enumerate() {
            if j == i || z_i >= sample_j.relevant_time() {
                continue;
            }
            let w_j = event_rate_curves[j][l_i - 1];
            pairs += 1;
            if w_i > w_j {
                score += 1.0;
            } else if w_i == w_j {
                score += 0.5;
            }
        }
        (score, pairs)
    });

    let mut score = 0.0;
    let mut pairs = 0u64;
    for (s, p) in per_i {
        score += s;
        pairs += p;
    }
    if pairs == 0 {
        return Err(Error::UndefinedMetric(
            "concordance index needs at least one comparable pair".into(),
        ));
    }
    Ok(score / pairs as f64)
}

/// Average negative log probability of each test sample's true event
/// interval. Every test sample must carry its event time; probabilities are
/// clamped to at least [`PROB_FLOOR`] before the log.
///
/// `event_prob_curves[k]` must hold `p_1..p_L` for sample `k`.
pub fn anlp(event_prob_curves: &[Vec<f64>], test: &Dataset) -> Result<f64> {
    validate_curves(event_prob_curves, test)?;
    let grid = test.grid();
    let mut total = 0.0;
    for (sample, probs) in test.samples().iter().zip(event_prob_curves) {
        let z = sample.event_time().ok_or_else(|| {
            Error::UndefinedMetric(
                "ANLP needs the true event time of every test sample".into(),
            )
        })?;
        let l = grid.bucketize(z)?;
        total -= probs[l - 1].max(PROB_FLOOR).ln();
    }
    Ok(total / test.len() as f64)
}

fn validate_curves(curves: &[Vec<f64>], test: &Dataset) -> Result<()> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if curves.len() != test.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} prediction curves for {} test samples",
            curves.len(),
            test.len()
        )));
    }
    let l = test.grid().num_intervals();
    if let Some(bad) = curves.iter().find(|c| c.len() != l) {
        return Err(Error::ShapeMismatch(format!(
            "prediction curve of length {} does not cover the {l}-interval grid",
            bad.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignificanceKind {
    MannWhitneyU,
    TTest,
}

/// Two-sided p-value comparing two score vectors.
///
/// Mann-Whitney U uses the normal approximation with tie correction; when
/// every pooled value is tied the statistic sits at its null mean and the
/// p-value is 1. The t-test is Welch's, with the Welch-Satterthwaite degrees
/// of freedom; zero variance on both sides is rejected as degenerate.
pub fn significance(a: &[f64], b: &[f64], kind: SignificanceKind) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument(
            "significance tests need at least 2 observations per side".into(),
        ));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("significance scores".into()));
    }
    match kind {
        SignificanceKind::MannWhitneyU => Ok(mann_whitney_u(a, b)),
        SignificanceKind::TTest => welch_t_test(a, b),
    }
}

fn mann_whitney_u(a: &[f64], b: &[f64]) -> f64 {
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let n = na + nb;

    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|&v| (v, true))
        .chain(b.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite scores"));

    // Average ranks over tie groups; collect tie sizes for the variance.
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let tied = (j - i) as f64;
        let avg_rank = (i + j + 1) as f64 / 2.0; // ranks are 1-based
        rank_sum_a += pooled[i..j]
            .iter()
            .filter(|(_, from_a)| *from_a)
            .count() as f64
            * avg_rank;
        tie_term += tied * tied * tied - tied;
        i = j;
    }

    let u = rank_sum_a - na * (na + 1.0) / 2.0;
    let mean = na * nb / 2.0;
    let variance = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if variance <= 0.0 {
        return 1.0; // every pooled value tied: U sits at its null mean
    }
    let z = (u - mean) / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * (1.0 - normal.cdf(z.abs()))).clamp(0.0, 1.0)
}

fn welch_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    let (ma, va, na) = mean_var(a);
    let (mb, vb, nb) = mean_var(b);
    let se2 = va / na + vb / nb;
    if se2 <= 0.0 {
        return Err(Error::InvalidArgument(
            "t-test is degenerate: zero variance on both sides".into(),
        ));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::InvalidArgument(format!("t distribution: {e}")))?;
    Ok((2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
}

fn mean_var(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var, n)
}

/// Seeded bootstrap index sets: `resamples` draws of `n` indices with
/// replacement from `0..n`.
pub fn bootstrap_indices(n: usize, resamples: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..resamples)
        .map(|_| (0..n).map(|_| rng.gen_range(0..n)).collect())
        .collect()
}

/// C-index per bootstrap resample. Same seed means same resamples, so two
/// methods evaluated with the same seed are paired.
pub fn bootstrap_c_index(
    event_rate_curves: &[Vec<f64>],
    test: &Dataset,
    resamples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    bootstrap_metric(event_rate_curves, test, resamples, seed, c_index)
}

/// ANLP per bootstrap resample.
pub fn bootstrap_anlp(
    event_prob_curves: &[Vec<f64>],
    test: &Dataset,
    resamples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    bootstrap_metric(event_prob_curves, test, resamples, seed, anlp)
}

fn bootstrap_metric(
    curves: &[Vec<f64>],
    test: &Dataset,
    resamples: usize,
    seed: u64,
    metric: impl Fn(&[Vec<f64>], &Dataset) -> Result<f64>,
) -> Result<Vec<f64>> {
    validate_curves(curves, test)?;
    let mut scores = Vec::with_capacity(resamples);
    for indices in bootstrap_indices(test.len(), resamples, seed) {
        let samples = indices.iter().map(|&i| test.samples()[i].clone()).collect();
        let resampled = Dataset::new(samples, test.feature_dim(), *test.grid())?;
        let picked: Vec<Vec<f64>> = indices.iter().map(|&i| curves[i].clone()).collect();
        scores.push(metric(&picked, &resampled)?);
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::sample::{Features, Sample};

    fn sample(t: f64, z: Option<f64>) -> Sample {
        Sample::new(Features::empty(), t, z).unwrap()
    }

    fn dataset(samples: Vec<Sample>, l: usize) -> Dataset {
        Dataset::new(samples, 1, TimeGrid::new(1.0, l).unwrap()).unwrap()
    }

    /// Brute-force oracle written from the pair definition, independent of
    /// the implementation above: enumerate all ordered pairs, filter, score.
    fn c_index_oracle(curves: &[Vec<f64>], test: &Dataset) -> Option<f64> {
        let grid = test.grid();
        let mut num = 0.0;
        let mut den = 0u64;
        for (i, si) in test.samples().iter().enumerate() {
            for (j, sj) in test.samples().iter().enumerate() {
                if i == j || si.is_censored() {
                    continue;
                }
                let zi = si.event_time().unwrap();
                let tj = sj.event_time().unwrap_or(sj.observed_time());
                if !(zi < tj) {
                    continue;
                }
                let l = grid.bucketize(zi).unwrap();
                let (wi, wj) = (curves[i][l - 1], curves[j][l - 1]);
                den += 1;
                num += if wi > wj {
                    1.0
                } else if wi == wj {
                    0.5
                } else {
                    0.0
                };
            }
        }
        (den > 0).then(|| num / den as f64)
    }

    fn random_case(seed: u64, n: usize, l: usize) -> (Vec<Vec<f64>>, Dataset) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<Sample> = (0..n)
            .map(|_| {
                let t = rng.gen_range(1..=l) as f64;
                if rng.gen_bool(0.35) {
                    sample(t, None)
                } else {
                    sample(t, Some(rng.gen_range(1..=t as usize) as f64))
                }
            })
            .collect();
        // Monotone non-decreasing event-rate curves on an exact value lattice
        // (k/20) so ties between samples are exact, not accumulation noise.
        let curves: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut acc = 0u32;
                (0..l)
                    .map(|_| {
                        acc += rng.gen_range(0..10);
                        acc.min(20) as f64 / 20.0
                    })
                    .collect()
            })
            .collect();
        (curves, dataset(samples, l))
    }

    #[test]
    fn single_concordant_pair() {
        let ds = dataset(vec![sample(1.0, Some(1.0)), sample(3.0, Some(3.0))], 4);
        let curves = vec![vec![0.9; 4], vec![0.1; 4]];
        assert_eq!(c_index(&curves, &ds).unwrap(), 1.0);
    }

    #[test]
    fn identical_predictions_give_half() {
        let ds = dataset(
            vec![
                sample(1.0, Some(1.0)),
                sample(2.0, Some(2.0)),
                sample(4.0, None),
            ],
            4,
        );
        let curves = vec![vec![0.3; 4]; 3];
        assert_eq!(c_index(&curves, &ds).unwrap(), 0.5);
    }

    #[test]
    fn no_comparable_pairs_is_undefined() {
        let ds = dataset(vec![sample(2.0, None), sample(3.0, None)], 4);
        let curves = vec![vec![0.5; 4]; 2];
        assert!(matches!(
            c_index(&curves, &ds),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn matches_brute_force_oracle_exactly() {
        for seed in 0..200u64 {
            let n = 3 + (seed as usize % 58);
            let (curves, ds) = random_case(seed, n, 8);
            match (c_index(&curves, &ds), c_index_oracle(&curves, &ds)) {
                (Ok(fast), Some(oracle)) => {
                    assert_eq!(fast, oracle, "seed {seed}");
                }
                (Err(Error::UndefinedMetric(_)), None) => {}
                (fast, oracle) => panic!("seed {seed}: {fast:?} vs {oracle:?}"),
            }
        }
    }

    #[test]
    fn invariant_under_monotone_transform() {
        let (curves, ds) = random_case(7, 40, 8);
        let original = c_index(&curves, &ds).unwrap();
        let squashed: Vec<Vec<f64>> = curves
            .iter()
            .map(|c| c.iter().map(|w| (3.0 * w).tanh()).collect())
            .collect();
        assert_eq!(c_index(&squashed, &ds).unwrap(), original);
    }

    #[test]
    fn reversal_sums_to_one_without_ties() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 30;
        let l = 6;
        let samples: Vec<Sample> = (0..n)
            .map(|_| {
                let t = rng.gen_range(1..=l) as f64;
                sample(t, Some(rng.gen_range(1..=t as usize) as f64))
            })
            .collect();
        let ds = dataset(samples, l);
        // Continuous random curves: ties have probability zero.
        let curves: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut w = 0.0;
                (0..l)
                    .map(|_| {
                        w += rng.gen_range(0.0..0.2);
                        w
                    })
                    .collect()
            })
            .collect();
        let reversed: Vec<Vec<f64>> = curves.iter().map(|c| c.iter().map(|w| -w).collect()).collect();
        let forward = c_index(&curves, &ds).unwrap();
        let backward = c_index(&reversed, &ds).unwrap();
        assert!((forward + backward - 1.0).abs() < 1e-12);
    }

    #[test]
    fn anlp_single_sample() {
        let ds = dataset(vec![sample(2.0, Some(2.0))], 3);
        let probs = vec![vec![0.3, 0.4, 0.3]];
        assert!((anlp(&probs, &ds).unwrap() - 0.916291).abs() < 1e-6);
    }

    #[test]
    fn anlp_perfect_predictor() {
        let ds = dataset(vec![sample(1.0, Some(1.0))], 2);
        let probs = vec![vec![1.0 - 1e-12, 1e-12]];
        assert!(anlp(&probs, &ds).unwrap() < 1e-9);
    }

    #[test]
    fn anlp_uniform_predictor() {
        let l = 100;
        let ds = dataset(vec![sample(37.0, Some(37.0))], l);
        let probs = vec![vec![1.0 / l as f64; l]];
        assert!((anlp(&probs, &ds).unwrap() - (l as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn anlp_requires_event_times() {
        let ds = dataset(vec![sample(2.0, Some(1.0)), sample(2.0, None)], 3);
        let probs = vec![vec![0.3; 3]; 2];
        assert!(matches!(
            anlp(&probs, &ds),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn anlp_decreases_as_mass_moves_to_truth() {
        let ds = dataset(vec![sample(3.0, Some(2.0))], 3);
        let spread = vec![vec![0.3, 0.4, 0.3]];
        let focused = vec![vec![0.2, 0.6, 0.2]];
        assert!(anlp(&focused, &ds).unwrap() < anlp(&spread, &ds).unwrap());
    }

    #[test]
    fn mann_whitney_identical_vectors() {
        let a = [0.5, 0.5, 0.5, 0.5];
        assert_eq!(
            significance(&a, &a, SignificanceKind::MannWhitneyU).unwrap(),
            1.0
        );
    }

    #[test]
    fn mann_whitney_asymptotic_reference() {
        // Hand computation: a={1,2}, b={3,4} gives U=0, mean=2,
        // var=n1*n2*(n+1)/12=5/3, z=-2/sqrt(5/3)=-1.549193,
        // p = 2*(1-Phi(1.549193)) = 0.121335.
        let p = significance(&[1.0, 2.0], &[3.0, 4.0], SignificanceKind::MannWhitneyU).unwrap();
        assert!((p - 0.121335).abs() < 1e-5, "p = {p}");
    }

    #[test]
    fn t_test_separated_groups() {
        let p = significance(
            &[1.0, 2.0, 3.0],
            &[101.0, 102.0, 103.0],
            SignificanceKind::TTest,
        )
        .unwrap();
        assert!(p < 0.01, "p = {p}");
    }

    #[test]
    fn t_test_identical_vectors_with_spread() {
        let a = [0.4, 0.5, 0.6, 0.55];
        let p = significance(&a, &a, SignificanceKind::TTest).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn t_test_degenerate_variance_rejected() {
        let a = [0.5, 0.5, 0.5];
        assert!(significance(&a, &a, SignificanceKind::TTest).is_err());
    }

    #[test]
    fn significance_permutation_invariance() {
        let a = [0.1, 0.9, 0.4, 0.7, 0.2];
        let b = [0.3, 0.8, 0.5, 0.6, 0.35];
        let a_shuffled = [0.9, 0.2, 0.1, 0.7, 0.4];
        let b_shuffled = [0.6, 0.3, 0.35, 0.8, 0.5];
        // Rank-based MW-U is exactly order-free; the t-test only up to
        // float summation order.
        assert_eq!(
            significance(&a, &b, SignificanceKind::MannWhitneyU).unwrap(),
            significance(&a_shuffled, &b_shuffled, SignificanceKind::MannWhitneyU).unwrap()
        );
        let p1 = significance(&a, &b, SignificanceKind::TTest).unwrap();
        let p2 = significance(&a_shuffled, &b_shuffled, SignificanceKind::TTest).unwrap();
        assert!((p1 - p2).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_is_seeded() {
        let a = bootstrap_indices(50, 10, 3);
        let b = bootstrap_indices(50, 10, 3);
        assert_eq!(a, b);
        let c = bootstrap_indices(50, 10, 4);
        assert_ne!(a, c);
        assert!(a.iter().all(|r| r.len() == 50));
        assert!(a.iter().flatten().all(|&i| i < 50));
    }

    #[test]
    fn bootstrap_metrics_reproducible() {
        let (curves, ds) = random_case(5, 40, 8);
        let s1 = bootstrap_c_index(&curves, &ds, 8, 11).unwrap();
        let s2 = bootstrap_c_index(&curves, &ds, 8, 11).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.len(), 8);
    }
}
