//! Direct (non-extrapolating) pass@k estimation from counts and full
//! pools, plus the plug-in frequentist estimator used by the allocation
//! analysis.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{ln_choose, pow_one_minus};
use crate::records::{CountsState, OutcomePool};

/// A pass-rate curve: strictly increasing k values, each paired with an
/// estimate in [0, 1], tagged with the method, budget, and seed that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassCurve {
    points: Vec<(u64, f64)>,
    pub method: String,
    pub budget: u64,
    pub seed: u64,
}

impl PassCurve {
    pub fn new(
        points: Vec<(u64, f64)>,
        method: impl Into<String>,
        budget: u64,
        seed: u64,
    ) -> Result<Self> {
        let mut prev_k = 0u64;
        for &(k, v) in &points {
            if k == 0 {
                return Err(Error::KIsZero);
            }
            if k <= prev_k && prev_k != 0 {
                return Err(Error::InvalidArgument(format!(
                    "curve k values must be strictly increasing (saw {prev_k} then {k})"
                )));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "curve value {v} at k = {k} outside [0, 1]"
                )));
            }
            prev_k = k;
        }
        Ok(Self {
            points,
            method: method.into(),
            budget,
            seed,
        })
    }

    pub fn points(&self) -> &[(u64, f64)] {
        &self.points
    }

    pub fn ks(&self) -> Vec<u64> {
        self.points.iter().map(|&(k, _)| k).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|&(_, v)| v).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Unbiased per-problem pass@k from `successes` hits in `attempts`
/// samples: 1 - C(attempts - successes, k) / C(attempts, k).
///
/// The binomial-coefficient ratio is evaluated as a difference of
/// log-gamma sums so it survives pools of 10^4 samples. When fewer than
/// k failures were recorded, every k-subset contains a success and the
/// value is exactly 1.
pub fn pass_i_at_k_unbiased(attempts: u64, successes: u64, k: u64) -> Result<f64> {
    if successes > attempts {
        return Err(Error::SuccessesExceedAttempts {
            id: String::new(),
            successes,
            attempts,
        });
    }
    if k == 0 {
        return Err(Error::KIsZero);
    }
    if k > attempts {
        return Err(Error::KExceedsAttempts {
            id: String::new(),
            k,
            attempts,
        });
    }
    let failures = attempts - successes;
    if failures < k {
        return Ok(1.0);
    }
    let ln_ratio = ln_choose(failures, k) - ln_choose(attempts, k);
    Ok(1.0 - ln_ratio.exp())
}

/// Dataset-level pass@k: the mean of the unbiased per-problem estimates.
/// Defined only when every problem holds at least k samples.
pub fn pass_d_at_k(counts: &CountsState, k: u64) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sum = 0.0;
    for e in counts.entries() {
        if k > e.attempts {
            return Err(Error::KExceedsAttempts {
                id: e.problem_id.clone(),
                k,
                attempts: e.attempts,
            });
        }
        sum += pass_i_at_k_unbiased(e.attempts, e.successes, k)?;
    }
    Ok(sum / counts.len() as f64)
}

/// pass@k computed on the full recorded pools, the replayable ground
/// truth for evaluation grids.
pub fn ground_truth_curve(pools: &[OutcomePool], ks: &[u64]) -> Result<PassCurve> {
    if pools.is_empty() {
        return Err(Error::EmptyInput);
    }
    let counts = crate::records::full_pool_counts(pools);
    let total = counts.total_attempts();
    let mut points = Vec::with_capacity(ks.len());
    for &k in ks {
        points.push((k, pass_d_at_k(&counts, k)?));
    }
    PassCurve::new(points, "ground-truth", total, 0)
}

/// Plug-in estimator 1 - (1/m) sum_i (1 - s_i / b_i)^k. Unlike the
/// combinatorial estimator it is defined for any k >= 1, at the price of
/// bias at small b.
pub fn frequentist_pass_at_k(counts: &CountsState, k: u64) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::EmptyInput);
    }
    if k == 0 {
        return Err(Error::KIsZero);
    }
    let mut sum = 0.0;
    for e in counts.entries() {
        if e.attempts == 0 {
            return Err(Error::ZeroAttempts {
                id: e.problem_id.clone(),
            });
        }
        let ratio = e.successes as f64 / e.attempts as f64;
        sum += pow_one_minus(ratio, k as f64);
    }
    Ok(1.0 - sum / counts.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::ProblemCounts;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Binomial, Distribution};

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn counts(entries: &[(u64, u64)]) -> CountsState {
        CountsState::from_entries(
            entries
                .iter()
                .enumerate()
                .map(|(i, &(s, b))| ProblemCounts {
                    problem_id: format!("p{i}"),
                    successes: s,
                    attempts: b,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn unbiased_estimator_small_cases() {
        // 1 - C(3,2)/C(5,2) = 1 - 3/10
        close(pass_i_at_k_unbiased(5, 2, 2).unwrap(), 0.7, 1e-12);
        assert_eq!(pass_i_at_k_unbiased(10, 0, 5).unwrap(), 0.0);
        // Fewer failures than k forces a success into every subset.
        assert_eq!(pass_i_at_k_unbiased(10, 3, 10).unwrap(), 1.0);
    }

    #[test]
    fn unbiased_estimator_rejects_k_beyond_budget() {
        assert!(matches!(
            pass_i_at_k_unbiased(5, 2, 6),
            Err(Error::KExceedsAttempts { .. })
        ));
        assert!(matches!(pass_i_at_k_unbiased(5, 2, 0), Err(Error::KIsZero)));
    }

    #[test]
    fn unbiased_estimator_survives_large_pools() {
        let v = pass_i_at_k_unbiased(10_000, 100, 5_000).unwrap();
        assert!((0.0..=1.0).contains(&v));
        assert!(v > 0.99999, "{v}");
    }

    #[test]
    fn dataset_mean_examples() {
        // Mean of per-problem values 0.7 and 0.3.
        let c = counts(&[(2, 5), (1, 2)]);
        let v = (pass_i_at_k_unbiased(5, 2, 2).unwrap() + pass_i_at_k_unbiased(2, 1, 2).unwrap())
            / 2.0;
        close(pass_d_at_k(&c, 2).unwrap(), v, 1e-12);

        let zeros = counts(&[(0, 5), (0, 5)]);
        assert_eq!(pass_d_at_k(&zeros, 3).unwrap(), 0.0);

        // (0 + 5/6 + 1) / 3 = 11/18
        let mixed = counts(&[(0, 4), (2, 4), (4, 4)]);
        close(pass_d_at_k(&mixed, 2).unwrap(), 11.0 / 18.0, 1e-12);
    }

    #[test]
    fn dataset_mean_rejects_small_budgets() {
        let c = counts(&[(1, 4), (1, 2)]);
        assert!(matches!(
            pass_d_at_k(&c, 3),
            Err(Error::KExceedsAttempts { .. })
        ));
    }

    #[test]
    fn ground_truth_curve_examples() {
        let pools = vec![
            OutcomePool::new("a", vec![false; 4]).unwrap(),
            OutcomePool::new("b", vec![true, true, false, false]).unwrap(),
        ];
        let curve = ground_truth_curve(&pools, &[1, 2]).unwrap();
        close(curve.points()[0].1, 0.25, 1e-12);
        close(curve.points()[1].1, 5.0 / 12.0, 1e-12);
        assert_eq!(curve.budget, 8);

        let all_fail = vec![OutcomePool::new("z", vec![false; 6]).unwrap()];
        let c = ground_truth_curve(&all_fail, &[1, 3, 6]).unwrap();
        assert!(c.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn frequentist_examples() {
        let c = counts(&[(1, 10), (5, 10)]);
        close(frequentist_pass_at_k(&c, 2).unwrap(), 0.47, 1e-12);
        // k = 1 telescopes to the mean success ratio.
        close(frequentist_pass_at_k(&c, 1).unwrap(), 0.3, 1e-12);
        let perfect = counts(&[(4, 4), (9, 9)]);
        assert_eq!(frequentist_pass_at_k(&perfect, 5).unwrap(), 1.0);
        let no_attempts = counts(&[(0, 0)]);
        assert!(frequentist_pass_at_k(&no_attempts, 1).is_err());
    }

    #[test]
    fn estimator_monotone_in_k_and_successes() {
        for b in 1..=16u64 {
            for s in 0..=b {
                let mut prev = 0.0;
                for k in 1..=b {
                    let v = pass_i_at_k_unbiased(b, s, k).unwrap();
                    assert!(v + 1e-12 >= prev, "not monotone in k at b={b} s={s} k={k}");
                    prev = v;
                    if s > 0 {
                        let lower = pass_i_at_k_unbiased(b, s - 1, k).unwrap();
                        assert!(v + 1e-12 >= lower, "not monotone in s at b={b} s={s} k={k}");
                    }
                }
            }
        }
    }

    // Sum identity linking pass@k at different k on the same sample:
    // pass@k = pass@l + s * sum_{m=l}^{k-1} C(b-s, m) / ((b-m) C(b, m)).
    #[test]
    fn recurrence_identity_small_grid() {
        fn choose(n: u64, k: u64) -> f64 {
            if k > n {
                return 0.0;
            }
            let k = k.min(n - k);
            let mut v = 1.0;
            for j in 0..k {
                v = v * (n - j) as f64 / (j + 1) as f64;
            }
            v
        }
        for b in 2..=12u64 {
            for s in 1..b {
                for l in 1..=b {
                    for k in l..=b {
                        let lhs = pass_i_at_k_unbiased(b, s, k).unwrap();
                        let mut rhs = pass_i_at_k_unbiased(b, s, l).unwrap();
                        for m in l..k {
                            rhs += s as f64 * choose(b - s, m) / ((b - m) as f64 * choose(b, m));
                        }
                        close(lhs, rhs, 1e-10);
                    }
                }
            }
        }
    }

    // Asymptotic variance of the plug-in (1 - s/b)^k: p k^2 (1-p)^(2k-1) / b.
    #[test]
    fn plugin_variance_matches_asymptotic_rate() {
        let (p, k, b) = (0.3f64, 5u64, 2000u64);
        let mut rng = ChaCha8Rng::seed_from_u64(0xA57);
        let bin = Binomial::new(b, p).unwrap();
        let trials = 60_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..trials {
            let s = bin.sample(&mut rng);
            let v = pow_one_minus(s as f64 / b as f64, k as f64);
            sum += v;
            sum_sq += v * v;
        }
        let n = trials as f64;
        let mean = sum / n;
        let var = (sum_sq - n * mean * mean) / (n - 1.0);
        let expected = p * (k * k) as f64 * pow_one_minus(p, (2 * k - 1) as f64) / b as f64;
        let rel = (var - expected).abs() / expected;
        assert!(rel < 0.10, "relative error {rel} (var {var} vs {expected})");
        let _ = rng.random::<u64>();
    }
}
