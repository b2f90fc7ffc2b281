//! Difficulty-distribution fitting.
//!
//! Three routes from per-problem (successes, attempts) tallies to a
//! Beta-family difficulty distribution:
//!
//! - `fit_beta_binomial`: maximum likelihood on the beta-binomial
//!   marginal, the primary method; works with non-uniform per-problem
//!   budgets.
//! - `fit_discretized_beta`: the binned multinomial baseline over a
//!   scaled beta with its max-ratio scale estimator; requires uniform
//!   budgets.
//! - `scaled_beta_binomial_log_likelihood`: exact scaled beta-binomial
//!   likelihood evaluated through a stabilized alternating series.
//!
//! `predict_pass_at_k` converts any fitted parameters into a pass@k
//! estimate: a closed form at theta = 1, adaptive quadrature otherwise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::gamma::digamma;

use crate::error::{Error, Result};
use crate::numerics::{
    integrate, ln_alternating_sum, ln_choose, nelder_mead, pow_one_minus,
};
use crate::records::CountsState;

/// Lower and upper clamp for alpha and beta during optimization.
pub const PARAM_MIN: f64 = 1e-6;
pub const PARAM_MAX: f64 = 1e6;

const LOG_PARAM_MIN: f64 = -13.815510557964274; // ln(1e-6)
const LOG_PARAM_MAX: f64 = 13.815510557964274; // ln(1e6)

/// Objective-improvement threshold for declaring the optimizer done.
const FIT_FTOL: f64 = 1e-10;
const FIT_MAX_ITER: usize = 800;
const FIT_RESTARTS: usize = 5;

/// Default bin count and width ratio for the discretized baseline.
pub const DEFAULT_BIN_COUNT: usize = 20;
pub const DEFAULT_BIN_RATIO: f64 = 0.7;

/// Fitted difficulty-distribution parameters with fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
    /// Scale of the support (0, theta]; 1 for the plain beta-binomial.
    pub theta: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    /// True when the optimum pinned alpha or beta against its clamp.
    pub boundary_hit: bool,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            theta: 1.0,
            log_likelihood: f64::NAN,
            converged: true,
            boundary_hit: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::NonPositiveParams {
                context: "beta parameters",
                alpha: self.alpha,
                beta: self.beta,
            });
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidTheta { theta: self.theta });
        }
        Ok(())
    }
}

// (successes, attempts) pairs collapsed to distinct values with
// multiplicities; likelihood evaluations are linear in the number of
// distinct pairs rather than the number of problems.
struct Aggregated {
    pairs: Vec<(u64, u64, f64)>,
    total_problems: f64,
    ln_choose_term: f64,
}

fn aggregate(counts: &CountsState) -> Aggregated {
    use std::collections::BTreeMap;
    let mut map: BTreeMap<(u64, u64), u64> = BTreeMap::new();
    for e in counts.entries() {
        *map.entry((e.successes, e.attempts)).or_insert(0) += 1;
    }
    let mut ln_choose_term = 0.0;
    let pairs: Vec<(u64, u64, f64)> = map
        .into_iter()
        .map(|((s, b), c)| {
            ln_choose_term += c as f64 * ln_choose(b, s);
            (s, b, c as f64)
        })
        .collect();
    Aggregated {
        pairs,
        total_problems: counts.len() as f64,
        ln_choose_term,
    }
}

fn ll_pairs(agg: &Aggregated, alpha: f64, beta: f64) -> f64 {
    let ln_be = ln_beta(alpha, beta);
    let mut ll = 0.0;
    for &(s, b, c) in &agg.pairs {
        ll += c * (ln_beta(s as f64 + alpha, (b - s) as f64 + beta) - ln_be);
    }
    ll
}

/// Beta-binomial log-likelihood of the tallies:
/// sum_i [ln C(b_i, s_i) + ln Be(s_i + alpha, b_i - s_i + beta) - ln Be(alpha, beta)].
pub fn beta_binomial_log_likelihood(counts: &CountsState, alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::NonPositiveParams {
            context: "beta-binomial likelihood",
            alpha,
            beta,
        });
    }
    let agg = aggregate(counts);
    Ok(agg.ln_choose_term + ll_pairs(&agg, alpha, beta))
}

/// Gradient of the log-likelihood with respect to (ln alpha, ln beta),
/// in digamma form. Exposed so optimizers and finite-difference checks
/// can share one analytic source.
pub fn beta_binomial_log_likelihood_grad(
    counts: &CountsState,
    alpha: f64,
    beta: f64,
) -> Result<[f64; 2]> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::NonPositiveParams {
            context: "beta-binomial gradient",
            alpha,
            beta,
        });
    }
    let agg = aggregate(counts);
    let mut d_alpha = 0.0;
    let mut d_beta = 0.0;
    for &(s, b, c) in &agg.pairs {
        d_alpha += c * (digamma(s as f64 + alpha) - digamma(b as f64 + alpha + beta));
        d_beta += c * (digamma((b - s) as f64 + beta) - digamma(b as f64 + alpha + beta));
    }
    let n = agg.total_problems;
    d_alpha -= n * (digamma(alpha) - digamma(alpha + beta));
    d_beta -= n * (digamma(beta) - digamma(alpha + beta));
    // Chain rule: d/d ln x = x d/dx.
    Ok([alpha * d_alpha, beta * d_beta])
}

fn clamp_log(x: f64) -> f64 {
    x.clamp(LOG_PARAM_MIN, LOG_PARAM_MAX)
}

struct TwoParamFit {
    log_params: [f64; 2],
    objective: f64,
    converged: bool,
    boundary_hit: bool,
}

/// Multi-start Nelder-Mead over (ln alpha, ln beta): one
/// moments-informed start plus fixed-seed perturbations of it. The
/// perturbation stream is a constant of the crate so fits are a pure
/// function of their input data.
fn optimize_two_param<F: Fn(f64, f64) -> f64>(
    objective: F,
    start: [f64; 2],
    perturb_seed: u64,
) -> TwoParamFit {
    let wrapped = |x: &[f64; 2]| {
        let a = clamp_log(x[0]).exp();
        let b = clamp_log(x[1]).exp();
        let v = objective(a, b);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(perturb_seed);
    let mut starts = Vec::with_capacity(FIT_RESTARTS);
    starts.push(start);
    for _ in 1..FIT_RESTARTS {
        starts.push([
            clamp_log(start[0] + rng.random_range(-2.3..2.3)),
            clamp_log(start[1] + rng.random_range(-2.3..2.3)),
        ]);
    }

    let mut best: Option<TwoParamFit> = None;
    for s in starts {
        let res = nelder_mead(wrapped, s, 0.5, FIT_FTOL, FIT_MAX_ITER);
        let log_params = [clamp_log(res.x[0]), clamp_log(res.x[1])];
        let boundary_hit = log_params
            .iter()
            .any(|&lp| (lp - LOG_PARAM_MIN).abs() < 1e-6 || (lp - LOG_PARAM_MAX).abs() < 1e-6);
        let candidate = TwoParamFit {
            log_params,
            objective: res.fx,
            converged: res.converged,
            boundary_hit,
        };
        best = match best {
            None => Some(candidate),
            Some(cur) if candidate.objective < cur.objective => Some(candidate),
            Some(cur) => Some(cur),
        };
    }
    best.expect("at least one start")
}

// Moment-matched starting point: match the mean and variance of the
// success ratios to a Beta distribution, falling back to (1, 1) when the
// ratios are degenerate.
fn moments_start(counts: &CountsState) -> [f64; 2] {
    let ratios: Vec<f64> = counts
        .entries()
        .iter()
        .filter(|e| e.attempts > 0)
        .map(|e| e.successes as f64 / e.attempts as f64)
        .collect();
    if ratios.len() < 2 {
        return [0.0, 0.0];
    }
    let n = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / n;
    let var = ratios.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    if !(var > 1e-12) || !(mean > 0.0) || !(mean < 1.0) || var >= mean * (1.0 - mean) {
        return [0.0, 0.0];
    }
    let concentration = mean * (1.0 - mean) / var - 1.0;
    let alpha = (mean * concentration).clamp(PARAM_MIN, PARAM_MAX);
    let beta = ((1.0 - mean) * concentration).clamp(PARAM_MIN, PARAM_MAX);
    [alpha.ln(), beta.ln()]
}

/// Maximum-likelihood beta-binomial fit of the difficulty distribution.
///
/// Optimizes in (ln alpha, ln beta) from a method-of-moments start plus
/// four perturbed restarts. Degenerate data (for example all-zero
/// success tallies) drives a parameter into its clamp; that is reported
/// through `boundary_hit` rather than an error, with the best point
/// returned.
pub fn fit_beta_binomial(counts: &CountsState) -> Result<BetaParams> {
    if counts.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "beta-binomial fit needs at least 2 problems, got {}",
            counts.len()
        )));
    }
    if counts.total_attempts() == 0 {
        return Err(Error::InvalidArgument(
            "beta-binomial fit needs at least one recorded attempt".into(),
        ));
    }
    let agg = aggregate(counts);
    let objective = |a: f64, b: f64| -ll_pairs(&agg, a, b);
    let fit = optimize_two_param(objective, moments_start(counts), 0xBB_F17);
    let alpha = fit.log_params[0].exp();
    let beta = fit.log_params[1].exp();
    Ok(BetaParams {
        alpha,
        beta,
        theta: 1.0,
        log_likelihood: agg.ln_choose_term - fit.objective,
        converged: fit.converged,
        boundary_hit: fit.boundary_hit,
    })
}

/// Scale estimate for the discretized baseline:
/// theta = min(1, (b + 1) / b * max_i s_i / b_i). Defined only for
/// uniform budgets with at least one observed success.
pub fn estimate_scale_theta(counts: &CountsState) -> Result<f64> {
    let b = counts.uniform_attempts("scale estimation requires uniform sampling")?;
    if b == 0 {
        return Err(Error::InvalidArgument(
            "scale estimation needs at least one attempt per problem".into(),
        ));
    }
    let max_ratio = counts
        .ratios()
        .into_iter()
        .fold(0.0f64, f64::max);
    if max_ratio <= 0.0 {
        return Err(Error::DegenerateScale);
    }
    Ok((1.0 + 1.0 / b as f64) * max_ratio).map(|t| t.min(1.0))
}

/// Bin edges for the discretized baseline: 0 = e_0 < ... < e_l = theta.
///
/// The canonical family produced by [`BinSpec::geometric`] has strictly
/// decreasing widths, coarse near 0 and fine near theta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    edges: Vec<f64>,
}

impl BinSpec {
    /// Validated edge list: starts at exactly 0, strictly increasing,
    /// at least two bins.
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 3 {
            return Err(Error::InvalidBins {
                message: "need at least 2 bins (3 edges)".into(),
            });
        }
        if edges[0] != 0.0 {
            return Err(Error::InvalidBins {
                message: format!("first edge must be 0, got {}", edges[0]),
            });
        }
        for w in edges.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidBins {
                    message: format!("edges not strictly increasing at {} -> {}", w[0], w[1]),
                });
            }
        }
        let last = *edges.last().unwrap();
        if !(last > 0.0 && last <= 1.0) {
            return Err(Error::InvalidBins {
                message: format!("last edge must lie in (0, 1], got {last}"),
            });
        }
        Ok(Self { edges })
    }

    /// Geometric edges e_i = theta (1 - r^i) / (1 - r^l) with r in (0, 1),
    /// so widths shrink by the factor r from one bin to the next.
    pub fn geometric(theta: f64, bins: usize, ratio: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::InvalidTheta { theta });
        }
        if bins < 2 {
            return Err(Error::InvalidBins {
                message: "need at least 2 bins".into(),
            });
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidBins {
                message: format!("width ratio must be in (0, 1), got {ratio}"),
            });
        }
        let denom = 1.0 - ratio.powi(bins as i32);
        let mut edges: Vec<f64> = (0..=bins)
            .map(|i| theta * (1.0 - ratio.powi(i as i32)) / denom)
            .collect();
        edges[0] = 0.0;
        edges[bins] = theta;
        Self::new(edges)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Number of bins l.
    pub fn bin_count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn theta(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    /// Index of the half-open bin [e_i, e_{i+1}) containing x; the last
    /// bin is closed on the right so a ratio equal to theta lands in it.
    pub fn bin_index(&self, x: f64) -> Option<usize> {
        if x < 0.0 || x > self.theta() {
            return None;
        }
        if x == self.theta() {
            return Some(self.bin_count() - 1);
        }
        for (i, w) in self.edges.windows(2).enumerate() {
            if x >= w[0] && x < w[1] {
                return Some(i);
            }
        }
        None
    }
}

/// Density of the scaled beta at p: support (0, theta), zero outside.
pub fn scaled_beta_pdf(alpha: f64, beta: f64, theta: f64, p: f64) -> f64 {
    if p <= 0.0 || p >= theta {
        return 0.0;
    }
    let x = p / theta;
    ((alpha - 1.0) * x.ln() + (beta - 1.0) * (-x).ln_1p() - ln_beta(alpha, beta) - theta.ln())
        .exp()
}

/// CDF of the scaled beta at x, through the regularized incomplete beta
/// function.
pub fn scaled_beta_cdf(alpha: f64, beta: f64, theta: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= theta {
        return 1.0;
    }
    beta_reg(alpha, beta, x / theta)
}

fn interior_mode(alpha: f64, beta: f64, theta: f64) -> Option<f64> {
    if alpha > 1.0 && beta > 1.0 {
        Some(theta * (alpha - 1.0) / (alpha + beta - 2.0))
    } else {
        None
    }
}

// Scaled-beta probability mass of [lo, hi] by adaptive quadrature,
// splitting at the density mode when it falls inside.
fn bin_mass(alpha: f64, beta: f64, theta: f64, lo: f64, hi: f64) -> Result<f64> {
    let mut splits = Vec::new();
    if let Some(m) = interior_mode(alpha, beta, theta) {
        if m > lo && m < hi {
            splits.push(m);
        }
    }
    integrate(
        |p| scaled_beta_pdf(alpha, beta, theta, p),
        lo,
        hi,
        &splits,
        1e-10,
        1e-9,
    )
    .ok_or(Error::QuadratureNonConvergence { lo, hi })
}

/// Negative multinomial log-likelihood of the binned success ratios
/// under a scaled beta: -sum_i n_i ln A_i, with A_i the scaled-beta mass
/// in bin i computed by adaptive quadrature.
///
/// A bin holding problems but carrying zero mass (including ratios that
/// fall outside the support entirely) yields +infinity, which is a valid
/// value for the optimizer to reject.
pub fn discretized_multinomial_nll(
    counts: &CountsState,
    bins: &BinSpec,
    alpha: f64,
    beta: f64,
    theta: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::NonPositiveParams {
            context: "discretized objective",
            alpha,
            beta,
        });
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidTheta { theta });
    }
    if (bins.theta() - theta).abs() > 1e-12 {
        return Err(Error::InvalidBins {
            message: format!(
                "bin support ends at {} but theta is {theta}",
                bins.theta()
            ),
        });
    }
    if counts.is_empty() {
        return Ok(0.0);
    }
    counts.uniform_attempts("the discretized baseline requires uniform sampling")?;
    let tallies = bin_tallies(counts, bins);
    nll_from_tallies(&tallies, bins, alpha, beta, theta)
}

// Per-bin problem counts; the final slot counts ratios outside [0, theta].
fn bin_tallies(counts: &CountsState, bins: &BinSpec) -> Vec<u64> {
    let mut tallies = vec![0u64; bins.bin_count() + 1];
    for r in counts.ratios() {
        match bins.bin_index(r) {
            Some(i) => tallies[i] += 1,
            None => *tallies.last_mut().unwrap() += 1,
        }
    }
    tallies
}

fn nll_from_tallies(
    tallies: &[u64],
    bins: &BinSpec,
    alpha: f64,
    beta: f64,
    theta: f64,
) -> Result<f64> {
    if *tallies.last().unwrap() > 0 {
        return Ok(f64::INFINITY);
    }
    let edges = bins.edges();
    let mut nll = 0.0;
    for i in 0..bins.bin_count() {
        let n = tallies[i];
        if n == 0 {
            continue;
        }
        let mass = bin_mass(alpha, beta, theta, edges[i], edges[i + 1])?;
        if mass <= 0.0 {
            return Ok(f64::INFINITY);
        }
        nll -= n as f64 * mass.ln();
    }
    Ok(nll)
}

/// Discretized scaled-beta baseline: estimate theta from the max ratio,
/// bin the ratios into the default geometric edges, and fit (alpha,
/// beta) by minimizing the multinomial objective.
pub fn fit_discretized_beta(counts: &CountsState) -> Result<BetaParams> {
    fit_discretized_beta_with(counts, DEFAULT_BIN_COUNT, DEFAULT_BIN_RATIO)
}

/// Same as [`fit_discretized_beta`] with configurable bin geometry.
pub fn fit_discretized_beta_with(
    counts: &CountsState,
    bin_count: usize,
    bin_ratio: f64,
) -> Result<BetaParams> {
    let theta = estimate_scale_theta(counts)?;
    let bins = BinSpec::geometric(theta, bin_count, bin_ratio)?;
    let tallies = bin_tallies(counts, &bins);
    let objective = |a: f64, b: f64| {
        nll_from_tallies(&tallies, &bins, a, b, theta).unwrap_or(f64::INFINITY)
    };
    let fit = optimize_two_param(objective, moments_start(counts), 0xD15C);
    Ok(BetaParams {
        alpha: fit.log_params[0].exp(),
        beta: fit.log_params[1].exp(),
        theta,
        log_likelihood: -fit.objective,
        converged: fit.converged,
        boundary_hit: fit.boundary_hit,
    })
}

/// Log-likelihood of (successes out of attempts) under a scaled
/// beta-binomial, via the finite alternating series
/// C(b,s)/Be(a,b) * sum_i C(b-s,i) (-1)^i theta^(s+i) Be(s+i+a, b),
/// evaluated with an alternating log-sum-exp rescaled by the largest
/// term. Detected catastrophic cancellation is an error naming the
/// offending record.
pub fn scaled_beta_binomial_log_likelihood(
    attempts: u64,
    successes: u64,
    alpha: f64,
    beta: f64,
    theta: f64,
) -> Result<f64> {
    if successes > attempts {
        return Err(Error::SuccessesExceedAttempts {
            id: String::new(),
            successes,
            attempts,
        });
    }
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::NonPositiveParams {
            context: "scaled beta-binomial likelihood",
            alpha,
            beta,
        });
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidTheta { theta });
    }
    let failures = attempts - successes;
    let ln_theta = theta.ln();
    let ln_terms: Vec<f64> = (0..=failures)
        .map(|i| {
            ln_choose(failures, i)
                + (successes + i) as f64 * ln_theta
                + ln_beta((successes + i) as f64 + alpha, beta)
        })
        .collect();
    let ln_sum = ln_alternating_sum(&ln_terms).ok_or(Error::SeriesCancellation {
        attempts,
        successes,
        theta,
    })?;
    Ok(ln_choose(attempts, successes) - ln_beta(alpha, beta) + ln_sum)
}

/// Expected pass@k under the fitted difficulty distribution.
///
/// At theta = 1 the expectation telescopes to
/// 1 - Be(alpha, beta + k) / Be(alpha, beta); for theta < 1 it is
/// integrated numerically against the scaled-beta density.
pub fn predict_pass_at_k(params: &BetaParams, k: u64) -> Result<f64> {
    params.validate()?;
    if k == 0 {
        return Err(Error::KIsZero);
    }
    if params.theta >= 1.0 {
        let ln_fail = ln_beta(params.alpha, params.beta + k as f64)
            - ln_beta(params.alpha, params.beta);
        return Ok((1.0 - ln_fail.exp()).clamp(0.0, 1.0));
    }
    predict_by_quadrature(params.alpha, params.beta, params.theta, k)
}

/// Quadrature route for the pass@k expectation: integrates (1 - p)^k
/// against the scaled-beta density and returns the complement. Also
/// serves as the independent cross-check for the closed form.
pub fn predict_by_quadrature(alpha: f64, beta: f64, theta: f64, k: u64) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::NonPositiveParams {
            context: "pass@k quadrature",
            alpha,
            beta,
        });
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidTheta { theta });
    }
    if k == 0 {
        return Err(Error::KIsZero);
    }
    let mut splits = vec![theta * 0.25, theta * 0.5, theta * 0.75];
    if let Some(m) = interior_mode(alpha, beta, theta) {
        splits.push(m);
    }
    let fail_mass = integrate(
        |p| pow_one_minus(p, k as f64) * scaled_beta_pdf(alpha, beta, theta, p),
        0.0,
        theta,
        &splits,
        1e-10,
        1e-9,
    )
    .ok_or(Error::QuadratureNonConvergence {
        lo: 0.0,
        hi: theta,
    })?;
    Ok((1.0 - fail_mass).clamp(0.0, 1.0))
}
