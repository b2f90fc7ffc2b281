//! Numerical building blocks: log-space combinatorics, stabilized
//! alternating sums, adaptive quadrature, a small derivative-free
//! optimizer, and deterministic seed derivation.

use statrs::function::gamma::ln_gamma;

/// ln C(n, k), computed through log-gamma so it stays finite for n up to
/// the full 10_000-sample pools. Returns -inf when k > n (C = 0).
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// (1 - p)^k evaluated as exp(k * ln(1 - p)) with `ln_1p` so tail
/// probabilities stay accurate for p near 0 and k up to 10^6 and beyond.
pub fn pow_one_minus(p: f64, k: f64) -> f64 {
    if p >= 1.0 {
        return if k == 0.0 { 1.0 } else { 0.0 };
    }
    if p <= 0.0 {
        return 1.0;
    }
    (k * (-p).ln_1p()).exp()
}

/// Logarithm of an alternating sum whose terms are supplied as log
/// magnitudes: ln(sum_i (-1)^i exp(ln_terms[i])).
///
/// The terms are rescaled by their maximum before summing. Returns `None`
/// when the signed sum is non-positive or indistinguishable from the
/// round-off floor, i.e. the cancellation destroyed the result.
pub fn ln_alternating_sum(ln_terms: &[f64]) -> Option<f64> {
    let max = ln_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let mut sum = 0.0;
    for (i, &lt) in ln_terms.iter().enumerate() {
        let term = (lt - max).exp();
        if i % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let floor = ln_terms.len() as f64 * f64::EPSILON;
    if !sum.is_finite() || sum <= floor {
        return None;
    }
    Some(max + sum.ln())
}

// Gauss-Kronrod 7-15 abscissae and weights on [-1, 1]. Even indices are
// Kronrod-only nodes; odd indices (and the center) carry the embedded
// 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_2,
    0.949_107_912_342_758_524_5,
    0.864_864_423_359_769_072_8,
    0.741_531_185_599_394_439_9,
    0.586_087_235_467_691_130_3,
    0.405_845_151_377_397_166_9,
    0.207_784_955_007_898_467_6,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_96,
    0.063_092_092_629_978_553_29,
    0.104_790_010_322_250_183_8,
    0.140_653_259_715_525_918_7,
    0.169_004_726_639_267_902_8,
    0.190_350_578_064_785_409_9,
    0.204_432_940_075_298_892_4,
    0.209_482_141_084_727_828_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_3,
    0.279_705_391_489_276_667_9,
    0.381_830_050_505_118_944_9,
    0.417_959_183_673_469_387_8,
];

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    if !fc.is_finite() {
        return None;
    }
    let mut result_gauss = WG[3] * fc;
    let mut result_kronrod = WGK[7] * fc;
    for j in 0..3 {
        let x = half * XGK[2 * j + 1];
        let f1 = f(center - x);
        let f2 = f(center + x);
        if !f1.is_finite() || !f2.is_finite() {
            return None;
        }
        result_gauss += WG[j] * (f1 + f2);
        result_kronrod += WGK[2 * j + 1] * (f1 + f2);
    }
    for j in 0..4 {
        let x = half * XGK[2 * j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        if !f1.is_finite() || !f2.is_finite() {
            return None;
        }
        result_kronrod += WGK[2 * j] * (f1 + f2);
    }
    let integral = result_kronrod * half;
    let err = ((result_kronrod - result_gauss) * half).abs();
    Some((integral, err))
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    integral: f64,
    err: f64,
}

const MAX_PANELS: usize = 8192;

/// Globally adaptive Gauss-Kronrod integration of `f` over `[lo, hi]`,
/// refining the panel with the largest error estimate until the total
/// estimated error drops below `abs_tol + rel_tol * |integral|`.
///
/// Interior `splits` seed the initial subdivision (e.g. at a density
/// mode). The endpoints are never evaluated, so integrable endpoint
/// singularities are handled by subdivision alone. Returns `None` when
/// the tolerance cannot be met within the panel budget.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    splits: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Option<f64> {
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return None;
    }
    if hi == lo {
        return Some(0.0);
    }
    let mut edges: Vec<f64> = Vec::with_capacity(splits.len() + 2);
    edges.push(lo);
    for &s in splits {
        if s > lo && s < hi {
            edges.push(s);
        }
    }
    edges.push(hi);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup();

    let mut panels: Vec<Panel> = Vec::new();
    for w in edges.windows(2) {
        let (integral, err) = gauss_kronrod(&f, w[0], w[1])?;
        panels.push(Panel {
            lo: w[0],
            hi: w[1],
            integral,
            err,
        });
    }

    loop {
        let total: f64 = panels.iter().map(|p| p.integral).sum();
        let total_err: f64 = panels.iter().map(|p| p.err).sum();
        if total_err <= abs_tol + rel_tol * total.abs() {
            // Deterministic final summation order.
            panels.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
            return Some(panels.iter().map(|p| p.integral).sum());
        }
        if panels.len() >= MAX_PANELS {
            return None;
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                a.err
                    .partial_cmp(&b.err)
                    .unwrap()
                    .then(ib.cmp(ia))
            })
            .map(|(i, _)| i)
            .unwrap();
        let Panel { lo, hi, .. } = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval no longer splittable in f64; give up on the tolerance.
            return None;
        }
        let (i1, e1) = gauss_kronrod(&f, lo, mid)?;
        let (i2, e2) = gauss_kronrod(&f, mid, hi)?;
        panels.push(Panel {
            lo,
            hi: mid,
            integral: i1,
            err: e1,
        });
        panels.push(Panel {
            lo: mid,
            hi,
            integral: i2,
            err: e2,
        });
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadResult {
    pub x: [f64; 2],
    pub fx: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Nelder-Mead simplex minimization in two dimensions.
///
/// Converges when the spread of objective values across the simplex falls
/// below `ftol` or the simplex collapses below machine scale.
pub fn nelder_mead<F: FnMut(&[f64; 2]) -> f64>(
    mut f: F,
    start: [f64; 2],
    step: f64,
    ftol: f64,
    max_iter: usize,
) -> NelderMeadResult {
    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let mut simplex = [
        start,
        [start[0] + step, start[1]],
        [start[0], start[1] + step],
    ];
    let mut values = [f(&simplex[0]), f(&simplex[1]), f(&simplex[2])];

    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..max_iter {
        iterations = iter + 1;
        // Order best -> worst.
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        simplex = [simplex[order[0]], simplex[order[1]], simplex[order[2]]];
        values = [values[order[0]], values[order[1]], values[order[2]]];

        let spread = (values[2] - values[0]).abs();
        let size = (simplex[2][0] - simplex[0][0]).abs().max((simplex[2][1] - simplex[0][1]).abs())
            + (simplex[1][0] - simplex[0][0]).abs().max((simplex[1][1] - simplex[0][1]).abs());
        if spread <= ftol || size <= 1e-13 {
            converged = true;
            break;
        }

        let centroid = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let worst = simplex[2];
        let reflected = [
            centroid[0] + ALPHA * (centroid[0] - worst[0]),
            centroid[1] + ALPHA * (centroid[1] - worst[1]),
        ];
        let fr = f(&reflected);

        if fr < values[0] {
            let expanded = [
                centroid[0] + GAMMA * (reflected[0] - centroid[0]),
                centroid[1] + GAMMA * (reflected[1] - centroid[1]),
            ];
            let fe = f(&expanded);
            if fe < fr {
                simplex[2] = expanded;
                values[2] = fe;
            } else {
                simplex[2] = reflected;
                values[2] = fr;
            }
        } else if fr < values[1] {
            simplex[2] = reflected;
            values[2] = fr;
        } else {
            let contracted = if fr < values[2] {
                [
                    centroid[0] + RHO * (reflected[0] - centroid[0]),
                    centroid[1] + RHO * (reflected[1] - centroid[1]),
                ]
            } else {
                [
                    centroid[0] + RHO * (worst[0] - centroid[0]),
                    centroid[1] + RHO * (worst[1] - centroid[1]),
                ]
            };
            let fc = f(&contracted);
            if fc < values[2].min(fr) {
                simplex[2] = contracted;
                values[2] = fc;
            } else {
                for i in 1..3 {
                    simplex[i] = [
                        simplex[0][0] + SIGMA * (simplex[i][0] - simplex[0][0]),
                        simplex[0][1] + SIGMA * (simplex[i][1] - simplex[0][1]),
                    ];
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..3 {
        if values[i] < values[best] {
            best = i;
        }
    }
    NelderMeadResult {
        x: simplex[best],
        fx: values[best],
        converged,
        iterations,
    }
}

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a base seed and a sequence of components.
/// Stable across platforms and releases, unlike the std hasher.
pub fn mix_seed(base: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix64(base);
    for &p in parts {
        state = splitmix64(state ^ splitmix64(p));
    }
    state
}

/// FNV-1a hash of a string, used to give every problem its own
/// shuffle stream independent of the other problems in the file.
pub fn fnv1a(s: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in s.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

/// Round fractional budgets to integers that sum exactly to `total`
/// using the largest-remainder rule. Ties go to the lower index.
pub fn largest_remainder(shares: &[f64], total: u64) -> Vec<u64> {
    let mut floors: Vec<u64> = shares.iter().map(|&s| s.max(0.0).floor() as u64).collect();
    let assigned: u64 = floors.iter().sum();
    let mut remaining = total.saturating_sub(assigned);
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for idx in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        floors[*idx] += 1;
        remaining -= 1;
    }
    floors
}

/// Linear-interpolation quantile of an ascending-sorted slice
/// (h = (n - 1) q convention).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let q = q.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}
