//! Correlation, one-sided sign and signed-rank tests, and bootstrap intervals.

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Largest sample size for which the signed-rank null is enumerated exactly.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty sample")]
    Empty,
    #[error("non-finite value in sample")]
    NonFinite,
    #[error("{k} of {n} is not a majority count")]
    MinorityCount { k: u64, n: u64 },
}

/// Pearson correlation. `r` is `None` when undefined (fewer than two points
/// or a constant vector).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: Option<f64>,
    pub n: usize,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = x.len();
    if n < 2 {
        return Ok(CorrelationResult { r: None, n });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    // Relative tolerance so that vectors constant up to rounding count as constant.
    let tol = |s: f64, m: f64| s <= 1e-24 * (1.0 + m * m) * n as f64;
    if tol(sxx, mx) || tol(syy, my) {
        return Ok(CorrelationResult { r: None, n });
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(CorrelationResult { r: Some(r), n })
}

/// Which side of a paired comparison the majority falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// The first member of the pair wins (or has the larger values).
    First,
    Second,
    /// No majority; the reported p-value is for `First`.
    Tie,
}

/// A one-sided test against the null of no systematic difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// Number of informative observations (ties and zeros excluded).
    pub n: usize,
    /// Test statistic: majority count for the sign test, the majority-side
    /// rank sum for the signed-rank test.
    pub statistic: f64,
    pub direction: Direction,
    pub p_value: f64,
    /// log10 of the p-value, exact even when `p_value` underflows.
    pub log10_p: f64,
    pub exact: bool,
}

/// Exact `P[X >= k]` for `X ~ Binomial(n, 1/2)`, with its log10.
pub fn binomial_upper_tail(k: u64, n: u64) -> (f64, f64) {
    if k == 0 {
        return (1.0, 0.0);
    }
    if k > n {
        return (0.0, f64::NEG_INFINITY);
    }
    let mut c = BigUint::from(1u32);
    let mut tail = BigUint::from(0u32);
    // C(n, j) for j from n down to k, built incrementally.
    for j in (k..=n).rev() {
        if j < n {
            c = c * (j + 1) / (n - j);
        }
        tail += &c;
    }
    if n <= 1000 {
        // Correctly rounded tail times an exact power of two.
        let t: f64 = tail.to_string().parse().expect("decimal digits");
        let p = (t * 2f64.powi(-(n as i32))).min(1.0);
        if p.is_normal() {
            return (p, p.log10());
        }
    }
    let log10_p = log10_big(&tail) - n as f64 * std::f64::consts::LOG10_2;
    (10f64.powf(log10_p).min(1.0), log10_p.min(0.0))
}

fn log10_big(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits <= 1000 {
        let f: f64 = v.to_string().parse().unwrap_or(f64::INFINITY);
        return f.log10();
    }
    let shift = bits - 900;
    let top: f64 = (v >> shift).to_string().parse().unwrap_or(f64::INFINITY);
    top.log10() + shift as f64 * std::f64::consts::LOG10_2
}

/// Exact one-sided binomial test for a majority of `k` out of `n` under a
/// fair coin. The returned direction is `First` (or `Tie` at `2k = n`).
pub fn binomial_one_sided(k: u64, n: u64) -> Result<TestResult, StatsError> {
    if k > n || 2 * k < n {
        return Err(StatsError::MinorityCount { k, n });
    }
    let (p, log10_p) = binomial_upper_tail(k, n);
    Ok(TestResult {
        n: n as usize,
        statistic: k as f64,
        direction: if 2 * k == n { Direction::Tie } else { Direction::First },
        p_value: p,
        log10_p,
        exact: true,
    })
}

/// One-sided exact sign test on win counts, in the direction of the majority.
/// Ties must already be excluded by the caller.
pub fn sign_test(first_wins: u64, second_wins: u64) -> TestResult {
    let n = first_wins + second_wins;
    let k = first_wins.max(second_wins);
    let mut t = binomial_one_sided(k, n).expect("max is a majority");
    if second_wins > first_wins {
        t.direction = Direction::Second;
    }
    t
}

/// Midranks of `|d|` for nonzero `d`, returned alongside the signs.
fn signed_ranks(diffs: &[f64]) -> (Vec<f64>, Vec<bool>, Vec<usize>) {
    let mut nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    nz.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut ranks = vec![0.0; nz.len()];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < nz.len() {
        let mut j = i;
        while j + 1 < nz.len() && nz[j + 1].abs() == nz[i].abs() {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for r in &mut ranks[i..=j] {
            *r = mid;
        }
        tie_sizes.push(j - i + 1);
        i = j + 1;
    }
    let positive = nz.iter().map(|d| *d > 0.0).collect();
    (ranks, positive, tie_sizes)
}

/// Exact `P[W+ >= w]` under the null, counting subsets of doubled midranks.
fn wilcoxon_exact_upper(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0f64; max + 1];
    counts[0] = 1.0;
    let mut top = 0;
    for &d in &doubled {
        for s in (0..=top).rev() {
            if counts[s] > 0.0 {
                counts[s + d] += counts[s];
            }
        }
        top += d;
    }
    let target = (w_plus * 2.0).round() as usize;
    let hits: f64 = counts[target.min(max + 1)..].iter().sum();
    hits / 2f64.powi(ranks.len() as i32)
}

fn wilcoxon_normal_upper(n: usize, tie_sizes: &[usize], w_plus: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_adj: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_adj;
    if var <= 0.0 {
        return if w_plus >= mean { 1.0 } else { 0.0 };
    }
    let z = (w_plus - mean - 0.5) / var.sqrt();
    Normal::standard().sf(z)
}

/// Force the exact or the normal-approximation null distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMethod {
    Auto,
    Exact,
    Normal,
}

/// One-sided Wilcoxon signed-rank test on paired differences `first - second`.
///
/// Zeros are dropped, tied magnitudes get midranks. The tested direction is
/// the side with the larger rank sum.
pub fn wilcoxon_signed_rank(diffs: &[f64], method: WilcoxonMethod) -> Result<TestResult, StatsError> {
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (ranks, positive, tie_sizes) = signed_ranks(diffs);
    let n = ranks.len();
    if n == 0 {
        if diffs.is_empty() {
            return Err(StatsError::Empty);
        }
        return Ok(TestResult {
            n: 0,
            statistic: 0.0,
            direction: Direction::Tie,
            p_value: 1.0,
            log10_p: 0.0,
            exact: true,
        });
    }
    let w_plus: f64 = ranks.iter().zip(&positive).filter(|(_, p)| **p).map(|(r, _)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let (stat, direction) = if w_plus > w_minus {
        (w_plus, Direction::First)
    } else if w_minus > w_plus {
        (w_minus, Direction::Second)
    } else {
        (w_plus, Direction::Tie)
    };
    // By symmetry of the null, P[W- >= w] has the same form as P[W+ >= w].
    let exact = match method {
        WilcoxonMethod::Exact => true,
        WilcoxonMethod::Normal => false,
        WilcoxonMethod::Auto => n <= WILCOXON_EXACT_MAX_N,
    };
    let p = if exact {
        wilcoxon_exact_upper(&ranks, stat)
    } else {
        wilcoxon_normal_upper(n, &tie_sizes, stat)
    }
    .min(1.0);
    Ok(TestResult {
        n,
        statistic: stat,
        direction,
        p_value: p,
        log10_p: p.log10(),
        exact,
    })
}

/// Median of a sample; `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// Linear-interpolation sample quantile (type 7).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(sorted_quantile(&v, q))
}

fn sorted_quantile(v: &[f64], q: f64) -> f64 {
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub resamples: usize,
}

/// Percentile bootstrap interval for the median.
///
/// Resample `i` draws from its own ChaCha8 stream, so the result depends only
/// on `(values, resamples, level, seed)`.
pub fn bootstrap_median_ci(
    values: &[f64],
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<ConfidenceInterval, StatsError> {
    if values.is_empty() || resamples == 0 {
        return Err(StatsError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = values.len();
    let mut medians = Vec::with_capacity(resamples);
    let mut buf = vec![0.0; n];
    for i in 0..resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        for slot in buf.iter_mut() {
            *slot = values[rng.random_range(0..n)];
        }
        buf.sort_by(f64::total_cmp);
        medians.push(sorted_quantile(&buf, 0.5));
    }
    medians.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok(ConfidenceInterval {
        estimate: median(values).expect("nonempty"),
        lower: sorted_quantile(&medians, alpha),
        upper: sorted_quantile(&medians, 1.0 - alpha),
        level,
        resamples,
    })
}
