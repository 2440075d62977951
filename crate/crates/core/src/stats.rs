//! Paired nonparametric statistics: Wilcoxon signed-rank test and Spearman
//! rank correlation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Exact enumeration is used up to this many nonzero differences; beyond it
/// the normal approximation with continuity correction takes over.
const EXACT_LIMIT: usize = 25;
const MIN_PAIRS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// min(W+, W-), the smaller signed-rank sum.
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Number of nonzero differences actually used.
    pub n_used: usize,
}

/// Two-sided Wilcoxon signed-rank test on paired observations `(x, y)`.
///
/// Zero differences are dropped and ties receive average ranks. The null
/// distribution is enumerated exactly for n <= 25.
pub fn wilcoxon_signed_rank(paired: &[(f64, f64)]) -> Result<WilcoxonResult> {
    let diffs: Vec<f64> = paired.iter().map(|&(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n < MIN_PAIRS {
        return Err(Error::TooFewPairs { required: MIN_PAIRS, available: n });
    }

    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let mut w_plus = 0.0f64;
    let mut w_minus = 0.0f64;
    for (d, r) in diffs.iter().zip(&ranks) {
        if *d > 0.0 {
            w_plus += r;
        } else {
            w_minus += r;
        }
    }
    let statistic = w_plus.min(w_minus);

    let p_value = if n <= EXACT_LIMIT {
        exact_two_sided(&ranks, statistic)
    } else {
        normal_two_sided(&ranks, statistic)
    };
    Ok(WilcoxonResult { statistic, p_value: p_value.min(1.0), n_used: n })
}

/// P(W <= statistic) under the exact null, doubled. Average ranks are
/// half-integers, so doubling them makes the subset-sum lattice integral.
fn exact_two_sided(ranks: &[f64], statistic: f64) -> f64 {
    let n = ranks.len();
    let scaled: Vec<usize> = ranks.iter().map(|r| libm::round(2.0 * r) as usize).collect();
    let total: usize = scaled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &r in &scaled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let w = libm::round(2.0 * statistic) as usize;
    let below: u64 = counts[..=w.min(total)].iter().sum();
    let p = 2.0 * below as f64 / libm::exp2(n as f64);
    p
}

fn normal_two_sided(ranks: &[f64], statistic: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    var -= tie_correction(ranks) / 48.0;
    let z = (statistic - mean + 0.5) / libm::sqrt(var);
    2.0 * std_normal_cdf(z)
}

/// sum(t^3 - t) over groups of tied ranks.
fn tie_correction(ranks: &[f64]) -> f64 {
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut corr = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        corr += t * t * t - t;
        i = j;
    }
    corr
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / core::f64::consts::SQRT_2))
}

/// Ranks (1-based) with tied values receiving the average of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::TooFewPairs { required: 2, available: x.len().min(y.len()) });
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx <= 0.0 || vy <= 0.0 {
        return Err(Error::DegenerateMarginals);
    }
    Ok(cov / libm::sqrt(vx * vy))
}
