//! Evaluation statistics: gap-closed arithmetic and the fold-paired Wilcoxon
//! signed-rank test.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;

/// Errors from statistic computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatsError {
    /// Paired samples of different length.
    LengthMismatch {
        /// Length of the first sample.
        left: usize,
        /// Length of the second sample.
        right: usize,
    },
    /// Gap denominator is not positive (`sbs <= vbs`).
    DegenerateGap {
        /// The SBS PAR10 supplied.
        sbs: f64,
        /// The VBS PAR10 supplied.
        vbs: f64,
    },
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::LengthMismatch { left, right } => {
                write!(f, "paired samples differ in length: {left} vs {right}")
            }
            StatsError::DegenerateGap { sbs, vbs } => {
                write!(f, "SBS ({sbs}) must exceed VBS ({vbs}) for a gap percentage")
            }
        }
    }
}

impl core::error::Error for StatsError {}

/// Percentage of the SBS-VBS gap closed by a selector:
/// `100 * (sbs - alg) / (sbs - vbs)`. Negative when the selector is worse
/// than the single best solver; 100 at oracle level.
pub fn gap_closed(sbs: f64, alg: f64, vbs: f64) -> Result<f64, StatsError> {
    if sbs.is_nan() || vbs.is_nan() || sbs <= vbs {
        return Err(StatsError::DegenerateGap { sbs, vbs });
    }
    Ok(100.0 * (sbs - alg) / (sbs - vbs))
}

/// Threshold below which the exact permutation distribution is used.
const EXACT_LIMIT: usize = 25;

/// Two-sided paired Wilcoxon signed-rank test.
///
/// Zero differences are discarded (classical treatment); the remaining
/// absolute differences get average ranks for ties. With `n <= 25` pairs the
/// p-value comes from the exact permutation distribution over sign
/// assignments; above that, from the normal approximation with tie and
/// continuity corrections. All-zero differences give `p = 1`.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|&d| d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Ok(1.0);
    }

    let n = diffs.len();
    // Rank |d| ascending with average ranks for ties.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| math::abs(diffs[i]).total_cmp(&math::abs(diffs[j])));
    let mut ranks = vec![0.0f64; n];
    let mut tie_groups: Vec<usize> = Vec::new();
    let mut at = 0;
    while at < n {
        let mut end = at + 1;
        while end < n && math::abs(diffs[order[end]]) == math::abs(diffs[order[at]]) {
            end += 1;
        }
        // Positions at..end share the average of ranks at+1 ..= end.
        let avg = (at + 1 + end) as f64 / 2.0;
        for &idx in &order[at..end] {
            ranks[idx] = avg;
        }
        tie_groups.push(end - at);
        at = end;
    }

    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(&d, _)| d > 0.0)
        .map(|(_, &r)| r)
        .sum();
    let total = n as f64 * (n as f64 + 1.0) / 2.0;
    let w_minus = total - w_plus;
    let w = w_plus.min(w_minus);

    if n <= EXACT_LIMIT {
        Ok(exact_two_sided(&ranks, w))
    } else {
        Ok(approx_two_sided(n, &tie_groups, w))
    }
}

/// Exact two-sided p: `min(1, 2 * P(W <= w))` where W ranges over all 2^n
/// sign assignments of the ranks. Average ranks are multiples of 1/2, so
/// doubling them makes the subset-sum distribution integer-valued.
fn exact_two_sided(ranks: &[f64], w: f64) -> f64 {
    let scaled: Vec<usize> = ranks.iter().map(|&r| (2.0 * r) as usize).collect();
    let max_sum: usize = scaled.iter().sum();
    let mut counts = vec![0u64; max_sum + 1];
    counts[0] = 1;
    for &r in &scaled {
        for s in (r..=max_sum).rev() {
            counts[s] += counts[s - r];
        }
    }
    let w_scaled = (2.0 * w) as usize;
    let at_most: u64 = counts[..=w_scaled.min(max_sum)].iter().sum();
    let total = (1u64 << ranks.len()) as f64;
    (2.0 * at_most as f64 / total).min(1.0)
}

/// Normal approximation with tie correction and continuity correction.
fn approx_two_sided(n: usize, tie_groups: &[usize], w: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_groups
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum::<f64>()
        / 48.0;
    let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    if variance <= 0.0 {
        return 1.0;
    }
    let z = (w - mean + 0.5) / math::sqrt(variance);
    (2.0 * math::normal_cdf(z)).min(1.0)
}
