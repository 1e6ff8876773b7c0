//! Two-sample Wilcoxon rank-sum test.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Samples at or below this size (the smaller of the two) with no ties get
/// an exact p-value.
pub const EXACT_MAX: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSum {
    /// Sum of the (mid)ranks of the first sample in the pooled data.
    pub statistic: f64,
    /// Two-sided p-value; exact when available, otherwise normal.
    pub p_value: f64,
    /// Normal approximation with tie-corrected variance and continuity
    /// correction.
    pub p_normal: f64,
    pub p_exact: Option<f64>,
}

/// Midranks (1-based) of `values` and the tie correction `sum(t^3 - t)`.
fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (ranks, ties)
}

/// Number of `k`-subsets of `{1..=total}` for every possible rank sum.
fn subset_sum_counts(total: usize, k: usize) -> Vec<f64> {
    let max_sum = k * (2 * total - k + 1) / 2;
    // dp[j][s]: subsets of size j with sum s
    let mut dp = vec![vec![0.0f64; max_sum + 1]; k + 1];
    dp[0][0] = 1.0;
    for r in 1..=total {
        for j in (1..=k.min(r)).rev() {
            let (lo, hi) = dp.split_at_mut(j);
            let prev = &lo[j - 1];
            let cur = &mut hi[0];
            for s in (r..=max_sum).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    dp.swap_remove(k)
}

fn exact_p(small_rank_sum: usize, total: usize, k: usize) -> f64 {
    let counts = subset_sum_counts(total, k);
    let all: f64 = counts.iter().sum();
    let lower: f64 = counts[..=small_rank_sum].iter().sum();
    let upper: f64 = counts[small_rank_sum..].iter().sum();
    (2.0 * lower.min(upper) / all).min(1.0)
}

pub fn wilcoxon_ranksum(a: &[f64], b: &[f64]) -> Result<RankSum> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("rank-sum test needs two nonempty samples".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("rank-sum samples must be finite".into()));
    }
    let (n, m) = (a.len(), b.len());
    let total = n + m;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let w_a: f64 = ranks[..n].iter().sum();

    let (nf, mf, tf) = (n as f64, m as f64, total as f64);
    let mean = nf * (tf + 1.0) / 2.0;
    let var = nf * mf / 12.0 * ((tf + 1.0) - ties / (tf * (tf - 1.0)));
    let p_normal = if var <= 0.0 {
        1.0
    } else {
        let z = ((w_a - mean).abs() - 0.5).max(0.0) / var.sqrt();
        erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };

    let p_exact = (n.min(m) <= EXACT_MAX && ties == 0.0).then(|| {
        // ranks are integers here; use the smaller sample's sum
        let (k, w) = if n <= m {
            (n, w_a)
        } else {
            (m, ranks[n..].iter().sum())
        };
        exact_p(w.round() as usize, total, k)
    });

    Ok(RankSum {
        statistic: w_a,
        p_value: p_exact.unwrap_or(p_normal),
        p_normal,
        p_exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_triples() {
        let r = wilcoxon_ranksum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.statistic, 6.0);
        assert!((r.p_exact.unwrap() - 0.1).abs() < 1e-15);
        let s = wilcoxon_ranksum(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.p_value, r.p_value);
    }

    #[test]
    fn identical_samples() {
        let a = [0.3, 0.5, 0.5, 0.9];
        let r = wilcoxon_ranksum(&a, &a).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.statistic, 18.0);
        assert!(r.p_exact.is_none());
        let c = wilcoxon_ranksum(&[1.0; 3], &[1.0; 4]).unwrap();
        assert_eq!(c.p_value, 1.0);
    }

    #[test]
    fn midranks_with_ties() {
        let (r, t) = midranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(t, 6.0);
    }

    #[test]
    fn disjoint_sixes() {
        let a: Vec<f64> = (0..6).map(|i| 0.80 + 0.01 * i as f64).collect();
        let b: Vec<f64> = (0..6).map(|i| 0.90 + 0.01 * i as f64).collect();
        let r = wilcoxon_ranksum(&a, &b).unwrap();
        assert!((r.p_value - 2.0 / 924.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_empty() {
        assert!(wilcoxon_ranksum(&[], &[1.0]).is_err());
    }
}
