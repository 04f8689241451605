//! Summary statistics and the Wilcoxon signed-rank test.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::norm_sf;

/// Largest sample size handled by exact enumeration.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

/// Linear-interpolation quantile of sorted data at position `(n−1)·q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot summarize an empty sample".into()));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let median = if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 };
    let (q1, q3) = (quantile_sorted(&s, 0.25), quantile_sorted(&s, 0.75));
    Ok(Summary { n, median, min: s[0], max: s[n - 1], q1, q3, iqr: q3 - q1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Exact,
    Normal,
    /// All differences were zero.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wilcoxon {
    /// Number of non-zero differences.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// min(W⁺, W⁻).
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
    pub method: PMethod,
}

/// Average ranks (1-based) of `|d|`, ties sharing their mean rank.
fn abs_ranks(d: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.sort_by(|&a, &b| libm::fabs(d[a]).total_cmp(&libm::fabs(d[b])));
    let mut ranks = vec![0.0; d.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && libm::fabs(d[idx[j + 1]]) == libm::fabs(d[idx[i]]) {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// `P(min(W⁺, W⁻) ≤ stat)` under the sign-flip null, by dynamic programming
/// over doubled (integer) ranks.
fn exact_p(ranks: &[f64], statistic: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| libm::round(2.0 * r) as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let s2 = libm::round(2.0 * statistic) as usize;
    let hits: f64 = (0..=total).filter(|&w| w.min(total - w) <= s2).map(|w| counts[w]).sum();
    let all: f64 = counts.iter().sum();
    (hits / all).min(1.0)
}

/// Two-sided signed-rank test on `x − y`.
pub fn wilcoxon(x: &[f64], y: &[f64]) -> Result<Wilcoxon> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { what: "wilcoxon pairs", expected: x.len(), found: y.len() });
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Ok(Wilcoxon {
            n: 0,
            w_plus: 0.0,
            w_minus: 0.0,
            statistic: 0.0,
            p_value: 1.0,
            significant: false,
            method: PMethod::Degenerate,
        });
    }
    let ranks = abs_ranks(&d);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let w_minus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v < 0.0).map(|(_, r)| r).sum();
    // empty float sums are -0.0
    let (w_plus, w_minus) = (w_plus + 0.0, w_minus + 0.0);
    let statistic = w_plus.min(w_minus);
    let (p_value, method) = if n <= EXACT_MAX_N {
        (exact_p(&ranks, statistic), PMethod::Exact)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut tie = 0.0;
        let mut sorted = ranks.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie += t * t * t - t;
            i = j + 1;
        }
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie / 48.0;
        let num = (libm::fabs(statistic - mean) - 0.5).max(0.0);
        let p = if var > 0.0 { 2.0 * norm_sf(num / libm::sqrt(var)) } else { 1.0 };
        (p.min(1.0), PMethod::Normal)
    };
    Ok(Wilcoxon { n, w_plus, w_minus, statistic, p_value, significant: p_value < 0.05, method })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;
    use rand::Rng as _;

    #[test]
    fn summaries() {
        let s = summarize(&[0.5]).unwrap();
        assert_eq!((s.median, s.min, s.max, s.iqr), (0.5, 0.5, 0.5, 0.0));
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.median, s.q1, s.q3, s.iqr), (2.5, 1.75, 3.25, 1.5));
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn median_within_range() {
        let mut r = rng(3);
        for _ in 0..100 {
            let v: Vec<f64> = (0..r.random_range(1..40)).map(|_| r.random_range(0.0..1.0)).collect();
            let s = summarize(&v).unwrap();
            assert!(s.min <= s.median && s.median <= s.max && s.iqr >= 0.0);
        }
    }

    #[test]
    fn equal_samples() {
        let w = wilcoxon(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((w.statistic, w.p_value, w.significant), (0.0, 1.0, false));
    }

    #[test]
    fn three_positive_differences() {
        let w = wilcoxon(&[1.0, 2.0, 3.0], &[0.0; 3]).unwrap();
        assert_eq!(w.w_minus, 0.0);
        assert!((w.p_value - 0.25).abs() < 1e-15);
    }

    fn enumerate_p(d: &[f64]) -> f64 {
        let ranks = abs_ranks(d);
        let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
        let total: f64 = ranks.iter().sum();
        let stat = w_plus.min(total - w_plus);
        let n = d.len();
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let wp: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if wp.min(total - wp) <= stat + 1e-9 {
                hits += 1;
            }
        }
        hits as f64 / (1u64 << n) as f64
    }

    #[test]
    fn exact_branch_matches_enumeration() {
        let mut r = rng(17);
        for _ in 0..100 {
            let n = r.random_range(1..=10);
            // small integer grid so ties occur
            let d: Vec<f64> = (0..n).map(|_| (r.random_range(1..8) as f64) * if r.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
            let w = wilcoxon(&d, &vec![0.0; n]).unwrap();
            assert!((w.p_value - enumerate_p(&d)).abs() < 1e-12, "{d:?}");
        }
    }

    #[test]
    fn normal_branch_at_n81() {
        // statistic 1649 at n = 81
        let nf = 81.0;
        let mean = nf * (nf + 1.0) / 4.0;
        let sd = libm::sqrt(nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0);
        let p = 2.0 * norm_sf((mean - 1649.0 - 0.5) / sd);
        assert!((p - 0.9568).abs() < 0.005, "{p}");
    }

    #[test]
    fn significance_flag_follows_p() {
        let x: Vec<f64> = (1..=30).map(f64::from).collect();
        let w = wilcoxon(&x, &vec![0.0; 30]).unwrap();
        assert_eq!(w.method, PMethod::Normal);
        assert!(w.significant && w.p_value < 0.05);
    }
}
