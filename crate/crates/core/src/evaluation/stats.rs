//! Rank tests for paired and independent samples.
//!
//! Ranks are handled as doubled midranks so tied ranks stay integral and
//! exact null distributions can be built by counting.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest number of non-zero pairs for the exact signed-rank distribution.
pub const WILCOXON_EXACT_MAX: usize = 25;
/// Largest per-sample size for the exact rank-sum distribution.
pub const MANN_WHITNEY_EXACT_MAX: usize = 20;
/// Fewest non-zero pairs the signed-rank test accepts.
pub const WILCOXON_MIN_PAIRS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    /// W⁺ for the signed-rank test, U of the first sample for rank-sum.
    pub statistic: f64,
    pub p_value: f64,
    pub exact: bool,
    /// Observations used after dropping zero differences.
    pub n: usize,
}

/// Doubled midranks (1-based, so ranks are 2, 4, ... without ties) of
/// `values` in input order, plus the sizes of tie groups.
pub fn doubled_midranks(values: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Midrank of positions i+1..=j is (i+1+j)/2; doubled that is i+1+j.
        let r = (i + 1 + j) as u64;
        for &o in &order[i..j] {
            ranks[o] = r;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

fn normal_two_sided(z: f64) -> f64 {
    let n = Normal::standard();
    (2.0 * (1.0 - n.cdf(z.abs()))).clamp(0.0, 1.0)
}

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped. With no differences left (identical
/// lists) the p-value is 1.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::invalid("paired samples differ in length"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
            exact: true,
            n: 0,
        });
    }
    if n < WILCOXON_MIN_PAIRS {
        return Err(Error::invalid(format!(
            "signed-rank test needs at least {WILCOXON_MIN_PAIRS} non-zero differences, got {n}"
        )));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let (ranks, ties) = doubled_midranks(&abs);
    let w2: u64 = ranks.iter().zip(&d).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total2: u64 = ranks.iter().sum();
    let statistic = w2 as f64 / 2.0;
    if n <= WILCOXON_EXACT_MAX {
        // counts[s] = sign assignments whose positive doubled-rank sum is s.
        let mut counts = vec![0.0f64; total2 as usize + 1];
        counts[0] = 1.0;
        let mut reach = 0usize;
        for &r in &ranks {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if counts[s] > 0.0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        // |2·W2 − total2| is twice the doubled distance from the mean.
        let observed = (2 * w2 as i64 - total2 as i64).abs();
        let extreme: f64 = counts
            .iter()
            .enumerate()
            .filter(|(s, _)| (2 * *s as i64 - total2 as i64).abs() >= observed)
            .map(|(_, c)| c)
            .sum();
        return Ok(TestResult {
            statistic,
            p_value: (extreme / 2f64.powi(n as i32)).min(1.0),
            exact: true,
            n,
        });
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let p_value = if var > 0.0 {
        normal_two_sided((statistic - mean) / var.sqrt())
    } else {
        1.0
    };
    Ok(TestResult {
        statistic,
        p_value,
        exact: false,
        n,
    })
}

/// Two-sided Mann-Whitney U test. Exact (over the tied-rank permutation
/// distribution) when both samples are small, normal approximation with
/// tie correction otherwise.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("both samples must be non-empty"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    let m = a.len();
    let n = b.len();
    let big = m + n;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = doubled_midranks(&pooled);
    let r2: u64 = ranks[..m].iter().sum();
    // U = R − m(m+1)/2, so 2U = R2 − m(m+1).
    let u = (r2 as f64 - (m * (m + 1)) as f64) / 2.0;
    let mean_u = (m * n) as f64 / 2.0;
    if m <= MANN_WHITNEY_EXACT_MAX && n <= MANN_WHITNEY_EXACT_MAX {
        let total: u64 = ranks.iter().sum();
        // ways[j][s]: subsets of size j with doubled-rank sum s.
        let mut ways = vec![vec![0.0f64; total as usize + 1]; m + 1];
        ways[0][0] = 1.0;
        for &r in &ranks {
            let r = r as usize;
            for j in (0..m).rev() {
                let (lo, hi) = ways.split_at_mut(j + 1);
                let (src, dst) = (&lo[j], &mut hi[0]);
                for s in (0..src.len() - r).rev() {
                    if src[s] > 0.0 {
                        dst[s + r] += src[s];
                    }
                }
            }
        }
        // Mean doubled rank sum of a size-m subset is m(N+1).
        let centre = (m * (big + 1)) as i64;
        let observed = (r2 as i64 - centre).abs();
        let all: f64 = ways[m].iter().sum();
        let extreme: f64 = ways[m]
            .iter()
            .enumerate()
            .filter(|(s, _)| (*s as i64 - centre).abs() >= observed)
            .map(|(_, c)| c)
            .sum();
        return Ok(TestResult {
            statistic: u,
            p_value: (extreme / all).min(1.0),
            exact: true,
            n: big,
        });
    }
    let (mf, nf, bf) = (m as f64, n as f64, big as f64);
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>();
    let var = mf * nf / 12.0 * ((bf + 1.0) - tie_term / (bf * (bf - 1.0)));
    let p_value = if var > 0.0 {
        normal_two_sided((u - mean_u) / var.sqrt())
    } else {
        1.0
    };
    Ok(TestResult {
        statistic: u,
        p_value,
        exact: false,
        n: big,
    })
}
