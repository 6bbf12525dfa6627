//! Paired significance tests over per-query score vectors.
//!
//! All tests are two-sided. The sign test is always exact; the signed-rank
//! test is exact for up to [`SIGNED_RANK_EXACT_MAX`] non-zero differences and
//! the rank-sum test for tie-free samples with `n + m <=`
//! [`RANK_SUM_EXACT_MAX`]. Beyond those limits both fall back to a normal
//! approximation with tie-corrected variance and continuity correction.
//!
//! Exact two-sided p-values are `min(1, 2 * min(P(T <= t), P(T >= t)))`,
//! computed from integer frequency counts.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const SIGNED_RANK_EXACT_MAX: usize = 25;
pub const RANK_SUM_EXACT_MAX: usize = 16;
/// Largest sign-test size whose binomial frequencies fit in `u128`.
const SIGN_TEST_COUNT_MAX: usize = 120;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum TestMethod {
    SignTest,
    WilcoxonRankSum,
    WilcoxonSignedRank,
    PairedT,
}

impl TestMethod {
    pub const ALL: [TestMethod; 4] = [
        TestMethod::SignTest,
        TestMethod::WilcoxonRankSum,
        TestMethod::WilcoxonSignedRank,
        TestMethod::PairedT,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestMethod::SignTest => "sign",
            TestMethod::WilcoxonRankSum => "wx-rs",
            TestMethod::WilcoxonSignedRank => "wx-sr",
            TestMethod::PairedT => "t",
        }
    }

    /// Runs the test on two paired score vectors. Rank-sum treats them as two
    /// samples; the others work on the differences `a - b`.
    pub fn run(self, a: &[f64], b: &[f64]) -> Result<TestResult> {
        if a.len() != b.len() {
            return Err(Error::Argument(format!(
                "score vectors differ in length ({} vs {})",
                a.len(),
                b.len()
            )));
        }
        if self == TestMethod::WilcoxonRankSum {
            return wilcoxon_rank_sum(a, b);
        }
        let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        match self {
            TestMethod::SignTest => sign_test(&diffs),
            TestMethod::WilcoxonSignedRank => wilcoxon_signed_rank(&diffs),
            TestMethod::PairedT => paired_t(&diffs),
            TestMethod::WilcoxonRankSum => unreachable!(),
        }
    }
}

impl fmt::Display for TestMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown test {s:?} (expected sign, wx-rs, wx-sr or t)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
}

impl Aggregation {
    pub fn name(self) -> &'static str {
        match self {
            Aggregation::Mean => "mean",
            Aggregation::Median => "median",
        }
    }

    /// Mean or median of `values`; NaN for an empty slice.
    pub fn apply(self, values: &[f64]) -> f64 {
        if values.is_empty() {
            return f64::NAN;
        }
        match self {
            Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregation::Median => {
                let mut v = values.to_vec();
                v.sort_unstable_by(f64::total_cmp);
                median_of_sorted(&v)
            }
        }
    }
}

pub(crate) fn median_of_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "median" => Ok(Aggregation::Median),
            _ => Err(Error::Argument(format!("unknown aggregation {s:?} (expected mean or median)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub method: TestMethod,
    pub statistic: f64,
    pub p_value: f64,
    pub exact: bool,
    /// Observations used after zero-handling.
    pub n_effective: usize,
}

fn two_sided(lower: f64, upper: f64) -> f64 {
    (2.0 * lower.min(upper)).min(1.0)
}

/// Exact binomial sign test on the non-zero differences. The statistic is the
/// number of positive differences.
pub fn sign_test(diffs: &[f64]) -> Result<TestResult> {
    let n = diffs.iter().filter(|d| **d != 0.0).count();
    if n == 0 {
        return Err(Error::Degenerate("all differences are zero".into()));
    }
    let positive = diffs.iter().filter(|d| **d > 0.0).count();
    let k = positive.min(n - positive);
    let p = if n <= SIGN_TEST_COUNT_MAX {
        let mut coef: u128 = 1;
        let mut tail: u128 = 0;
        for i in 0..=k {
            tail += coef;
            coef = coef * (n - i) as u128 / (i + 1) as u128;
        }
        // 2 * tail / 2^n
        let total = 2f64.powi(n as i32);
        ((2 * tail) as f64 / total).min(1.0)
    } else if k == n - k {
        1.0
    } else {
        // P(X <= k) for X ~ Bin(n, 1/2)
        (2.0 * beta_reg((n - k) as f64, (k + 1) as f64, 0.5)).min(1.0)
    };
    Ok(TestResult {
        method: TestMethod::SignTest,
        statistic: positive as f64,
        p_value: p,
        exact: true,
        n_effective: n,
    })
}

/// Midranks of `values` doubled so they stay integral, plus the tie-group sizes.
fn doubled_midranks(values: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share the mean rank (start+1+end)/2
        let doubled = (start + 1 + end) as u64;
        for &i in &order[start..end] {
            ranks[i] = doubled;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

fn tie_term(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t * t * t - t) as f64).sum()
}

fn normal_two_sided(statistic: f64, mean: f64, variance: f64) -> f64 {
    if variance <= 0.0 {
        return 1.0;
    }
    let z = ((statistic - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Wilcoxon signed-rank test. Zeros are dropped before ranking; the statistic
/// is the sum of ranks of the positive differences.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<TestResult> {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return Err(Error::Degenerate("all differences are zero".into()));
    }
    let magnitudes: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = doubled_midranks(&magnitudes);
    let w2: u64 = ranks.iter().zip(&nonzero).filter(|(_, d)| **d > 0.0).map(|(r, _)| *r).sum();
    let statistic = w2 as f64 / 2.0;

    if n <= SIGNED_RANK_EXACT_MAX {
        let counts = signed_rank_counts(&ranks);
        let total = (1u64 << n) as f64;
        let w2 = w2 as usize;
        let lower: u64 = counts[..=w2].iter().sum();
        let upper: u64 = counts[w2..].iter().sum();
        return Ok(TestResult {
            method: TestMethod::WilcoxonSignedRank,
            statistic,
            p_value: two_sided(lower as f64 / total, upper as f64 / total),
            exact: true,
            n_effective: n,
        });
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&ties) / 48.0;
    Ok(TestResult {
        method: TestMethod::WilcoxonSignedRank,
        statistic,
        p_value: normal_two_sided(statistic, mean, variance),
        exact: false,
        n_effective: n,
    })
}

/// Frequency of each doubled positive-rank sum over all `2^n` sign assignments.
pub(crate) fn signed_rank_counts(doubled_ranks: &[u64]) -> Vec<u64> {
    let max: usize = doubled_ranks.iter().sum::<u64>() as usize;
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

/// Wilcoxon rank-sum (Mann-Whitney) test; the statistic is the rank sum of `xs`
/// in the pooled sample.
pub fn wilcoxon_rank_sum(xs: &[f64], ys: &[f64]) -> Result<TestResult> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::Argument("rank-sum test needs two non-empty samples".into()));
    }
    let (n, m) = (xs.len(), ys.len());
    let pooled: Vec<f64> = xs.iter().chain(ys).copied().collect();
    let (ranks, ties) = doubled_midranks(&pooled);
    let w2: u64 = ranks[..n].iter().sum();
    let statistic = w2 as f64 / 2.0;
    let big_n = n + m;

    if big_n <= RANK_SUM_EXACT_MAX && ties.is_empty() {
        // tie-free: doubled ranks are 2, 4, ..., 2N so plain ranks suffice
        let counts = rank_sum_counts(big_n, n);
        let w = (w2 / 2) as usize;
        let total: u64 = counts.iter().sum();
        let lower: u64 = counts[..=w].iter().sum();
        let upper: u64 = counts[w..].iter().sum();
        return Ok(TestResult {
            method: TestMethod::WilcoxonRankSum,
            statistic,
            p_value: two_sided(lower as f64 / total as f64, upper as f64 / total as f64),
            exact: true,
            n_effective: big_n,
        });
    }
    let (nf, mf, bn) = (n as f64, m as f64, big_n as f64);
    let mean = nf * (bn + 1.0) / 2.0;
    let variance = nf * mf / 12.0 * ((bn + 1.0) - tie_term(&ties) / (bn * (bn - 1.0)));
    Ok(TestResult {
        method: TestMethod::WilcoxonRankSum,
        statistic,
        p_value: normal_two_sided(statistic, mean, variance),
        exact: false,
        n_effective: big_n,
    })
}

/// `counts[s]` = number of size-`n` subsets of `{1..=total}` with sum `s`.
pub(crate) fn rank_sum_counts(total: usize, n: usize) -> Vec<u64> {
    let max_sum = total * (total + 1) / 2;
    // table[j][s]: subsets of size j with sum s
    let mut table = vec![vec![0u64; max_sum + 1]; n + 1];
    table[0][0] = 1;
    for rank in 1..=total {
        for j in (1..=n.min(rank)).rev() {
            let (lo, hi) = table.split_at_mut(j);
            let prev = &lo[j - 1];
            let cur = &mut hi[0];
            for s in (rank..=max_sum).rev() {
                cur[s] += prev[s - rank];
            }
        }
    }
    table.swap_remove(n)
}

/// Paired t-test with `n - 1` degrees of freedom.
pub fn paired_t(diffs: &[f64]) -> Result<TestResult> {
    let n = diffs.len();
    if n < 2 {
        return Err(Error::Argument("t-test needs at least two differences".into()));
    }
    if diffs.iter().all(|d| *d == diffs[0]) {
        return Err(Error::Degenerate("differences have zero variance".into()));
    }
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    if var <= 0.0 {
        return Err(Error::Degenerate("differences have zero variance".into()));
    }
    let t = mean / (var / nf).sqrt();
    Ok(TestResult {
        method: TestMethod::PairedT,
        statistic: t,
        p_value: t_two_sided(t, nf - 1.0),
        exact: true,
        n_effective: n,
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Direction {
    A,
    B,
    Tie,
}

impl Direction {
    pub fn flipped(self) -> Direction {
        match self {
            Direction::A => Direction::B,
            Direction::B => Direction::A,
            Direction::Tie => Direction::Tie,
        }
    }
}

/// Direction and significance of one system comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairVerdict {
    pub better: Direction,
    pub significant: bool,
    pub p_value: f64,
    pub aggregation: Aggregation,
    /// `aggregate(a) - aggregate(b)`
    pub delta: f64,
    /// The test had no defined statistic; recorded as p = 1, not significant.
    pub degenerate: bool,
}

/// Direction comes from the aggregate difference, significance from `test`.
pub fn compare_pair(
    a: &[f64],
    b: &[f64],
    test: TestMethod,
    aggregation: Aggregation,
    alpha: f64,
) -> Result<PairVerdict> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "score vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Argument("cannot compare empty score vectors".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Argument(format!("alpha {alpha} outside (0, 1)")));
    }
    let delta = aggregation.apply(a) - aggregation.apply(b);
    let (p_value, degenerate) = match test.run(a, b) {
        Ok(r) => (r.p_value, false),
        Err(Error::Degenerate(_) | Error::Argument(_)) => (1.0, true),
        Err(e) => return Err(e),
    };
    Ok(verdict(delta, p_value, degenerate, aggregation, alpha))
}

pub(crate) fn verdict(delta: f64, p_value: f64, degenerate: bool, aggregation: Aggregation, alpha: f64) -> PairVerdict {
    let better = if delta > 0.0 {
        Direction::A
    } else if delta < 0.0 {
        Direction::B
    } else {
        Direction::Tie
    };
    PairVerdict {
        better,
        significant: p_value < alpha,
        p_value,
        aggregation,
        delta,
        degenerate,
    }
}
