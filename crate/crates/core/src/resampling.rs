//! Bootstrap analysis of leaderboard rank stability.
//!
//! Each trial draws a query multiset of the original size with replacement,
//! aggregates every run over it, and ranks runs by aggregate (descending,
//! ties broken by the matrix row order). Trials are independent; trial `t`
//! uses a ChaCha8 stream seeded with `seed` on stream number `t`, so results
//! are identical regardless of thread scheduling or platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::MetricMatrix;
use crate::stats::Aggregation;

pub const DEFAULT_TRIALS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankDistribution {
    pub run_ids: Vec<String>,
    pub trials: usize,
    pub seed: u64,
    pub aggregation: Aggregation,
    /// `counts[run][rank - 1]`: trials in which `run` took that rank.
    pub counts: Vec<Vec<u64>>,
    pub proportions: Vec<Vec<f64>>,
    pub expected_rank: Vec<f64>,
    pub rank_quantiles: Vec<RankQuantiles>,
    /// Rank on the full, unresampled query set.
    pub observed_rank: Vec<usize>,
}

/// Five-number summary of a run's bootstrap ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RankQuantiles {
    pub min: usize,
    pub q1: usize,
    pub median: usize,
    pub q3: usize,
    pub max: usize,
}

/// Ranks (1-based) of runs by descending aggregate; equal aggregates keep
/// row order.
pub fn rank_runs(aggregates: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..aggregates.len()).collect();
    order.sort_by(|&a, &b| aggregates[b].total_cmp(&aggregates[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; aggregates.len()];
    for (pos, &run) in order.iter().enumerate() {
        ranks[run] = pos + 1;
    }
    ranks
}

/// Per-run view of the matrix used inside trials.
struct Prepared<'a> {
    matrix: &'a MetricMatrix,
    /// For median aggregation: per run, query indices sorted by score.
    sorted: Vec<Vec<usize>>,
}

impl<'a> Prepared<'a> {
    fn new(matrix: &'a MetricMatrix, aggregation: Aggregation) -> Self {
        let sorted = match aggregation {
            Aggregation::Mean => Vec::new(),
            Aggregation::Median => (0..matrix.n_runs())
                .map(|r| {
                    let row = matrix.row(r);
                    let mut idx: Vec<usize> = (0..row.len()).collect();
                    idx.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
                    idx
                })
                .collect(),
        };
        Prepared { matrix, sorted }
    }

    fn aggregate(&self, run: usize, multiplicity: &[u32], draws: usize) -> f64 {
        let row = self.matrix.row(run);
        if self.sorted.is_empty() {
            let sum: f64 = row.iter().zip(multiplicity).map(|(s, &c)| s * c as f64).sum();
            return sum / draws as f64;
        }
        // walk values in ascending order until reaching the middle draw(s)
        let lo_target = (draws - 1) / 2;
        let hi_target = draws / 2;
        let mut seen = 0usize;
        let mut lo = None;
        for &q in &self.sorted[run] {
            let c = multiplicity[q] as usize;
            if c == 0 {
                continue;
            }
            if lo.is_none() && lo_target < seen + c {
                lo = Some(row[q]);
            }
            if hi_target < seen + c {
                return (lo.unwrap_or(row[q]) + row[q]) / 2.0;
            }
            seen += c;
        }
        unreachable!("multiplicities sum to draws")
    }
}

/// Bootstrap rank distribution of every run in `matrix`.
pub fn bootstrap_ranks(
    matrix: &MetricMatrix,
    trials: usize,
    seed: u64,
    aggregation: Aggregation,
) -> Result<RankDistribution> {
    if matrix.n_runs() == 0 || matrix.n_queries() == 0 {
        return Err(Error::Argument("cannot bootstrap an empty score matrix".into()));
    }
    if trials == 0 {
        return Err(Error::Argument("trials must be at least 1".into()));
    }
    let runs = matrix.n_runs();
    let queries = matrix.n_queries();
    let prepared = Prepared::new(matrix, aggregation);

    let counts = (0..trials)
        .into_par_iter()
        .fold(
            || (vec![0u64; runs * runs], vec![0u32; queries], vec![0f64; runs]),
            |(mut counts, mut multiplicity, mut aggregates), trial| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(trial as u64);
                multiplicity.iter_mut().for_each(|c| *c = 0);
                for _ in 0..queries {
                    multiplicity[rng.random_range(0..queries as u64) as usize] += 1;
                }
                for (r, agg) in aggregates.iter_mut().enumerate() {
                    *agg = prepared.aggregate(r, &multiplicity, queries);
                }
                for (r, rank) in rank_runs(&aggregates).into_iter().enumerate() {
                    counts[r * runs + rank - 1] += 1;
                }
                (counts, multiplicity, aggregates)
            },
        )
        .map(|(counts, _, _)| counts)
        .reduce(
            || vec![0u64; runs * runs],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let counts: Vec<Vec<u64>> = counts.chunks(runs).map(<[u64]>::to_vec).collect();
    let observed: Vec<f64> = (0..runs).map(|r| matrix.aggregate(r, aggregation)).collect();
    Ok(from_counts(
        matrix.run_ids.clone(),
        counts,
        rank_runs(&observed),
        seed,
        aggregation,
    ))
}

fn from_counts(
    run_ids: Vec<String>,
    counts: Vec<Vec<u64>>,
    observed_rank: Vec<usize>,
    seed: u64,
    aggregation: Aggregation,
) -> RankDistribution {
    let trials: u64 = counts.first().map(|row| row.iter().sum()).unwrap_or(0);
    let t = trials as f64;
    let proportions = counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / t).collect())
        .collect();
    let expected_rank = counts
        .iter()
        .map(|row| {
            let weighted: u64 = row.iter().enumerate().map(|(i, &c)| (i as u64 + 1) * c).sum();
            weighted as f64 / t
        })
        .collect();
    let rank_quantiles = counts.iter().map(|row| quantiles(row, trials)).collect();
    RankDistribution {
        run_ids,
        trials: trials as usize,
        seed,
        aggregation,
        counts,
        proportions,
        expected_rank,
        rank_quantiles,
        observed_rank,
    }
}

/// Inverse-CDF quantiles: smallest rank whose cumulative count reaches
/// `p * trials`.
fn quantiles(row: &[u64], trials: u64) -> RankQuantiles {
    let at = |num: u64, den: u64| -> usize {
        // cumulative * den >= trials * num, with at least one trial
        let target = (trials * num).div_ceil(den).max(1);
        let mut cumulative = 0;
        for (i, &c) in row.iter().enumerate() {
            cumulative += c;
            if cumulative >= target {
                return i + 1;
            }
        }
        row.len()
    };
    RankQuantiles {
        min: at(0, 1),
        q1: at(1, 4),
        median: at(1, 2),
        q3: at(3, 4),
        max: row.iter().rposition(|&c| c > 0).map_or(row.len(), |i| i + 1),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankSummaryRow {
    pub run_id: String,
    pub observed_rank: usize,
    pub expected_rank: f64,
    pub quantiles: RankQuantiles,
}

/// Per-run expected rank and quantiles, ordered by leaderboard rank.
pub fn rank_summary(dist: &RankDistribution) -> Vec<RankSummaryRow> {
    let mut rows: Vec<RankSummaryRow> = (0..dist.run_ids.len())
        .map(|r| RankSummaryRow {
            run_id: dist.run_ids[r].clone(),
            observed_rank: dist.observed_rank[r],
            expected_rank: dist.expected_rank[r],
            quantiles: dist.rank_quantiles[r],
        })
        .collect();
    rows.sort_by_key(|r| r.observed_rank);
    rows
}
