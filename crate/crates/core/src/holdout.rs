//! Public versus private leaderboard comparison.
//!
//! Conditions are the cross product of query set (public, private), labeling
//! scheme and metric. A condition is evaluated on the queries of its set that
//! the scheme judges; conditions with no judged queries are pruned, and both
//! restrictions and prunings are listed in the report.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::corpus::{validate_run_against_queryset, QueryPartition, Qrels, Run};
use crate::error::{Error, Result};
use crate::metrics::{score_matrix, MetricMatrix, MetricSpec};
use crate::resampling::{bootstrap_ranks, rank_runs, RankDistribution, RankQuantiles, DEFAULT_TRIALS};
use crate::stats::Aggregation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum QuerySet {
    Public,
    Private,
}

impl QuerySet {
    pub fn name(self) -> &'static str {
        match self {
            QuerySet::Public => "public",
            QuerySet::Private => "private",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoldoutOptions {
    pub trials: usize,
    pub seed: u64,
    pub aggregation: Aggregation,
    pub focus_runs: Vec<String>,
}

impl HoldoutOptions {
    pub fn new(seed: u64) -> Self {
        HoldoutOptions {
            trials: DEFAULT_TRIALS,
            seed,
            aggregation: Aggregation::Mean,
            focus_runs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeaderboardEntry {
    pub run_id: String,
    pub rank: usize,
    pub aggregate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub queryset: QuerySet,
    pub scheme_id: String,
    pub metric: MetricSpec,
    /// Threshold applied by RR/AP under this scheme; `None` for graded metrics.
    pub binarization_threshold: Option<u32>,
    pub query_ids: Vec<String>,
    /// Queries of the set dropped because the scheme does not judge them.
    pub unjudged_dropped: usize,
    /// Ordered by rank.
    pub leaderboard: Vec<LeaderboardEntry>,
    /// Rank per run, in input run order.
    pub ranks: Vec<usize>,
    pub distribution: RankDistribution,
}

impl Condition {
    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.queryset.name(), self.scheme_id, self.metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrunedCondition {
    pub queryset: QuerySet,
    pub scheme_id: String,
    pub metric: MetricSpec,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FocusRow {
    pub condition: String,
    pub run_id: String,
    pub rank: usize,
    pub expected_rank: f64,
    pub quantiles: RankQuantiles,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoldoutReport {
    pub run_ids: Vec<String>,
    pub trials: usize,
    pub seed: u64,
    pub aggregation: Aggregation,
    pub conditions: Vec<Condition>,
    pub pruned: Vec<PrunedCondition>,
    pub focus_runs: Vec<String>,
    /// Boxplot data for the focus runs, one row per (condition, run).
    pub focus: Vec<FocusRow>,
}

impl HoldoutReport {
    pub fn condition(&self, queryset: QuerySet, scheme_id: &str, metric: MetricSpec) -> Option<&Condition> {
        self.conditions
            .iter()
            .find(|c| c.queryset == queryset && c.scheme_id == scheme_id && c.metric == metric)
    }
}

/// Leaderboard ordering of the matrix rows by aggregate.
pub fn leaderboard(matrix: &MetricMatrix, aggregation: Aggregation) -> (Vec<LeaderboardEntry>, Vec<usize>) {
    let aggregates: Vec<f64> = (0..matrix.n_runs()).map(|r| matrix.aggregate(r, aggregation)).collect();
    let ranks = rank_runs(&aggregates);
    let mut entries: Vec<LeaderboardEntry> = (0..matrix.n_runs())
        .map(|r| LeaderboardEntry {
            run_id: matrix.run_ids[r].clone(),
            rank: ranks[r],
            aggregate: aggregates[r],
        })
        .collect();
    entries.sort_by_key(|e| e.rank);
    (entries, ranks)
}

pub fn holdout_compare(
    runs: &[Run],
    partition: &QueryPartition,
    schemes: &[Qrels],
    metrics: &[MetricSpec],
    options: &HoldoutOptions,
) -> Result<HoldoutReport> {
    if runs.is_empty() {
        return Err(Error::Argument("no runs to compare".into()));
    }
    if schemes.is_empty() {
        return Err(Error::Argument("at least one qrels scheme is required".into()));
    }
    if metrics.is_empty() {
        return Err(Error::Argument("at least one metric is required".into()));
    }
    let ids: BTreeSet<&str> = runs.iter().map(|r| r.run_id.as_str()).collect();
    if ids.len() != runs.len() {
        return Err(Error::Integrity("run ids are not unique".into()));
    }
    if let Some(unknown) = options.focus_runs.iter().find(|f| !ids.contains(f.as_str())) {
        return Err(Error::Argument(format!("focus run {unknown} is not among the runs")));
    }
    let incomplete: Vec<String> = runs
        .iter()
        .filter_map(|run| {
            let report = validate_run_against_queryset(run, &partition.all_ids());
            (!report.is_complete()).then(|| {
                let missing: Vec<&str> = report.missing.iter().map(String::as_str).collect();
                format!("{} (missing {})", run.run_id, missing.join(", "))
            })
        })
        .collect();
    if !incomplete.is_empty() {
        return Err(Error::Integrity(format!(
            "runs do not cover every public and private query: {}",
            incomplete.join("; ")
        )));
    }

    let mut conditions = Vec::new();
    let mut pruned = Vec::new();
    for queryset in [QuerySet::Public, QuerySet::Private] {
        let wanted = match queryset {
            QuerySet::Public => &partition.public_ids,
            QuerySet::Private => &partition.private_ids,
        };
        for scheme in schemes {
            let judged: Vec<&String> = wanted.iter().filter(|q| scheme.judged(q).is_some()).collect();
            for &metric in metrics {
                if judged.is_empty() {
                    pruned.push(PrunedCondition {
                        queryset,
                        scheme_id: scheme.scheme_id.clone(),
                        metric,
                        reason: if wanted.is_empty() {
                            format!("{} query set is empty", queryset.name())
                        } else {
                            format!("scheme {} judges none of the {} queries", scheme.scheme_id, queryset.name())
                        },
                    });
                    continue;
                }
                let matrix = score_matrix(runs, scheme, metric, &judged)?;
                let (leaderboard, ranks) = leaderboard(&matrix, options.aggregation);
                let distribution = bootstrap_ranks(&matrix, options.trials, options.seed, options.aggregation)?;
                conditions.push(Condition {
                    queryset,
                    scheme_id: scheme.scheme_id.clone(),
                    metric,
                    binarization_threshold: if metric.uses_threshold() {
                        Some(metric.resolve_threshold(scheme.max_grade)?)
                    } else {
                        None
                    },
                    query_ids: judged.iter().map(|q| q.to_string()).collect(),
                    unjudged_dropped: wanted.len() - judged.len(),
                    leaderboard,
                    ranks,
                    distribution,
                });
            }
        }
    }

    let focus = conditions
        .iter()
        .flat_map(|c| {
            options.focus_runs.iter().map(move |f| {
                let r = c.distribution.run_ids.iter().position(|id| id == f).unwrap();
                FocusRow {
                    condition: c.label(),
                    run_id: f.clone(),
                    rank: c.ranks[r],
                    expected_rank: c.distribution.expected_rank[r],
                    quantiles: c.distribution.rank_quantiles[r],
                }
            })
        })
        .collect();

    Ok(HoldoutReport {
        run_ids: runs.iter().map(|r| r.run_id.clone()).collect(),
        trials: options.trials,
        seed: options.seed,
        aggregation: options.aggregation,
        conditions,
        pruned,
        focus_runs: options.focus_runs.clone(),
        focus,
    })
}
