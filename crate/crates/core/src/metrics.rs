//! Per-query IR metrics and the run × query score matrix.
//!
//! Metric functions operate on the grade sequence of a ranking (grade of the
//! document at each position, unjudged = 0). RR and AP treat a grade as
//! relevant iff it is at least 1, so callers binarize first; NDCG and NCG use
//! graded gains.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::corpus::{Qrels, Run};
use crate::error::{Error, Result};
use crate::stats::Aggregation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MetricKind {
    RR,
    NDCG,
    AP,
    NCG,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub enum Gain {
    /// `2^g - 1`
    #[default]
    Exponential,
    /// `g`
    Linear,
}

impl Gain {
    pub fn of(self, grade: u32) -> f64 {
        match self {
            Gain::Exponential => 2f64.powi(grade as i32) - 1.0,
            Gain::Linear => grade as f64,
        }
    }
}

/// Metric family plus cutoff and binarization threshold.
///
/// The compact string form is `rr@10`, `ndcg@10`, `map`, `ncg@100`, with
/// optional `:bin=<grade>` and `:gain=lin` suffixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub cutoff: Option<usize>,
    /// Grade threshold for RR and AP. `None` resolves per qrels scheme, see
    /// [`MetricSpec::resolve_threshold`].
    pub threshold: Option<u32>,
    pub gain: Gain,
}

impl MetricSpec {
    pub fn new(kind: MetricKind, cutoff: Option<usize>) -> Self {
        MetricSpec {
            kind,
            cutoff,
            threshold: None,
            gain: Gain::Exponential,
        }
    }

    pub fn rr(k: usize) -> Self {
        Self::new(MetricKind::RR, Some(k))
    }

    pub fn ndcg(k: usize) -> Self {
        Self::new(MetricKind::NDCG, Some(k))
    }

    pub fn ap() -> Self {
        Self::new(MetricKind::AP, None)
    }

    pub fn ncg(k: usize) -> Self {
        Self::new(MetricKind::NCG, Some(k))
    }

    pub fn with_threshold(mut self, threshold: u32) -> Self {
        self.threshold = Some(threshold);
        self
    }

    pub fn with_gain(mut self, gain: Gain) -> Self {
        self.gain = gain;
        self
    }

    pub fn uses_threshold(&self) -> bool {
        matches!(self.kind, MetricKind::RR | MetricKind::AP)
    }

    /// Threshold actually applied for a scheme with the given maximum grade:
    /// the explicit one if set, otherwise 1 for binary schemes and 2 for
    /// graded ones.
    pub fn resolve_threshold(&self, max_grade: u32) -> Result<u32> {
        let t = self.threshold.unwrap_or(if max_grade >= 2 { 2 } else { 1 });
        if t == 0 || t > max_grade.max(1) {
            return Err(Error::Argument(format!(
                "binarization threshold {t} outside [1, {}]",
                max_grade.max(1)
            )));
        }
        Ok(t)
    }

    /// Evaluates one ranking given as grades, against the full judged grade
    /// population of the query.
    pub fn evaluate(&self, ranked: &[u32], judged: &[u32], max_grade: u32) -> Result<f64> {
        Ok(match self.kind {
            MetricKind::RR => {
                let t = self.resolve_threshold(max_grade)?;
                reciprocal_rank(&binarize_grades(ranked, t), self.cutoff)
            }
            MetricKind::AP => {
                let t = self.resolve_threshold(max_grade)?;
                let total = judged.iter().filter(|&&g| g >= t).count();
                average_precision(&binarize_grades(ranked, t), total, self.cutoff)
            }
            MetricKind::NDCG => ndcg(ranked, judged, self.cutoff, self.gain),
            MetricKind::NCG => ncg(ranked, judged, self.cutoff, self.gain),
        })
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            MetricKind::RR => "rr",
            MetricKind::NDCG => "ndcg",
            MetricKind::AP => "map",
            MetricKind::NCG => "ncg",
        };
        f.write_str(name)?;
        if let Some(k) = self.cutoff {
            write!(f, "@{k}")?;
        }
        if let Some(t) = self.threshold {
            write!(f, ":bin={t}")?;
        }
        if self.gain == Gain::Linear {
            f.write_str(":gain=lin")?;
        }
        Ok(())
    }
}

impl FromStr for MetricSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Argument(format!("metric {s:?}: {msg}"));
        let mut parts = s.trim().split(':');
        let head = parts.next().unwrap_or_default().to_ascii_lowercase();
        let (name, cutoff) = match head.split_once('@') {
            Some((n, k)) => {
                let k: usize = k.parse().map_err(|_| bad("cutoff must be a positive integer"))?;
                if k == 0 {
                    return Err(bad("cutoff must be at least 1"));
                }
                (n.to_string(), Some(k))
            }
            None => (head, None),
        };
        let kind = match name.as_str() {
            "rr" | "mrr" => MetricKind::RR,
            "ndcg" => MetricKind::NDCG,
            "map" | "ap" => MetricKind::AP,
            "ncg" => MetricKind::NCG,
            _ => return Err(bad("unknown metric (expected rr, ndcg, map or ncg)")),
        };
        let mut spec = MetricSpec::new(kind, cutoff);
        for opt in parts {
            match opt.split_once('=') {
                Some(("bin", v)) => {
                    let t: u32 = v.parse().map_err(|_| bad("bin must be an integer"))?;
                    if t == 0 {
                        return Err(bad("bin must be at least 1"));
                    }
                    spec.threshold = Some(t);
                }
                Some(("gain", "lin")) => spec.gain = Gain::Linear,
                Some(("gain", "exp")) => spec.gain = Gain::Exponential,
                _ => return Err(bad(&format!("unknown option {opt:?}"))),
            }
        }
        Ok(spec)
    }
}

impl Serialize for MetricSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

fn binarize_grades(grades: &[u32], threshold: u32) -> Vec<u32> {
    grades.iter().map(|&g| u32::from(g >= threshold)).collect()
}

/// Maps every grade to 1 if it reaches `threshold`, else 0.
pub fn binarize(qrels: &Qrels, threshold: u32) -> Result<Qrels> {
    if threshold == 0 || threshold > qrels.max_grade {
        return Err(Error::Argument(format!(
            "binarization threshold {threshold} outside [1, {}]",
            qrels.max_grade
        )));
    }
    let mut out = qrels.clone();
    for docs in out.grades.values_mut() {
        for g in docs.values_mut() {
            *g = u32::from(*g >= threshold);
        }
    }
    out.max_grade = 1;
    Ok(out)
}

fn prefix(grades: &[u32], cutoff: Option<usize>) -> &[u32] {
    &grades[..cutoff.unwrap_or(usize::MAX).min(grades.len())]
}

/// `1/r` for the first position `r <= k` holding a relevant document, else 0.
pub fn reciprocal_rank(ranked: &[u32], cutoff: Option<usize>) -> f64 {
    prefix(ranked, cutoff)
        .iter()
        .position(|&g| g >= 1)
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

fn dcg(grades: &[u32], gain: Gain) -> f64 {
    grades
        .iter()
        .enumerate()
        .map(|(i, &g)| gain.of(g) / ((i + 2) as f64).log2())
        .sum()
}

fn ideal_order(judged: &[u32]) -> Vec<u32> {
    let mut ideal = judged.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    ideal
}

/// DCG@k normalized by the DCG@k of the ideal ordering of `judged`.
/// Returns 0 when the ideal DCG is 0.
pub fn ndcg(ranked: &[u32], judged: &[u32], cutoff: Option<usize>, gain: Gain) -> f64 {
    let ideal = ideal_order(judged);
    let idcg = dcg(prefix(&ideal, cutoff), gain);
    if idcg <= 0.0 {
        return 0.0;
    }
    (dcg(prefix(ranked, cutoff), gain) / idcg).min(1.0)
}

/// Undiscounted cumulative gain at k over the ideal cumulative gain at k.
pub fn ncg(ranked: &[u32], judged: &[u32], cutoff: Option<usize>, gain: Gain) -> f64 {
    let ideal = ideal_order(judged);
    let best: f64 = prefix(&ideal, cutoff).iter().map(|&g| gain.of(g)).sum();
    if best <= 0.0 {
        return 0.0;
    }
    let got: f64 = prefix(ranked, cutoff).iter().map(|&g| gain.of(g)).sum();
    (got / best).min(1.0)
}

/// Mean of precision at each relevant rank, divided over `total_relevant`.
pub fn average_precision(ranked: &[u32], total_relevant: usize, cutoff: Option<usize>) -> f64 {
    if total_relevant == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &g) in prefix(ranked, cutoff).iter().enumerate() {
        if g >= 1 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    debug_assert!(hits <= total_relevant);
    (sum / total_relevant as f64).min(1.0)
}

/// Dense runs × queries table of per-query scores for one metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricMatrix {
    pub metric: MetricSpec,
    pub run_ids: Vec<String>,
    pub query_ids: Vec<String>,
    /// Row-major, one row per run.
    scores: Vec<f64>,
}

impl MetricMatrix {
    pub fn new(
        metric: MetricSpec,
        run_ids: Vec<String>,
        query_ids: Vec<String>,
        scores: Vec<f64>,
    ) -> Result<Self> {
        if scores.len() != run_ids.len() * query_ids.len() {
            return Err(Error::Argument(format!(
                "score table has {} cells, expected {} runs x {} queries",
                scores.len(),
                run_ids.len(),
                query_ids.len()
            )));
        }
        if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::Argument(format!("score {bad} outside [0, 1]")));
        }
        Ok(MetricMatrix {
            metric,
            run_ids,
            query_ids,
            scores,
        })
    }

    /// Builds a matrix from one row per run; handy for synthetic data.
    pub fn from_rows<R, Q>(metric: MetricSpec, run_ids: R, query_ids: Q, rows: Vec<Vec<f64>>) -> Result<Self>
    where
        R: IntoIterator,
        R::Item: Into<String>,
        Q: IntoIterator,
        Q::Item: Into<String>,
    {
        let run_ids: Vec<String> = run_ids.into_iter().map(Into::into).collect();
        let query_ids: Vec<String> = query_ids.into_iter().map(Into::into).collect();
        if rows.len() != run_ids.len() || rows.iter().any(|r| r.len() != query_ids.len()) {
            return Err(Error::Argument("row dimensions do not match ids".into()));
        }
        Self::new(metric, run_ids, query_ids, rows.concat())
    }

    pub fn n_runs(&self) -> usize {
        self.run_ids.len()
    }

    pub fn n_queries(&self) -> usize {
        self.query_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn row(&self, run: usize) -> &[f64] {
        let n = self.n_queries();
        &self.scores[run * n..(run + 1) * n]
    }

    pub fn get(&self, run: usize, query: usize) -> f64 {
        self.row(run)[query]
    }

    pub fn aggregate(&self, run: usize, aggregation: Aggregation) -> f64 {
        aggregation.apply(self.row(run))
    }

    /// Restricts the matrix to the given query ids, in the given order.
    pub fn select_queries<S: AsRef<str>>(&self, ids: &[S]) -> Result<MetricMatrix> {
        let cols: Vec<usize> = ids
            .iter()
            .map(|id| {
                self.query_ids
                    .iter()
                    .position(|q| q == id.as_ref())
                    .ok_or_else(|| Error::Argument(format!("query {} not in matrix", id.as_ref())))
            })
            .collect::<Result<_>>()?;
        let scores = (0..self.n_runs())
            .flat_map(|r| cols.iter().map(move |&c| (r, c)))
            .map(|(r, c)| self.get(r, c))
            .collect();
        MetricMatrix::new(
            self.metric,
            self.run_ids.clone(),
            cols.iter().map(|&c| self.query_ids[c].clone()).collect(),
            scores,
        )
    }

    /// Reorders the rows to follow `order` (indices into the current rows).
    pub fn permute_runs(&self, order: &[usize]) -> MetricMatrix {
        MetricMatrix {
            metric: self.metric,
            run_ids: order.iter().map(|&r| self.run_ids[r].clone()).collect(),
            query_ids: self.query_ids.clone(),
            scores: order.iter().flat_map(|&r| self.row(r).iter().copied()).collect(),
        }
    }
}

/// Scores every run on every query in `query_ids`.
///
/// Unjudged retrieved documents count as grade 0 and runs with no results for
/// a query score 0. Every query must have at least one judgment in `qrels`.
pub fn score_matrix<S: AsRef<str> + Sync>(
    runs: &[Run],
    qrels: &Qrels,
    metric: MetricSpec,
    query_ids: &[S],
) -> Result<MetricMatrix> {
    let missing: Vec<&str> = query_ids
        .iter()
        .map(AsRef::as_ref)
        .filter(|q| qrels.judged(q).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Argument(format!(
            "queries without judgments in qrels {}: {}",
            qrels.scheme_id,
            missing.join(", ")
        )));
    }
    let distinct: BTreeSet<&str> = query_ids.iter().map(AsRef::as_ref).collect();
    if distinct.len() != query_ids.len() {
        return Err(Error::Argument("query id list contains duplicates".into()));
    }
    if metric.uses_threshold() {
        metric.resolve_threshold(qrels.max_grade)?;
    }

    let judged: Vec<Vec<u32>> = query_ids
        .iter()
        .map(|q| qrels.judged(q.as_ref()).map(|m| m.values().copied().collect()).unwrap_or_default())
        .collect();
    let rows: Vec<Vec<f64>> = runs
        .par_iter()
        .map(|run| {
            query_ids
                .iter()
                .zip(&judged)
                .map(|(q, judged)| {
                    let q = q.as_ref();
                    let docs = qrels.judged(q);
                    let ranked: Vec<u32> = run
                        .ranking(q)
                        .iter()
                        .map(|d| docs.and_then(|m| m.get(&d.doc_id)).copied().unwrap_or(0))
                        .collect();
                    metric.evaluate(&ranked, judged, qrels.max_grade)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    MetricMatrix::from_rows(
        metric,
        runs.iter().map(|r| r.run_id.clone()),
        query_ids.iter().map(|q| q.as_ref().to_string()),
        rows,
    )
}
