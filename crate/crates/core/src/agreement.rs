//! Split-half reliability of significance-test verdicts.
//!
//! The query set is repeatedly bisected at random. For every unordered run
//! pair and every split, each half yields a verdict (direction by aggregate,
//! significance by test) and the two verdicts are classified as agreeing,
//! partially agreeing or disagreeing. All (test, aggregation) columns share
//! the same splits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::MetricMatrix;
use crate::stats::{verdict, Aggregation, Direction, PairVerdict, TestMethod, DEFAULT_ALPHA};

pub const DEFAULT_SPLITS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Classification {
    Agree,
    PartialAgree,
    Disagree,
}

/// Compares the verdicts reached on the two halves.
///
/// A direction tie is compatible with either direction, so ties never yield
/// `Disagree`.
pub fn classify_agreement(first: &PairVerdict, second: &PairVerdict) -> Classification {
    let same_direction =
        first.better == second.better || first.better == Direction::Tie || second.better == Direction::Tie;
    match (same_direction, first.significant, second.significant) {
        (true, x, y) if x == y => Classification::Agree,
        (true, _, _) => Classification::PartialAgree,
        (false, false, false) => Classification::PartialAgree,
        (false, _, _) => Classification::Disagree,
    }
}

fn split_rng(seed: u64, split: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(split as u64);
    rng
}

/// Index halves of sizes `ceil(n/2)` and `floor(n/2)`, each in ascending order.
fn split_indices(n: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let (a, b) = idx.split_at(n.div_ceil(2));
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

/// Random disjoint halves of `ids`, deterministic in `seed`. The first half
/// takes the extra element when the count is odd.
pub fn random_half_split<T: Clone>(ids: &[T], seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if ids.len() < 2 {
        return Err(Error::Argument("need at least two queries to split".into()));
    }
    let (a, b) = split_indices(ids.len(), &mut split_rng(seed, 0));
    Ok((
        a.into_iter().map(|i| ids[i].clone()).collect(),
        b.into_iter().map(|i| ids[i].clone()).collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementOptions {
    pub tests: Vec<TestMethod>,
    pub aggregations: Vec<Aggregation>,
    /// The t-test is reported under mean aggregation only unless this is set.
    pub include_t_median: bool,
    pub splits: usize,
    pub seed: u64,
    pub alpha: f64,
}

impl AgreementOptions {
    pub fn new(seed: u64) -> Self {
        AgreementOptions {
            tests: TestMethod::ALL.to_vec(),
            aggregations: vec![Aggregation::Mean, Aggregation::Median],
            include_t_median: false,
            splits: DEFAULT_SPLITS,
            seed,
            alpha: DEFAULT_ALPHA,
        }
    }

    /// Report columns: every test under mean, then every test under median.
    pub fn columns(&self) -> Vec<(TestMethod, Aggregation)> {
        self.aggregations
            .iter()
            .flat_map(|&agg| self.tests.iter().map(move |&t| (t, agg)))
            .filter(|&(t, agg)| self.include_t_median || !(t == TestMethod::PairedT && agg == Aggregation::Median))
            .collect()
    }
}

/// Outcome rates for one (test, aggregation) column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementCell {
    pub test: TestMethod,
    pub aggregation: Aggregation,
    pub splits: usize,
    pub alpha: f64,
    pub units: u64,
    pub agree: u64,
    pub partial: u64,
    pub disagree: u64,
    /// Units significant in at least one half.
    pub significant_units: u64,
    /// Units where the test was undefined on at least one half (scored p = 1).
    pub degenerate_units: u64,
    pub agree_rate: f64,
    pub partial_rate: f64,
    pub disagree_rate: f64,
    pub perc_signif: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub metric: String,
    pub run_ids: Vec<String>,
    pub n_queries: usize,
    pub pairs: usize,
    pub splits: usize,
    pub seed: u64,
    pub alpha: f64,
    pub cells: Vec<AgreementCell>,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    agree: u64,
    partial: u64,
    disagree: u64,
    significant: u64,
    degenerate: u64,
}

impl Tally {
    fn add(&mut self, other: &Tally) {
        self.agree += other.agree;
        self.partial += other.partial;
        self.disagree += other.disagree;
        self.significant += other.significant;
        self.degenerate += other.degenerate;
    }
}

fn pick(row: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| row[i]).collect()
}

fn half_p(test: TestMethod, a: &[f64], b: &[f64]) -> Result<(f64, bool)> {
    match test.run(a, b) {
        Ok(r) => Ok((r.p_value, false)),
        Err(Error::Degenerate(_) | Error::Argument(_)) => Ok((1.0, true)),
        Err(e) => Err(e),
    }
}

/// Runs the split-half protocol over all unordered run pairs.
pub fn agreement_analysis(matrix: &MetricMatrix, options: &AgreementOptions) -> Result<AgreementReport> {
    if matrix.n_runs() < 2 || matrix.n_queries() < 2 {
        return Err(Error::Argument("agreement analysis needs at least two runs and two queries".into()));
    }
    if options.splits == 0 {
        return Err(Error::Argument("splits must be at least 1".into()));
    }
    if !(options.alpha > 0.0 && options.alpha < 1.0) {
        return Err(Error::Argument(format!("alpha {} outside (0, 1)", options.alpha)));
    }
    let columns = options.columns();
    if columns.is_empty() {
        return Err(Error::Argument("no (test, aggregation) columns selected".into()));
    }
    let mut tests: Vec<TestMethod> = columns.iter().map(|c| c.0).collect();
    tests.sort();
    tests.dedup();
    let runs = matrix.n_runs();
    let pairs: Vec<(usize, usize)> = (0..runs).flat_map(|i| (i + 1..runs).map(move |j| (i, j))).collect();
    let alpha = options.alpha;

    let tallies = (0..options.splits)
        .into_par_iter()
        .map(|split| -> Result<Vec<Tally>> {
            let (h1, h2) = split_indices(matrix.n_queries(), &mut split_rng(options.seed, split));
            let halves: Vec<[Vec<f64>; 2]> = (0..runs)
                .map(|r| [pick(matrix.row(r), &h1), pick(matrix.row(r), &h2)])
                .collect();
            let mut tally = vec![Tally::default(); columns.len()];
            for &(i, j) in &pairs {
                let (a, b) = (&halves[i], &halves[j]);
                let mut p = Vec::with_capacity(tests.len());
                for &t in &tests {
                    p.push([half_p(t, &a[0], &b[0])?, half_p(t, &a[1], &b[1])?]);
                }
                for (col, &(test, agg)) in columns.iter().enumerate() {
                    let [(p1, d1), (p2, d2)] = p[tests.iter().position(|&t| t == test).unwrap()];
                    let v1 = verdict(agg.apply(&a[0]) - agg.apply(&b[0]), p1, d1, agg, alpha);
                    let v2 = verdict(agg.apply(&a[1]) - agg.apply(&b[1]), p2, d2, agg, alpha);
                    let t = &mut tally[col];
                    match classify_agreement(&v1, &v2) {
                        Classification::Agree => t.agree += 1,
                        Classification::PartialAgree => t.partial += 1,
                        Classification::Disagree => t.disagree += 1,
                    }
                    t.significant += u64::from(v1.significant || v2.significant);
                    t.degenerate += u64::from(d1 || d2);
                }
            }
            Ok(tally)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut total = vec![Tally::default(); columns.len()];
    for split in &tallies {
        for (acc, t) in total.iter_mut().zip(split) {
            acc.add(t);
        }
    }
    let units = (pairs.len() * options.splits) as u64;
    let cells = columns
        .iter()
        .zip(total)
        .map(|(&(test, aggregation), t)| {
            let rate = |c: u64| c as f64 / units as f64;
            AgreementCell {
                test,
                aggregation,
                splits: options.splits,
                alpha,
                units,
                agree: t.agree,
                partial: t.partial,
                disagree: t.disagree,
                significant_units: t.significant,
                degenerate_units: t.degenerate,
                agree_rate: rate(t.agree),
                partial_rate: rate(t.partial),
                disagree_rate: rate(t.disagree),
                perc_signif: rate(t.significant),
            }
        })
        .collect();
    Ok(AgreementReport {
        metric: matrix.metric.to_string(),
        run_ids: matrix.run_ids.clone(),
        n_queries: matrix.n_queries(),
        pairs: pairs.len(),
        splits: options.splits,
        seed: options.seed,
        alpha,
        cells,
    })
}

/// Single-column form of [`agreement_analysis`].
pub fn agreement_cell(
    matrix: &MetricMatrix,
    test: TestMethod,
    aggregation: Aggregation,
    splits: usize,
    seed: u64,
    alpha: f64,
) -> Result<AgreementCell> {
    let options = AgreementOptions {
        tests: vec![test],
        aggregations: vec![aggregation],
        include_t_median: true,
        splits,
        seed,
        alpha,
    };
    Ok(agreement_analysis(matrix, &options)?.cells.remove(0))
}
