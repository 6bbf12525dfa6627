use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use lbeval_core::agreement::agreement_analysis;
use lbeval_core::corpus::{parse_manifest, parse_partition, parse_qrels, parse_run, ParseWarning};
use lbeval_core::holdout::holdout_compare;
use lbeval_core::metrics::score_matrix;
use lbeval_core::monitor::{check_submission_policy, group_stats, trajectory, Window};
use lbeval_core::resampling::{bootstrap_ranks, rank_summary};
use lbeval_core::scale::{check_difference_axioms, enumerate_states, metric_values, solvability_check, Rational};
use lbeval_core::{
    AgreementOptions, Aggregation, HoldoutOptions, MetricMatrix, MetricSpec, Qrels, Run, SubmissionPolicy,
};
use serde_json::json;

use crate::output::{fixed, percent, Provenance, Report, Table};
use crate::RunArgs;

const SHOWN_WARNINGS: usize = 5;

type Rate = fn(&lbeval_core::AgreementCell) -> f64;

fn read_input(prov: &mut Provenance, path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    prov.input(path, &bytes);
    Ok(bytes)
}

fn report_warnings(source: &Path, warnings: &[ParseWarning]) {
    for w in warnings.iter().take(SHOWN_WARNINGS) {
        eprintln!("lbeval: warning: {}: {w}", source.display());
    }
    if warnings.len() > SHOWN_WARNINGS {
        eprintln!(
            "lbeval: warning: {}: {} more warnings",
            source.display(),
            warnings.len() - SHOWN_WARNINGS
        );
    }
}

fn load_runs(prov: &mut Provenance, args: &RunArgs) -> Result<Vec<Run>> {
    prov.set("depth", args.depth);
    let mut runs = Vec::with_capacity(args.runs.len());
    for path in &args.runs {
        let bytes = read_input(prov, path)?;
        let (run, warnings) = parse_run(bytes.as_slice(), &path.display().to_string(), args.depth)?;
        report_warnings(path, &warnings);
        runs.push(run);
    }
    let mut ids: Vec<&str> = runs.iter().map(|r| r.run_id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        bail!("run id {} appears in more than one run file", w[0]);
    }
    Ok(runs)
}

/// `scheme=path`, or a bare path whose file stem names the scheme.
fn split_qrels_arg(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((scheme, path)) if !scheme.is_empty() => (scheme.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(arg);
            let scheme = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "qrels".into());
            (scheme, path)
        }
    }
}

fn load_qrels(prov: &mut Provenance, arg: &str) -> Result<Qrels> {
    let (scheme, path) = split_qrels_arg(arg);
    let bytes = read_input(prov, &path)?;
    Ok(parse_qrels(bytes.as_slice(), &path.display().to_string(), &scheme)?)
}

/// Scores runs on every judged query.
fn judged_matrix(runs: &[Run], qrels: &Qrels, metric: MetricSpec) -> Result<MetricMatrix> {
    let queries: Vec<&str> = qrels.query_ids().into_iter().collect();
    Ok(score_matrix(runs, qrels, metric, &queries)?)
}

pub fn eval(args: &RunArgs, qrels: &str, metrics: &[MetricSpec], aggregation: Aggregation) -> Result<Report> {
    let mut prov = Provenance::new("eval");
    let runs = load_runs(&mut prov, args)?;
    let qrels = load_qrels(&mut prov, qrels)?;
    prov.set("scheme", &qrels.scheme_id);
    prov.set("metrics", join(metrics));
    prov.set("aggregation", aggregation);
    for m in metrics.iter().filter(|m| m.uses_threshold()) {
        prov.set(&format!("threshold {m}"), m.resolve_threshold(qrels.max_grade)?);
    }

    let matrices = metrics
        .iter()
        .map(|&m| judged_matrix(&runs, &qrels, m))
        .collect::<Result<Vec<_>>>()?;
    let first = &matrices[0];
    let mut table = Table::new(
        "scores",
        ["run_id".to_string(), "query_id".to_string()]
            .into_iter()
            .chain(metrics.iter().map(ToString::to_string)),
    );
    let mut structured = Vec::new();
    for (r, run_id) in first.run_ids.iter().enumerate() {
        for (q, query_id) in first.query_ids.iter().enumerate() {
            let mut row = vec![run_id.clone(), query_id.clone()];
            row.extend(matrices.iter().map(|m| fixed(m.get(r, q))));
            table.push(row);
        }
        let aggregates: Vec<f64> = matrices.iter().map(|m| m.aggregate(r, aggregation)).collect();
        let mut row = vec![run_id.clone(), "all".to_string()];
        row.extend(aggregates.iter().map(|&x| fixed(x)));
        table.push(row);
        let per_metric: serde_json::Map<_, _> = metrics
            .iter()
            .zip(&matrices)
            .zip(&aggregates)
            .map(|((m, matrix), agg)| (m.to_string(), json!({ "aggregate": agg, "per_query": matrix.row(r) })))
            .collect();
        structured.push(json!({ "run_id": run_id, "metrics": per_metric }));
    }
    Ok(Report {
        provenance: prov,
        tables: vec![table],
        structured: json!({ "query_ids": first.query_ids, "aggregation": aggregation, "runs": structured }),
    })
}

pub fn bootstrap(
    args: &RunArgs,
    qrels: &str,
    metric: MetricSpec,
    trials: usize,
    seed: u64,
    aggregation: Aggregation,
) -> Result<Report> {
    let mut prov = Provenance::new("bootstrap");
    prov.set("seed", seed);
    prov.set("trials", trials);
    prov.set("aggregation", aggregation);
    prov.set("metric", metric);
    let runs = load_runs(&mut prov, args)?;
    let qrels = load_qrels(&mut prov, qrels)?;
    prov.set("scheme", &qrels.scheme_id);
    let matrix = judged_matrix(&runs, &qrels, metric)?;
    prov.set("queries", matrix.n_queries());
    let dist = bootstrap_ranks(&matrix, trials, seed, aggregation)?;

    let n = dist.run_ids.len();
    let mut header: Vec<String> = ["run_id", "observed_rank", "aggregate", "expected_rank", "min", "q1", "median", "q3", "max"]
        .map(String::from)
        .to_vec();
    header.extend((1..=n).map(|k| format!("rank_{k}_pct")));
    let mut table = Table::new("ranks", header);
    let index: BTreeMap<&str, usize> = dist.run_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    for row in rank_summary(&dist) {
        let r = index[row.run_id.as_str()];
        let q = row.quantiles;
        let mut cells = vec![
            row.run_id.clone(),
            row.observed_rank.to_string(),
            fixed(matrix.aggregate(r, aggregation)),
            fixed(row.expected_rank),
        ];
        cells.extend([q.min, q.q1, q.median, q.q3, q.max].map(|v| v.to_string()));
        cells.extend(dist.proportions[r].iter().map(|&p| percent(p)));
        table.push(cells);
    }
    let aggregates: Vec<f64> = (0..n).map(|r| matrix.aggregate(r, aggregation)).collect();
    Ok(Report {
        provenance: prov,
        tables: vec![table],
        structured: json!({ "metric": metric, "aggregates": aggregates, "distribution": dist }),
    })
}

pub struct AgreementSettings {
    pub splits: usize,
    pub seed: u64,
    pub alpha: f64,
    pub include_t_median: bool,
}

pub fn agreement(args: &RunArgs, qrels: &str, metric: MetricSpec, settings: AgreementSettings) -> Result<Report> {
    let mut prov = Provenance::new("agreement");
    prov.set("seed", settings.seed);
    prov.set("splits", settings.splits);
    prov.set("alpha", settings.alpha);
    prov.set("include_t_median", settings.include_t_median);
    prov.set("metric", metric);
    let runs = load_runs(&mut prov, args)?;
    let qrels = load_qrels(&mut prov, qrels)?;
    prov.set("scheme", &qrels.scheme_id);
    let matrix = judged_matrix(&runs, &qrels, metric)?;
    prov.set("queries", matrix.n_queries());

    let mut options = AgreementOptions::new(settings.seed);
    options.splits = settings.splits;
    options.alpha = settings.alpha;
    options.include_t_median = settings.include_t_median;
    let report = agreement_analysis(&matrix, &options)?;

    let columns: Vec<String> = report
        .cells
        .iter()
        .map(|c| format!("{}/{}", c.test, c.aggregation))
        .collect();
    let mut grid = Table::new("grid", std::iter::once("measure".to_string()).chain(columns.iter().cloned()));
    let measures: [(&str, Rate); 4] = [
        ("agree", |c| c.agree_rate),
        ("partial", |c| c.partial_rate),
        ("disagree", |c| c.disagree_rate),
        ("perc_signif", |c| c.perc_signif),
    ];
    for (name, get) in measures {
        let mut row = vec![name.to_string()];
        row.extend(report.cells.iter().map(|c| percent(get(c))));
        grid.push(row);
    }
    let mut counts = Table::new(
        "counts",
        ["test", "aggregation", "units", "agree", "partial", "disagree", "significant", "degenerate"],
    );
    for c in &report.cells {
        counts.push(vec![
            c.test.to_string(),
            c.aggregation.to_string(),
            c.units.to_string(),
            c.agree.to_string(),
            c.partial.to_string(),
            c.disagree.to_string(),
            c.significant_units.to_string(),
            c.degenerate_units.to_string(),
        ]);
    }
    Ok(Report {
        provenance: prov,
        tables: vec![grid, counts],
        structured: serde_json::to_value(&report)?,
    })
}

pub struct HoldoutSettings {
    pub trials: usize,
    pub seed: u64,
    pub aggregation: Aggregation,
    pub focus: Vec<String>,
}

pub fn holdout(
    args: &RunArgs,
    qrels: &[String],
    partition: &Path,
    metrics: &[MetricSpec],
    settings: HoldoutSettings,
) -> Result<Report> {
    let mut prov = Provenance::new("holdout");
    prov.set("seed", settings.seed);
    prov.set("trials", settings.trials);
    prov.set("aggregation", settings.aggregation);
    prov.set("metrics", join(metrics));
    prov.set("focus", settings.focus.join(" "));
    let runs = load_runs(&mut prov, args)?;
    let schemes = qrels
        .iter()
        .map(|q| load_qrels(&mut prov, q))
        .collect::<Result<Vec<_>>>()?;
    let text = read_input(&mut prov, partition)?;
    let text = String::from_utf8(text).map_err(|_| anyhow!("{}: not valid UTF-8", partition.display()))?;
    let partition = parse_partition(&text, &partition.display().to_string())?;

    let mut options = HoldoutOptions::new(settings.seed);
    options.trials = settings.trials;
    options.aggregation = settings.aggregation;
    options.focus_runs = settings.focus;
    let report = holdout_compare(&runs, &partition, &schemes, metrics, &options)?;

    let mut boards = Table::new(
        "leaderboards",
        ["condition", "queryset", "scheme", "metric", "threshold", "queries", "run_id", "rank", "aggregate", "expected_rank"],
    );
    for c in &report.conditions {
        let index: BTreeMap<&str, usize> = c
            .distribution
            .run_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        for e in &c.leaderboard {
            boards.push(vec![
                c.label(),
                c.queryset.name().to_string(),
                c.scheme_id.clone(),
                c.metric.to_string(),
                c.binarization_threshold.map(|t| t.to_string()).unwrap_or_default(),
                c.query_ids.len().to_string(),
                e.run_id.clone(),
                e.rank.to_string(),
                fixed(e.aggregate),
                fixed(c.distribution.expected_rank[index[e.run_id.as_str()]]),
            ]);
        }
    }
    let mut focus = Table::new("focus", ["condition", "run_id", "rank", "expected_rank", "min", "q1", "median", "q3", "max"]);
    for f in &report.focus {
        let q = f.quantiles;
        let mut row = vec![f.condition.clone(), f.run_id.clone(), f.rank.to_string(), fixed(f.expected_rank)];
        row.extend([q.min, q.q1, q.median, q.q3, q.max].map(|v| v.to_string()));
        focus.push(row);
    }
    let mut pruned = Table::new("pruned", ["queryset", "scheme", "metric", "reason"]);
    for p in &report.pruned {
        pruned.push(vec![
            p.queryset.name().to_string(),
            p.scheme_id.clone(),
            p.metric.to_string(),
            p.reason.clone(),
        ]);
    }
    Ok(Report {
        provenance: prov,
        tables: vec![boards, focus, pruned],
        structured: serde_json::to_value(&report)?,
    })
}

pub struct MonitorSettings {
    pub scores: Option<PathBuf>,
    pub qrels: Option<(String, MetricSpec)>,
    pub depth: usize,
    pub baseline_score: Option<f64>,
    pub max_runs: u32,
    pub window: String,
    pub max_minor_variants: u32,
}

fn parse_window(s: &str) -> Result<Window> {
    if s == "month" {
        return Ok(Window::CalendarMonth);
    }
    let days = s
        .strip_prefix("rolling:")
        .and_then(|d| d.parse::<u32>().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| anyhow!("invalid window {s:?} (expected month or rolling:DAYS)"))?;
    Ok(Window::Rolling { days })
}

fn parse_scores(bytes: &[u8], source: &Path) -> Result<BTreeMap<String, f64>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(bytes);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{}: missing column {name}", source.display()))
    };
    let (id_col, score_col) = (col("run_id")?, col("score")?);
    let mut scores = BTreeMap::new();
    for record in reader.records() {
        let record = record.with_context(|| format!("{}: malformed CSV", source.display()))?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(id_col).unwrap_or_default().to_string();
        let score: f64 = record
            .get(score_col)
            .unwrap_or_default()
            .parse()
            .map_err(|_| anyhow!("{}:{line}: score is not a number", source.display()))?;
        if !score.is_finite() {
            bail!("{}:{line}: score is not finite", source.display());
        }
        if scores.insert(id.clone(), score).is_some() {
            bail!("{}:{line}: duplicate score for run {id}", source.display());
        }
    }
    Ok(scores)
}

pub fn monitor(manifest_path: &Path, settings: MonitorSettings) -> Result<Report> {
    let mut prov = Provenance::new("monitor");
    let text = read_input(&mut prov, manifest_path)?;
    let text = String::from_utf8(text).map_err(|_| anyhow!("{}: not valid UTF-8", manifest_path.display()))?;
    let manifest = parse_manifest(&text, &manifest_path.display().to_string())?;
    let policy = SubmissionPolicy {
        max_runs_per_window: settings.max_runs,
        window: parse_window(&settings.window)?,
        max_minor_variants_per_window: settings.max_minor_variants,
    };
    prov.set("max_runs", settings.max_runs);
    prov.set("window", &settings.window);
    prov.set("max_minor_variants", settings.max_minor_variants);

    let scores = match (&settings.scores, &settings.qrels) {
        (Some(path), _) => {
            let bytes = read_input(&mut prov, path)?;
            Some(parse_scores(&bytes, path)?)
        }
        (None, Some((qrels, metric))) => {
            prov.set("metric", metric);
            prov.set("depth", settings.depth);
            let base = manifest_path.parent().unwrap_or(Path::new(""));
            let mut runs = Vec::new();
            for s in &manifest.submissions {
                let path = base.join(&s.path);
                let bytes = read_input(&mut prov, &path)?;
                let (mut run, warnings) = parse_run(bytes.as_slice(), &path.display().to_string(), settings.depth)?;
                report_warnings(&path, &warnings);
                run.run_id = s.run_id.clone();
                runs.push(run);
            }
            let qrels = load_qrels(&mut prov, qrels)?;
            let matrix = judged_matrix(&runs, &qrels, *metric)?;
            Some(
                matrix
                    .run_ids
                    .iter()
                    .enumerate()
                    .map(|(r, id)| (id.clone(), matrix.aggregate(r, Aggregation::Mean)))
                    .collect(),
            )
        }
        (None, None) => None,
    };

    let policy_report = check_submission_policy(&manifest, &policy)?;
    if !policy_report.minor_variant_rule_enforceable {
        eprintln!("lbeval: warning: no submission carries a minor_variant tag; that rule was not checked");
    }
    let groups = group_stats(&manifest);

    let mut violations = Table::new("violations", ["run_id", "group_id", "date", "rule", "window", "count", "limit"]);
    for v in &policy_report.violations {
        violations.push(vec![
            v.run_id.clone(),
            v.group_id.clone(),
            v.date.to_string(),
            format!("{:?}", v.rule),
            v.window.clone(),
            v.count.to_string(),
            v.limit.to_string(),
        ]);
    }
    let mut group_table = Table::new("groups", ["group_id", "submissions", "first", "last"]);
    for g in &groups {
        group_table.push(vec![
            g.group_id.clone(),
            g.submissions.to_string(),
            g.first.to_string(),
            g.last.to_string(),
        ]);
    }
    let mut tables = vec![group_table, violations];
    let mut structured = json!({ "policy": policy_report, "groups": groups });

    if let Some(scores) = scores {
        let baseline = settings.baseline_score.unwrap_or_else(|| {
            manifest
                .submissions
                .iter()
                .filter(|s| s.baseline)
                .filter_map(|s| scores.get(&s.run_id).copied())
                .fold(f64::NEG_INFINITY, f64::max)
        });
        prov.set("baseline_score", baseline);
        let rows = trajectory(&manifest, &scores, baseline)?;
        let mut table = Table::new("trajectory", ["date", "run_id", "score", "baseline", "is_sota"]);
        for r in &rows {
            table.push(vec![
                r.date.to_string(),
                r.run_id.clone(),
                fixed(r.score),
                r.baseline.to_string(),
                r.is_sota.to_string(),
            ]);
        }
        tables.push(table);
        structured["baseline_score"] = json!(baseline.is_finite().then_some(baseline));
        structured["trajectory"] = serde_json::to_value(&rows)?;
    }
    Ok(Report {
        provenance: prov,
        tables,
        structured,
    })
}

pub fn scale_check(metric: MetricSpec, depth: usize, grades: u32, state_cap: usize) -> Result<Report> {
    let mut prov = Provenance::new("scale-check");
    prov.set("metric", metric);
    prov.set("depth", depth);
    prov.set("grades", grades);
    prov.set("state_cap", state_cap);
    let space = enumerate_states(depth, grades, state_cap)?;
    let values = metric_values(&space, &metric)?;
    let mut distinct = values.clone();
    distinct.sort();
    distinct.dedup();
    let result = solvability_check(&distinct)?;
    let failing = check_difference_axioms(&result.value_set);

    let mut states = Table::new("states", ["state", "value", "decimal"]);
    for (state, v) in space.states.iter().zip(&values) {
        let label: Vec<String> = state.iter().map(ToString::to_string).collect();
        states.push(vec![label.join(" "), v.to_string(), fixed(to_f64(v))]);
    }
    let mut summary = Table::new("summary", ["property", "value"]);
    let list = |v: &[Rational]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
    summary.push(vec!["value_set".into(), list(&result.value_set)]);
    summary.push(vec!["gaps".into(), list(&result.gaps)]);
    summary.push(vec!["equi_spaced".into(), result.equi_spaced.to_string()]);
    summary.push(vec!["solvable".into(), result.solvable.to_string()]);
    if let Some(c) = &result.counterexample {
        summary.push(vec!["witness".into(), format!("a={} b={} c={} d={}", c.a, c.b, c.c, c.d)]);
        summary.push(vec!["witness_gap".into(), c.delta.to_string()]);
        summary.push(vec!["unrealizable".into(), list(&c.missing)]);
    }
    let violated = if failing.is_empty() { "none".to_string() } else { failing.join("; ") };
    summary.push(vec!["order_axioms_violated".into(), violated]);

    let state_json: Vec<_> = space
        .states
        .iter()
        .zip(&values)
        .map(|(s, v)| json!({ "state": s, "value": v.to_string() }))
        .collect();
    Ok(Report {
        provenance: prov,
        tables: vec![states, summary],
        structured: json!({ "states": state_json, "result": result, "order_axioms_violated": failing }),
    })
}

fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn join(metrics: &[MetricSpec]) -> String {
    metrics.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}
