//! Ingestion of run files, qrels, leaderboard manifests and query partitions.
//!
//! Run files use the six-column submission format
//! `query_id Q0 doc_id rank score tag`; qrels use `query_id 0 doc_id grade`.
//! Result order is always recomputed from scores (descending, ties broken by
//! doc id descending); the rank column is checked but never trusted.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DEPTH_CAP: usize = 1000;

pub type QueryId = String;
pub type DocId = String;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredDoc {
    pub doc_id: DocId,
    pub score: f64,
}

/// One system's ranked results per query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Run {
    pub run_id: String,
    pub group_id: String,
    pub submitted_on: Option<NaiveDate>,
    pub description: String,
    pub results: BTreeMap<QueryId, Vec<ScoredDoc>>,
}

/// Non-fatal observations made while parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    RankMismatch {
        query_id: QueryId,
        doc_id: DocId,
        stated: u64,
        derived: usize,
    },
    Truncated {
        query_id: QueryId,
        dropped: usize,
    },
    MixedTags {
        line: usize,
        tag: String,
    },
}

impl std::fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseWarning::RankMismatch {
                query_id,
                doc_id,
                stated,
                derived,
            } => write!(
                f,
                "query {query_id} doc {doc_id}: rank column says {stated}, score order gives {derived}"
            ),
            ParseWarning::Truncated { query_id, dropped } => {
                write!(f, "query {query_id}: dropped {dropped} results beyond depth cap")
            }
            ParseWarning::MixedTags { line, tag } => {
                write!(f, "line {line}: tag {tag} differs from the run id of the first line")
            }
        }
    }
}

/// Score descending, then doc id descending (bytewise).
fn result_order(a: &ScoredDoc, b: &ScoredDoc) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| b.doc_id.as_bytes().cmp(a.doc_id.as_bytes()))
}

impl Run {
    pub fn new(run_id: impl Into<String>) -> Self {
        Run {
            run_id: run_id.into(),
            group_id: String::new(),
            submitted_on: None,
            description: String::new(),
            results: BTreeMap::new(),
        }
    }

    /// Builds a run from unsorted `(query, doc, score)` triples, enforcing the
    /// same invariants as [`parse_run`].
    pub fn from_triples<I, Q, D>(run_id: impl Into<String>, triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Q, D, f64)>,
        Q: Into<String>,
        D: Into<String>,
    {
        let mut run = Run::new(run_id);
        let mut seen = BTreeSet::new();
        for (q, d, score) in triples {
            let (q, d) = (q.into(), d.into());
            if !score.is_finite() {
                return Err(Error::Argument(format!("non-finite score for ({q}, {d})")));
            }
            if !seen.insert((q.clone(), d.clone())) {
                return Err(Error::Integrity(format!("duplicate result ({q}, {d})")));
            }
            run.results.entry(q).or_default().push(ScoredDoc { doc_id: d, score });
        }
        for list in run.results.values_mut() {
            list.sort_by(result_order);
        }
        Ok(run)
    }

    pub fn query_ids(&self) -> BTreeSet<&str> {
        self.results.keys().map(String::as_str).collect()
    }

    pub fn ranking(&self, query_id: &str) -> &[ScoredDoc] {
        self.results.get(query_id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Renders the run in the six-column submission format with ranks
    /// derived from the stored order.
    pub fn to_trec(&self) -> String {
        let mut out = String::new();
        for (q, list) in &self.results {
            for (i, doc) in list.iter().enumerate() {
                out.push_str(&format!(
                    "{q} Q0 {} {} {:?} {}\n",
                    doc.doc_id,
                    i + 1,
                    doc.score,
                    self.run_id
                ));
            }
        }
        out
    }
}

fn read_lines<R: BufRead>(mut reader: R, source_name: &str) -> Result<Vec<(usize, String)>> {
    let mut lines = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let text = std::str::from_utf8(&buf)
            .map_err(|_| Error::parse(source_name, line_no, "line is not valid UTF-8 text"))?;
        let trimmed = text.trim();
        if !trimmed.is_empty() {
            lines.push((line_no, trimmed.to_string()));
        }
    }
    Ok(lines)
}

/// Parses a run file. Returns the run together with warnings about rank
/// column mismatches and truncation at `depth_cap`.
pub fn parse_run<R: BufRead>(
    reader: R,
    source_name: &str,
    depth_cap: usize,
) -> Result<(Run, Vec<ParseWarning>)> {
    if depth_cap == 0 {
        return Err(Error::Argument("depth cap must be at least 1".into()));
    }
    let mut run_id: Option<String> = None;
    let mut warnings = Vec::new();
    let mut rows: BTreeMap<QueryId, Vec<(ScoredDoc, u64, usize)>> = BTreeMap::new();
    let mut seen: BTreeMap<(QueryId, DocId), usize> = BTreeMap::new();

    for (line_no, line) in read_lines(reader, source_name)? {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(Error::parse(
                source_name,
                line_no,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        }
        if fields[1] != "Q0" {
            return Err(Error::parse(
                source_name,
                line_no,
                format!("second column must be the literal Q0, found {:?}", fields[1]),
            ));
        }
        let rank: u64 = fields[3].parse().map_err(|_| {
            Error::parse(source_name, line_no, format!("rank {:?} is not a non-negative integer", fields[3]))
        })?;
        let score: f64 = fields[4]
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| {
                Error::parse(source_name, line_no, format!("score {:?} is not a finite number", fields[4]))
            })?;
        match &run_id {
            None => run_id = Some(fields[5].to_string()),
            Some(id) if id != fields[5] => warnings.push(ParseWarning::MixedTags {
                line: line_no,
                tag: fields[5].to_string(),
            }),
            _ => {}
        }
        let (q, d) = (fields[0].to_string(), fields[2].to_string());
        if let Some(first) = seen.insert((q.clone(), d.clone()), line_no) {
            return Err(Error::Integrity(format!(
                "{source_name}:{line_no}: duplicate result for query {q} doc {d} (first seen on line {first})"
            )));
        }
        rows.entry(q).or_default().push((ScoredDoc { doc_id: d, score }, rank, line_no));
    }

    let mut run = Run::new(run_id.unwrap_or_default());
    for (q, mut list) in rows {
        list.sort_by(|a, b| result_order(&a.0, &b.0));
        for (i, (doc, stated, _)) in list.iter().enumerate() {
            if *stated != (i + 1) as u64 {
                warnings.push(ParseWarning::RankMismatch {
                    query_id: q.clone(),
                    doc_id: doc.doc_id.clone(),
                    stated: *stated,
                    derived: i + 1,
                });
            }
        }
        if list.len() > depth_cap {
            warnings.push(ParseWarning::Truncated {
                query_id: q.clone(),
                dropped: list.len() - depth_cap,
            });
            list.truncate(depth_cap);
        }
        run.results.insert(q, list.into_iter().map(|(doc, _, _)| doc).collect());
    }
    for w in &warnings {
        log::warn!("{source_name}: {w}");
    }
    Ok((run, warnings))
}

/// Graded relevance judgments for one labeling scheme.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Qrels {
    pub scheme_id: String,
    pub grades: BTreeMap<QueryId, BTreeMap<DocId, u32>>,
    pub max_grade: u32,
}

impl Qrels {
    pub fn from_triples<I, Q, D>(scheme_id: impl Into<String>, triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Q, D, u32)>,
        Q: Into<String>,
        D: Into<String>,
    {
        let mut grades: BTreeMap<QueryId, BTreeMap<DocId, u32>> = BTreeMap::new();
        for (q, d, g) in triples {
            let (q, d) = (q.into(), d.into());
            let slot = grades.entry(q.clone()).or_default();
            if let Some(prev) = slot.insert(d.clone(), g) {
                if prev != g {
                    return Err(Error::Integrity(format!(
                        "conflicting grades {prev} and {g} for query {q} doc {d}"
                    )));
                }
            }
        }
        Qrels::from_grades(scheme_id, grades)
    }

    fn from_grades(
        scheme_id: impl Into<String>,
        grades: BTreeMap<QueryId, BTreeMap<DocId, u32>>,
    ) -> Result<Self> {
        if grades.is_empty() {
            return Err(Error::Integrity("qrels contain no queries".into()));
        }
        let max_grade = grades.values().flat_map(|m| m.values().copied()).max().unwrap_or(0);
        Ok(Qrels {
            scheme_id: scheme_id.into(),
            grades,
            max_grade,
        })
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> Option<u32> {
        self.grades.get(query_id)?.get(doc_id).copied()
    }

    pub fn judged(&self, query_id: &str) -> Option<&BTreeMap<DocId, u32>> {
        self.grades.get(query_id)
    }

    pub fn query_ids(&self) -> BTreeSet<&str> {
        self.grades.keys().map(String::as_str).collect()
    }

    pub fn with_scheme(mut self, scheme_id: impl Into<String>) -> Self {
        self.scheme_id = scheme_id.into();
        self
    }

    pub fn to_trec(&self) -> String {
        let mut out = String::new();
        for (q, docs) in &self.grades {
            for (d, g) in docs {
                out.push_str(&format!("{q} 0 {d} {g}\n"));
            }
        }
        out
    }
}

/// Parses a four-column qrels file. Identical duplicate lines are accepted.
pub fn parse_qrels<R: BufRead>(reader: R, source_name: &str, scheme_id: &str) -> Result<Qrels> {
    let mut grades: BTreeMap<QueryId, BTreeMap<DocId, u32>> = BTreeMap::new();
    for (line_no, line) in read_lines(reader, source_name)? {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                source_name,
                line_no,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let raw: i64 = fields[3].parse().map_err(|_| {
            Error::parse(source_name, line_no, format!("grade {:?} is not an integer", fields[3]))
        })?;
        let grade = u32::try_from(raw).map_err(|_| {
            Error::parse(source_name, line_no, format!("grade {raw} is out of range (must be >= 0)"))
        })?;
        let slot = grades.entry(fields[0].to_string()).or_default();
        if let Some(prev) = slot.insert(fields[2].to_string(), grade) {
            if prev != grade {
                return Err(Error::Integrity(format!(
                    "{source_name}:{line_no}: conflicting grades {prev} and {grade} for query {} doc {}",
                    fields[0], fields[2]
                )));
            }
        }
    }
    Qrels::from_grades(scheme_id, grades)
        .map_err(|e| Error::Integrity(format!("{source_name}: {e}")))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Submission {
    pub run_id: String,
    pub group_id: String,
    pub submitted_on: NaiveDate,
    pub description: String,
    pub path: PathBuf,
    pub baseline: bool,
    /// `Some(true)` marks a minor variant of an earlier run; `None` means untagged.
    pub minor_variant: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LeaderboardManifest {
    pub task_id: String,
    pub submissions: Vec<Submission>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPartition {
    pub public_ids: BTreeSet<QueryId>,
    pub private_ids: BTreeSet<QueryId>,
}

impl QueryPartition {
    pub fn new<I, J, S, T>(public: I, private: J) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: Into<String>,
        T: Into<String>,
    {
        let p = QueryPartition {
            public_ids: public.into_iter().map(Into::into).collect(),
            private_ids: private.into_iter().map(Into::into).collect(),
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.public_ids.is_empty() && self.private_ids.is_empty() {
            return Err(Error::Integrity("query partition is empty".into()));
        }
        let overlap: Vec<&str> = self
            .public_ids
            .intersection(&self.private_ids)
            .map(String::as_str)
            .collect();
        if !overlap.is_empty() {
            return Err(Error::Integrity(format!(
                "queries in both public and private sets: {}",
                overlap.join(", ")
            )));
        }
        Ok(())
    }

    pub fn all_ids(&self) -> BTreeSet<QueryId> {
        self.public_ids.union(&self.private_ids).cloned().collect()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    task_id: String,
    #[serde(default, rename = "submission")]
    submissions: Vec<RawSubmission>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSubmission {
    run_id: String,
    group_id: String,
    date: String,
    #[serde(default)]
    description: String,
    path: PathBuf,
    #[serde(default)]
    baseline: bool,
    minor_variant: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPartition {
    #[serde(default)]
    public: Vec<String>,
    #[serde(default)]
    private: Vec<String>,
}

/// Parses a manifest without touching the filesystem.
pub fn parse_manifest(text: &str, source_name: &str) -> Result<LeaderboardManifest> {
    let raw: RawManifest = toml::from_str(text)
        .map_err(|e| Error::parse(source_name, toml_line(text, &e), e.message().to_string()))?;
    let mut ids = BTreeSet::new();
    let mut submissions = Vec::with_capacity(raw.submissions.len());
    for s in raw.submissions {
        if !ids.insert(s.run_id.clone()) {
            return Err(Error::Integrity(format!("{source_name}: duplicate run_id {}", s.run_id)));
        }
        let submitted_on = NaiveDate::parse_from_str(&s.date, "%Y-%m-%d").map_err(|e| {
            Error::Integrity(format!("{source_name}: run {}: bad date {:?}: {e}", s.run_id, s.date))
        })?;
        submissions.push(Submission {
            run_id: s.run_id,
            group_id: s.group_id,
            submitted_on,
            description: s.description,
            path: s.path,
            baseline: s.baseline,
            minor_variant: s.minor_variant,
        });
    }
    Ok(LeaderboardManifest {
        task_id: raw.task_id,
        submissions,
    })
}

pub fn parse_partition(text: &str, source_name: &str) -> Result<QueryPartition> {
    let raw: RawPartition = toml::from_str(text)
        .map_err(|e| Error::parse(source_name, toml_line(text, &e), e.message().to_string()))?;
    QueryPartition::new(raw.public, raw.private)
}

fn toml_line(text: &str, e: &toml::de::Error) -> usize {
    e.span()
        .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0)
}

/// Loads and validates a manifest and partition. Run file paths are resolved
/// relative to `base_dir` and must exist.
pub fn load_leaderboard_config(
    manifest_text: &str,
    partition_text: &str,
    base_dir: &Path,
) -> Result<(LeaderboardManifest, QueryPartition)> {
    let mut manifest = parse_manifest(manifest_text, "manifest")?;
    let partition = parse_partition(partition_text, "partition")?;
    for s in &mut manifest.submissions {
        let resolved = base_dir.join(&s.path);
        if !resolved.is_file() {
            return Err(Error::MissingFile(resolved));
        }
        s.path = resolved;
    }
    Ok((manifest, partition))
}

impl LeaderboardManifest {
    /// Parses every referenced run file and attaches submission metadata.
    pub fn load_runs(&self, depth_cap: usize) -> Result<Vec<(Run, Vec<ParseWarning>)>> {
        self.submissions
            .iter()
            .map(|s| {
                let file = std::fs::File::open(&s.path).map_err(|e| match e.kind() {
                    std::io::ErrorKind::NotFound => Error::MissingFile(s.path.clone()),
                    _ => Error::Io(e),
                })?;
                let name = s.path.display().to_string();
                let (mut run, warnings) = parse_run(std::io::BufReader::new(file), &name, depth_cap)?;
                run.run_id = s.run_id.clone();
                run.group_id = s.group_id.clone();
                run.submitted_on = Some(s.submitted_on);
                run.description = s.description.clone();
                Ok((run, warnings))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub covered: BTreeSet<QueryId>,
    pub missing: BTreeSet<QueryId>,
    pub extraneous: BTreeSet<QueryId>,
}

impl ValidationReport {
    pub fn is_complete(&self) -> bool {
        self.missing.is_empty()
    }
}

/// Reports which of `query_ids` a run covers. A query with an empty result
/// list counts as missing.
pub fn validate_run_against_queryset<S: AsRef<str> + Ord>(run: &Run, query_ids: &BTreeSet<S>) -> ValidationReport {
    let wanted: BTreeSet<&str> = query_ids.iter().map(AsRef::as_ref).collect();
    let present: BTreeSet<&str> = run
        .results
        .iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(k, _)| k.as_str())
        .collect();
    ValidationReport {
        covered: wanted.intersection(&present).map(|s| s.to_string()).collect(),
        missing: wanted.difference(&present).map(|s| s.to_string()).collect(),
        extraneous: present.difference(&wanted).map(|s| s.to_string()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_from(text: &str) -> Result<(Run, Vec<ParseWarning>)> {
        parse_run(text.as_bytes(), "test", DEFAULT_DEPTH_CAP)
    }

    #[test]
    fn single_line_maps_fields() {
        let (run, warnings) = run_from("19335 Q0 D1234 1 12.5 myrun\n").unwrap();
        assert_eq!(run.run_id, "myrun");
        assert_eq!(
            run.ranking("19335"),
            &[ScoredDoc {
                doc_id: "D1234".into(),
                score: 12.5
            }]
        );
        assert!(warnings.is_empty());
    }

    #[test]
    fn order_comes_from_scores() {
        let (run, warnings) = run_from("q Q0 a 1 3.0 r\nq Q0 b 2 5.0 r\n").unwrap();
        let ids: Vec<_> = run.ranking("q").iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, ["b", "a"]);
        assert_eq!(warnings.len(), 2);
    }

    #[test]
    fn score_ties_break_by_doc_id_descending() {
        let (run, _) = run_from("q Q0 a 1 1.0 r\nq Q0 c 2 1.0 r\nq Q0 b 3 1.0 r\n").unwrap();
        let ids: Vec<_> = run.ranking("q").iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, ["c", "b", "a"]);
    }

    #[test]
    fn duplicate_pair_is_integrity_error() {
        let err = run_from("q Q0 a 1 1.0 r\nq Q0 a 2 0.5 r\n").unwrap_err();
        assert!(matches!(err, Error::Integrity(_)), "{err}");
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let err = run_from("q Q0 a 1 1.0 r\n\nq Q0 b 2 r\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = run_from("q Q0 a 1 abc r\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = run_from("q 0 a 1 1.0 r\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = run_from("q Q0 a 1 NaN r\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn depth_cap_truncates_with_warning() {
        let text: String = (0..5).map(|i| format!("q Q0 d{i} {} {}.0 r\n", i + 1, 10 - i)).collect();
        let (run, warnings) = parse_run(text.as_bytes(), "t", 3).unwrap();
        assert_eq!(run.ranking("q").len(), 3);
        assert!(warnings.contains(&ParseWarning::Truncated {
            query_id: "q".into(),
            dropped: 2
        }));
    }

    #[test]
    fn rejects_invalid_utf8() {
        let bytes: &[u8] = b"q Q0 \xff 1 1.0 r\n";
        assert!(matches!(parse_run(bytes, "t", 10), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn qrels_basics() {
        let q = parse_qrels("q1 0 d1 2\n".as_bytes(), "t", "s").unwrap();
        assert_eq!(q.grade("q1", "d1"), Some(2));
        assert_eq!(q.max_grade, 2);

        let q = parse_qrels("q1 0 d1 2\nq1 0 d1 2\n".as_bytes(), "t", "s").unwrap();
        assert_eq!(q.grades["q1"].len(), 1);

        assert!(matches!(
            parse_qrels("q1 0 d1 -1\n".as_bytes(), "t", "s"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_qrels("q1 0 d1 2\nq1 0 d1 1\n".as_bytes(), "t", "s"),
            Err(Error::Integrity(_))
        ));
        assert!(matches!(parse_qrels("".as_bytes(), "t", "s"), Err(Error::Integrity(_))));
    }

    const MANIFEST: &str = r#"
task_id = "doc"

[[submission]]
run_id = "r1"
group_id = "g1"
date = "2020-11-05"
description = "bm25"
path = "r1.txt"
baseline = true

[[submission]]
run_id = "r2"
group_id = "g2"
date = "2020-12-01"
path = "r2.txt"
"#;

    #[test]
    fn leaderboard_config_loads() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().to_path_buf();
        std::fs::write(dir.join("r1.txt"), "q1 Q0 d 1 1 r1\n").unwrap();
        std::fs::write(dir.join("r2.txt"), "q1 Q0 d 1 1 r2\n").unwrap();
        let (m, p) =
            load_leaderboard_config(MANIFEST, "public = [\"q1\"]\nprivate = [\"q2\"]\n", &dir).unwrap();
        assert_eq!(m.submissions.len(), 2);
        assert!(m.submissions[0].baseline);
        assert_eq!(m.submissions[1].minor_variant, None);
        assert_eq!(p.private_ids.len(), 1);
        let runs = m.load_runs(10).unwrap();
        assert_eq!(runs[1].0.group_id, "g2");

        let err = load_leaderboard_config(MANIFEST, "public = [\"q1\"]\nprivate = [\"q1\"]\n", &dir).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
        let err = load_leaderboard_config(MANIFEST, "public = []\nprivate = []\n", &dir).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
        std::fs::remove_file(dir.join("r2.txt")).unwrap();
        let err = load_leaderboard_config(MANIFEST, "public = [\"q1\"]\n", &dir).unwrap_err();
        assert!(matches!(err, Error::MissingFile(_)));
    }

    #[test]
    fn manifest_rejects_duplicates_and_bad_dates() {
        let dup = MANIFEST.replace("\"r2\"", "\"r1\"");
        assert!(matches!(parse_manifest(&dup, "m"), Err(Error::Integrity(_))));
        let bad = MANIFEST.replace("2020-12-01", "2020-13-01");
        assert!(matches!(parse_manifest(&bad, "m"), Err(Error::Integrity(_))));
        assert!(matches!(parse_manifest("task_id = 3", "m"), Err(Error::Parse { .. })));
    }

    #[test]
    fn validation_report() {
        let run = Run::from_triples("r", [("q1", "d", 1.0), ("q2", "d", 1.0)]).unwrap();
        let set: BTreeSet<String> = ["q1", "q2"].map(String::from).into();
        assert!(validate_run_against_queryset(&run, &set).missing.is_empty());

        let run = Run::from_triples("r", [("q1", "d", 1.0)]).unwrap();
        let r = validate_run_against_queryset(&run, &set);
        assert_eq!(r.missing, ["q2".to_string()].into());

        let run = Run::from_triples("r", [("q1", "d", 1.0), ("q3", "d", 1.0)]).unwrap();
        let set: BTreeSet<String> = ["q1".to_string()].into();
        let r = validate_run_against_queryset(&run, &set);
        assert_eq!(r.extraneous, ["q3".to_string()].into());
        assert_eq!(r.covered, ["q1".to_string()].into());
    }
}
