//! Submission governance: policy checks, per-group statistics and the
//! running-best (SOTA) trajectory of a leaderboard.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use serde::Serialize;

use crate::corpus::{LeaderboardManifest, Submission};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Window {
    /// Calendar month of the submission date.
    CalendarMonth,
    /// The `days` days ending on (and including) the submission date.
    Rolling { days: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SubmissionPolicy {
    pub max_runs_per_window: u32,
    pub window: Window,
    pub max_minor_variants_per_window: u32,
}

impl Default for SubmissionPolicy {
    fn default() -> Self {
        SubmissionPolicy {
            max_runs_per_window: 2,
            window: Window::CalendarMonth,
            max_minor_variants_per_window: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rule {
    RunsPerWindow,
    MinorVariantsPerWindow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub run_id: String,
    pub group_id: String,
    pub date: NaiveDate,
    pub rule: Rule,
    pub window: String,
    /// Submissions counted in the window up to and including this one.
    pub count: u32,
    pub limit: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PolicyReport {
    pub policy: SubmissionPolicy,
    pub violations: Vec<Violation>,
    /// False when no submission carries a minor-variant tag.
    pub minor_variant_rule_enforceable: bool,
}

fn chronological(manifest: &LeaderboardManifest) -> Vec<&Submission> {
    let mut subs: Vec<&Submission> = manifest.submissions.iter().collect();
    subs.sort_by(|a, b| a.submitted_on.cmp(&b.submitted_on).then_with(|| a.run_id.cmp(&b.run_id)));
    subs
}

fn window_label(window: Window, date: NaiveDate) -> String {
    match window {
        Window::CalendarMonth => format!("{:04}-{:02}", date.year(), date.month()),
        Window::Rolling { days } => {
            let start = date - chrono::Duration::days(i64::from(days) - 1);
            format!("{start}..{date}")
        }
    }
}

/// Flags, per group and window, every submission beyond the allowed count.
fn check_rule<'a>(
    subs: &[&'a Submission],
    window: Window,
    limit: u32,
    rule: Rule,
    counted: impl Fn(&Submission) -> bool,
) -> Vec<Violation> {
    let mut by_group: BTreeMap<&str, Vec<&'a Submission>> = BTreeMap::new();
    for s in subs.iter().filter(|s| counted(s)) {
        by_group.entry(s.group_id.as_str()).or_default().push(s);
    }
    let mut out = Vec::new();
    for group in by_group.values() {
        for (i, s) in group.iter().enumerate() {
            let in_window = match window {
                Window::CalendarMonth => group[..=i]
                    .iter()
                    .filter(|o| {
                        o.submitted_on.year() == s.submitted_on.year()
                            && o.submitted_on.month() == s.submitted_on.month()
                    })
                    .count(),
                Window::Rolling { days } => group[..=i]
                    .iter()
                    .filter(|o| (s.submitted_on - o.submitted_on).num_days() < i64::from(days))
                    .count(),
            } as u32;
            if in_window > limit {
                out.push(Violation {
                    run_id: s.run_id.clone(),
                    group_id: s.group_id.clone(),
                    date: s.submitted_on,
                    rule,
                    window: window_label(window, s.submitted_on),
                    count: in_window,
                    limit,
                });
            }
        }
    }
    out
}

pub fn check_submission_policy(manifest: &LeaderboardManifest, policy: &SubmissionPolicy) -> Result<PolicyReport> {
    if let Window::Rolling { days: 0 } = policy.window {
        return Err(Error::Argument("rolling window must span at least one day".into()));
    }
    let subs = chronological(manifest);
    let mut violations = check_rule(&subs, policy.window, policy.max_runs_per_window, Rule::RunsPerWindow, |_| true);
    let enforceable = subs.iter().any(|s| s.minor_variant.is_some());
    if enforceable {
        violations.extend(check_rule(
            &subs,
            policy.window,
            policy.max_minor_variants_per_window,
            Rule::MinorVariantsPerWindow,
            |s| s.minor_variant == Some(true),
        ));
    }
    violations.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.run_id.cmp(&b.run_id)));
    Ok(PolicyReport {
        policy: *policy,
        violations,
        minor_variant_rule_enforceable: enforceable,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupStats {
    pub group_id: String,
    pub submissions: usize,
    pub first: NaiveDate,
    pub last: NaiveDate,
}

/// Submission counts per group, most active first (ties by group id).
pub fn group_stats(manifest: &LeaderboardManifest) -> Vec<GroupStats> {
    let mut groups: BTreeMap<&str, GroupStats> = BTreeMap::new();
    for s in &manifest.submissions {
        groups
            .entry(&s.group_id)
            .and_modify(|g| {
                g.submissions += 1;
                g.first = g.first.min(s.submitted_on);
                g.last = g.last.max(s.submitted_on);
            })
            .or_insert_with(|| GroupStats {
                group_id: s.group_id.clone(),
                submissions: 1,
                first: s.submitted_on,
                last: s.submitted_on,
            });
    }
    let mut out: Vec<GroupStats> = groups.into_values().collect();
    out.sort_by(|a, b| b.submissions.cmp(&a.submissions).then_with(|| a.group_id.cmp(&b.group_id)));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SotaPoint {
    pub run_id: String,
    pub date: NaiveDate,
    pub score: f64,
    /// True for the last point, the state of the art at the end of the scan.
    pub is_current_sota: bool,
}

/// One row per submission, for plotting the full trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub run_id: String,
    pub date: NaiveDate,
    pub score: f64,
    pub baseline: bool,
    pub is_sota: bool,
}

/// Scans submissions chronologically (same-day ties by run id) and marks each
/// that strictly beats every earlier score and the baseline.
pub fn trajectory(
    manifest: &LeaderboardManifest,
    scores: &BTreeMap<String, f64>,
    baseline_score: f64,
) -> Result<Vec<TrajectoryRow>> {
    let subs = chronological(manifest);
    let missing: Vec<&str> = subs
        .iter()
        .filter(|s| !scores.contains_key(&s.run_id))
        .map(|s| s.run_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Argument(format!("no score for runs: {}", missing.join(", "))));
    }
    let mut best = baseline_score;
    Ok(subs
        .into_iter()
        .map(|s| {
            let score = scores[&s.run_id];
            let is_sota = score > best;
            if is_sota {
                best = score;
            }
            TrajectoryRow {
                run_id: s.run_id.clone(),
                date: s.submitted_on,
                score,
                baseline: s.baseline,
                is_sota,
            }
        })
        .collect())
}

/// The running-maximum subsequence of submissions above the baseline.
pub fn sota_trajectory(
    manifest: &LeaderboardManifest,
    scores: &BTreeMap<String, f64>,
    baseline_score: f64,
) -> Result<Vec<SotaPoint>> {
    let mut points: Vec<SotaPoint> = trajectory(manifest, scores, baseline_score)?
        .into_iter()
        .filter(|r| r.is_sota)
        .map(|r| SotaPoint {
            run_id: r.run_id,
            date: r.date,
            score: r.score,
            is_current_sota: false,
        })
        .collect();
    if let Some(last) = points.last_mut() {
        last.is_current_sota = true;
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use std::path::PathBuf;

    use super::*;

    fn sub(run: &str, group: &str, date: &str) -> Submission {
        Submission {
            run_id: run.into(),
            group_id: group.into(),
            submitted_on: date.parse().unwrap(),
            description: String::new(),
            path: PathBuf::from(format!("{run}.txt")),
            baseline: false,
            minor_variant: None,
        }
    }

    fn manifest(subs: Vec<Submission>) -> LeaderboardManifest {
        LeaderboardManifest {
            task_id: "t".into(),
            submissions: subs,
        }
    }

    #[test]
    fn third_run_in_a_month_is_flagged() {
        let m = manifest(vec![
            sub("r3", "g", "2021-01-25"),
            sub("r1", "g", "2021-01-05"),
            sub("r2", "g", "2021-01-20"),
        ]);
        let report = check_submission_policy(&m, &SubmissionPolicy::default()).unwrap();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].run_id, "r3");
        assert_eq!(report.violations[0].window, "2021-01");
        assert!(!report.minor_variant_rule_enforceable);
    }

    #[test]
    fn two_per_month_is_fine() {
        let m = manifest(vec![
            sub("a", "g", "2021-01-05"),
            sub("b", "g", "2021-01-20"),
            sub("c", "g", "2021-02-01"),
            sub("d", "g", "2021-02-27"),
        ]);
        assert!(check_submission_policy(&m, &SubmissionPolicy::default()).unwrap().violations.is_empty());
        assert!(check_submission_policy(&manifest(vec![]), &SubmissionPolicy::default())
            .unwrap()
            .violations
            .is_empty());
    }

    #[test]
    fn rolling_window_crosses_month_boundary() {
        let m = manifest(vec![
            sub("a", "g", "2021-01-20"),
            sub("b", "g", "2021-01-30"),
            sub("c", "g", "2021-02-05"),
        ]);
        let calendar = check_submission_policy(&m, &SubmissionPolicy::default()).unwrap();
        assert!(calendar.violations.is_empty());
        let policy = SubmissionPolicy {
            window: Window::Rolling { days: 30 },
            ..Default::default()
        };
        let rolling = check_submission_policy(&m, &policy).unwrap();
        assert_eq!(rolling.violations.len(), 1);
        assert_eq!(rolling.violations[0].run_id, "c");
    }

    #[test]
    fn minor_variants_when_tagged() {
        let mut a = sub("a", "g", "2021-03-01");
        a.minor_variant = Some(false);
        let mut b = sub("b", "g", "2021-03-02");
        b.minor_variant = Some(true);
        let mut c = sub("c", "h", "2021-03-03");
        c.minor_variant = Some(true);
        let mut d = sub("d", "g", "2021-03-10");
        d.minor_variant = Some(true);
        let report = check_submission_policy(&manifest(vec![a, b, c, d]), &SubmissionPolicy::default()).unwrap();
        assert!(report.minor_variant_rule_enforceable);
        let rules: Vec<(&str, Rule)> = report.violations.iter().map(|v| (v.run_id.as_str(), v.rule)).collect();
        assert_eq!(rules, [("d", Rule::RunsPerWindow), ("d", Rule::MinorVariantsPerWindow)]);
    }

    #[test]
    fn group_stats_ordering() {
        let m = manifest(vec![
            sub("a", "zeta", "2021-01-01"),
            sub("b", "alpha", "2021-02-01"),
            sub("c", "zeta", "2021-03-01"),
            sub("d", "alpha", "2021-01-15"),
            sub("e", "mid", "2021-01-15"),
        ]);
        let stats = group_stats(&m);
        let order: Vec<&str> = stats.iter().map(|g| g.group_id.as_str()).collect();
        assert_eq!(order, ["alpha", "zeta", "mid"]);
        assert_eq!(stats[0].first.to_string(), "2021-01-15");
        assert_eq!(stats[0].last.to_string(), "2021-02-01");
        assert_eq!(group_stats(&manifest(vec![sub("a", "g", "2021-01-01")])).len(), 1);
    }

    #[test]
    fn sota_examples() {
        let m = manifest(vec![
            sub("r1", "g", "2020-01-01"),
            sub("r2", "g", "2020-02-01"),
            sub("r3", "g", "2020-03-01"),
            sub("r4", "g", "2020-04-01"),
        ]);
        let scores: BTreeMap<String, f64> =
            [("r1", 0.2), ("r2", 0.35), ("r3", 0.30), ("r4", 0.40)].map(|(k, v)| (k.to_string(), v)).into();
        let points = sota_trajectory(&m, &scores, 0.25).unwrap();
        let got: Vec<(&str, f64, bool)> =
            points.iter().map(|p| (p.run_id.as_str(), p.score, p.is_current_sota)).collect();
        assert_eq!(got, [("r2", 0.35, false), ("r4", 0.40, true)]);

        assert!(sota_trajectory(&m, &scores, 0.5).unwrap().is_empty());

        let mut tied = scores.clone();
        tied.insert("r4".into(), 0.35);
        let points = sota_trajectory(&m, &tied, 0.25).unwrap();
        assert_eq!(points.len(), 1);

        let mut partial = scores.clone();
        partial.remove("r3");
        assert!(matches!(sota_trajectory(&m, &partial, 0.0), Err(Error::Argument(_))));
    }

    #[test]
    fn same_day_ties_order_by_run_id() {
        let m = manifest(vec![sub("b", "g", "2020-01-01"), sub("a", "g", "2020-01-01")]);
        let scores: BTreeMap<String, f64> = [("a", 0.3), ("b", 0.3)].map(|(k, v)| (k.to_string(), v)).into();
        let points = sota_trajectory(&m, &scores, 0.0).unwrap();
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].run_id, "a");
    }
}
