//! Evaluation of retrieval runs against relevance judgments, plus
//! leaderboard meta-evaluation: bootstrap rank stability, public/private
//! holdout comparison, submission monitoring, split-half agreement of
//! significance tests and interval-scale checks on rank metrics.
//!
//! Every analysis works from a precomputed [`MetricMatrix`] of per-query
//! scores, so runs are scored once and resampled many times.

pub mod agreement;
pub mod corpus;
pub mod error;
pub mod holdout;
pub mod metrics;
pub mod monitor;
pub mod resampling;
pub mod scale;
pub mod stats;

pub use agreement::{AgreementCell, AgreementOptions, AgreementReport, Classification};
pub use corpus::{LeaderboardManifest, QueryPartition, Qrels, Run, Submission, ValidationReport};
pub use error::{Error, Result};
pub use holdout::{HoldoutOptions, HoldoutReport};
pub use metrics::{Gain, MetricKind, MetricMatrix, MetricSpec};
pub use monitor::{SotaPoint, SubmissionPolicy, Violation};
pub use resampling::{RankDistribution, RankSummaryRow};
pub use scale::{ScaleCheckResult, StateSpace};
pub use stats::{Aggregation, Direction, PairVerdict, TestMethod, TestResult};
