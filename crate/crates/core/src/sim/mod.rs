//! Synthetic market: request sampling, user feedback and performance metrics.

pub mod config;
pub mod eval;
pub mod feedback;
pub mod metrics;
pub mod utility;
pub mod world;

pub use config::{BetaParams, BiddingMode, WorldConfig};
pub use eval::{
    evaluate, play_round, write_episode_log, EvalSpec, Evaluation, FeedbackMode, RoundResult,
};
pub use feedback::{expected_feedback, simulate_feedback, ExpectedImpression, FeedbackRecord};
pub use metrics::{
    compute_metrics, scalarize, FeedbackTotals, Metric, MetricWeights, MetricsRecord, Normalizers,
};
pub use utility::{advertiser_utility, benchmark_utilities, BenchmarkUtilities};
pub use world::{Advertiser, GroundTruth, Round, World};
