//! Evaluation: metrics, ablation grids, latency.

pub mod ablation;
pub mod latency;
pub mod metrics;

pub use ablation::{format_table, run_ablation, AblationRow, GridEntry};
pub use latency::{benchmark_latency, LatencyReport};
pub use metrics::{compute_metrics, MetricsReport, PerIntentMetrics};
