//! Suggestion quality metrics and evaluation runs.

pub mod metrics;
pub mod run;

pub use metrics::{
    aggregate, bench_latency, latency_stats, score_sample, score_text, simulate_tes, sweep_thresholds, threshold_grid,
    truncate_words, CurvePoint, LatencyStats, MetricsRow, SampleResult, TesTrace,
};
pub use run::{
    build_report, run_suggestions, summarize, EvalReport, ReportOptions, Split, Suggester, UtteranceRun, View,
};
