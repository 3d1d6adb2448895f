//! Selection, estimation and prediction metrics, the simulation benchmark
//! and the repeated-split stability evaluation.

mod benchmark;
mod metrics;
mod stability;

pub use benchmark::{
    benchmark, format_table, score_fit, BenchmarkConfig, BenchmarkReport, LambdaChoice, MeanSd,
    MethodSummary, Metrics, ReplicateRecord, StructuralChecks,
};
pub use metrics::{
    ermse, group_tp_fp, logrank, logrank_score, ooi, prmse_aft, prmse_lr, prmse_quadratic,
    variable_tp_fp, OoiScore, OOI_TOP,
};
pub use stability::{
    prediction_score, split_rows, stability, PredictionScore, SplitResult, StabilityConfig,
    StabilityReport,
};
