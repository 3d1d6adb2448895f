//! Integrative sparse boosting for several datasets that share a covariate
//! layout. Besides per-dataset estimation and variable selection, CD-SBoost
//! decides for every covariate group whether its coefficients are exactly
//! equal (common) or differ across datasets.

pub mod boost;
pub mod data;
pub mod error;
pub mod eval;
pub mod io;
pub mod loss;
pub mod seed;
pub mod simgen;
pub mod tuning;

pub use data::{
    partition_refresh, refresh_partitions, validate, Algorithm, BoostConfig, CoefficientState,
    DatasetBundle, FitResult, DEFAULT_MAX_ITER, GroupStructure, Model, PairMode, Partition, Problem, Stopping,
};
pub use error::{Error, Result};
