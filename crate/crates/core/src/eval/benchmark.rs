use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{ermse, group_tp_fp, prmse_aft, prmse_lr, variable_tp_fp};
use crate::boost::{cd_sboost_run, fit, FitOptions, PenaltySpec};
use crate::data::{validate, Algorithm, BoostConfig, FitResult, Model, PairMode, Problem, DEFAULT_MAX_ITER};
use crate::error::{Error, Result};
use crate::simgen::{simulate, SimDesign};
use crate::tuning::{default_grid, lambda_max, select_lambda};

/// How CD-SBoost's λ is chosen in each replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaChoice {
    Fixed(f64),
    /// HDBIC over the given grid.
    Grid(Vec<f64>),
    /// HDBIC over the default grid of `{0}` plus this many values.
    Auto(usize),
}

impl LambdaChoice {
    pub fn grid(&self, problem: &Problem) -> Vec<f64> {
        match self {
            LambdaChoice::Fixed(l) => vec![*l],
            LambdaChoice::Grid(g) => g.clone(),
            LambdaChoice::Auto(count) => default_grid(lambda_max(problem), *count),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub design: SimDesign,
    pub methods: Vec<Algorithm>,
    pub replicates: usize,
    pub seed: u64,
    pub nu: f64,
    pub max_iter: usize,
    pub lambda: LambdaChoice,
    pub pair_mode: PairMode,
    /// Re-run CD-SBoost at the chosen λ while comparing tracked partitions
    /// with recomputed ones after every update.
    pub check_partitions: bool,
}

impl BenchmarkConfig {
    pub fn new(design: SimDesign, seed: u64) -> Self {
        BenchmarkConfig {
            design,
            methods: vec![
                Algorithm::CdSBoost,
                Algorithm::IntSBoost,
                Algorithm::SepSBoost,
                Algorithm::PoolSBoost,
            ],
            replicates: 100,
            seed,
            nu: 0.1,
            max_iter: DEFAULT_MAX_ITER,
            lambda: LambdaChoice::Auto(10),
            pair_mode: PairMode::AllPairs,
            check_partitions: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub variable_tp: usize,
    pub variable_fp: usize,
    pub group_tp: usize,
    pub group_fp: usize,
    pub ermse: f64,
    pub prmse: f64,
}

/// Scores a fit against the truth of one replicate.
pub fn score_fit(
    fit: &FitResult,
    design: &SimDesign,
    truth: &crate::simgen::GroundTruth,
    test: Option<&[crate::data::DatasetBundle]>,
) -> Result<Metrics> {
    let (variable_tp, variable_fp) = variable_tp_fp(&fit.beta_hat, &truth.beta)?;
    let (group_tp, group_fp) = group_tp_fp(&fit.beta_hat, truth)?;
    let prmse = match design.model {
        Model::Lr => {
            let test = test.ok_or_else(|| Error::InvalidInput("LR scoring needs test data".into()))?;
            prmse_lr(&fit.beta_hat, test)?
        }
        Model::Aft => prmse_aft(&fit.beta_hat, truth, design)?,
    };
    Ok(Metrics {
        variable_tp,
        variable_fp,
        group_tp,
        group_fp,
        ermse: ermse(&fit.beta_hat, &truth.beta)?,
        prmse,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub method: Algorithm,
    pub lambda: Option<f64>,
    pub t_hat: Vec<usize>,
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
}

/// Structural identities checked in every replicate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StructuralChecks {
    /// `N_ig` counted from the generated truth, per replicate.
    pub n_ig: Vec<usize>,
    /// `N_ig` implied by the scenario counts:
    /// `(M-1) n_full + (M-2) n_partial` adjacent equal pairs.
    pub n_ig_expected: Option<usize>,
    /// Replicates where Pool-SBoost's group TP + FP differed from K(M-1).
    pub pool_identity_violations: usize,
    pub partition_checks: usize,
    pub partition_exact: usize,
    pub partition_violations: usize,
    /// Replicates where the checked CD-SBoost rerun differed from the fit.
    pub rerun_mismatches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> Option<MeanSd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(MeanSd { mean, sd })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Algorithm,
    pub completed: usize,
    pub failed: usize,
    pub variable_tp: Option<MeanSd>,
    pub variable_fp: Option<MeanSd>,
    pub group_tp: Option<MeanSd>,
    pub group_fp: Option<MeanSd>,
    pub ermse: Option<MeanSd>,
    pub prmse: Option<MeanSd>,
}

impl MethodSummary {
    fn from_records(method: Algorithm, records: &[&ReplicateRecord]) -> Self {
        let ok: Vec<&Metrics> = records.iter().filter_map(|r| r.metrics.as_ref()).collect();
        let col = |f: &dyn Fn(&Metrics) -> f64| MeanSd::of(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
        MethodSummary {
            method,
            completed: ok.len(),
            failed: records.len() - ok.len(),
            variable_tp: col(&|m| m.variable_tp as f64),
            variable_fp: col(&|m| m.variable_fp as f64),
            group_tp: col(&|m| m.group_tp as f64),
            group_fp: col(&|m| m.group_fp as f64),
            ermse: col(&|m| m.ermse),
            prmse: col(&|m| m.prmse),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub n_ig: usize,
    pub summaries: Vec<MethodSummary>,
    pub checks: StructuralChecks,
    pub records: Vec<ReplicateRecord>,
}

struct ReplicateOutcome {
    records: Vec<ReplicateRecord>,
    n_ig: usize,
    pool_violation: bool,
    partition: Option<(usize, usize, usize, bool)>,
}

fn fit_method(
    problem: &Problem,
    config: &BenchmarkConfig,
    method: Algorithm,
    options: FitOptions,
) -> Result<FitResult> {
    let boost = BoostConfig {
        nu: config.nu,
        max_iter: config.max_iter,
        lambda: 0.0,
        algorithm: method,
    };
    if method == Algorithm::CdSBoost {
        let grid = config.lambda.grid(problem);
        return Ok(select_lambda(problem, &boost, &grid, config.pair_mode, options)?.into_fit());
    }
    fit(problem, &boost, &PenaltySpec::new(0.0, config.pair_mode), options)
}

fn run_replicate(config: &BenchmarkConfig, replicate: usize, options: FitOptions) -> Result<ReplicateOutcome> {
    let design = &config.design;
    let sim = simulate(design, config.seed, replicate, design.model == Model::Lr)?;
    let problem = validate(sim.train, sim.truth.groups.clone())?;
    let block_count = sim.truth.groups.k() * design.m.saturating_sub(1);
    let mut records = Vec::with_capacity(config.methods.len());
    let mut pool_violation = false;
    let mut partition = None;
    for &method in &config.methods {
        let outcome = fit_method(&problem, config, method, options).and_then(|fit| {
            let metrics = score_fit(&fit, design, &sim.truth, sim.test.as_deref())?;
            Ok((fit, metrics))
        });
        let record = match outcome {
            Ok((fit, metrics)) => {
                if method == Algorithm::PoolSBoost && metrics.group_tp + metrics.group_fp != block_count {
                    pool_violation = true;
                }
                if method == Algorithm::CdSBoost && config.check_partitions && design.m > 1 {
                    let boost = BoostConfig {
                        nu: config.nu,
                        max_iter: config.max_iter,
                        lambda: fit.lambda.unwrap_or(0.0),
                        algorithm: method,
                    };
                    let spec = PenaltySpec::new(boost.lambda, config.pair_mode);
                    let checked = FitOptions {
                        check_partitions: true,
                        ..options
                    };
                    let (rerun, diag) = cd_sboost_run(&problem, &boost, &spec, checked)?;
                    partition = Some((
                        diag.partition_checks,
                        diag.partition_exact,
                        diag.partition_violations,
                        rerun != fit,
                    ));
                }
                ReplicateRecord {
                    replicate,
                    method,
                    lambda: fit.lambda,
                    t_hat: fit.stopping.iter().map(|s| s.t_hat).collect(),
                    metrics: Some(metrics),
                    error: None,
                }
            }
            Err(e) => {
                warn!("replicate {replicate}, {}: {e}", method.label());
                ReplicateRecord {
                    replicate,
                    method,
                    lambda: None,
                    t_hat: Vec::new(),
                    metrics: None,
                    error: Some(e.to_string()),
                }
            }
        };
        records.push(record);
    }
    Ok(ReplicateOutcome {
        records,
        n_ig: sim.truth.n_ig(),
        pool_violation,
        partition,
    })
}

/// Generates, fits and scores `replicates` independent replicates. Method
/// failures are recorded and excluded from the summaries; data generation
/// failures abort the run.
pub fn benchmark(config: &BenchmarkConfig, options: FitOptions) -> Result<BenchmarkReport> {
    if config.replicates == 0 {
        return Err(Error::InvalidConfig("at least one replicate is required".into()));
    }
    if config.methods.is_empty() {
        return Err(Error::InvalidConfig("no methods to benchmark".into()));
    }
    config.design.check()?;
    let outcomes: Vec<ReplicateOutcome> = if options.parallel {
        (0..config.replicates)
            .into_par_iter()
            .map(|r| run_replicate(config, r, options))
            .collect::<Result<_>>()?
    } else {
        (0..config.replicates)
            .map(|r| run_replicate(config, r, options))
            .collect::<Result<_>>()?
    };

    let mut checks = StructuralChecks::default();
    if config.design.scenarios.is_none() && config.design.m >= 2 {
        let [full, partial, _] = config.design.scenario_counts();
        checks.n_ig_expected = Some((config.design.m - 1) * full + (config.design.m - 2) * partial);
    }
    let mut records = Vec::new();
    for out in outcomes {
        checks.n_ig.push(out.n_ig);
        checks.pool_identity_violations += usize::from(out.pool_violation);
        if let Some((c, e, v, mismatch)) = out.partition {
            checks.partition_checks += c;
            checks.partition_exact += e;
            checks.partition_violations += v;
            checks.rerun_mismatches += usize::from(mismatch);
        }
        records.extend(out.records);
    }
    let summaries = config
        .methods
        .iter()
        .map(|&method| {
            let rs: Vec<&ReplicateRecord> = records.iter().filter(|r| r.method == method).collect();
            MethodSummary::from_records(method, &rs)
        })
        .collect();
    Ok(BenchmarkReport {
        config: config.clone(),
        n_ig: checks.n_ig.first().copied().unwrap_or(0),
        summaries,
        checks,
        records,
    })
}

fn cell(v: &Option<MeanSd>, digits: usize) -> String {
    match v {
        Some(MeanSd { mean, sd }) => format!("{mean:.digits$} ({sd:.digits$})"),
        None => "-".into(),
    }
}

/// Aligned text table: one row per method with mean (SD) of every metric.
pub fn format_table(report: &BenchmarkReport) -> String {
    let d = &report.config.design;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "rho = ({}, {}, {}), N_ig = {}, replicates = {}",
        d.rho[0], d.rho[1], d.rho[2], report.n_ig, report.config.replicates
    );
    let header = ["Method", "Var TP", "Var FP", "Group TP", "Group FP", "ERMSE", "PRMSE"];
    let mut rows = vec![header.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for s in &report.summaries {
        rows.push(vec![
            s.method.label().to_string(),
            cell(&s.variable_tp, 1),
            cell(&s.variable_fp, 1),
            cell(&s.group_tp, 1),
            cell(&s.group_fp, 1),
            cell(&s.ermse, 2),
            cell(&s.prmse, 2),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (v, w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    let failed: usize = report.summaries.iter().map(|s| s.failed).sum();
    if failed > 0 {
        let _ = writeln!(out, "{failed} method fit(s) failed; see records");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_sd() {
        assert_eq!(MeanSd::of(&[3.0]), Some(MeanSd { mean: 3.0, sd: 0.0 }));
        let m = MeanSd::of(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.mean, 2.0);
        assert!((m.sd - 1.0).abs() < 1e-15);
        assert!(MeanSd::of(&[]).is_none());
    }
}
