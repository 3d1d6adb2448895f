//! Sparse boosting fits: single-dataset SBoost, its separate (Sep) and
//! integrative (Int) multi-dataset versions, the pooled baseline, and
//! CD-SBoost, which tracks group-level commonality across datasets.
//!
//! Every algorithm starts from zero coefficients, runs exactly `T`
//! iterations and returns the coefficients at the iteration minimising its
//! stopping objective (loss + `log(n)/n` per nonzero coefficient, plus the
//! commonality penalty for CD-SBoost).

mod candidates;
mod cd;
mod path;
mod penalty;

use ndarray::Array2;
use rayon::prelude::*;

use crate::data::{
    refresh_partitions, Algorithm, BoostConfig, DatasetBundle, FitResult,
    GroupStructure, Partition, Problem, Stopping,
};
use crate::error::{Error, Result};
use crate::loss::{DatasetLoss, LossContext};

pub use candidates::{candidate_order, candidate_set, cd_objective, Candidate};
pub use cd::{cd_sboost_fit, cd_sboost_run, CdDiagnostics, CdStep};
pub use penalty::{commonality_penalty, unequal_blocks, PenaltySpec};

use path::DatasetPath;

/// Execution switches that never change results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitOptions {
    /// Spread the per-iteration candidate search (and independent datasets)
    /// over the rayon pool. Results are bit-identical either way.
    pub parallel: bool,
    /// Recompute partitions from the coefficients after every CD-SBoost
    /// update and check them against the tracked ones.
    pub check_partitions: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            parallel: true,
            check_partitions: false,
        }
    }
}

struct SinglePath {
    beta_hat: Vec<f64>,
    trace: Vec<f64>,
    loss: Vec<f64>,
}

/// Runs `T` SBoost iterations on one dataset, keeping the coefficients at the
/// first minimum of the stopping objective.
fn run_sboost_path(data: &DatasetLoss, config: &BoostConfig) -> SinglePath {
    let mut path = DatasetPath::new(data);
    let mut trace = Vec::with_capacity(config.max_iter);
    let mut loss = Vec::with_capacity(config.max_iter);
    let mut best = (f64::INFINITY, path.beta.clone());
    for _ in 0..config.max_iter {
        let (s, gamma, _) = path.best_step();
        path.apply(s, config.nu * gamma);
        let f = path.term();
        trace.push(f);
        loss.push(path.loss);
        if f < best.0 {
            best = (f, path.beta.clone());
        }
    }
    SinglePath {
        beta_hat: best.1,
        trace,
        loss,
    }
}

fn columns_to_matrix(columns: &[Vec<f64>]) -> Array2<f64> {
    let p = columns.first().map_or(0, Vec::len);
    Array2::from_shape_fn((p, columns.len()), |(j, m)| columns[m][j])
}

/// Plain sparse boosting on a single-dataset problem.
pub fn sboost_fit(problem: &Problem, config: &BoostConfig) -> Result<FitResult> {
    config.check()?;
    if problem.m() != 1 {
        return Err(Error::InvalidInput(format!(
            "sboost expects one dataset, got {}",
            problem.m()
        )));
    }
    let run = run_sboost_path(&problem.loss.datasets[0], config);
    let stopping = Stopping::from_trace(vec![0], run.trace, run.loss);
    Ok(FitResult {
        algorithm: Algorithm::SBoost,
        lambda: None,
        beta_hat: columns_to_matrix(&[run.beta_hat]),
        partitions: vec![Partition::single(1); problem.groups.k()],
        stopping: vec![stopping],
    })
}

/// SBoost on each dataset separately, each with its own stopping iteration.
pub fn sep_sboost_fit(
    problem: &Problem,
    config: &BoostConfig,
    options: FitOptions,
) -> Result<FitResult> {
    config.check()?;
    let runs: Vec<SinglePath> = if options.parallel {
        problem
            .loss
            .datasets
            .par_iter()
            .map(|d| run_sboost_path(d, config))
            .collect()
    } else {
        problem
            .loss
            .datasets
            .iter()
            .map(|d| run_sboost_path(d, config))
            .collect()
    };
    let mut columns = Vec::with_capacity(runs.len());
    let mut stopping = Vec::with_capacity(runs.len());
    for (m, run) in runs.into_iter().enumerate() {
        columns.push(run.beta_hat);
        stopping.push(Stopping::from_trace(vec![m], run.trace, run.loss));
    }
    let beta_hat = columns_to_matrix(&columns);
    Ok(FitResult {
        algorithm: Algorithm::SepSBoost,
        lambda: None,
        partitions: refresh_partitions(&beta_hat, &problem.groups),
        beta_hat,
        stopping,
    })
}

/// Every dataset takes its own SBoost step each iteration; a
/// single stopping iteration minimises the summed objective.
pub fn int_sboost_fit(problem: &Problem, config: &BoostConfig) -> Result<FitResult> {
    config.check()?;
    let mut paths: Vec<DatasetPath> = problem.loss.datasets.iter().map(DatasetPath::new).collect();
    let mut trace = Vec::with_capacity(config.max_iter);
    let mut loss = Vec::with_capacity(config.max_iter);
    let mut best_f = f64::INFINITY;
    let mut best: Vec<Vec<f64>> = paths.iter().map(|p| p.beta.clone()).collect();
    for _ in 0..config.max_iter {
        for path in paths.iter_mut() {
            let (s, gamma, _) = path.best_step();
            path.apply(s, config.nu * gamma);
        }
        let f = paths.iter().fold(0.0, |acc, p| acc + p.term());
        trace.push(f);
        loss.push(paths.iter().fold(0.0, |acc, p| acc + p.loss));
        if f < best_f {
            best_f = f;
            for (dst, p) in best.iter_mut().zip(&paths) {
                dst.copy_from_slice(&p.beta);
            }
        }
    }
    let beta_hat = columns_to_matrix(&best);
    Ok(FitResult {
        algorithm: Algorithm::IntSBoost,
        lambda: None,
        partitions: refresh_partitions(&beta_hat, &problem.groups),
        beta_hat,
        stopping: vec![Stopping::from_trace((0..problem.m()).collect(), trace, loss)],
    })
}

/// Pools all rows into one dataset, runs SBoost and copies the estimate to
/// every dataset; every group is common by construction.
pub fn pool_sboost_fit(problem: &Problem, config: &BoostConfig) -> Result<FitResult> {
    config.check()?;
    let pooled = DatasetBundle::concat(&problem.bundles)?;
    let ctx = LossContext::new(std::slice::from_ref(&pooled))?;
    let run = run_sboost_path(&ctx.datasets[0], config);
    let m = problem.m();
    let columns = vec![run.beta_hat; m];
    Ok(FitResult {
        algorithm: Algorithm::PoolSBoost,
        lambda: None,
        beta_hat: columns_to_matrix(&columns),
        partitions: vec![Partition::single(m); problem.groups.k()],
        stopping: vec![Stopping::from_trace((0..m).collect(), run.trace, run.loss)],
    })
}

/// Dispatches on `config.algorithm`. `spec` is only used by CD-SBoost.
pub fn fit(
    problem: &Problem,
    config: &BoostConfig,
    spec: &PenaltySpec,
    options: FitOptions,
) -> Result<FitResult> {
    match config.algorithm {
        Algorithm::SBoost => sboost_fit(problem, config),
        Algorithm::IntSBoost => int_sboost_fit(problem, config),
        Algorithm::SepSBoost => sep_sboost_fit(problem, config, options),
        Algorithm::PoolSBoost => pool_sboost_fit(problem, config),
        Algorithm::CdSBoost => cd_sboost_fit(problem, config, spec, options),
    }
}

/// Re-evaluates the stopping objective of `beta` (`p x M`) directly:
/// summed per-dataset loss and sparsity terms plus the commonality penalty
/// of `partitions`.
pub fn stopping_objective(
    ctx: &LossContext,
    beta: &Array2<f64>,
    partitions: &[Partition],
    groups: &GroupStructure,
    spec: Option<&PenaltySpec>,
) -> f64 {
    let mut total = 0.0;
    for m in 0..beta.ncols() {
        let col: Vec<f64> = beta.column(m).to_vec();
        let nnz = col.iter().filter(|v| **v != 0.0).count();
        total += ctx.loss(m, &col) + crate::loss::sparsity_term(ctx, m, nnz);
    }
    match spec {
        Some(spec) => {
            total
                + spec.value(
                    unequal_blocks(partitions, spec.mode),
                    beta.ncols(),
                    groups.k(),
                )
        }
        None => total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{validate, CoefficientState, PairMode};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, p), |_| rng.sample(StandardNormal))
    }

    fn random_problem(seed: u64, m: usize, n: usize, p: usize, sizes: &[usize]) -> Problem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bundles = (0..m)
            .map(|_| {
                let x = gaussian(&mut rng, n, p);
                let y: Vec<f64> = (0..n)
                    .map(|i| 1.5 * x[[i, 0]] - x[[i, 1]] + rng.sample::<f64, _>(StandardNormal))
                    .collect();
                DatasetBundle::new(x, y, None).unwrap()
            })
            .collect();
        validate(bundles, GroupStructure::contiguous(sizes).unwrap()).unwrap()
    }

    fn config(algorithm: Algorithm, t: usize) -> BoostConfig {
        BoostConfig { nu: 0.1, max_iter: t, lambda: 0.0, algorithm }
    }

    #[test]
    fn single_noiseless_covariate_follows_geometric_path() {
        let x = Array2::from_shape_vec((5, 1), vec![1.0, -2.0, 0.5, 3.0, 1.5]).unwrap();
        let y: Vec<f64> = x.column(0).iter().map(|v| 2.0 * v).collect();
        let problem = validate(
            vec![DatasetBundle::new(x, y, None).unwrap()],
            GroupStructure::contiguous(&[1]).unwrap(),
        )
        .unwrap();
        for t in [1, 5, 30] {
            let fit = sboost_fit(&problem, &config(Algorithm::SBoost, t)).unwrap();
            assert_eq!(fit.t_hat(), Some(t));
            let expected = 2.0 * (1.0 - 0.9f64.powi(t as i32));
            assert!((fit.beta_hat[[0, 0]] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_response_gives_empty_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bundles = (0..2)
            .map(|_| DatasetBundle::new(gaussian(&mut rng, 10, 4), vec![0.0; 10], None).unwrap())
            .collect();
        let problem = validate(bundles, GroupStructure::contiguous(&[2, 2]).unwrap()).unwrap();
        for alg in [Algorithm::IntSBoost, Algorithm::SepSBoost, Algorithm::PoolSBoost, Algorithm::CdSBoost] {
            let fit = fit(&problem, &config(alg, 20), &PenaltySpec::new(1.0, PairMode::AllPairs), FitOptions::default()).unwrap();
            assert!(fit.beta_hat.iter().all(|v| *v == 0.0), "{alg}");
            assert!(fit.stopping.iter().all(|s| s.t_hat == 1));
        }
    }

    #[test]
    fn engine_matches_candidate_scoring() {
        let problem = random_problem(11, 3, 25, 6, &[3, 3]);
        let spec = PenaltySpec::new(0.3, PairMode::AllPairs);
        let cfg = config(Algorithm::CdSBoost, 15);
        let (_, diag) = cd_sboost_run(&problem, &cfg, &spec, FitOptions::default()).unwrap();
        let mut state = CoefficientState::initial(problem.p(), problem.m(), problem.groups.k());
        for step in &diag.steps {
            let mut all: Vec<Candidate> = (0..problem.p())
                .flat_map(|s| candidate_set(&problem.loss, &state, &problem.groups, s))
                .map(|mut c| {
                    c.objective = cd_objective(&problem.loss, &state, &problem.groups, &c, &spec);
                    c
                })
                .collect();
            all.sort_by(candidate_order);
            let best = &all[0];
            assert_eq!((best.s, &best.subset), (step.s, &step.subset));
            assert!((best.gamma - step.gamma).abs() < 1e-10 * best.gamma.abs().max(1.0));
            assert!((best.objective - step.objective).abs() < 1e-10);
            for &d in &step.subset {
                state.beta[[step.s, d]] += cfg.nu * step.gamma;
            }
            if step.gamma != 0.0 {
                state.partitions[problem.groups.group_of(step.s)].split(&step.subset);
            }
        }
    }

    #[test]
    fn int_and_sep_coincide_when_both_run_to_the_end() {
        let problem = random_problem(5, 2, 30, 8, &[4, 4]);
        let int = int_sboost_fit(&problem, &config(Algorithm::IntSBoost, 40)).unwrap();
        let sep = sep_sboost_fit(&problem, &config(Algorithm::SepSBoost, 40), FitOptions::default()).unwrap();
        if int.t_hat() == Some(40) && sep.stopping.iter().all(|s| s.t_hat == 40) {
            assert_eq!(int.beta_hat, sep.beta_hat);
        }
        assert_eq!(sep.stopping.len(), 2);
    }

    #[test]
    fn pool_is_sboost_on_stacked_rows() {
        let problem = random_problem(9, 3, 20, 5, &[5]);
        let cfg = config(Algorithm::PoolSBoost, 30);
        let pool = pool_sboost_fit(&problem, &cfg).unwrap();
        let stacked = validate(
            vec![DatasetBundle::concat(&problem.bundles).unwrap()],
            problem.groups.clone(),
        )
        .unwrap();
        let single = sboost_fit(&stacked, &cfg).unwrap();
        for m in 0..3 {
            assert_eq!(pool.beta_hat.column(m), single.beta_hat.column(0));
        }
        assert_eq!(pool.t_hat(), single.t_hat());
    }

    #[test]
    fn stopping_objective_recomputes_trace_minimum() {
        let problem = random_problem(21, 3, 30, 6, &[2, 4]);
        let spec = PenaltySpec::new(0.5, PairMode::AllPairs);
        let fit = cd_sboost_fit(&problem, &config(Algorithm::CdSBoost, 25), &spec, FitOptions::default()).unwrap();
        let f = stopping_objective(&problem.loss, &fit.beta_hat, &fit.partitions, &problem.groups, Some(&spec));
        let stop = &fit.stopping[0];
        assert!((f - stop.trace[stop.t_hat - 1]).abs() < 1e-10);
    }

    #[test]
    fn loss_never_increases_along_paths() {
        let problem = random_problem(8, 3, 30, 10, &[5, 5]);
        let spec = PenaltySpec::new(0.2, PairMode::AllPairs);
        for alg in [Algorithm::IntSBoost, Algorithm::SepSBoost, Algorithm::PoolSBoost, Algorithm::CdSBoost] {
            let fit = fit(&problem, &config(alg, 60), &spec, FitOptions::default()).unwrap();
            for s in &fit.stopping {
                assert!(s.loss_trace.windows(2).all(|w| w[1] <= w[0] + 1e-14), "{alg}");
            }
        }
    }
}
