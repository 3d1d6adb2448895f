use std::cmp::Ordering;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::candidates::class_subsets;
use super::path::DatasetPath;
use super::penalty::{unequal_blocks, PenaltySpec};
use super::{sboost_fit, FitOptions};
use crate::data::{refresh_partitions, Algorithm, BoostConfig, FitResult, Partition, Problem, Stopping};
use crate::error::Result;

/// One applied CD-SBoost update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdStep {
    pub s: usize,
    pub subset: Vec<usize>,
    /// Unscaled increment; the coefficients moved by `nu * gamma`.
    pub gamma: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CdDiagnostics {
    pub steps: Vec<CdStep>,
    /// Iterations at which partitions were recomputed and compared.
    pub partition_checks: usize,
    /// Checks where the recomputed partitions equalled the tracked ones.
    pub partition_exact: usize,
    /// Checks where some tracked class held unequal blocks.
    pub partition_violations: usize,
}

struct SubsetMove {
    subset: Vec<usize>,
    mask: u64,
    /// The subset is a strict part of its class, so a nonzero move splits it.
    proper: bool,
    split_cost: usize,
}

fn group_moves(partition: &Partition, spec: &PenaltySpec) -> Vec<SubsetMove> {
    class_subsets(partition)
        .into_iter()
        .map(|(subset, class)| {
            let mask = subset.iter().fold(0u64, |acc, &d| acc | (1 << d));
            let proper = subset.len() < class.len();
            let split_cost = if proper {
                spec.split_cost(&subset, &class)
            } else {
                0
            };
            SubsetMove {
                subset,
                mask,
                proper,
                split_cost,
            }
        })
        .collect()
}

#[derive(Clone, Copy)]
struct Choice<'a> {
    s: usize,
    mv: &'a SubsetMove,
    gamma: f64,
    objective: f64,
}

fn choice_order(a: &Choice, b: &Choice) -> Ordering {
    a.objective
        .total_cmp(&b.objective)
        .then_with(|| b.mv.subset.len().cmp(&a.mv.subset.len()))
        .then_with(|| a.s.cmp(&b.s))
        .then_with(|| a.mv.subset.cmp(&b.mv.subset))
}

fn pick<'a>(a: Option<Choice<'a>>, b: Option<Choice<'a>>) -> Option<Choice<'a>> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if choice_order(&y, &x) == Ordering::Less { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

/// CD-SBoost. With a single dataset there is nothing to share and the fit
/// is plain SBoost.
pub fn cd_sboost_fit(
    problem: &Problem,
    config: &BoostConfig,
    spec: &PenaltySpec,
    options: FitOptions,
) -> Result<FitResult> {
    if problem.m() == 1 {
        let mut fit = sboost_fit(problem, config)?;
        fit.algorithm = Algorithm::CdSBoost;
        fit.lambda = Some(spec.lambda);
        return Ok(fit);
    }
    cd_sboost_run(problem, config, spec, options).map(|(fit, _)| fit)
}

/// The CD-SBoost engine for any number of datasets, returning the applied
/// update sequence alongside the fit.
///
/// Each iteration scores, for every covariate `s` and every non-empty subset
/// `A` of an equality class of `s`'s group, the joint increment over `A`.
/// The score is the summed loss and sparsity terms after the full tentative
/// step plus the penalty of the tentative partition (the class is split into
/// `A` and the rest when `A` is proper and the increment is nonzero). The
/// winner is moved by `nu` times its increment in every dataset of `A`.
pub fn cd_sboost_run(
    problem: &Problem,
    config: &BoostConfig,
    spec: &PenaltySpec,
    options: FitOptions,
) -> Result<(FitResult, CdDiagnostics)> {
    config.check()?;
    let m_count = problem.m();
    assert!(m_count <= 64, "at most 64 datasets are supported");
    let groups = &problem.groups;
    let p = problem.p();
    let k_count = groups.k();

    let mut paths: Vec<DatasetPath> = problem.loss.datasets.iter().map(DatasetPath::new).collect();
    let mut partitions = vec![Partition::single(m_count); k_count];
    let mut moves: Vec<Vec<SubsetMove>> = partitions.iter().map(|pt| group_moves(pt, spec)).collect();
    let mut unequal = unequal_blocks(&partitions, spec.mode);

    let mut trace = Vec::with_capacity(config.max_iter);
    let mut loss_trace = Vec::with_capacity(config.max_iter);
    let mut diagnostics = CdDiagnostics::default();
    let mut best_f = f64::INFINITY;
    let mut best_beta: Vec<Vec<f64>> = paths.iter().map(|pt| pt.beta.clone()).collect();
    let mut best_partitions = partitions.clone();

    for _ in 0..config.max_iter {
        let base: Vec<f64> = paths.iter().map(DatasetPath::term).collect();
        let paths_ref = &paths;
        let moves_ref = &moves;
        let base_ref = &base;
        let score_covariate = |s: usize| -> Option<Choice> {
            let mut best: Option<Choice> = None;
            for mv in &moves_ref[groups.group_of(s)] {
                let mut num = 0.0;
                let mut den = 0.0;
                for &d in &mv.subset {
                    num += paths_ref[d].corr[s];
                    den += paths_ref[d].col_norm(s);
                }
                let gamma = crate::loss::Increment::from_moments(num, den).gamma;
                let mut objective = 0.0;
                for (d, b) in base_ref.iter().enumerate() {
                    objective += if mv.mask & (1 << d) != 0 {
                        paths_ref[d].tentative_term(s, gamma)
                    } else {
                        *b
                    };
                }
                let cost = if gamma != 0.0 { mv.split_cost } else { 0 };
                objective += spec.value(unequal + cost, m_count, k_count);
                let choice = Choice {
                    s,
                    mv,
                    gamma,
                    objective,
                };
                if best.is_none_or(|b| choice_order(&choice, &b) == Ordering::Less) {
                    best = Some(choice);
                }
            }
            best
        };
        let winner = if options.parallel {
            (0..p)
                .into_par_iter()
                .map(score_covariate)
                .reduce(|| None, pick)
        } else {
            (0..p).map(score_covariate).fold(None, pick)
        }
        .expect("at least one covariate");

        let step = CdStep {
            s: winner.s,
            subset: winner.mv.subset.clone(),
            gamma: winner.gamma,
            objective: winner.objective,
        };
        let split = winner.gamma != 0.0 && winner.mv.proper;

        let delta = config.nu * step.gamma;
        for &d in &step.subset {
            paths[d].apply(step.s, delta);
        }
        if split {
            let k = groups.group_of(step.s);
            partitions[k].split(&step.subset);
            moves[k] = group_moves(&partitions[k], spec);
            unequal = unequal_blocks(&partitions, spec.mode);
        }
        diagnostics.steps.push(step);

        if options.check_partitions {
            let beta = collect_beta(&paths);
            let refreshed = refresh_partitions(&beta, groups);
            diagnostics.partition_checks += 1;
            if refreshed == partitions {
                diagnostics.partition_exact += 1;
            }
            if partitions.iter().zip(&refreshed).any(|(t, r)| !t.refines(r)) {
                diagnostics.partition_violations += 1;
            }
        }

        let f = paths.iter().fold(0.0, |acc, pt| acc + pt.term())
            + spec.value(unequal, m_count, k_count);
        trace.push(f);
        loss_trace.push(paths.iter().fold(0.0, |acc, pt| acc + pt.loss));
        if f < best_f {
            best_f = f;
            for (dst, pt) in best_beta.iter_mut().zip(&paths) {
                dst.copy_from_slice(&pt.beta);
            }
            best_partitions.clone_from(&partitions);
        }
    }

    let beta_hat = Array2::from_shape_fn((p, m_count), |(j, m)| best_beta[m][j]);
    let fit = FitResult {
        algorithm: Algorithm::CdSBoost,
        lambda: Some(spec.lambda),
        beta_hat,
        partitions: best_partitions,
        stopping: vec![Stopping::from_trace((0..m_count).collect(), trace, loss_trace)],
    };
    Ok((fit, diagnostics))
}

fn collect_beta(paths: &[DatasetPath]) -> Array2<f64> {
    let p = paths.first().map_or(0, |pt| pt.beta.len());
    Array2::from_shape_fn((p, paths.len()), |(j, m)| paths[m].beta[j])
}
