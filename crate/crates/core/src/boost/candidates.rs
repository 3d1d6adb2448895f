use std::cmp::Ordering;

use crate::boost::penalty::{unequal_blocks, PenaltySpec};
use crate::data::{CoefficientState, GroupStructure, Partition};
use crate::loss::{optimal_increment_joint, sparsity_term, LossContext};

/// A CD-SBoost move: add `gamma` to covariate `s` in every dataset of
/// `subset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub s: usize,
    /// Sorted dataset indices, non-empty, inside one equality class.
    pub subset: Vec<usize>,
    pub gamma: f64,
    pub objective: f64,
}

/// Total order used to pick the winning candidate: lowest objective, then
/// larger subsets, then smaller covariate index, then the lexicographically
/// smaller subset.
pub fn candidate_order(a: &Candidate, b: &Candidate) -> Ordering {
    a.objective
        .total_cmp(&b.objective)
        .then_with(|| b.subset.len().cmp(&a.subset.len()))
        .then_with(|| a.s.cmp(&b.s))
        .then_with(|| a.subset.cmp(&b.subset))
}

/// Non-empty subsets of every equality class of `partition`, class by class
/// and by increasing bitmask within a class.
pub(crate) fn class_subsets(partition: &Partition) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    for class in partition.classes() {
        let size = class.len();
        assert!(size < 32, "equality classes larger than 31 datasets are not supported");
        for mask in 1u32..(1u32 << size) {
            let subset: Vec<usize> = class
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &d)| d)
                .collect();
            out.push((subset, class.clone()));
        }
    }
    out
}

/// The candidate moves for covariate `s`: for every equality class `C` of
/// its group, every non-empty `A` within `C` paired with the joint optimal
/// increment over `A`. With all-singleton classes this is one move per
/// dataset. Objectives are left at NaN; see [`cd_objective`].
pub fn candidate_set(
    ctx: &LossContext,
    state: &CoefficientState,
    groups: &GroupStructure,
    s: usize,
) -> Vec<Candidate> {
    let partition = &state.partitions[groups.group_of(s)];
    class_subsets(partition)
        .into_iter()
        .map(|(subset, _)| {
            let gamma = optimal_increment_joint(ctx, state, s, &subset).gamma;
            Candidate {
                s,
                subset,
                gamma,
                objective: f64::NAN,
            }
        })
        .collect()
}

/// Objective of a candidate evaluated directly from the tentative
/// coefficients: summed losses and sparsity terms plus the commonality
/// penalty of the tentative partition. The class containing the subset is
/// split when the subset is proper and `gamma != 0`.
pub fn cd_objective(
    ctx: &LossContext,
    state: &CoefficientState,
    groups: &GroupStructure,
    candidate: &Candidate,
    spec: &PenaltySpec,
) -> f64 {
    let m_count = state.beta.ncols();
    let mut total = 0.0;
    for m in 0..m_count {
        let mut beta: Vec<f64> = state.beta.column(m).to_vec();
        if candidate.subset.contains(&m) {
            beta[candidate.s] += candidate.gamma;
        }
        let nnz = beta.iter().filter(|v| **v != 0.0).count();
        total += ctx.loss(m, &beta) + sparsity_term(ctx, m, nnz);
    }
    let mut partitions = state.partitions.clone();
    if candidate.gamma != 0.0 {
        partitions[groups.group_of(candidate.s)].split(&candidate.subset);
    }
    let unequal = unequal_blocks(&partitions, spec.mode);
    total + spec.value(unequal, m_count, groups.k())
}
