use serde::{Deserialize, Serialize};

use crate::data::{CoefficientState, PairMode, Partition};

/// Commonality penalty settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub lambda: f64,
    pub mode: PairMode,
}

impl PenaltySpec {
    pub fn new(lambda: f64, mode: PairMode) -> Self {
        PenaltySpec { lambda, mode }
    }

    /// `C(M,2) * K` for all pairs, `(M-1) * K` for ordered datasets.
    pub fn normalizer(&self, m: usize, k: usize) -> usize {
        self.mode.pair_count(m) * k
    }

    /// Penalty value for a given number of unequal (pair, group) blocks.
    pub fn value(&self, unequal: usize, m: usize, k: usize) -> f64 {
        let norm = self.normalizer(m, k);
        if norm == 0 {
            0.0
        } else {
            self.lambda * unequal as f64 / norm as f64
        }
    }

    /// Pairs that become unequal when `subset` is split off from `class`.
    pub fn split_cost(&self, subset: &[usize], class: &[usize]) -> usize {
        match self.mode {
            PairMode::AllPairs => subset.len() * (class.len() - subset.len()),
            PairMode::Adjacent => class
                .iter()
                .filter(|&&d| d > 0 && class.contains(&(d - 1)))
                .filter(|&&d| subset.contains(&d) != subset.contains(&(d - 1)))
                .count(),
        }
    }
}

/// Total number of unequal (pair, group) blocks across partitions.
pub fn unequal_blocks(partitions: &[Partition], mode: PairMode) -> usize {
    partitions.iter().map(|p| p.unequal_pairs(mode)).sum()
}

/// `lambda * (#unequal group blocks over compared pairs) / normalizer`.
///
/// Equal blocks cost nothing, so the penalty is 0 when every group is
/// common and reaches `lambda` when every compared pair differs in every
/// group. Equality is read from the tracked partitions.
pub fn commonality_penalty(state: &CoefficientState, spec: &PenaltySpec) -> f64 {
    let m = state.beta.ncols();
    let k = state.partitions.len();
    spec.value(unequal_blocks(&state.partitions, spec.mode), m, k)
}
