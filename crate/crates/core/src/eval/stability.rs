use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::benchmark::MeanSd;
use super::metrics::{logrank_score, ooi, OoiScore};
use crate::data::{validate, DatasetBundle, FitResult, GroupStructure, Model, Problem};
use crate::error::{Error, Result};
use crate::seed::{rng_for, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub splits: usize,
    /// Share of each dataset used for training.
    pub train_fraction: f64,
    pub seed: u64,
}

impl StabilityConfig {
    pub fn new(seed: u64) -> Self {
        StabilityConfig {
            splits: 100,
            train_fraction: 0.75,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionScore {
    /// Root mean squared prediction error over all test subjects.
    Rmse,
    /// Mean logrank statistic over datasets.
    Logrank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub split: usize,
    pub selected: Vec<usize>,
    pub lambda: Option<f64>,
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub score_kind: PredictionScore,
    pub ooi: OoiScore,
    pub score: Option<MeanSd>,
    pub failed: usize,
    pub splits: Vec<SplitResult>,
}

/// Row indices of a random train/test split of each dataset.
pub fn split_rows(n: usize, train_fraction: f64, seed: u64, split: usize, dataset: usize) -> (Vec<usize>, Vec<usize>) {
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng_for(seed, split, dataset, Purpose::Split));
    let n_train = ((n as f64 * train_fraction).round() as usize).clamp(2.min(n), n.saturating_sub(1));
    let test = rows.split_off(n_train);
    (rows, test)
}

/// Score of one fit on held-out data.
pub fn prediction_score(fit: &FitResult, test: &[DatasetBundle]) -> Result<f64> {
    match test.first().map(DatasetBundle::model) {
        Some(Model::Lr) => {
            let (mut sse, mut count) = (0.0, 0usize);
            for (m, b) in test.iter().enumerate() {
                let pred = b.x.dot(&fit.beta_hat.column(m));
                sse += pred.iter().zip(&b.y).map(|(p, y)| (p - y) * (p - y)).sum::<f64>();
                count += b.n();
            }
            Ok((sse / count as f64).sqrt())
        }
        Some(Model::Aft) => {
            let mut total = 0.0;
            for (m, b) in test.iter().enumerate() {
                total += logrank_score(&fit.beta_hat.column(m).to_vec(), b)?;
            }
            Ok(total / test.len() as f64)
        }
        None => Err(Error::InvalidInput("no test data".into())),
    }
}

/// Repeated random train/test splits: refits with `fit` on each training
/// part, collects the selected covariates (union over datasets) for the OOI
/// and scores predictions on the test part.
pub fn stability<F>(
    bundles: &[DatasetBundle],
    groups: &GroupStructure,
    config: &StabilityConfig,
    parallel: bool,
    fit: F,
) -> Result<StabilityReport>
where
    F: Fn(&Problem) -> Result<FitResult> + Sync,
{
    if config.splits < 2 {
        return Err(Error::InvalidConfig("at least two splits are required".into()));
    }
    if !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "training fraction must lie in (0, 1), got {}",
            config.train_fraction
        )));
    }
    let model = bundles
        .first()
        .map(DatasetBundle::model)
        .ok_or_else(|| Error::InvalidInput("no datasets supplied".into()))?;
    let run = |split: usize| -> SplitResult {
        let mut train = Vec::with_capacity(bundles.len());
        let mut test = Vec::with_capacity(bundles.len());
        for (d, b) in bundles.iter().enumerate() {
            let (tr, te) = split_rows(b.n(), config.train_fraction, config.seed, split, d);
            train.push(b.select_rows(&tr));
            test.push(b.select_rows(&te));
        }
        let outcome = validate(train, groups.clone()).and_then(|problem| fit(&problem));
        match outcome {
            Ok(f) => {
                let selected = f.selected_union();
                let lambda = f.lambda;
                match prediction_score(&f, &test) {
                    Ok(s) => SplitResult { split, selected, lambda, score: Some(s), error: None },
                    Err(e) => SplitResult { split, selected, lambda, score: None, error: Some(e.to_string()) },
                }
            }
            Err(e) => SplitResult {
                split,
                selected: Vec::new(),
                lambda: None,
                score: None,
                error: Some(e.to_string()),
            },
        }
    };
    let splits: Vec<SplitResult> = if parallel {
        (0..config.splits).into_par_iter().map(run).collect()
    } else {
        (0..config.splits).map(run).collect()
    };
    let selections: Vec<Vec<usize>> = splits.iter().map(|s| s.selected.clone()).collect();
    let scores: Vec<f64> = splits.iter().filter_map(|s| s.score).collect();
    Ok(StabilityReport {
        score_kind: match model {
            Model::Lr => PredictionScore::Rmse,
            Model::Aft => PredictionScore::Logrank,
        },
        ooi: ooi(&selections)?,
        score: MeanSd::of(&scores),
        failed: splits.len() - scores.len(),
        splits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_to_one_split() {
        let (tr, te) = split_rows(40, 0.75, 1, 0, 0);
        assert_eq!((tr.len(), te.len()), (30, 10));
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
        assert_eq!(split_rows(40, 0.75, 1, 0, 0), (tr, te));
    }
}
