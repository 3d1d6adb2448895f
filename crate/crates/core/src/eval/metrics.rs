use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetBundle, GroupStructure};
use crate::error::{Error, Result};
use crate::simgen::{GroundTruth, SimDesign};

fn check_shape(beta_hat: &Array2<f64>, beta: &Array2<f64>) -> Result<()> {
    if beta_hat.dim() != beta.dim() {
        return Err(Error::DimensionMismatch(format!(
            "estimate is {:?} but truth is {:?}",
            beta_hat.dim(),
            beta.dim()
        )));
    }
    Ok(())
}

fn blocks_equal(beta: &Array2<f64>, members: &[usize], a: usize, b: usize) -> bool {
    members.iter().all(|&j| beta[[j, a]] == beta[[j, b]])
}

/// Group-level commonality positives over adjacent dataset pairs. A
/// positive is a `(group, (m, m+1))` block whose estimates are exactly
/// equal (all-zero blocks included); it is true when the true blocks are
/// equal as well.
pub fn group_tp_fp(beta_hat: &Array2<f64>, truth: &GroundTruth) -> Result<(usize, usize)> {
    check_shape(beta_hat, &truth.beta)?;
    let groups = &truth.groups;
    let (mut tp, mut fp) = (0, 0);
    for k in 0..groups.k() {
        for m in 1..beta_hat.ncols() {
            if blocks_equal(beta_hat, groups.members(k), m - 1, m) {
                if truth.equal_pairs[k][m - 1] {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
    }
    Ok((tp, fp))
}

/// Selected coefficients that are truly nonzero (TP) or truly zero (FP),
/// summed over datasets.
pub fn variable_tp_fp(beta_hat: &Array2<f64>, beta: &Array2<f64>) -> Result<(usize, usize)> {
    check_shape(beta_hat, beta)?;
    let (mut tp, mut fp) = (0, 0);
    for (est, tru) in beta_hat.iter().zip(beta.iter()) {
        if *est != 0.0 {
            if *tru != 0.0 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    Ok((tp, fp))
}

/// `sqrt(sum_m ||beta_hat^m - beta^m||^2)`.
pub fn ermse(beta_hat: &Array2<f64>, beta: &Array2<f64>) -> Result<f64> {
    check_shape(beta_hat, beta)?;
    Ok(beta_hat
        .iter()
        .zip(beta.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// `sqrt(sum_m ||X^m beta_hat^m - y^m||^2)` over test datasets.
pub fn prmse_lr(beta_hat: &Array2<f64>, test: &[DatasetBundle]) -> Result<f64> {
    if test.len() != beta_hat.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} test datasets for {} coefficient columns",
            test.len(),
            beta_hat.ncols()
        )));
    }
    let mut total = 0.0;
    for (m, bundle) in test.iter().enumerate() {
        if bundle.p() != beta_hat.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "test dataset {} has {} covariates, estimate has {}",
                m + 1,
                bundle.p(),
                beta_hat.nrows()
            )));
        }
        let pred = bundle.x.dot(&beta_hat.column(m));
        total += pred
            .iter()
            .zip(&bundle.y)
            .map(|(p, y)| (p - y) * (p - y))
            .sum::<f64>();
    }
    Ok(total.sqrt())
}

/// `(1/sigma) sqrt(sum_m d_m' Sigma d_m)` with `d_m = beta_hat^m - beta^m`,
/// for any covariance given as a quadratic form.
pub fn prmse_quadratic<F>(beta_hat: &Array2<f64>, beta: &Array2<f64>, sigma: f64, quad: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    check_shape(beta_hat, beta)?;
    if !(sigma > 0.0) {
        return Err(Error::Numeric(format!("noise standard deviation must be positive, got {sigma}")));
    }
    let mut total = 0.0;
    for m in 0..beta.ncols() {
        let d: Vec<f64> = beta_hat
            .column(m)
            .iter()
            .zip(beta.column(m))
            .map(|(a, b)| a - b)
            .collect();
        total += quad(&d);
    }
    Ok(total.sqrt() / sigma)
}

/// Prediction error for AFT designs, using the design's true covariate
/// covariance and noise level.
pub fn prmse_aft(beta_hat: &Array2<f64>, truth: &GroundTruth, design: &SimDesign) -> Result<f64> {
    let groups: &GroupStructure = &truth.groups;
    prmse_quadratic(beta_hat, &truth.beta, design.sigma(), |d| {
        design.covariance_quadratic(groups, d)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OoiScore {
    pub value: f64,
    /// Number of frequencies averaged (15 unless fewer covariates were
    /// ever selected).
    pub averaged: usize,
    pub short: bool,
}

pub const OOI_TOP: usize = 15;

/// Observed occurrence index: each covariate's selection frequency across
/// splits, averaged over the 15 most frequent.
pub fn ooi(selections: &[Vec<usize>]) -> Result<OoiScore> {
    if selections.is_empty() {
        return Err(Error::InvalidInput("no selections to summarise".into()));
    }
    let mut counts = std::collections::BTreeMap::<usize, usize>::new();
    for split in selections {
        let mut seen = split.clone();
        seen.sort_unstable();
        seen.dedup();
        for j in seen {
            *counts.entry(j).or_default() += 1;
        }
    }
    let mut freq: Vec<usize> = counts.into_values().collect();
    freq.sort_unstable_by(|a, b| b.cmp(a));
    let averaged = freq.len().min(OOI_TOP);
    if averaged == 0 {
        return Ok(OoiScore { value: 0.0, averaged, short: true });
    }
    let splits = selections.len() as f64;
    let value = freq[..averaged].iter().map(|&c| c as f64 / splits).sum::<f64>() / averaged as f64;
    Ok(OoiScore {
        value,
        averaged,
        short: averaged < OOI_TOP,
    })
}

/// Two-sample logrank chi-square statistic. `in_first[i]` marks membership
/// of the first group; subjects censored at an event time stay at risk.
pub fn logrank(time: &[f64], event: &[bool], in_first: &[bool]) -> Result<f64> {
    let n = time.len();
    if event.len() != n || in_first.len() != n {
        return Err(Error::DimensionMismatch("logrank inputs differ in length".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| time[a].total_cmp(&time[b]));
    let mut at_risk = n as f64;
    let mut at_risk_1 = in_first.iter().filter(|g| **g).count() as f64;
    let (mut o_minus_e, mut var) = (0.0, 0.0);
    let mut i = 0;
    while i < n {
        let t = time[order[i]];
        let mut j = i;
        let (mut d, mut d1, mut leaving, mut leaving_1) = (0.0, 0.0, 0.0, 0.0);
        while j < n && time[order[j]] == t {
            let s = order[j];
            leaving += 1.0;
            if in_first[s] {
                leaving_1 += 1.0;
            }
            if event[s] {
                d += 1.0;
                if in_first[s] {
                    d1 += 1.0;
                }
            }
            j += 1;
        }
        if d > 0.0 {
            o_minus_e += d1 - at_risk_1 * d / at_risk;
            if at_risk > 1.0 {
                let at_risk_2 = at_risk - at_risk_1;
                var += at_risk_1 * at_risk_2 * d * (at_risk - d) / (at_risk * at_risk * (at_risk - 1.0));
            }
        }
        at_risk -= leaving;
        at_risk_1 -= leaving_1;
        i = j;
    }
    if !(var > 0.0) {
        return Err(Error::Numeric("logrank variance is zero; both groups need subjects at risk at an event".into()));
    }
    Ok(o_minus_e * o_minus_e / var)
}

/// Logrank statistic comparing subjects whose predicted `x' beta` lies at
/// or below the median (low risk) with those above it.
pub fn logrank_score(beta: &[f64], test: &DatasetBundle) -> Result<f64> {
    let delta = test
        .delta
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("logrank scoring needs censored survival data".into()))?;
    if beta.len() != test.p() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} covariates",
            beta.len(),
            test.p()
        )));
    }
    let pred = test.x.dot(&ndarray::ArrayView1::from(beta));
    let mut sorted = pred.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let low: Vec<bool> = pred.iter().map(|v| *v <= median).collect();
    let n_low = low.iter().filter(|l| **l).count();
    if n_low == 0 || n_low == n {
        return Err(Error::Numeric("predictions do not split the test subjects into two groups".into()));
    }
    logrank(&test.y, delta, &low)
}
