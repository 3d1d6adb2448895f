//! HDBIC and grid search over the commonality tuning parameter.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::{cd_sboost_fit, FitOptions, PenaltySpec};
use crate::data::{BoostConfig, FitResult, PairMode, Problem};
use crate::error::{Error, Result};

/// Residual sums of squares below this are clamped before taking logs.
pub const RSS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HdbicScore {
    pub value: f64,
    /// Some dataset's RSS was clamped to [`RSS_FLOOR`].
    pub floored: bool,
}

/// `sum_m [n_m log(RSS_m / n_m) + df_m log(p) log(n_m)]` from per-dataset
/// `(n, rss, df)` triples.
pub fn hdbic_from_parts(p: usize, parts: &[(f64, f64, usize)]) -> HdbicScore {
    let log_p = (p as f64).ln();
    let mut value = 0.0;
    let mut floored = false;
    for &(n, rss, df) in parts {
        let rss = if rss < RSS_FLOOR {
            floored = true;
            RSS_FLOOR
        } else {
            rss
        };
        value += n * (rss / n).ln() + df as f64 * log_p * n.ln();
    }
    HdbicScore { value, floored }
}

/// HDBIC of a fit. For AFT data the RSS is the Kaplan–Meier weighted RSS
/// scaled to the number of events, which also serves as the sample size.
pub fn hdbic(fit: &FitResult, problem: &Problem) -> HdbicScore {
    let parts: Vec<(f64, f64, usize)> = problem
        .loss
        .datasets
        .iter()
        .enumerate()
        .map(|(m, data)| {
            let beta = fit.beta_hat.column(m).to_vec();
            let df = beta.iter().filter(|b| **b != 0.0).count();
            (data.n_events as f64, data.rss(&beta), df)
        })
        .collect();
    let score = hdbic_from_parts(problem.p(), &parts);
    if score.floored {
        warn!("HDBIC: residual sum of squares floored at {RSS_FLOOR:e}");
    }
    score
}

/// `lambda_max = sum_m log(n_m)`.
pub fn lambda_max(problem: &Problem) -> f64 {
    problem.bundles.iter().map(|b| (b.n() as f64).ln()).sum()
}

/// `{0}` followed by `count` geometrically spaced values from
/// `0.01 * lambda_max` up to `lambda_max`.
pub fn default_grid(lambda_max: f64, count: usize) -> Vec<f64> {
    let mut grid = vec![0.0];
    let lo = 0.01 * lambda_max;
    match count {
        0 => {}
        1 => grid.push(lambda_max),
        _ => {
            let ratio = (lambda_max / lo).powf(1.0 / (count - 1) as f64);
            grid.extend((0..count).map(|i| if i + 1 == count { lambda_max } else { lo * ratio.powi(i as i32) }));
        }
    }
    grid
}

/// One grid point of a λ search.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub lambda: f64,
    pub score: HdbicScore,
    pub fit: FitResult,
}

#[derive(Debug, Clone)]
pub struct LambdaSelection {
    pub lambda: f64,
    pub index: usize,
    pub points: Vec<GridPoint>,
}

impl LambdaSelection {
    pub fn best(&self) -> &GridPoint {
        &self.points[self.index]
    }

    pub fn into_fit(mut self) -> FitResult {
        self.points.swap_remove(self.index).fit
    }
}

/// Fits CD-SBoost at every grid value and keeps the lowest HDBIC. Ties go
/// to the smaller λ, then to the earlier grid entry.
pub fn select_lambda(
    problem: &Problem,
    config: &BoostConfig,
    grid: &[f64],
    mode: PairMode,
    options: FitOptions,
) -> Result<LambdaSelection> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty lambda grid".into()));
    }
    if let Some(bad) = grid.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::InvalidConfig(format!("lambda must be finite and >= 0, got {bad}")));
    }
    let run = |&lambda: &f64| -> Result<GridPoint> {
        let spec = PenaltySpec::new(lambda, mode);
        let fit = cd_sboost_fit(problem, config, &spec, options)?;
        let score = hdbic(&fit, problem);
        Ok(GridPoint { lambda, score, fit })
    };
    let points: Vec<GridPoint> = if options.parallel {
        grid.par_iter().map(run).collect::<Result<_>>()?
    } else {
        grid.iter().map(run).collect::<Result<_>>()?
    };
    let index = points
        .iter()
        .enumerate()
        .filter(|(_, pt)| pt.score.value.is_finite())
        .min_by(|(i, a), (j, b)| {
            a.score
                .value
                .total_cmp(&b.score.value)
                .then(a.lambda.total_cmp(&b.lambda))
                .then(i.cmp(j))
        })
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Numeric("every lambda fit has a non-finite HDBIC".into()))?;
    Ok(LambdaSelection {
        lambda: points[index].lambda,
        index,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn plug_in_values() {
        assert_abs_diff_eq!(hdbic_from_parts(10, &[(100.0, 100.0, 0)]).value, 0.0);
        let v = hdbic_from_parts(1000, &[(100.0, 50.0, 2)]).value;
        let expected = 100.0 * 0.5f64.ln() + 2.0 * 1000f64.ln() * 100f64.ln();
        assert_abs_diff_eq!(v, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(v, -5.69, epsilon = 0.01);
    }

    #[test]
    fn floor_is_flagged() {
        let s = hdbic_from_parts(10, &[(20.0, 0.0, 1)]);
        assert!(s.floored && s.value.is_finite());
        assert!(!hdbic_from_parts(10, &[(20.0, 1.0, 1)]).floored);
    }

    #[test]
    fn grid_shape() {
        let g = default_grid(10.0, 10);
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 0.0);
        assert_abs_diff_eq!(g[1], 0.1, epsilon = 1e-12);
        assert_eq!(g[10], 10.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
