//! Per-dataset losses and closed-form boosting increments.
//!
//! Both models share one weighted least-squares form,
//! `L(b) = 1/2 * sum_i w_i (y_i - x_i'b)^2`. For LR the weights are `1/n`;
//! for AFT the observations are sorted by observed log-time (events first
//! at ties) and `w` are the Kaplan-Meier jump weights, so censored rows
//! carry no weight.

use log::warn;
use ndarray::{Array2, ShapeBuilder};

use crate::data::{sort_survival_order, CoefficientState, DatasetBundle, Model};
use crate::error::{Error, Result};

/// Kaplan-Meier jump weights for observations already sorted by time.
///
/// `w_1 = d_1/n`, `w_i = d_i/(n-i+1) * prod_{j<i} ((n-j)/(n-j+1))^{d_j}`.
pub fn km_weights(y_sorted: &[f64], delta_sorted: &[bool]) -> Result<Vec<f64>> {
    if y_sorted.len() != delta_sorted.len() {
        return Err(Error::DimensionMismatch(
            "times and event indicators differ in length".into(),
        ));
    }
    if !delta_sorted.iter().any(|&d| d) {
        return Err(Error::AllCensored { dataset: 0 });
    }
    let n = y_sorted.len();
    let mut weights = Vec::with_capacity(n);
    let mut surv = 1.0;
    for (i, &event) in delta_sorted.iter().enumerate() {
        let at_risk = (n - i) as f64;
        if event {
            weights.push(surv / at_risk);
            surv *= (at_risk - 1.0) / at_risk;
        } else {
            weights.push(0.0);
        }
    }
    Ok(weights)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Loss ingredients for one dataset, in working (sorted for AFT) row order.
#[derive(Debug, Clone)]
pub struct DatasetLoss {
    /// `order[r]` is the original row index of working row `r`.
    pub order: Vec<usize>,
    /// Column-major covariates in working order.
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    pub weights: Vec<f64>,
    /// Weighted column norms `sum_i w_i x_is^2`.
    pub col_norms: Vec<f64>,
    /// `log(n)/n`, the per-coefficient price of the sparsity term.
    pub sparsity_weight: f64,
    pub n_events: usize,
}

impl DatasetLoss {
    fn new(bundle: &DatasetBundle, dataset: usize) -> Result<Self> {
        let n = bundle.n();
        let p = bundle.p();
        let mut order: Vec<usize> = (0..n).collect();
        let (y, weights, n_events) = match &bundle.delta {
            None => (bundle.y.clone(), vec![1.0 / n as f64; n], n),
            Some(delta) => {
                sort_survival_order(&mut order, &bundle.y, delta);
                let ys: Vec<f64> = order.iter().map(|&i| bundle.y[i]).collect();
                let ds: Vec<bool> = order.iter().map(|&i| delta[i]).collect();
                let w = km_weights(&ys, &ds).map_err(|e| match e {
                    Error::AllCensored { .. } => Error::AllCensored { dataset: dataset + 1 },
                    other => other,
                })?;
                let events = ds.iter().filter(|&&d| d).count();
                (ys, w, events)
            }
        };
        let mut x = Array2::<f64>::zeros((n, p).f());
        for (r, &i) in order.iter().enumerate() {
            x.row_mut(r).assign(&bundle.x.row(i));
        }
        let col_norms: Vec<f64> = (0..p)
            .map(|s| {
                let col = x.column(s);
                col.iter().zip(&weights).map(|(v, w)| w * v * v).sum()
            })
            .collect();
        let degenerate = col_norms.iter().filter(|&&h| h <= 0.0).count();
        if degenerate > 0 {
            warn!(
                "dataset {}: {} covariate column(s) have zero weighted norm; their increments are fixed at 0",
                dataset + 1,
                degenerate
            );
        }
        Ok(DatasetLoss {
            order,
            x,
            y,
            weights,
            col_norms,
            sparsity_weight: (n as f64).ln() / n as f64,
            n_events,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn column(&self, s: usize) -> &[f64] {
        self.x
            .column(s)
            .to_slice()
            .expect("covariates are stored column-major")
    }

    /// `y - X beta` in working order.
    pub fn residual(&self, beta: &[f64]) -> Vec<f64> {
        let mut r = self.y.clone();
        for (s, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (ri, xi) in r.iter_mut().zip(self.column(s)) {
                    *ri -= b * xi;
                }
            }
        }
        r
    }

    /// `1/2 * sum_i w_i r_i^2`.
    pub fn loss_of_residual(&self, residual: &[f64]) -> f64 {
        0.5 * residual
            .iter()
            .zip(&self.weights)
            .map(|(r, w)| w * r * r)
            .sum::<f64>()
    }

    pub fn loss(&self, beta: &[f64]) -> f64 {
        self.loss_of_residual(&self.residual(beta))
    }

    /// Weighted residual sum of squares scaled to the effective sample
    /// size, `n_eff * sum_i w_i r_i^2`; equals the plain RSS for LR.
    pub fn rss(&self, beta: &[f64]) -> f64 {
        2.0 * self.n_events as f64 * self.loss(beta)
    }

    /// `sum_i w_i x_is r_i`.
    pub fn weighted_correlation(&self, s: usize, residual: &[f64]) -> f64 {
        self.column(s)
            .iter()
            .zip(residual)
            .zip(&self.weights)
            .map(|((x, r), w)| w * x * r)
            .sum()
    }
}

/// Loss contexts for all datasets of a problem.
#[derive(Debug, Clone)]
pub struct LossContext {
    pub model: Model,
    pub datasets: Vec<DatasetLoss>,
}

impl LossContext {
    pub fn new(bundles: &[DatasetBundle]) -> Result<Self> {
        let model = bundles
            .first()
            .map(DatasetBundle::model)
            .ok_or_else(|| Error::InvalidInput("no datasets".into()))?;
        let datasets = bundles
            .iter()
            .enumerate()
            .map(|(m, b)| DatasetLoss::new(b, m))
            .collect::<Result<_>>()?;
        Ok(LossContext { model, datasets })
    }

    pub fn m(&self) -> usize {
        self.datasets.len()
    }

    pub fn loss(&self, m: usize, beta: &[f64]) -> f64 {
        self.datasets[m].loss(beta)
    }
}

/// `(1/(2n)) * sum_i (y_i - x_i'b)^2` for an LR context.
pub fn lr_loss(ctx: &LossContext, beta: &[f64], m: usize) -> f64 {
    assert_eq!(ctx.model, Model::Lr, "lr_loss needs an LR context");
    ctx.loss(m, beta)
}

/// Kaplan-Meier weighted least-squares loss for an AFT context.
pub fn aft_loss(ctx: &LossContext, beta: &[f64], m: usize) -> f64 {
    assert_eq!(ctx.model, Model::Aft, "aft_loss needs an AFT context");
    ctx.loss(m, beta)
}

/// A closed-form 1-D increment. `degenerate` marks a zero denominator, in
/// which case `gamma` is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Increment {
    pub gamma: f64,
    pub degenerate: bool,
}

impl Increment {
    pub(crate) fn from_moments(numerator: f64, denominator: f64) -> Self {
        if denominator > 0.0 {
            Increment {
                gamma: numerator / denominator,
                degenerate: false,
            }
        } else {
            Increment {
                gamma: 0.0,
                degenerate: true,
            }
        }
    }
}

fn column_beta(state: &CoefficientState, m: usize) -> Vec<f64> {
    state.beta.column(m).to_vec()
}

/// Minimiser over `g` of `L^m(beta^m + g e_s)`.
pub fn optimal_increment_single(
    ctx: &LossContext,
    state: &CoefficientState,
    s: usize,
    m: usize,
) -> Increment {
    optimal_increment_joint(ctx, state, s, &[m])
}

/// Minimiser over `g` of `sum_{m in A} L^m(beta^m + g e_s)`.
pub fn optimal_increment_joint(
    ctx: &LossContext,
    state: &CoefficientState,
    s: usize,
    subset: &[usize],
) -> Increment {
    let mut num = 0.0;
    let mut den = 0.0;
    for &m in subset {
        let d = &ctx.datasets[m];
        let r = d.residual(&column_beta(state, m));
        num += d.weighted_correlation(s, &r);
        den += d.col_norms[s];
    }
    Increment::from_moments(num, den)
}

/// `(log n^m / n^m) * nonzero_count`.
pub fn sparsity_term(ctx: &LossContext, m: usize, nonzero_count: usize) -> f64 {
    ctx.datasets[m].sparsity_weight * nonzero_count as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    fn lr_ctx(x: Array2<f64>, y: Vec<f64>) -> LossContext {
        LossContext::new(&[DatasetBundle::new(x, y, None).unwrap()]).unwrap()
    }

    #[test]
    fn km_all_events_is_uniform() {
        let w = km_weights(&[1.0, 2.0, 3.0], &[true, true, true]).unwrap();
        for v in w {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn km_with_censoring() {
        let w = km_weights(&[1.0, 2.0, 3.0], &[true, false, true]).unwrap();
        assert_abs_diff_eq!(w[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(w[1], 0.0);
        assert_abs_diff_eq!(w[2], 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(km_weights(&[4.0], &[true]).unwrap(), vec![1.0]);
    }

    #[test]
    fn km_rejects_all_censored() {
        assert!(km_weights(&[1.0, 2.0], &[false, false]).is_err());
    }

    #[test]
    fn lr_loss_values() {
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let beta = [2.0, -1.0];
        let y: Vec<f64> = x.rows().into_iter().map(|r| r[0] * 2.0 - r[1]).collect();
        let ctx = lr_ctx(x.clone(), y);
        assert_eq!(lr_loss(&ctx, &beta, 0), 0.0);

        // mean square of y is 4 -> loss 2 at beta = 0
        let ctx = lr_ctx(x, vec![2.0, -2.0, 2.0]);
        assert_abs_diff_eq!(lr_loss(&ctx, &[0.0, 0.0], 0), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn single_increment_examples() {
        let ctx = lr_ctx(array![[1.0], [1.0]], vec![1.0, 1.0]);
        let state = CoefficientState::initial(1, 1, 1);
        assert_eq!(optimal_increment_single(&ctx, &state, 0, 0).gamma, 1.0);

        let ctx = lr_ctx(array![[1.0], [-1.0]], vec![2.0, 0.0]);
        assert_eq!(optimal_increment_single(&ctx, &state, 0, 0).gamma, 1.0);

        let ctx = lr_ctx(array![[1.0], [-1.0]], vec![1.0, 1.0]);
        assert_eq!(optimal_increment_single(&ctx, &state, 0, 0).gamma, 0.0);
    }

    #[test]
    fn zero_column_is_degenerate() {
        let ctx = lr_ctx(array![[0.0], [0.0]], vec![1.0, 2.0]);
        let state = CoefficientState::initial(1, 1, 1);
        let inc = optimal_increment_single(&ctx, &state, 0, 0);
        assert!(inc.degenerate);
        assert_eq!(inc.gamma, 0.0);
    }

    #[test]
    fn sparsity_arithmetic() {
        let x = Array2::zeros((100, 1));
        let ctx = lr_ctx(x, vec![0.0; 100]);
        assert_abs_diff_eq!(sparsity_term(&ctx, 0, 6), 0.276_310_2, epsilon = 1e-7);
    }

    #[test]
    fn aft_context_sorts_and_weights() {
        let x = array![[3.0], [1.0], [2.0]];
        let b = DatasetBundle::new(x, vec![3.0, 1.0, 2.0], Some(vec![true, true, false])).unwrap();
        let ctx = LossContext::new(&[b]).unwrap();
        let d = &ctx.datasets[0];
        assert_eq!(d.order, vec![1, 2, 0]);
        assert_eq!(d.y, vec![1.0, 2.0, 3.0]);
        assert_eq!(d.weights[1], 0.0);
        assert_eq!(d.column(0), &[1.0, 2.0, 3.0]);
        // perfect fit on events gives zero loss whatever the censored row does
        assert_eq!(aft_loss(&ctx, &[1.0], 0), 0.0);
    }

    #[test]
    fn tied_times_put_events_first() {
        let b = DatasetBundle::new(
            array![[0.0], [0.0], [0.0]],
            vec![1.0, 1.0, 0.5],
            Some(vec![false, true, true]),
        )
        .unwrap();
        let ctx = LossContext::new(&[b]).unwrap();
        assert_eq!(ctx.datasets[0].order, vec![2, 1, 0]);
    }
}
