use std::collections::HashMap;

use crate::loss::{dot, DatasetLoss, Increment};

/// Running boosting state of one dataset: coefficients, residual and the
/// weighted correlations `sum_i w_i x_is r_i` of every column with it.
#[derive(Debug, Clone)]
pub(crate) struct DatasetPath<'a> {
    data: &'a DatasetLoss,
    pub beta: Vec<f64>,
    residual: Vec<f64>,
    pub corr: Vec<f64>,
    pub loss: f64,
    pub nnz: usize,
    /// Weighted Gram columns `sum_i w_i x_ij x_is`, cached per updated `s`.
    gram: HashMap<usize, Vec<f64>>,
}

impl<'a> DatasetPath<'a> {
    pub fn new(data: &'a DatasetLoss) -> Self {
        let p = data.x.ncols();
        let residual = data.y.clone();
        let wres: Vec<f64> = residual
            .iter()
            .zip(&data.weights)
            .map(|(r, w)| r * w)
            .collect();
        let corr = (0..p).map(|s| dot(data.column(s), &wres)).collect();
        let loss = data.loss_of_residual(&residual);
        DatasetPath {
            data,
            beta: vec![0.0; p],
            residual,
            corr,
            loss,
            nnz: 0,
            gram: HashMap::new(),
        }
    }

    #[inline]
    pub fn sparsity_weight(&self) -> f64 {
        self.data.sparsity_weight
    }

    #[inline]
    pub fn col_norm(&self, s: usize) -> f64 {
        self.data.col_norms[s]
    }

    /// Loss plus sparsity term at the current coefficients.
    #[inline]
    pub fn term(&self) -> f64 {
        self.loss + self.sparsity_weight() * self.nnz as f64
    }

    #[inline]
    pub fn increment(&self, s: usize) -> Increment {
        Increment::from_moments(self.corr[s], self.col_norm(s))
    }

    /// Nonzero count after a tentative step `gamma` on covariate `s`.
    #[inline]
    pub fn tentative_nnz(&self, s: usize, gamma: f64) -> usize {
        let before = (self.beta[s] != 0.0) as usize;
        let after = (self.beta[s] + gamma != 0.0) as usize;
        self.nnz - before + after
    }

    /// Loss plus sparsity term after a tentative step `gamma` on `s`, using
    /// the exact quadratic expansion of the loss.
    #[inline]
    pub fn tentative_term(&self, s: usize, gamma: f64) -> f64 {
        let loss = self.loss - gamma * self.corr[s] + 0.5 * gamma * gamma * self.col_norm(s);
        loss + self.sparsity_weight() * self.tentative_nnz(s, gamma) as f64
    }

    /// Best single-covariate step for this dataset: `(s, gamma, objective)`,
    /// lowest objective first, then smallest `s`.
    pub fn best_step(&self) -> (usize, f64, f64) {
        let mut best = (0, 0.0, f64::INFINITY);
        for s in 0..self.beta.len() {
            let gamma = self.increment(s).gamma;
            let obj = self.tentative_term(s, gamma);
            if obj < best.2 {
                best = (s, gamma, obj);
            }
        }
        best
    }

    /// `beta_s += delta`, refreshing residual, loss and correlations.
    pub fn apply(&mut self, s: usize, delta: f64) {
        if delta == 0.0 {
            return;
        }
        let was_zero = self.beta[s] == 0.0;
        self.beta[s] += delta;
        let is_zero = self.beta[s] == 0.0;
        match (was_zero, is_zero) {
            (true, false) => self.nnz += 1,
            (false, true) => self.nnz -= 1,
            _ => {}
        }
        let col = self.data.column(s);
        for (r, x) in self.residual.iter_mut().zip(col) {
            *r -= delta * x;
        }
        self.loss = self.data.loss_of_residual(&self.residual);
        let data = self.data;
        let gram = self.gram.entry(s).or_insert_with(|| {
            let wx: Vec<f64> = col.iter().zip(&data.weights).map(|(x, w)| x * w).collect();
            (0..data.x.ncols()).map(|j| dot(data.column(j), &wx)).collect()
        });
        for (c, g) in self.corr.iter_mut().zip(gram.iter()) {
            *c -= delta * g;
        }
    }
}
