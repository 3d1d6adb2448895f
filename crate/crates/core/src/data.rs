//! Shared data model: datasets, covariate groups, equality partitions and
//! the coefficient state every fitting algorithm works on.

use std::fmt;

use ndarray::{Array2, ShapeBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{km_weights, LossContext};

/// Outcome model of the analysed datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Linear regression on a continuous response.
    Lr,
    /// Accelerated failure time model on right-censored log survival times.
    Aft,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::Lr => write!(f, "lr"),
            Model::Aft => write!(f, "aft"),
        }
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" => Ok(Model::Lr),
            "aft" => Ok(Model::Aft),
            other => Err(Error::InvalidConfig(format!("unknown model '{other}'"))),
        }
    }
}

/// One dataset: covariates, response and (for AFT) event indicators.
///
/// For AFT data `y` holds observed log-times.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    pub delta: Option<Vec<bool>>,
}

/// Location/scale applied by [`DatasetBundle::standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub x_mean: Vec<f64>,
    pub x_sd: Vec<f64>,
    pub y_center: f64,
}

impl DatasetBundle {
    pub fn new(x: Array2<f64>, y: Vec<f64>, delta: Option<Vec<bool>>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "covariate matrix has {} rows but response has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if let Some(d) = &delta {
            if d.len() != y.len() {
                return Err(Error::DimensionMismatch(format!(
                    "event indicator has {} entries but response has {}",
                    d.len(),
                    y.len()
                )));
            }
        }
        // Column-major storage keeps covariate columns contiguous.
        let (n, p) = x.dim();
        let x = if x.t().is_standard_layout() {
            x
        } else {
            let mut fx = Array2::<f64>::zeros((n, p).f());
            fx.assign(&x);
            fx
        };
        Ok(DatasetBundle { x, y, delta })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn model(&self) -> Model {
        if self.delta.is_some() {
            Model::Aft
        } else {
            Model::Lr
        }
    }

    pub fn n_events(&self) -> usize {
        match &self.delta {
            Some(d) => d.iter().filter(|&&e| e).count(),
            None => self.n(),
        }
    }

    /// Centers and scales every covariate column to mean 0 and variance 1
    /// (population variance) and centers the response. Constant columns are
    /// set to zero. AFT responses are centered at their Kaplan-Meier
    /// weighted mean, LR responses at their arithmetic mean.
    pub fn standardize(&mut self) -> Standardization {
        let n = self.n();
        let nf = n as f64;
        let mut x_mean = Vec::with_capacity(self.p());
        let mut x_sd = Vec::with_capacity(self.p());
        for mut col in self.x.columns_mut() {
            let mean = col.sum() / nf;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
            let sd = var.sqrt();
            if sd > 0.0 && sd.is_finite() {
                col.mapv_inplace(|v| (v - mean) / sd);
            } else {
                col.fill(0.0);
            }
            x_mean.push(mean);
            x_sd.push(sd);
        }
        let y_center = match &self.delta {
            None => self.y.iter().sum::<f64>() / nf,
            Some(delta) => {
                let mut order: Vec<usize> = (0..n).collect();
                sort_survival_order(&mut order, &self.y, delta);
                let ys: Vec<f64> = order.iter().map(|&i| self.y[i]).collect();
                let ds: Vec<bool> = order.iter().map(|&i| delta[i]).collect();
                match km_weights(&ys, &ds) {
                    Ok(w) => {
                        let total: f64 = w.iter().sum();
                        ys.iter().zip(&w).map(|(y, w)| y * w).sum::<f64>() / total
                    }
                    Err(_) => 0.0,
                }
            }
        };
        for y in &mut self.y {
            *y -= y_center;
        }
        Standardization {
            x_mean,
            x_sd,
            y_center,
        }
    }

    /// Keeps only the given rows (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> DatasetBundle {
        let p = self.p();
        let mut x = Array2::<f64>::zeros((rows.len(), p).f());
        for (r, &i) in rows.iter().enumerate() {
            x.row_mut(r).assign(&self.x.row(i));
        }
        DatasetBundle {
            x,
            y: rows.iter().map(|&i| self.y[i]).collect(),
            delta: self
                .delta
                .as_ref()
                .map(|d| rows.iter().map(|&i| d[i]).collect()),
        }
    }

    /// Row-concatenation of several datasets sharing the covariate layout.
    pub fn concat(parts: &[DatasetBundle]) -> Result<DatasetBundle> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("nothing to concatenate".into()))?;
        let p = first.p();
        if parts.iter().any(|b| b.p() != p) {
            return Err(Error::DimensionMismatch(
                "datasets differ in covariate count".into(),
            ));
        }
        if parts.iter().any(|b| b.delta.is_some() != first.delta.is_some()) {
            return Err(Error::InvalidInput(
                "event indicators present in some datasets only".into(),
            ));
        }
        let n: usize = parts.iter().map(|b| b.n()).sum();
        let mut x = Array2::<f64>::zeros((n, p).f());
        let mut y = Vec::with_capacity(n);
        let mut delta = first.delta.as_ref().map(|_| Vec::with_capacity(n));
        let mut row = 0;
        for b in parts {
            x.slice_mut(ndarray::s![row..row + b.n(), ..]).assign(&b.x);
            row += b.n();
            y.extend_from_slice(&b.y);
            if let (Some(d), Some(src)) = (delta.as_mut(), b.delta.as_ref()) {
                d.extend_from_slice(src);
            }
        }
        DatasetBundle::new(x, y, delta)
    }
}

/// Orders observation indices by observed time, events before censored
/// observations at tied times. The sort is stable.
pub(crate) fn sort_survival_order(order: &mut [usize], y: &[f64], delta: &[bool]) {
    order.sort_by(|&a, &b| {
        y[a].total_cmp(&y[b])
            .then_with(|| delta[b].cmp(&delta[a]))
    });
}

/// Partition of the `p` covariates into `K` non-overlapping groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupStructure {
    assignment: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl GroupStructure {
    /// Builds the structure from a 0-based group id per covariate. Group ids
    /// must cover `0..K` without gaps.
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::InvalidGroups("no covariates".into()));
        }
        let k = assignment.iter().max().copied().unwrap_or(0) + 1;
        let mut members = vec![Vec::new(); k];
        for (j, &g) in assignment.iter().enumerate() {
            members[g].push(j);
        }
        if let Some(empty) = members.iter().position(|m| m.is_empty()) {
            return Err(Error::InvalidGroups(format!("group {} is empty", empty + 1)));
        }
        Ok(GroupStructure {
            assignment,
            members,
        })
    }

    /// Consecutive blocks of the given sizes.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        let assignment = sizes
            .iter()
            .enumerate()
            .flat_map(|(k, &size)| std::iter::repeat_n(k, size))
            .collect();
        Self::new(assignment)
    }

    pub fn p(&self) -> usize {
        self.assignment.len()
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn group_of(&self, j: usize) -> usize {
        self.assignment[j]
    }

    pub fn members(&self, k: usize) -> &[usize] {
        &self.members[k]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }
}

/// Which dataset pairs are compared when counting (un)equal group blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// Every unordered pair of distinct datasets.
    AllPairs,
    /// Neighbouring pairs `(m, m+1)` of naturally ordered datasets.
    Adjacent,
}

impl PairMode {
    pub fn pair_count(self, m: usize) -> usize {
        if m < 2 {
            return 0;
        }
        match self {
            PairMode::AllPairs => m * (m - 1) / 2,
            PairMode::Adjacent => m - 1,
        }
    }

    pub fn pairs(self, m: usize) -> Vec<(usize, usize)> {
        match self {
            PairMode::AllPairs => (0..m)
                .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
                .collect(),
            PairMode::Adjacent => (1..m).map(|b| (b - 1, b)).collect(),
        }
    }
}

/// Partition of the datasets `0..M` into equality classes, stored as one
/// canonical class label per dataset (labels numbered by first appearance).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
}

impl Partition {
    /// Every dataset in one class.
    pub fn single(m: usize) -> Self {
        Partition { labels: vec![0; m] }
    }

    /// Every dataset alone.
    pub fn singletons(m: usize) -> Self {
        Partition {
            labels: (0..m).collect(),
        }
    }

    pub fn from_labels(labels: &[usize]) -> Self {
        let mut p = Partition {
            labels: labels.to_vec(),
        };
        p.canonicalize();
        p
    }

    pub fn from_classes(m: usize, classes: &[Vec<usize>]) -> Self {
        let mut labels = vec![usize::MAX; m];
        for (c, class) in classes.iter().enumerate() {
            for &d in class {
                labels[d] = c;
            }
        }
        assert!(
            labels.iter().all(|&l| l != usize::MAX),
            "classes must cover every dataset"
        );
        Self::from_labels(&labels)
    }

    fn canonicalize(&mut self) {
        let mut map: Vec<(usize, usize)> = Vec::new();
        for l in self.labels.iter_mut() {
            let next = map.len();
            let new = match map.iter().find(|(old, _)| old == l) {
                Some(&(_, new)) => new,
                None => {
                    map.push((*l, next));
                    next
                }
            };
            *l = new;
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn same_class(&self, a: usize, b: usize) -> bool {
        self.labels[a] == self.labels[b]
    }

    pub fn n_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |&l| l + 1)
    }

    /// Classes as sorted dataset lists, ordered by smallest member.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_classes()];
        for (d, &l) in self.labels.iter().enumerate() {
            out[l].push(d);
        }
        out
    }

    /// Moves the datasets in `subset` (all from one class) into a new class
    /// of their own. No-op when `subset` is the whole class.
    pub fn split(&mut self, subset: &[usize]) {
        let Some(&first) = subset.first() else {
            return;
        };
        let label = self.labels[first];
        debug_assert!(subset.iter().all(|&d| self.labels[d] == label));
        let class_size = self.labels.iter().filter(|&&l| l == label).count();
        if class_size == subset.len() {
            return;
        }
        let fresh = self.n_classes();
        for &d in subset {
            self.labels[d] = fresh;
        }
        self.canonicalize();
    }

    /// Number of compared pairs lying in different classes.
    pub fn unequal_pairs(&self, mode: PairMode) -> usize {
        mode.pairs(self.len())
            .into_iter()
            .filter(|&(a, b)| self.labels[a] != self.labels[b])
            .count()
    }

    /// True when every class of `self` lies inside one class of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        (0..self.len()).all(|a| {
            (a + 1..self.len())
                .all(|b| !self.same_class(a, b) || coarser.same_class(a, b))
        })
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let classes: Vec<String> = self
            .classes()
            .iter()
            .map(|c| {
                let inner: Vec<String> = c.iter().map(|d| (d + 1).to_string()).collect();
                format!("{{{}}}", inner.join(","))
            })
            .collect();
        write!(f, "{{{}}}", classes.join(","))
    }
}

/// `p x M` coefficients plus the per-group equality classes.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientState {
    pub beta: Array2<f64>,
    pub partitions: Vec<Partition>,
    pub iteration: usize,
}

impl CoefficientState {
    /// All-zero coefficients, every group common across all datasets.
    pub fn initial(p: usize, m: usize, k: usize) -> Self {
        CoefficientState {
            beta: Array2::zeros((p, m)),
            partitions: vec![Partition::single(m); k],
            iteration: 0,
        }
    }
}

/// Equality classes recomputed by exact element-wise comparison of the
/// group blocks of `beta` (`p x M`).
pub fn refresh_partitions(beta: &Array2<f64>, groups: &GroupStructure) -> Vec<Partition> {
    let m = beta.ncols();
    (0..groups.k())
        .map(|k| {
            let members = groups.members(k);
            let mut labels: Vec<usize> = (0..m).collect();
            for b in 1..m {
                for a in 0..b {
                    if members.iter().all(|&j| beta[[j, a]] == beta[[j, b]]) {
                        labels[b] = labels[a];
                        break;
                    }
                }
            }
            Partition::from_labels(&labels)
        })
        .collect()
}

/// Copy of `state` with partitions rebuilt from the coefficients.
pub fn partition_refresh(state: &CoefficientState, groups: &GroupStructure) -> CoefficientState {
    CoefficientState {
        beta: state.beta.clone(),
        partitions: refresh_partitions(&state.beta, groups),
        iteration: state.iteration,
    }
}

/// Fitting algorithm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    #[serde(rename = "sboost")]
    SBoost,
    #[serde(rename = "int-sboost")]
    IntSBoost,
    #[serde(rename = "sep-sboost")]
    SepSBoost,
    #[serde(rename = "cd-sboost")]
    CdSBoost,
    #[serde(rename = "pool-sboost")]
    PoolSBoost,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SBoost => "sboost",
            Algorithm::IntSBoost => "int-sboost",
            Algorithm::SepSBoost => "sep-sboost",
            Algorithm::CdSBoost => "cd-sboost",
            Algorithm::PoolSBoost => "pool-sboost",
        }
    }

    /// Display label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::SBoost => "SBoost",
            Algorithm::IntSBoost => "Int-SBoost",
            Algorithm::SepSBoost => "Sep-SBoost",
            Algorithm::CdSBoost => "CD-SBoost",
            Algorithm::PoolSBoost => "Pool-SBoost",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sboost" => Ok(Algorithm::SBoost),
            "int" | "int-sboost" => Ok(Algorithm::IntSBoost),
            "sep" | "sep-sboost" => Ok(Algorithm::SepSBoost),
            "cd" | "cd-sboost" => Ok(Algorithm::CdSBoost),
            "pool" | "pool-sboost" => Ok(Algorithm::PoolSBoost),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

/// Default number of boosting iterations `T`.
pub const DEFAULT_MAX_ITER: usize = 500;

/// Boosting controls shared by all algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    /// Step size applied to the selected increment.
    pub nu: f64,
    /// Number of boosting iterations `T`.
    pub max_iter: usize,
    /// Commonality tuning parameter (CD-SBoost only).
    pub lambda: f64,
    pub algorithm: Algorithm,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            nu: 0.1,
            max_iter: DEFAULT_MAX_ITER,
            lambda: 0.0,
            algorithm: Algorithm::CdSBoost,
        }
    }
}

impl BoostConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "step size must lie in (0, 1], got {}",
                self.nu
            )));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidConfig("iteration count must be >= 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// One stopping rule: the datasets it governs, its objective trace over
/// iterations `1..=T` and the selected iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stopping {
    pub datasets: Vec<usize>,
    pub trace: Vec<f64>,
    /// Summed loss of the governed datasets after each iteration.
    pub loss_trace: Vec<f64>,
    /// 1-based iteration minimising `trace` (first minimum on ties).
    pub t_hat: usize,
}

impl Stopping {
    pub fn from_trace(datasets: Vec<usize>, trace: Vec<f64>, loss_trace: Vec<f64>) -> Self {
        let t_hat = first_argmin(&trace) + 1;
        Stopping {
            datasets,
            trace,
            loss_trace,
            t_hat,
        }
    }
}

pub(crate) fn first_argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Output of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub algorithm: Algorithm,
    pub lambda: Option<f64>,
    /// `p x M` coefficients at the selected iteration.
    pub beta_hat: Array2<f64>,
    /// Per-group equality classes of `beta_hat`.
    pub partitions: Vec<Partition>,
    /// One entry for every algorithm except Sep-SBoost, which stops each
    /// dataset separately.
    pub stopping: Vec<Stopping>,
}

impl FitResult {
    pub fn p(&self) -> usize {
        self.beta_hat.nrows()
    }

    pub fn m(&self) -> usize {
        self.beta_hat.ncols()
    }

    /// Shared selected iteration, when there is a single stopping rule.
    pub fn t_hat(&self) -> Option<usize> {
        match self.stopping.as_slice() {
            [only] => Some(only.t_hat),
            _ => None,
        }
    }

    /// Objective trace of the single stopping rule, if there is one.
    pub fn objective_trace(&self) -> Option<&[f64]> {
        match self.stopping.as_slice() {
            [only] => Some(&only.trace),
            _ => None,
        }
    }

    /// Covariates with nonzero estimates, per dataset.
    pub fn selected(&self) -> Vec<Vec<usize>> {
        (0..self.m())
            .map(|m| {
                self.beta_hat
                    .column(m)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect()
    }

    /// Union of the selected covariates over datasets.
    pub fn selected_union(&self) -> Vec<usize> {
        (0..self.p())
            .filter(|&j| self.beta_hat.row(j).iter().any(|v| *v != 0.0))
            .collect()
    }
}

/// Validated multi-dataset problem with precomputed loss contexts.
#[derive(Debug, Clone)]
pub struct Problem {
    pub bundles: Vec<DatasetBundle>,
    pub groups: GroupStructure,
    pub model: Model,
    pub loss: LossContext,
}

impl Problem {
    pub fn m(&self) -> usize {
        self.bundles.len()
    }

    pub fn p(&self) -> usize {
        self.groups.p()
    }
}

/// Checks that the datasets are mutually consistent and compatible with the
/// group structure, then precomputes the loss contexts.
pub fn validate(bundles: Vec<DatasetBundle>, groups: GroupStructure) -> Result<Problem> {
    let first = bundles
        .first()
        .ok_or_else(|| Error::InvalidInput("no datasets supplied".into()))?;
    let p = groups.p();
    let model = first.model();
    for (m, b) in bundles.iter().enumerate() {
        if b.p() != p {
            return Err(Error::DimensionMismatch(format!(
                "dataset {} has {} covariates, expected {}",
                m + 1,
                b.p(),
                p
            )));
        }
        if b.n() < 2 {
            return Err(Error::InvalidInput(format!(
                "dataset {} has fewer than 2 observations",
                m + 1
            )));
        }
        if b.model() != model {
            return Err(Error::InvalidInput(
                "event indicators must be present for all datasets or none".into(),
            ));
        }
        if b.x.iter().chain(b.y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "dataset {} contains missing or non-finite values",
                m + 1
            )));
        }
        if model == Model::Aft && b.n_events() == 0 {
            return Err(Error::AllCensored { dataset: m + 1 });
        }
    }
    let loss = LossContext::new(&bundles)?;
    Ok(Problem {
        bundles,
        groups,
        model,
        loss,
    })
}
