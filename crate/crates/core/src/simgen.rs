//! Synthetic multi-dataset designs with known commonality structure.
//!
//! Covariates are marginally standard normal with compound-symmetric
//! correlation: `between` for covariates in different groups and `within`
//! (> `between`) for covariates in the same group. They are built as
//! `sqrt(b) z0 + sqrt(w - b) z_k + sqrt(1 - w) e` from a subject-level
//! factor, a group-level factor and independent noise.
//!
//! Every group carries two important covariates per dataset. A group is
//! either common to all datasets, partially common (all but the last or all
//! but the first dataset share the pair), or different in every dataset.

use ndarray::{Array2, ShapeBuilder};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetBundle, GroupStructure, Model};
use crate::error::{Error, Result};
use crate::seed::{rng_for, Purpose, ALL_DATASETS};

/// How a group's important covariates relate across datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// All datasets share the same important pair and coefficients.
    Full,
    /// All datasets but the last share; the last has its own pair.
    PartialA,
    /// All datasets but the first share; the first has its own pair.
    PartialB,
    /// Every dataset has its own pair.
    None,
}

impl Scenario {
    /// Minimum group size that fits the scenario's important covariates.
    fn required_size(self, m: usize) -> usize {
        match self {
            Scenario::Full => 2,
            Scenario::PartialA | Scenario::PartialB => 4,
            Scenario::None => 2 * m,
        }
    }

    /// Offset (within the group) of dataset `d`'s first important
    /// covariate, and whether that pair is shared.
    fn placement(self, d: usize, m: usize) -> (usize, bool) {
        match self {
            Scenario::Full => (0, true),
            Scenario::PartialA if d + 1 == m => (2, false),
            Scenario::PartialB if d == 0 => (2, false),
            Scenario::PartialA | Scenario::PartialB => (0, true),
            Scenario::None => (2 * d, false),
        }
    }
}

/// Law of the nonzero coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefScheme {
    /// Shared coefficients ~ U[0.4, 0.7]; coefficients specific to the first
    /// dataset ~ U[0.1, 0.3], to the last ~ U[0.8, 1], to any other
    /// ~ U[0.4, 0.7].
    Random,
    /// Every nonzero coefficient equals the given value.
    Fixed(f64),
}

/// Named coefficient/noise settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    S1,
    S2,
    S3,
    S4,
}

impl Setting {
    pub fn coef(self) -> CoefScheme {
        match self {
            Setting::S1 | Setting::S2 => CoefScheme::Random,
            Setting::S3 | Setting::S4 => CoefScheme::Fixed(0.5),
        }
    }

    pub fn sigma2(self) -> f64 {
        match self {
            Setting::S1 | Setting::S3 => 1.0,
            Setting::S2 | Setting::S4 => 3.0,
        }
    }
}

impl std::str::FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S1" => Ok(Setting::S1),
            "S2" => Ok(Setting::S2),
            "S3" => Ok(Setting::S3),
            "S4" => Ok(Setting::S4),
            _ => Err(Error::InvalidConfig(format!("unknown setting '{s}' (expected S1..S4)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    /// Explicit group sizes; derived from `p` and `k` when absent.
    pub group_sizes: Option<Vec<usize>>,
    /// Proportions of full, partial and no commonality groups.
    pub rho: [f64; 3],
    /// Explicit per-group scenarios, overriding the random allocation.
    pub scenarios: Option<Vec<Scenario>>,
    pub coef: CoefScheme,
    pub sigma2: f64,
    pub model: Model,
    pub within_corr: f64,
    pub between_corr: f64,
    /// Expected censoring rate for AFT responses.
    pub target_censoring: f64,
}

impl SimDesign {
    /// Three datasets of 200 subjects, 1000 covariates in 20 groups.
    pub fn table2(setting: Setting, rho: [f64; 3], model: Model) -> Self {
        SimDesign {
            m: 3,
            n: 200,
            p: 1000,
            k: 20,
            group_sizes: None,
            rho,
            scenarios: None,
            coef: setting.coef(),
            sigma2: setting.sigma2(),
            model,
            within_corr: 0.4,
            between_corr: 0.1,
            target_censoring: 0.25,
        }
    }

    /// A scaled-down `table2`: 100 subjects, 400 covariates, 8 groups.
    pub fn reduced(setting: Setting, rho: [f64; 3], model: Model) -> Self {
        SimDesign {
            n: 100,
            p: 400,
            k: 8,
            ..SimDesign::table2(setting, rho, model)
        }
    }

    /// Three datasets of 50 subjects and 200 covariates in four groups:
    /// group 1 common, group 2 different, groups 3 and 4 partially common,
    /// all nonzero coefficients 1, standard normal errors.
    pub fn small_example() -> Self {
        SimDesign {
            m: 3,
            n: 50,
            p: 200,
            k: 4,
            group_sizes: Some(vec![30, 30, 20, 120]),
            rho: [0.25, 0.5, 0.25],
            scenarios: Some(vec![
                Scenario::Full,
                Scenario::None,
                Scenario::PartialA,
                Scenario::PartialB,
            ]),
            coef: CoefScheme::Fixed(1.0),
            sigma2: 1.0,
            model: Model::Lr,
            within_corr: 0.4,
            between_corr: 0.1,
            target_censoring: 0.25,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InfeasibleDesign(msg));
        if self.m == 0 || self.k == 0 || self.p == 0 {
            return bad("M, p and K must be positive".into());
        }
        if self.n < 2 {
            return bad(format!("need at least 2 subjects per dataset, got {}", self.n));
        }
        if self.rho.iter().any(|r| !(0.0..=1.0).contains(r))
            || (self.rho.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad(format!("proportions {:?} must be in [0,1] and sum to 1", self.rho));
        }
        let (b, w) = (self.between_corr, self.within_corr);
        if !(0.0 <= b && b <= w && w < 1.0) {
            return bad(format!(
                "correlations must satisfy 0 <= between ({b}) <= within ({w}) < 1"
            ));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return bad(format!("noise variance must be positive, got {}", self.sigma2));
        }
        if self.model == Model::Aft && !(self.target_censoring > 0.0 && self.target_censoring < 1.0) {
            return bad(format!(
                "target censoring rate must lie in (0, 1), got {}",
                self.target_censoring
            ));
        }
        let sizes = self.sizes()?;
        if let Some(sc) = &self.scenarios {
            if sc.len() != self.k {
                return bad(format!("{} scenarios given for {} groups", sc.len(), self.k));
            }
            for (k, s) in sc.iter().enumerate() {
                if sizes[k] < s.required_size(self.m) {
                    return bad(format!("group {} is too small for its scenario", k + 1));
                }
            }
        } else {
            let need = [Scenario::Full, Scenario::PartialA, Scenario::None]
                .iter()
                .zip(self.scenario_counts())
                .filter(|(_, c)| *c > 0)
                .map(|(s, _)| s.required_size(self.m))
                .max()
                .unwrap_or(2);
            if let Some(k) = sizes.iter().position(|&s| s < need) {
                return bad(format!("group {} has {} covariates, fewer than {need}", k + 1, sizes[k]));
            }
        }
        Ok(())
    }

    pub fn sizes(&self) -> Result<Vec<usize>> {
        match &self.group_sizes {
            Some(sizes) => {
                if sizes.len() != self.k || sizes.iter().sum::<usize>() != self.p || sizes.contains(&0) {
                    return Err(Error::InfeasibleDesign(format!(
                        "group sizes {sizes:?} do not give {} non-empty groups covering p = {}",
                        self.k, self.p
                    )));
                }
                Ok(sizes.clone())
            }
            None => group_sizes(self.p, self.k),
        }
    }

    /// Numbers of full, partial and no-commonality groups: `round(K rho)`,
    /// with the rounding residual put on the largest proportion.
    pub fn scenario_counts(&self) -> [usize; 3] {
        let k = self.k as i64;
        let mut counts: [i64; 3] = self.rho.map(|r| (self.k as f64 * r).round() as i64);
        let largest = (0..3)
            .max_by(|&a, &b| self.rho[a].total_cmp(&self.rho[b]).then(b.cmp(&a)))
            .unwrap_or(0);
        counts[largest] += k - counts.iter().sum::<i64>();
        counts.map(|c| c.max(0) as usize)
    }

    pub fn groups(&self) -> Result<GroupStructure> {
        GroupStructure::contiguous(&self.sizes()?)
    }

    /// `d' Sigma d` under the design's covariate correlation, where
    /// `Sigma = b 11' + (w - b) blockdiag(11') + (1 - w) I`.
    pub fn covariance_quadratic(&self, groups: &GroupStructure, d: &[f64]) -> f64 {
        let total: f64 = d.iter().sum();
        let blocks: f64 = (0..groups.k())
            .map(|k| groups.members(k).iter().map(|&j| d[j]).sum::<f64>().powi(2))
            .sum();
        let sq: f64 = d.iter().map(|v| v * v).sum();
        self.between_corr * total * total
            + (self.within_corr - self.between_corr) * blocks
            + (1.0 - self.within_corr) * sq
    }

    /// Dense covariate covariance matrix.
    pub fn covariance(&self, groups: &GroupStructure) -> Array2<f64> {
        Array2::from_shape_fn((self.p, self.p), |(i, j)| {
            if i == j {
                1.0
            } else if groups.group_of(i) == groups.group_of(j) {
                self.within_corr
            } else {
                self.between_corr
            }
        })
    }
}

/// Group sizes cycling through 20, 30, ..., 80, then nudged one covariate at
/// a time (staying within [20, 80]) until they sum to `p`. Falls back to
/// near-equal sizes when `p` is outside `[20 K, 80 K]`.
pub fn group_sizes(p: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || p < k {
        return Err(Error::InfeasibleDesign(format!("cannot split {p} covariates into {k} groups")));
    }
    if p < 20 * k || p > 80 * k {
        let base = p / k;
        return Ok((0..k).map(|i| base + usize::from(i < p % k)).collect());
    }
    let mut sizes: Vec<usize> = (0..k).map(|i| 20 + 10 * (i % 7)).collect();
    let mut i = 0;
    loop {
        let sum: usize = sizes.iter().sum();
        if sum == p {
            return Ok(sizes);
        }
        if sum < p && sizes[i] < 80 {
            sizes[i] += 1;
        } else if sum > p && sizes[i] > 20 {
            sizes[i] -= 1;
        }
        i = (i + 1) % k;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// `p x M` true coefficients.
    pub beta: Array2<f64>,
    pub groups: GroupStructure,
    pub scenarios: Vec<Scenario>,
    /// Per dataset, sorted important covariates.
    pub important: Vec<Vec<usize>>,
    /// Per group, whether the true blocks of datasets `m` and `m+1` agree.
    pub equal_pairs: Vec<Vec<bool>>,
}

impl GroundTruth {
    /// Number of (group, adjacent pair) blocks that are truly equal.
    pub fn n_ig(&self) -> usize {
        self.equal_pairs.iter().flatten().filter(|e| **e).count()
    }

    pub fn m(&self) -> usize {
        self.beta.ncols()
    }
}

fn draw_coef(rng: &mut ChaCha8Rng, scheme: CoefScheme, specific_to: Option<(usize, usize)>) -> f64 {
    match scheme {
        CoefScheme::Fixed(v) => v,
        CoefScheme::Random => match specific_to {
            Some((0, _)) => rng.random_range(0.1..=0.3),
            Some((d, m)) if d + 1 == m => rng.random_range(0.8..=1.0),
            _ => rng.random_range(0.4..=0.7),
        },
    }
}

/// Allocates scenarios to groups and draws the true coefficients.
pub fn gen_truth(design: &SimDesign, seed: u64, replicate: usize) -> Result<GroundTruth> {
    design.check()?;
    let groups = design.groups()?;
    let m_count = design.m;
    let mut rng = rng_for(seed, replicate, ALL_DATASETS, Purpose::Truth);

    let scenarios = match &design.scenarios {
        Some(s) => s.clone(),
        None => {
            let [full, partial, none] = design.scenario_counts();
            let mut kinds = Vec::with_capacity(design.k);
            kinds.extend(std::iter::repeat_n(0u8, full));
            kinds.extend(std::iter::repeat_n(1u8, partial));
            kinds.extend(std::iter::repeat_n(2u8, none));
            kinds.shuffle(&mut rng);
            let mut partial_seen = 0;
            kinds
                .into_iter()
                .map(|kind| match kind {
                    0 => Scenario::Full,
                    1 => {
                        partial_seen += 1;
                        if partial_seen % 2 == 1 {
                            Scenario::PartialA
                        } else {
                            Scenario::PartialB
                        }
                    }
                    _ => Scenario::None,
                })
                .collect()
        }
    };

    let mut beta = Array2::<f64>::zeros((design.p, m_count));
    for (k, &scenario) in scenarios.iter().enumerate() {
        let members = groups.members(k);
        let shared: [f64; 2] = [
            draw_coef(&mut rng, design.coef, None),
            draw_coef(&mut rng, design.coef, None),
        ];
        for d in 0..m_count {
            let (offset, is_shared) = scenario.placement(d, m_count);
            for t in 0..2 {
                let value = if is_shared {
                    shared[t]
                } else {
                    draw_coef(&mut rng, design.coef, Some((d, m_count)))
                };
                beta[[members[offset + t], d]] = value;
            }
        }
    }

    let important = (0..m_count)
        .map(|d| {
            (0..design.p)
                .filter(|&j| beta[[j, d]] != 0.0)
                .collect()
        })
        .collect();
    let equal_pairs = (0..groups.k())
        .map(|k| {
            (1..m_count)
                .map(|d| groups.members(k).iter().all(|&j| beta[[j, d - 1]] == beta[[j, d]]))
                .collect()
        })
        .collect();
    Ok(GroundTruth {
        beta,
        groups,
        scenarios,
        important,
        equal_pairs,
    })
}

/// One covariate matrix per dataset, drawn from the `purpose` streams.
pub fn gen_covariates(
    design: &SimDesign,
    groups: &GroupStructure,
    seed: u64,
    replicate: usize,
    purpose: Purpose,
) -> Result<Vec<Array2<f64>>> {
    design.check()?;
    let (b, w) = (design.between_corr, design.within_corr);
    let (cb, cw, ce) = (b.sqrt(), (w - b).sqrt(), (1.0 - w).sqrt());
    let mut out = Vec::with_capacity(design.m);
    for d in 0..design.m {
        let mut rng = rng_for(seed, replicate, d, purpose);
        let mut x = Array2::<f64>::zeros((design.n, design.p).f());
        let mut zk = vec![0.0; groups.k()];
        for i in 0..design.n {
            let z0: f64 = rng.sample(StandardNormal);
            for z in zk.iter_mut() {
                *z = rng.sample(StandardNormal);
            }
            for j in 0..design.p {
                let e: f64 = rng.sample(StandardNormal);
                x[[i, j]] = cb * z0 + cw * zk[groups.group_of(j)] + ce * e;
            }
        }
        out.push(x);
    }
    Ok(out)
}

/// Expected censoring rate when censoring times are U[0, c]:
/// `mean_i min(T_i, c) / c`, evaluated on the log scale.
fn expected_censoring(log_t: &[f64], log_c: f64) -> f64 {
    log_t.iter().map(|&lt| (lt - log_c).exp().min(1.0)).sum::<f64>() / log_t.len() as f64
}

/// Log upper bound `log c` of the uniform censoring distribution giving the
/// target expected censoring rate, by bisection.
pub fn calibrate_censoring(log_t: &[f64], target: f64) -> Result<f64> {
    let lo_init = log_t.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_init = log_t.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 8f64.ln();
    let (mut lo, mut hi) = (lo_init, hi_init);
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..60 {
        mid = 0.5 * (lo + hi);
        let rate = expected_censoring(log_t, mid);
        if (rate - target).abs() < 1e-9 {
            return Ok(mid);
        }
        if rate > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rate = expected_censoring(log_t, mid);
    if (rate - target).abs() > 0.02 {
        return Err(Error::Numeric(format!(
            "censoring calibration reached rate {rate:.4} instead of {target} after 60 steps"
        )));
    }
    Ok(mid)
}

/// Responses for each dataset: `X beta + sigma eps` for LR; for AFT the
/// same expression is the log event time, censored by independent
/// `U[0, c]` times with `c` calibrated per dataset.
pub fn gen_responses(
    design: &SimDesign,
    truth: &GroundTruth,
    xs: Vec<Array2<f64>>,
    seed: u64,
    replicate: usize,
    noise: Purpose,
) -> Result<Vec<DatasetBundle>> {
    let sigma = design.sigma();
    let mut out = Vec::with_capacity(xs.len());
    for (d, x) in xs.into_iter().enumerate() {
        let mut rng = rng_for(seed, replicate, d, noise);
        let signal = x.dot(&truth.beta.column(d));
        let lin: Vec<f64> = signal
            .iter()
            .map(|s| s + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let bundle = match design.model {
            Model::Lr => DatasetBundle::new(x, lin, None)?,
            Model::Aft => {
                let log_c = calibrate_censoring(&lin, design.target_censoring)?;
                let c = log_c.exp();
                let mut crng = rng_for(seed, replicate, d, Purpose::Censoring);
                let mut y = Vec::with_capacity(lin.len());
                let mut delta = Vec::with_capacity(lin.len());
                for &lt in &lin {
                    let u: f64 = crng.random();
                    let log_cens = ((1.0 - u) * c).ln();
                    if lt <= log_cens {
                        y.push(lt);
                        delta.push(true);
                    } else {
                        y.push(log_cens);
                        delta.push(false);
                    }
                }
                if delta.iter().all(|e| !e) {
                    return Err(Error::AllCensored { dataset: d + 1 });
                }
                DatasetBundle::new(x, y, Some(delta))?
            }
        };
        out.push(bundle);
    }
    Ok(out)
}

/// One simulated replicate: truth, training data and (optionally) an
/// independent test draw of the same size.
#[derive(Debug, Clone)]
pub struct SimReplicate {
    pub truth: GroundTruth,
    pub train: Vec<DatasetBundle>,
    pub test: Option<Vec<DatasetBundle>>,
}

pub fn simulate(design: &SimDesign, seed: u64, replicate: usize, with_test: bool) -> Result<SimReplicate> {
    let truth = gen_truth(design, seed, replicate)?;
    let xs = gen_covariates(design, &truth.groups, seed, replicate, Purpose::Covariates)?;
    let train = gen_responses(design, &truth, xs, seed, replicate, Purpose::Noise)?;
    let test = if with_test {
        let xs = gen_covariates(design, &truth.groups, seed, replicate, Purpose::TestCovariates)?;
        Some(gen_responses(design, &truth, xs, seed, replicate, Purpose::TestNoise)?)
    } else {
        None
    };
    Ok(SimReplicate { truth, train, test })
}

/// The small example: training data and truth for one replicate.
pub fn gen_small_example(seed: u64, replicate: usize) -> Result<SimReplicate> {
    simulate(&SimDesign::small_example(), seed, replicate, false)
}

/// Serializable summary of a ground truth, with 1-based indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub m: usize,
    pub p: usize,
    pub k: usize,
    pub n_ig: usize,
    pub group_sizes: Vec<usize>,
    pub scenarios: Vec<Scenario>,
    pub coefficients: Vec<Coefficient>,
    pub equal_adjacent_pairs: Vec<Vec<bool>>,
}

/// A nonzero coefficient `beta[j, m]`, both indices 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub j: usize,
    pub m: usize,
    pub value: f64,
}

pub fn sparse_coefficients(beta: &Array2<f64>) -> Vec<Coefficient> {
    let mut out = Vec::new();
    for j in 0..beta.nrows() {
        for m in 0..beta.ncols() {
            let value = beta[[j, m]];
            if value != 0.0 {
                out.push(Coefficient { j: j + 1, m: m + 1, value });
            }
        }
    }
    out
}

impl TruthFile {
    pub fn new(truth: &GroundTruth) -> Self {
        TruthFile {
            m: truth.m(),
            p: truth.beta.nrows(),
            k: truth.groups.k(),
            n_ig: truth.n_ig(),
            group_sizes: truth.groups.sizes(),
            scenarios: truth.scenarios.clone(),
            coefficients: sparse_coefficients(&truth.beta),
            equal_adjacent_pairs: truth.equal_pairs.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sizes_cover_p_within_range() {
        let s = group_sizes(1000, 20).unwrap();
        assert_eq!(s.iter().sum::<usize>(), 1000);
        assert!(s.iter().all(|&v| (20..=80).contains(&v)));
        let s = group_sizes(400, 8).unwrap();
        assert_eq!(s.iter().sum::<usize>(), 400);
        assert!(s.iter().all(|&v| (20..=80).contains(&v)));
        assert_eq!(group_sizes(10, 3).unwrap(), vec![4, 3, 3]);
    }

    #[test]
    fn scenario_counts_round_with_residual() {
        let d = |rho| SimDesign::table2(Setting::S1, rho, Model::Lr);
        assert_eq!(d([0.8, 0.2, 0.0]).scenario_counts(), [16, 4, 0]);
        assert_eq!(d([0.1, 0.0, 0.9]).scenario_counts(), [2, 0, 18]);
        let mut odd = d([0.34, 0.33, 0.33]);
        odd.k = 3;
        assert_eq!(odd.scenario_counts().iter().sum::<usize>(), 3);
    }

    #[test]
    fn truth_counts() {
        let t = gen_truth(&SimDesign::table2(Setting::S1, [0.8, 0.2, 0.0], Model::Lr), 7, 0).unwrap();
        assert_eq!(t.n_ig(), 36);
        assert!(t.important.iter().all(|s| s.len() == 40));
        let t = gen_truth(&SimDesign::table2(Setting::S3, [0.1, 0.0, 0.9], Model::Lr), 7, 0).unwrap();
        assert_eq!(t.n_ig(), 4);
        assert!(t.beta.iter().all(|&b| b == 0.0 || b == 0.5));
        let t = gen_truth(&SimDesign::table2(Setting::S1, [1.0, 0.0, 0.0], Model::Lr), 7, 0).unwrap();
        assert!(t.beta.column(0) == t.beta.column(1) && t.beta.column(1) == t.beta.column(2));
    }

    #[test]
    fn random_coefficient_laws() {
        let t = gen_truth(&SimDesign::table2(Setting::S1, [0.0, 0.0, 1.0], Model::Lr), 3, 0).unwrap();
        for (d, range) in [(0, 0.1..=0.3), (1, 0.4..=0.7), (2, 0.8..=1.0)] {
            for &j in &t.important[d] {
                assert!(range.contains(&t.beta[[j, d]]));
            }
        }
    }

    #[test]
    fn small_example_layout() {
        let t = gen_small_example(1, 0).unwrap().truth;
        assert!(t.important.iter().all(|s| s.len() == 8));
        assert!(t.beta.iter().all(|&b| b == 0.0 || b == 1.0));
        assert_eq!(t.equal_pairs, vec![vec![true, true], vec![false, false], vec![true, false], vec![false, true]]);
        assert_eq!(t.important[0], vec![0, 1, 30, 31, 60, 61, 82, 83]);
    }

    #[test]
    fn quadratic_form_matches_dense() {
        let design = SimDesign::reduced(Setting::S1, [0.8, 0.2, 0.0], Model::Aft);
        let groups = design.groups().unwrap();
        let sigma = design.covariance(&groups);
        let d: Vec<f64> = (0..design.p).map(|j| ((j * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let dense: f64 = (0..design.p)
            .map(|i| (0..design.p).map(|j| d[i] * sigma[[i, j]] * d[j]).sum::<f64>())
            .sum();
        approx::assert_relative_eq!(design.covariance_quadratic(&groups, &d), dense, max_relative = 1e-12);
    }

    #[test]
    fn calibration_hits_target() {
        let log_t: Vec<f64> = (0..200).map(|i| (i as f64 / 37.0).sin()).collect();
        let c = calibrate_censoring(&log_t, 0.25).unwrap();
        assert!((expected_censoring(&log_t, c) - 0.25).abs() < 1e-6);
    }

    #[test]
    fn infeasible_designs_rejected() {
        let mut d = SimDesign::table2(Setting::S1, [0.5, 0.6, 0.0], Model::Lr);
        assert!(matches!(d.check(), Err(Error::InfeasibleDesign(_))));
        d.rho = [1.0, 0.0, 0.0];
        d.between_corr = 0.5;
        assert!(d.check().is_err());
        let mut d = SimDesign::table2(Setting::S1, [0.0, 0.0, 1.0], Model::Lr);
        d.p = 40;
        d.k = 20;
        assert!(d.check().is_err());
    }
}
