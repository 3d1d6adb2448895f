//! Reference implementations used as test oracles. They work from the raw
//! bundles in their original row order and share no code with the library.
#![allow(dead_code)]

use std::cmp::Ordering;

use ndarray::Array2;

use cdsboost::DatasetBundle;

/// Double-double value `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd(pub f64, pub f64);

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd(s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd(0.0, 0.0);

    pub fn from_f64(v: f64) -> Dd {
        Dd(v, 0.0)
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.0, o.0);
        let (t, f) = two_sum(self.1, o.1);
        let d = quick_two_sum(s, e + t);
        quick_two_sum(d.0, d.1 + f)
    }

    pub fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.0, o.0);
        quick_two_sum(p, e + (self.0 * o.1 + self.1 * o.0))
    }

    pub fn cmp(self, o: Dd) -> Ordering {
        let d = self.sub(o);
        d.0.total_cmp(&0.0).then(d.1.total_cmp(&0.0))
    }
}

/// Times in ascending order with events before censorings at ties.
fn sorted_times(b: &DatasetBundle) -> Vec<(f64, bool)> {
    let delta = b.delta.as_ref().expect("survival data");
    let mut v: Vec<(f64, bool)> = b.y.iter().copied().zip(delta.iter().copied()).collect();
    v.sort_by(|a, c| a.0.total_cmp(&c.0).then(c.1.cmp(&a.1)));
    v
}

/// Product-limit survival just before `t`: the product over event times
/// `u < t` of `1 - d_u / n_u`, with risk sets counted directly.
fn surv_before(y: &[f64], delta: &[bool], t: f64) -> f64 {
    let mut times: Vec<f64> = y.iter().zip(delta).filter(|(u, d)| **d && **u < t).map(|(u, _)| *u).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .iter()
        .map(|&u| {
            let at_risk = y.iter().filter(|&&v| v >= u).count() as f64;
            let d = y.iter().zip(delta).filter(|(v, e)| **e && **v == u).count() as f64;
            1.0 - d / at_risk
        })
        .product()
}

/// Per-observation loss weights in the bundle's own row order: `1/n` for
/// uncensored data, otherwise `S(t_i-) / n_{t_i}` for events (so tied events
/// share the Kaplan-Meier jump) and 0 for censored rows.
pub fn oracle_weights(b: &DatasetBundle) -> Vec<f64> {
    let n = b.n();
    match &b.delta {
        None => vec![1.0 / n as f64; n],
        Some(delta) => (0..n)
            .map(|i| {
                if !delta[i] {
                    return 0.0;
                }
                let at_risk = b.y.iter().filter(|&&v| v >= b.y[i]).count() as f64;
                surv_before(&b.y, delta, b.y[i]) / at_risk
            })
            .collect(),
    }
}

/// `(t, S(t-) - S(t))` for each distinct event time.
pub fn reference_km_jumps(y: &[f64], delta: &[bool]) -> Vec<(f64, f64)> {
    let mut times: Vec<f64> = y.iter().zip(delta).filter(|(_, d)| **d).map(|(u, _)| *u).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .into_iter()
        .map(|u| {
            let before = surv_before(y, delta, u);
            let at_risk = y.iter().filter(|&&v| v >= u).count() as f64;
            let d = y.iter().zip(delta).filter(|(v, e)| **e && **v == u).count() as f64;
            (u, before * d / at_risk)
        })
        .collect()
}

pub fn residuals(b: &DatasetBundle, beta: &[f64]) -> Vec<f64> {
    (0..b.n())
        .map(|i| b.y[i] - (0..b.p()).map(|j| b.x[[i, j]] * beta[j]).sum::<f64>())
        .collect()
}

/// `sum_{m in subset} sum_i w_i (r_i - g x_is)^2` in double-double.
fn dd_loss(parts: &[(Vec<f64>, Vec<f64>, Vec<f64>)], g: f64) -> Dd {
    let mut total = Dd::ZERO;
    for (w, r, x) in parts {
        for i in 0..w.len() {
            let (p, e) = two_prod(g, x[i]);
            let u = Dd::from_f64(r[i]).sub(Dd(p, e));
            total = total.add(u.mul(u).mul(Dd::from_f64(w[i])));
        }
    }
    total
}

/// Minimiser of the joint loss over the increment of covariate `s`, found
/// by golden-section search on the loss evaluated in double-double.
pub fn golden_increment(bundles: &[DatasetBundle], beta: &Array2<f64>, s: usize, subset: &[usize]) -> f64 {
    let parts: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = subset
        .iter()
        .map(|&m| {
            let b = &bundles[m];
            let col: Vec<f64> = beta.column(m).to_vec();
            (oracle_weights(b), residuals(b, &col), b.x.column(s).to_vec())
        })
        .collect();
    let f = |g: f64| dd_loss(&parts, g);
    let f0 = f(0.0);
    let mut bound = 1.0;
    while f(bound).cmp(f0) == Ordering::Less || f(-bound).cmp(f0) == Ordering::Less {
        bound *= 2.0;
        assert!(bound < 1e12, "increment search diverged");
    }
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (-bound, bound);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..400 {
        if fc.cmp(fd) == Ordering::Less {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
        if b - a <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1e-300) {
            break;
        }
    }
    0.5 * (a + b)
}

/// Independent CD-SBoost path for groups of `group_size` consecutive
/// covariates and all dataset pairs. Each iteration scores every move
/// `(s, A)` with `A` a non-empty subset of a class of datasets whose current
/// group blocks are exactly equal. The score is recomputed from scratch on
/// the tentative coefficients, with the penalty counting unequal blocks
/// directly. Returns the chosen `(s, A)` per iteration.
pub fn brute_force_cd_path(
    bundles: &[DatasetBundle],
    group_size: usize,
    lambda: f64,
    nu: f64,
    iterations: usize,
) -> Vec<(usize, Vec<usize>)> {
    let m = bundles.len();
    let p = bundles[0].p();
    let k = p / group_size;
    let weights: Vec<Vec<f64>> = bundles.iter().map(oracle_weights).collect();
    let pairs = m * (m - 1) / 2;
    let block = |beta: &Array2<f64>, g: usize, d: usize| -> Vec<f64> {
        (g * group_size..(g + 1) * group_size).map(|j| beta[[j, d]]).collect()
    };
    let score = |beta: &Array2<f64>| -> f64 {
        let mut total = 0.0;
        for d in 0..m {
            let col: Vec<f64> = beta.column(d).to_vec();
            let r = residuals(&bundles[d], &col);
            total += 0.5 * r.iter().zip(&weights[d]).map(|(r, w)| w * r * r).sum::<f64>();
            let n = bundles[d].n() as f64;
            total += n.ln() / n * col.iter().filter(|v| **v != 0.0).count() as f64;
        }
        if pairs > 0 && lambda > 0.0 {
            let mut unequal = 0;
            for g in 0..k {
                for a in 0..m {
                    for b in a + 1..m {
                        if block(beta, g, a) != block(beta, g, b) {
                            unequal += 1;
                        }
                    }
                }
            }
            total += lambda * unequal as f64 / (pairs * k) as f64;
        }
        total
    };

    let mut beta = Array2::<f64>::zeros((p, m));
    let mut path = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let mut best: Option<(f64, usize, Vec<usize>, f64)> = None;
        for s in 0..p {
            let g = s / group_size;
            let mut classes: Vec<Vec<usize>> = Vec::new();
            for d in 0..m {
                match classes.iter_mut().find(|c| block(&beta, g, c[0]) == block(&beta, g, d)) {
                    Some(c) => c.push(d),
                    None => classes.push(vec![d]),
                }
            }
            for class in &classes {
                for mask in 1u32..(1 << class.len()) {
                    let subset: Vec<usize> =
                        class.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &d)| d).collect();
                    let (mut num, mut den) = (0.0, 0.0);
                    for &d in &subset {
                        let col: Vec<f64> = beta.column(d).to_vec();
                        let r = residuals(&bundles[d], &col);
                        for i in 0..bundles[d].n() {
                            let x = bundles[d].x[[i, s]];
                            num += weights[d][i] * x * r[i];
                            den += weights[d][i] * x * x;
                        }
                    }
                    let gamma = if den > 0.0 { num / den } else { 0.0 };
                    let mut tentative = beta.clone();
                    for &d in &subset {
                        tentative[[s, d]] += gamma;
                    }
                    let obj = score(&tentative);
                    let better = match &best {
                        None => true,
                        Some((bo, bs, ba, _)) => obj
                            .total_cmp(bo)
                            .then(ba.len().cmp(&subset.len()))
                            .then(s.cmp(bs))
                            .then(subset.cmp(ba))
                            == Ordering::Less,
                    };
                    if better {
                        best = Some((obj, s, subset, gamma));
                    }
                }
            }
        }
        let (_, s, subset, gamma) = best.expect("at least one move");
        for &d in &subset {
            beta[[s, d]] += nu * gamma;
        }
        path.push((s, subset));
    }
    path
}
