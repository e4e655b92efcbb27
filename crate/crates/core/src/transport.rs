//! One-dimensional Wasserstein distances and empirical max-sliced estimates.
//!
//! The sliced searches maximize a degree-one homogeneous ratio
//! `W_r(projection) / ||direction||` over directions `g in R^(d+1)` acting on
//! rows `(x_i, y_i)`. They return lower bounds: the value is always attained
//! by the reported direction.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::numeric::{dot, BaseNorm};
use crate::problem::RobustProblem;
use crate::rng::Rng;

/// How a projection direction is normalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalization {
    /// `||g|| = 1` in a base norm on `R^(d+1)`.
    Euclidean { norm: BaseNorm },
    /// `sigma |g_(d+1)| + rho(g_(1:d)) = 1`.
    RhoSigma { sigma: f64 },
}

/// A unit direction on `R^(d+1)`; the last coordinate acts on the outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub gamma_tilde: Vec<f64>,
    pub normalization: Normalization,
}

/// Result of a sliced search. `value` equals the one-dimensional distance
/// along `argmax_direction`; it is a lower bound on the supremum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlicedDistanceReport {
    pub value: f64,
    pub argmax_direction: Projection,
    pub evaluations: usize,
    pub lower_bound: bool,
}

/// Search effort for the sliced estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    /// Ascent runs from independent random starts.
    pub restarts: usize,
    /// Extra directions evaluated without ascent; the value is monotone in this count.
    pub random_directions: usize,
    pub max_ascent_iter: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { restarts: 16, random_directions: 512, max_ascent_iter: 200, seed: 0 }
    }
}

/// Mass transported between `a[i]` and `b[j]` by the monotone coupling.
type Piece = (usize, usize, f64);

fn sorted_order(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    idx
}

/// Quantile (monotone) coupling between two weighted samples.
fn quantile_coupling(a: &[f64], wa: &[f64], b: &[f64], wb: &[f64]) -> Vec<Piece> {
    let oa = sorted_order(a);
    let ob = sorted_order(b);
    let mut pieces = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (wa[oa[0]], wb[ob[0]]);
    loop {
        let m = ra.min(rb);
        if m > 0.0 {
            pieces.push((oa[i], ob[j], m));
        }
        ra -= m;
        rb -= m;
        let adv_a = ra <= 1e-15 && i + 1 < oa.len();
        let adv_b = rb <= 1e-15 && j + 1 < ob.len();
        if !adv_a && !adv_b {
            break;
        }
        if adv_a {
            i += 1;
            ra += wa[oa[i]];
        }
        if adv_b {
            j += 1;
            rb += wb[ob[j]];
        }
    }
    pieces
}

fn check_weights(v: &[f64], w: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::validation("empty sample"));
    }
    check_dim(v.len(), w.len())?;
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::validation("weights must be finite and nonnegative"));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::validation(format!("weights sum to {s}, expected 1")));
    }
    Ok(())
}

fn check_r(r: f64) -> Result<()> {
    if r >= 1.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(format!("r must be finite and >= 1, got {r}")))
    }
}

/// `W_r` between two uniformly weighted samples (any order, any sizes).
pub fn wasserstein_1d(a: &[f64], b: &[f64], r: f64) -> Result<f64> {
    check_r(r)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::validation("empty sample"));
    }
    if a.len() == b.len() {
        let mut sa = a.to_vec();
        let mut sb = b.to_vec();
        sa.sort_by(f64::total_cmp);
        sb.sort_by(f64::total_cmp);
        let diff: Vec<f64> = sa.iter().zip(&sb).map(|(x, y)| x - y).collect();
        return Ok(crate::numeric::mean_rnorm(&diff, r));
    }
    let wa = vec![1.0 / a.len() as f64; a.len()];
    let wb = vec![1.0 / b.len() as f64; b.len()];
    wasserstein_1d_weighted(a, &wa, b, &wb, r)
}

/// `W_r` between weighted samples: `(int_0^1 |F_a^-1 - F_b^-1|^r)^(1/r)`,
/// integrated exactly over the merged quantile partition.
pub fn wasserstein_1d_weighted(a: &[f64], wa: &[f64], b: &[f64], wb: &[f64], r: f64) -> Result<f64> {
    check_r(r)?;
    check_weights(a, wa)?;
    check_weights(b, wb)?;
    let pieces = quantile_coupling(a, wa, b, wb);
    let scale = pieces.iter().fold(0.0f64, |m, &(i, j, _)| m.max((a[i] - b[j]).abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = pieces.iter().map(|&(i, j, m)| m * ((a[i] - b[j]).abs() / scale).powf(r)).sum();
    Ok(scale * s.powf(1.0 / r))
}

/// Stacked rows `(x_i, y_i)` of a dataset.
fn stacked(data: &Dataset) -> Vec<Vec<f64>> {
    (0..data.n())
        .map(|i| {
            let mut z = data.x_row(i).to_vec();
            z.push(data.y()[i]);
            z
        })
        .collect()
}

/// Evaluates `W_r` of the projections and its gradient in the direction.
struct ProjectedObjective {
    p: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    wp: Vec<f64>,
    wq: Vec<f64>,
    r: f64,
}

impl ProjectedObjective {
    fn new(pd: &Dataset, qd: &Dataset, r: f64) -> Result<Self> {
        check_r(r)?;
        check_dim(pd.d(), qd.d())?;
        Ok(ProjectedObjective {
            p: stacked(pd),
            q: stacked(qd),
            wp: vec![1.0 / pd.n() as f64; pd.n()],
            wq: vec![1.0 / qd.n() as f64; qd.n()],
            r,
        })
    }

    fn value_and_grad(&self, g: &[f64]) -> (f64, Vec<f64>) {
        let a: Vec<f64> = self.p.iter().map(|z| dot(z, g)).collect();
        let b: Vec<f64> = self.q.iter().map(|z| dot(z, g)).collect();
        let pieces = quantile_coupling(&a, &self.wp, &b, &self.wq);
        let scale = pieces.iter().fold(0.0f64, |m, &(i, j, _)| m.max((a[i] - b[j]).abs()));
        let mut grad = vec![0.0; g.len()];
        if scale == 0.0 {
            return (0.0, grad);
        }
        let r = self.r;
        let s: f64 = pieces.iter().map(|&(i, j, m)| m * ((a[i] - b[j]).abs() / scale).powf(r)).sum();
        let w = scale * s.powf(1.0 / r);
        // dW/dg = W^(1-r) sum m |D|^(r-1) sign(D) (p_i - q_j), in scaled form.
        for &(i, j, m) in &pieces {
            let diff = a[i] - b[j];
            let coef = m * (diff.abs() / w).powf(r - 1.0) * diff.signum();
            if coef != 0.0 {
                for (k, gk) in grad.iter_mut().enumerate() {
                    *gk += coef * (self.p[i][k] - self.q[j][k]);
                }
            }
        }
        (w, grad)
    }
}

/// Maximizes `W(g) / norm(g)` from `start` by normalized gradient ascent with
/// radial renormalization and step halving.
fn ascend<N: Fn(&[f64]) -> f64>(
    obj: &ProjectedObjective,
    norm: &N,
    start: Vec<f64>,
    max_iter: usize,
    evals: &mut usize,
) -> (f64, Vec<f64>) {
    let normalize = |g: Vec<f64>| -> Option<Vec<f64>> {
        let n = norm(&g);
        (n > 0.0 && n.is_finite()).then(|| g.iter().map(|x| x / n).collect())
    };
    let Some(mut g) = normalize(start) else {
        return (0.0, vec![]);
    };
    let (mut val, mut grad) = obj.value_and_grad(&g);
    *evals += 1;
    let mut step = 0.1;
    for _ in 0..max_iter {
        let gn = crate::numeric::norm_l2(&grad);
        if gn == 0.0 || step < 1e-12 {
            break;
        }
        let trial: Vec<f64> = g.iter().zip(&grad).map(|(x, d)| x + step * d / gn).collect();
        let Some(trial) = normalize(trial) else { break };
        let (tv, tg) = obj.value_and_grad(&trial);
        *evals += 1;
        if tv > val {
            g = trial;
            val = tv;
            grad = tg;
            step = (step * 1.5).min(1.0);
        } else {
            step *= 0.5;
        }
    }
    (val, g)
}

fn gaussian_dir(g: &mut impl rand::RngCore, k: usize) -> Vec<f64> {
    (0..k).map(|_| g.sample(StandardNormal)).collect()
}

fn sliced_search<N: Fn(&[f64]) -> f64>(
    obj: &ProjectedObjective,
    norm: N,
    k: usize,
    opts: &SearchOptions,
) -> (f64, Vec<f64>, usize) {
    let mut evals = 0;
    let mut best_val = -1.0;
    let mut best_dir = vec![0.0; k];
    let consider = |v: f64, g: Vec<f64>, best_val: &mut f64, best_dir: &mut Vec<f64>| {
        if v > *best_val && !g.is_empty() {
            *best_val = v;
            *best_dir = g;
        }
    };
    let ratio = |g: &[f64], evals: &mut usize| -> Option<(f64, Vec<f64>)> {
        let n = norm(g);
        if !(n > 0.0 && n.is_finite()) {
            return None;
        }
        let u: Vec<f64> = g.iter().map(|x| x / n).collect();
        *evals += 1;
        Some((obj.value_and_grad(&u).0, u))
    };
    // Coordinate axes.
    for j in 0..k {
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        if let Some((v, u)) = ratio(&e, &mut evals) {
            consider(v, u, &mut best_val, &mut best_dir);
        }
    }
    // Ascent from starts drawn on their own stream, independent of the
    // number of random directions.
    let mut starts = Rng::new(opts.seed, 1).generator();
    for _ in 0..opts.restarts {
        let s = gaussian_dir(&mut starts, k);
        let (v, u) = ascend(obj, &norm, s, opts.max_ascent_iter, &mut evals);
        consider(v, u, &mut best_val, &mut best_dir);
    }
    // Plain random directions: a prefix of one fixed stream, so raising the
    // count can only raise the maximum.
    let mut dirs = Rng::new(opts.seed, 2).generator();
    for _ in 0..opts.random_directions {
        let s = gaussian_dir(&mut dirs, k);
        if let Some((v, u)) = ratio(&s, &mut evals) {
            consider(v, u, &mut best_val, &mut best_dir);
        }
    }
    (best_val.max(0.0), best_dir, evals)
}

/// Lower bound on the max-sliced distance `sup_{||g||=1} W_r(g_# P, g_# Q)`
/// between the empirical laws of two datasets, unit sphere in `norm`.
pub fn msw_empirical(p: &Dataset, q: &Dataset, r: f64, norm: BaseNorm, opts: &SearchOptions) -> Result<SlicedDistanceReport> {
    let obj = ProjectedObjective::new(p, q, r)?;
    let (value, dir, evaluations) = sliced_search(&obj, |g| norm.norm(g), p.d() + 1, opts);
    Ok(SlicedDistanceReport {
        value,
        argmax_direction: Projection { gamma_tilde: dir, normalization: Normalization::Euclidean { norm } },
        evaluations,
        lower_bound: true,
    })
}

/// Lower bound on the rho-sliced distance: `W_r` of projections over the
/// sphere `sigma |g_(d+1)| + rho(g_(1:d)) = 1`. Requires a norm penalty.
pub fn rho_msw_empirical(p: &Dataset, q: &Dataset, prob: &RobustProblem, opts: &SearchOptions) -> Result<SlicedDistanceReport> {
    if !prob.penalty.is_norm() {
        return Err(Error::unsupported("rho-sliced distance needs a norm penalty"));
    }
    let obj = ProjectedObjective::new(p, q, prob.r)?;
    let d = p.d();
    prob.penalty.eval(&vec![0.0; d])?;
    let sigma = prob.sigma;
    let rho = &prob.penalty;
    let norm = |g: &[f64]| sigma * g[d].abs() + rho.eval(&g[..d]).unwrap_or(f64::NAN);
    let (value, dir, evaluations) = sliced_search(&obj, norm, d + 1, opts);
    Ok(SlicedDistanceReport {
        value,
        argmax_direction: Projection { gamma_tilde: dir, normalization: Normalization::RhoSigma { sigma } },
        evaluations,
        lower_bound: true,
    })
}

/// `W_r` of the projections of two datasets along `g in R^(d+1)`.
pub fn projected_wasserstein(p: &Dataset, q: &Dataset, g: &[f64], r: f64) -> Result<f64> {
    check_dim(p.d() + 1, g.len())?;
    Ok(ProjectedObjective::new(p, q, r)?.value_and_grad(g).0)
}

/// Two Gaussian laws with equal prediction-error geometry but a large
/// d-dimensional transport cost.
#[derive(Clone, Debug)]
pub struct GaussianExample {
    /// `(sqrt(1 + sigma_v^2) - 1) sqrt(d)`.
    pub w2_closed_form: f64,
    /// Increase in mean squared prediction error for any unit-l2 coefficient vector.
    pub prediction_error_gap: f64,
    /// Draws from `N(0, I_(d+1))`.
    pub p: Dataset,
    /// The same rows with covariates shifted by `V ~ N(0, sigma_v^2 I_d)`.
    pub q: Dataset,
}

pub fn gaussian_example(d: usize, sigma_v: f64, n: usize, rng: &Rng) -> Result<GaussianExample> {
    if d == 0 || n == 0 || !(sigma_v >= 0.0 && sigma_v.is_finite()) {
        return Err(Error::validation("need d >= 1, n >= 1 and finite sigma_v >= 0"));
    }
    let mut g = rng.generator();
    let mut x = Vec::with_capacity(n * d);
    let mut xt = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..d {
            let xv: f64 = g.sample(StandardNormal);
            let v: f64 = g.sample(StandardNormal);
            x.push(xv);
            xt.push(xv + sigma_v * v);
        }
        y.push(g.sample(StandardNormal));
    }
    Ok(GaussianExample {
        w2_closed_form: ((1.0 + sigma_v * sigma_v).sqrt() - 1.0) * (d as f64).sqrt(),
        prediction_error_gap: sigma_v * sigma_v,
        p: Dataset::from_flat(d, x, y.clone())?,
        q: Dataset::from_flat(d, xt, y)?,
    })
}
