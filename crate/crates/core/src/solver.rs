//! Minimizers of `rn_r(beta) + delta rho(beta)` and the baseline estimators.
//!
//! Every penalized solve is certified by a duality gap. With `f` the residual
//! r-norm, the dual is `max u'y` subject to `n^(1/r) ||u||_{r'} <= 1` and
//! `rho_*(X'u) <= delta` (`X'u = 0` when `delta = 0`). Any feasible `u` gives a
//! lower bound, so `kkt_residual = (primal - dual) / max(1, primal)` bounds
//! the relative suboptimality of the returned point.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numeric::{dot, norm_l2, norm_linf, norm_lp};
use crate::penalty::{soft_threshold, PenaltySpec};
use crate::problem::RobustProblem;

/// Iteration budget and tolerance; `seed` is accepted for configuration
/// symmetry, every solver here is deterministic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub kkt_tol: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_iter: 100_000, kkt_tol: 1e-7, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub beta_hat: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Relative duality gap at `beta_hat`; never negative.
    pub kkt_residual: f64,
}

/// Whether zero solves the square-root LASSO at radius `threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroSolutionCertificate {
    /// `||X'y / n||_inf / sqrt(mean y^2)`, zero when `y = 0`.
    pub statistic: f64,
    pub threshold: f64,
    pub is_zero_solution: bool,
}

pub fn zero_solution_certificate(data: &Dataset, delta: f64) -> Result<ZeroSolutionCertificate> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::validation(format!("delta must be finite and >= 0, got {delta}")));
    }
    let n = data.n() as f64;
    let rms = (data.y().iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let statistic = if rms == 0.0 { 0.0 } else { norm_linf(&xt_mul(data, data.y())) / n / rms };
    Ok(ZeroSolutionCertificate { statistic, threshold: delta, is_zero_solution: statistic <= delta })
}

/// `X'v`.
pub(crate) fn xt_mul(data: &Dataset, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; data.d()];
    for (i, vi) in v.iter().enumerate() {
        if *vi != 0.0 {
            for (o, x) in out.iter_mut().zip(data.x_row(i)) {
                *o += vi * x;
            }
        }
    }
    out
}

fn design_matrix(data: &Dataset) -> DMatrix<f64> {
    DMatrix::from_row_slice(data.n(), data.d(), data.x_flat())
}

/// Minimum-norm least squares via the SVD pseudoinverse; equals OLS for a
/// full-column-rank design and the ridgeless limit otherwise.
pub fn solve_ols(data: &Dataset) -> Result<Vec<f64>> {
    if data.d() == 0 {
        return Ok(vec![]);
    }
    let x = design_matrix(data);
    let y = DVector::from_column_slice(data.y());
    let svd = x.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * data.n().max(data.d()) as f64 * f64::EPSILON;
    let beta = svd.solve(&y, eps).map_err(|e| Error::Degenerate(e.to_string()))?;
    Ok(beta.iter().copied().collect())
}

/// `(X'X + n lambda I)^(-1) X'y`. With `lambda = 0` and a rank-deficient
/// design this falls back to the minimum-norm solution.
pub fn solve_ridge(data: &Dataset, lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::validation(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let x = design_matrix(data);
    let mut a = x.transpose() * &x;
    for j in 0..data.d() {
        a[(j, j)] += data.n() as f64 * lambda;
    }
    let b = DVector::from_column_slice(&xt_mul(data, data.y()));
    match a.cholesky() {
        Some(ch) => Ok(ch.solve(&b).iter().copied().collect()),
        None if lambda == 0.0 => solve_ols(data),
        None => Err(Error::Degenerate("ridge system is not positive definite".into())),
    }
}

/// Columns, Gram matrix and `X'y`, shared by the coordinate-descent solvers.
struct Gram {
    cols: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    xty: Vec<f64>,
    yty: f64,
}

impl Gram {
    fn new(data: &Dataset) -> Self {
        let (n, d) = (data.n(), data.d());
        let cols: Vec<Vec<f64>> = (0..d).map(|j| (0..n).map(|i| data.x_row(i)[j]).collect()).collect();
        let mut g = vec![vec![0.0; d]; d];
        for a in 0..d {
            for b in a..d {
                let v = dot(&cols[a], &cols[b]);
                g[a][b] = v;
                g[b][a] = v;
            }
        }
        Gram { xty: cols.iter().map(|c| dot(c, data.y())).collect(), yty: dot(data.y(), data.y()), cols, g }
    }

    /// Exact `(X'res, ||res||^2)` at `beta`.
    fn refresh(&self, data: &Dataset, beta: &[f64]) -> (Vec<f64>, f64) {
        let res = data.residuals(beta).expect("dimensions fixed");
        let c = self.cols.iter().map(|col| dot(col, &res)).collect();
        (c, dot(&res, &res))
    }
}

/// Lower bound from a candidate dual direction, made feasible by scaling
/// (and, when `delta = 0`, projection onto the null space of `X'`).
struct Dual<'a> {
    data: &'a Dataset,
    prob: &'a RobustProblem,
    /// Orthonormal basis of the column space of X, needed only for delta = 0.
    basis: Option<Vec<Vec<f64>>>,
}

impl<'a> Dual<'a> {
    fn new(data: &'a Dataset, prob: &'a RobustProblem) -> Self {
        let basis = (prob.delta == 0.0 && data.d() > 0).then(|| {
            let svd = design_matrix(data).svd(true, false);
            let u = svd.u.expect("requested");
            let smax = svd.singular_values.max();
            let eps = smax * data.n().max(data.d()) as f64 * f64::EPSILON;
            (0..svd.singular_values.len())
                .filter(|&k| svd.singular_values[k] > eps)
                .map(|k| u.column(k).iter().copied().collect())
                .collect()
        });
        Dual { data, prob, basis }
    }

    fn value(&self, mut u: Vec<f64>) -> f64 {
        if let Some(basis) = &self.basis {
            for b in basis {
                let c = dot(b, &u);
                for (ui, bi) in u.iter_mut().zip(b) {
                    *ui -= c * bi;
                }
            }
        }
        let uy = dot(&u, self.data.y());
        if !(uy > 0.0) {
            return 0.0;
        }
        let n = self.data.n() as f64;
        let r = self.prob.r;
        let s1 = if r == 1.0 {
            n * norm_linf(&u)
        } else {
            n.powf(1.0 / r) * norm_lp(&u, r / (r - 1.0))
        };
        let s2 = if self.prob.delta > 0.0 {
            match self.prob.penalty.dual_norm(&xt_mul(self.data, &u)) {
                Ok(v) => v / self.prob.delta,
                Err(_) => return 0.0,
            }
        } else {
            0.0
        };
        let scale = s1.max(s2);
        if scale > 0.0 && scale.is_finite() {
            uy / scale
        } else {
            0.0
        }
    }

    /// `d f / d res` at the residual vector, the natural dual candidate.
    fn gradient_direction(&self, res: &[f64]) -> Vec<f64> {
        residual_gradient(res, self.prob.r)
    }
}

/// `w_i = sign(res_i) (|res_i| / rn)^(r-1) / n`, the gradient of the residual
/// r-norm with respect to the residuals (zero at a perfect fit).
fn residual_gradient(res: &[f64], r: f64) -> Vec<f64> {
    let n = res.len() as f64;
    let rn = crate::numeric::mean_rnorm(res, r);
    if rn == 0.0 {
        return vec![0.0; res.len()];
    }
    res.iter()
        .map(|e| {
            if r == 1.0 {
                e.signum() * (*e != 0.0) as u8 as f64 / n
            } else {
                e.signum() * (e.abs() / rn).powf(r - 1.0) / n
            }
        })
        .collect()
}

fn relative_gap(primal: f64, dual: f64) -> f64 {
    ((primal - dual) / primal.max(1.0)).max(0.0)
}

fn finish(data: &Dataset, prob: &RobustProblem, dual: &Dual, beta: Vec<f64>, best_dual: f64, iterations: usize, tol: f64) -> Result<SolveReport> {
    let objective_value = prob.objective(data, &beta)?;
    let res = data.residuals(&beta)?;
    let d = dual.value(dual.gradient_direction(&res)).max(best_dual);
    let kkt_residual = relative_gap(objective_value, d);
    Ok(SolveReport { beta_hat: beta, objective_value, iterations, converged: kkt_residual <= tol, kkt_residual })
}

/// Minimizes `rn_r(beta) + delta rho(beta)` over `R^d` (no intercept).
///
/// Dispatch: square-root LASSO coordinate descent for `r = 2` with the l1
/// penalty, minimum-norm least squares for `r = 2, delta = 0`, accelerated
/// proximal gradient for other `r > 1`, and primal-dual hybrid gradient for
/// `r = 1`. A report with `converged = false` is returned when the budget runs
/// out before the gap closes.
pub fn solve_penalized(data: &Dataset, prob: &RobustProblem, opts: &SolverOptions) -> Result<SolveReport> {
    prob.validate()?;
    if let Some(k) = prob.penalty.dim() {
        crate::error::check_dim(data.d(), k)?;
    }
    if !prob.penalty.is_norm() {
        return Err(Error::unsupported(format!("solver needs a norm penalty, got {}", prob.penalty.name())));
    }
    if !(opts.kkt_tol > 0.0) {
        return Err(Error::validation("kkt_tol must be positive"));
    }
    let dual = Dual::new(data, prob);
    if prob.r == 2.0 && prob.delta == 0.0 {
        let beta = solve_ols(data)?;
        return finish(data, prob, &dual, beta, 0.0, 1, opts.kkt_tol);
    }
    let report = if prob.r == 2.0 && prob.penalty == PenaltySpec::L1 {
        sqrt_lasso_cd(data, prob, &dual, opts)?
    } else if prob.r == 1.0 {
        pdhg(data, prob, &dual, opts)?
    } else {
        fista(data, prob, &dual, opts)?
    };
    // Never return something worse than the origin.
    let zero = vec![0.0; data.d()];
    if prob.objective(data, &zero)? < report.objective_value {
        let best = finish(data, prob, &dual, zero, 0.0, report.iterations, opts.kkt_tol)?;
        return Ok(best);
    }
    Ok(report)
}

fn sqrt_lasso_cd(data: &Dataset, prob: &RobustProblem, dual: &Dual, opts: &SolverOptions) -> Result<SolveReport> {
    let (n, d) = (data.n(), data.d());
    let nf = n as f64;
    let delta = prob.delta;
    let gram = Gram::new(data);
    let mut beta = vec![0.0; d];
    let (mut c, mut rss) = gram.refresh(data, &beta);
    let mut iterations = 0;
    let mut best_dual = 0.0f64;
    for sweep in 1..=opts.max_iter {
        iterations = sweep;
        let mut max_step = 0.0f64;
        for j in 0..d {
            let s = gram.g[j][j];
            if s == 0.0 {
                continue;
            }
            let bj = beta[j];
            let rj = (rss + 2.0 * bj * c[j] + bj * bj * s).max(0.0);
            let g = c[j] + s * bj;
            let new = if nf * delta * delta >= s || g.abs() <= delta * (nf * rj).sqrt() {
                0.0
            } else {
                let e = (rj - g * g / s).max(0.0);
                let m = (nf * delta * delta * e / (1.0 - nf * delta * delta / s)).sqrt();
                g.signum() * (g.abs() - m) / s
            };
            let step = new - bj;
            if step != 0.0 {
                rss = (rss - 2.0 * step * c[j] + step * step * s).max(0.0);
                for (ck, gk) in c.iter_mut().zip(&gram.g[j]) {
                    *ck -= step * gk;
                }
                beta[j] = new;
                max_step = max_step.max(step.abs());
            }
        }
        if sweep % 20 == 0 {
            (c, rss) = gram.refresh(data, &beta);
        }
        let rn = (rss / nf).sqrt();
        let primal = rn + delta * crate::numeric::norm_l1(&beta);
        if rn > 0.0 {
            // u = res / (n rn) has unit residual-dual norm; scale for rho_*.
            let scale = (norm_linf(&c) / (nf * rn * delta)).max(1.0);
            let ry = gram.yty - dot(&beta, &gram.xty);
            best_dual = best_dual.max(ry / (nf * rn * scale));
        }
        if relative_gap(primal, best_dual) <= opts.kkt_tol && max_step <= 1e-11 * (1.0 + norm_linf(&beta)) {
            break;
        }
    }
    finish(data, prob, dual, beta, best_dual, iterations, opts.kkt_tol)
}

/// Minimizes `(1/(2n)) ||y - X beta||^2 + lambda ||beta||_1` by cyclic
/// coordinate descent until the duality gap is below `1e-8` (relative to
/// `max(1, objective)`). `objective_value` reports this LASSO objective.
pub fn solve_lasso(data: &Dataset, lambda: f64, opts: &SolverOptions) -> Result<SolveReport> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::validation(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let nf = data.n() as f64;
    let lasso_obj = |beta: &[f64], rss: f64| rss / (2.0 * nf) + lambda * crate::numeric::norm_l1(beta);
    if lambda == 0.0 {
        let beta = solve_ols(data)?;
        let res = data.residuals(&beta)?;
        let rss = dot(&res, &res);
        return Ok(SolveReport { objective_value: lasso_obj(&beta, rss), beta_hat: beta, iterations: 1, converged: true, kkt_residual: 0.0 });
    }
    let tol = 1e-8f64.min(opts.kkt_tol);
    let d = data.d();
    let gram = Gram::new(data);
    let mut beta = vec![0.0; d];
    let (mut c, mut rss) = gram.refresh(data, &beta);
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    for sweep in 1..=opts.max_iter {
        iterations = sweep;
        let mut max_step = 0.0f64;
        for j in 0..d {
            let s = gram.g[j][j];
            if s == 0.0 {
                continue;
            }
            let g = c[j] + s * beta[j];
            let new = soft_threshold(g, nf * lambda) / s;
            let step = new - beta[j];
            if step != 0.0 {
                rss = (rss - 2.0 * step * c[j] + step * step * s).max(0.0);
                for (ck, gk) in c.iter_mut().zip(&gram.g[j]) {
                    *ck -= step * gk;
                }
                beta[j] = new;
                max_step = max_step.max(step.abs());
            }
        }
        if sweep % 20 == 0 {
            (c, rss) = gram.refresh(data, &beta);
        }
        // theta = res * min(1, n lambda / ||X'res||_inf);
        // D = (theta'y - ||theta||^2 / 2) / n.
        let scale = (nf * lambda / norm_linf(&c).max(f64::MIN_POSITIVE)).min(1.0);
        let ry = gram.yty - dot(&beta, &gram.xty);
        let dual_val = (scale * ry - 0.5 * scale * scale * rss) / nf;
        let primal = lasso_obj(&beta, rss);
        gap = relative_gap(primal, dual_val);
        if gap <= tol && max_step <= 1e-11 * (1.0 + norm_linf(&beta)) {
            break;
        }
    }
    let res = data.residuals(&beta)?;
    Ok(SolveReport { objective_value: lasso_obj(&beta, dot(&res, &res)), beta_hat: beta, iterations, converged: gap <= tol, kkt_residual: gap })
}

fn spectral_norm(data: &Dataset) -> f64 {
    if data.d() == 0 {
        return 0.0;
    }
    design_matrix(data).singular_values().max()
}

fn fista(data: &Dataset, prob: &RobustProblem, dual: &Dual, opts: &SolverOptions) -> Result<SolveReport> {
    let d = data.d();
    let r = prob.r;
    let delta = prob.delta;
    let nf = data.n() as f64;
    let f = |beta: &[f64]| crate::numeric::mean_rnorm(&data.residuals(beta).expect("dims"), r);
    let grad = |beta: &[f64]| -> (f64, Vec<f64>) {
        let res = data.residuals(beta).expect("dims");
        let w = residual_gradient(&res, r);
        (crate::numeric::mean_rnorm(&res, r), xt_mul(data, &w).iter().map(|v| -v).collect())
    };
    let prox = |v: &[f64], t: f64| -> Vec<f64> {
        if delta == 0.0 {
            v.to_vec()
        } else {
            prob.penalty.prox(v, t * delta).expect("norm penalty")
        }
    };
    let total = |beta: &[f64]| prob.objective(data, beta).expect("dims");

    // Start from least squares when it is cheap; it is usually close.
    let mut x = solve_ols(data).unwrap_or_else(|_| vec![0.0; d]);
    if total(&x) > total(&vec![0.0; d]) {
        x = vec![0.0; d];
    }
    let mut yk = x.clone();
    let mut tk = 1.0f64;
    let mut lip = (spectral_norm(data).powi(2) / nf / f(&x).max(1e-12)).max(1e-12);
    let mut best = (total(&x), x.clone());
    let mut best_dual = 0.0f64;
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let (fy, gy) = grad(&yk);
        let mut z;
        loop {
            let step = 1.0 / lip;
            let v: Vec<f64> = yk.iter().zip(&gy).map(|(a, g)| a - step * g).collect();
            z = prox(&v, step);
            let diff: Vec<f64> = z.iter().zip(&yk).map(|(a, b)| a - b).collect();
            let model = fy + dot(&gy, &diff) + 0.5 * lip * dot(&diff, &diff);
            if f(&z) <= model + 1e-14 * fy.abs().max(1.0) || lip > 1e300 {
                break;
            }
            lip *= 2.0;
        }
        let obj_z = total(&z);
        let obj_x = total(&x);
        if obj_z > obj_x {
            // Adaptive restart: drop momentum and retry from x.
            yk = x.clone();
            tk = 1.0;
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * tk * tk).sqrt()) / 2.0;
        yk = z.iter().zip(&x).map(|(a, b)| a + (tk - 1.0) / t_next * (a - b)).collect();
        tk = t_next;
        x = z;
        lip *= 0.95;
        if obj_z < best.0 {
            best = (obj_z, x.clone());
        }
        if it % 10 == 0 {
            let res = data.residuals(&best.1)?;
            best_dual = best_dual.max(dual.value(dual.gradient_direction(&res)));
            if relative_gap(best.0, best_dual) <= opts.kkt_tol {
                break;
            }
        }
    }
    finish(data, prob, dual, best.1, best_dual, iterations, opts.kkt_tol)
}

fn pdhg(data: &Dataset, prob: &RobustProblem, dual: &Dual, opts: &SolverOptions) -> Result<SolveReport> {
    let d = data.d();
    let nf = data.n() as f64;
    let delta = prob.delta;
    let lnorm = spectral_norm(data).max(1e-12);
    // Balance the primal and dual scales: the dual box has radius 1/n.
    let omega = (1.0 / nf) / (norm_l2(data.y()) / (nf.sqrt() * lnorm)).max(1e-12);
    let tau = 0.99 / lnorm * omega.sqrt();
    let sigma = 0.99 / lnorm / omega.sqrt();
    let total = |beta: &[f64]| prob.objective(data, beta).expect("dims");

    let mut beta = vec![0.0; d];
    let mut bar = beta.clone();
    let mut u = vec![0.0; data.n()];
    let mut best = (total(&beta), beta.clone());
    let mut best_dual = 0.0f64;
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let xb = data.predict(&bar)?;
        for ((ui, xi), yi) in u.iter_mut().zip(&xb).zip(data.y()) {
            *ui = (*ui + sigma * xi - sigma * yi).clamp(-1.0 / nf, 1.0 / nf);
        }
        let xtu = xt_mul(data, &u);
        let v: Vec<f64> = beta.iter().zip(&xtu).map(|(b, g)| b - tau * g).collect();
        let next = if delta == 0.0 { v } else { prob.penalty.prox(&v, tau * delta)? };
        bar = next.iter().zip(&beta).map(|(a, b)| 2.0 * a - b).collect();
        beta = next;
        if it % 10 == 0 {
            let obj = total(&beta);
            if obj < best.0 {
                best = (obj, beta.clone());
            }
            let neg: Vec<f64> = u.iter().map(|v| -v).collect();
            best_dual = best_dual.max(dual.value(neg));
            if relative_gap(best.0, best_dual) <= opts.kkt_tol {
                break;
            }
        }
    }
    finish(data, prob, dual, best.1, best_dual, iterations, opts.kkt_tol)
}
