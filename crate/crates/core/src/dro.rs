//! The worst-case distribution attaining the penalized objective, numerical
//! checks of the min-max identity, and explicit ball-membership checks.
//!
//! All couplings are the row-wise ones produced by construction: row `i` of
//! the base sample is paired with row `i` of the perturbed sample.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{residual_rnorm, Dataset};
use crate::error::{check_dim, Error, Result};
use crate::numeric::{dot, mean_rnorm};
use crate::penalty::{PenaltySpec, SubgradientCertificate};
use crate::problem::RobustProblem;
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationMeta {
    pub beta: Vec<f64>,
    pub delta: f64,
    pub sigma: f64,
    pub r: f64,
    pub penalty: PenaltySpec,
    pub certificate: SubgradientCertificate,
}

/// A sample and its row-wise perturbation
/// `x~_i = x_i - e_i a`, `y~_i = y_i + sigma e_i` with loading vector `a`.
#[derive(Clone, Debug)]
pub struct PerturbedSample {
    pub base: Dataset,
    pub perturbed: Dataset,
    pub e: Vec<f64>,
    pub meta: PerturbationMeta,
}

/// Applies `x~ = x - e a`, `y~ = y + sigma e` row by row.
fn perturb(data: &Dataset, e: &[f64], a: &[f64], sigma: f64) -> Result<Dataset> {
    let d = data.d();
    let mut x = Vec::with_capacity(data.n() * d);
    for (i, ei) in e.iter().enumerate() {
        x.extend(data.x_row(i).iter().zip(a).map(|(xv, av)| xv - ei * av));
    }
    let y = data.y().iter().zip(e).map(|(yv, ei)| yv + sigma * ei).collect();
    Dataset::from_flat(d, x, y)?.with_names(data.x_names().to_vec(), data.y_name().to_string())
}

/// The distribution attaining `sup_Q E_Q[|Y - X'beta|^r]^(1/r)` over the
/// sliced ball: `e = delta res / rn_r(res)` moves every row along the
/// certificate's loading vector, raising the residual r-norm by exactly
/// `delta (sigma + rho(beta))`.
pub fn worst_case_distribution(data: &Dataset, prob: &RobustProblem, beta: &[f64]) -> Result<PerturbedSample> {
    prob.validate()?;
    check_dim(data.d(), beta.len())?;
    let cert = prob.penalty.subgradient_certificate(beta)?;
    let res = data.residuals(beta)?;
    let rn = mean_rnorm(&res, prob.r);
    if rn == 0.0 {
        return Err(Error::Degenerate("residuals vanish at beta; the worst case is undefined".into()));
    }
    let e: Vec<f64> = res.iter().map(|v| prob.delta * v / rn).collect();
    let perturbed = perturb(data, &e, &cert.adjusted_direction, prob.sigma)?;
    Ok(PerturbedSample {
        base: data.clone(),
        perturbed,
        e,
        meta: PerturbationMeta {
            beta: beta.to_vec(),
            delta: prob.delta,
            sigma: prob.sigma,
            r: prob.r,
            penalty: prob.penalty.clone(),
            certificate: cert,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityCheck {
    /// `(rn_r + delta (sigma + rho(beta)))^r`.
    pub rhs: f64,
    /// Residual r-th moment on the worst-case sample.
    pub attained: f64,
    /// Largest excess of a random ball member over `rhs`, floored at zero.
    pub max_violation: f64,
}

/// Checks both directions of the min-max identity at `beta`: the worst-case
/// sample attains `rhs`, and `trials` random members of the ball stay below.
///
/// Each trial draws `u` with `rho_*(u) <= 1` and `e'` with `rn_r(e') <= delta`
/// and perturbs by `x~ = x - e' u`, `y~ = y + sigma e'`.
pub fn verify_duality(data: &Dataset, prob: &RobustProblem, beta: &[f64], trials: usize, rng: &Rng) -> Result<DualityCheck> {
    let ws = worst_case_distribution(data, prob, beta)?;
    let r = prob.r;
    let rhs = (residual_rnorm(data, beta, r)? + prob.delta * (prob.sigma + prob.penalty.eval(beta)?)).powf(r);
    let attained = residual_rnorm(&ws.perturbed, beta, r)?.powf(r);
    let mut max_violation = 0.0f64;
    let (n, d) = (data.n(), data.d());
    for t in 0..trials {
        let mut g = Rng::new(rng.seed, rng.stream.wrapping_add(t as u64)).generator();
        let raw: Vec<f64> = (0..d).map(|_| g.sample(StandardNormal)).collect();
        let dn = prob.penalty.dual_norm(&raw)?;
        let radius: f64 = g.random();
        let u: Vec<f64> = if dn > 0.0 { raw.iter().map(|v| v * radius / dn).collect() } else { vec![0.0; d] };
        let raw_e: Vec<f64> = (0..n).map(|_| g.sample(StandardNormal)).collect();
        let en = mean_rnorm(&raw_e, r);
        let scale: f64 = g.random();
        let e: Vec<f64> = raw_e.iter().map(|v| if en > 0.0 { prob.delta * scale * v / en } else { 0.0 }).collect();
        let q = perturb(data, &e, &u, prob.sigma)?;
        let val = residual_rnorm(&q, beta, r)?.powf(r);
        max_violation = max_violation.max(val - rhs);
    }
    Ok(DualityCheck { rhs, attained, max_violation })
}

/// Ball shapes with coordinate-wise moment constraints (`r = 2`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ball {
    /// `E|x~_j - x_j|^2 <= delta^2` for each `j` and `E|y~ - y|^2 <= (delta sigma)^2`.
    SqrtLasso,
    /// Ordered coordinate moments `E|x~ - x|^2_(j) <= (delta lambda_j)^2`.
    Slope { lambda: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipCheck {
    pub name: String,
    pub lhs: f64,
    pub bound: f64,
    pub pass: bool,
}

fn check(name: String, lhs: f64, bound: f64) -> MembershipCheck {
    MembershipCheck { pass: lhs <= bound + 1e-9 * bound.max(1.0), name, lhs, bound }
}

/// Compares the coupled second moments of `ps` with the ball's bounds.
pub fn verify_ball_membership(ps: &PerturbedSample, ball: &Ball) -> Result<Vec<MembershipCheck>> {
    if ps.meta.r != 2.0 {
        return Err(Error::validation(format!("ball checks need r = 2, sample has r = {}", ps.meta.r)));
    }
    let matches = match (ball, &ps.meta.penalty) {
        (Ball::SqrtLasso, PenaltySpec::L1) => true,
        (Ball::SqrtLasso, PenaltySpec::Lp { p }) => *p == 1.0,
        (Ball::Slope { lambda }, PenaltySpec::Slope { lambda: l }) => lambda == l,
        _ => false,
    };
    if !matches {
        return Err(Error::validation(format!("ball does not match the {} penalty of the sample", ps.meta.penalty.name())));
    }
    let (n, d) = (ps.base.n(), ps.base.d());
    let delta = ps.meta.delta;
    let moments: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| (ps.perturbed.x_row(i)[j] - ps.base.x_row(i)[j]).powi(2)).sum::<f64>() / n as f64)
        .collect();
    let outcome = ps.perturbed.y().iter().zip(ps.base.y()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
    let mut out = Vec::new();
    match ball {
        Ball::SqrtLasso => {
            for (j, m) in moments.iter().enumerate() {
                out.push(check(format!("x{}", j + 1), *m, delta * delta));
            }
        }
        Ball::Slope { lambda } => {
            let mut sorted = moments.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            for (j, (m, l)) in sorted.iter().zip(lambda).enumerate() {
                out.push(check(format!("x({})", j + 1), *m, (delta * l).powi(2)));
            }
        }
    }
    out.push(check("y".to_string(), outcome, (delta * ps.meta.sigma).powi(2)));
    Ok(out)
}

/// Sampled lower estimate of
/// `sup_gamma E_pi[|(y~ - y) + (x - x~)'gamma|^r]^(1/r) / (sigma + rho(gamma))`
/// under the construction's coupling. Candidates: zero, the coordinate axes,
/// `beta`, and 256 Gaussian directions at several scales.
pub fn coupled_rho_msw(ps: &PerturbedSample) -> Result<f64> {
    let d = ps.base.d();
    let mut gammas = vec![vec![0.0; d], ps.meta.beta.clone()];
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        gammas.push(e);
    }
    let mut g = Rng::new(0, 0).generator();
    for k in 0..256 {
        let scale = 10f64.powi(k % 5 - 2);
        gammas.push((0..d).map(|_| scale * g.sample::<f64, _>(StandardNormal)).collect());
    }
    coupled_rho_msw_over(ps, &gammas)
}

/// [`coupled_rho_msw`] over caller-supplied directions.
pub fn coupled_rho_msw_over(ps: &PerturbedSample, gammas: &[Vec<f64>]) -> Result<f64> {
    let (n, sigma, r) = (ps.base.n(), ps.meta.sigma, ps.meta.r);
    let mut best = 0.0f64;
    let mut z = vec![0.0; n];
    for gamma in gammas {
        check_dim(ps.base.d(), gamma.len())?;
        for (i, zi) in z.iter_mut().enumerate() {
            let dx: Vec<f64> = ps.base.x_row(i).iter().zip(ps.perturbed.x_row(i)).map(|(a, b)| a - b).collect();
            *zi = (ps.perturbed.y()[i] - ps.base.y()[i]) + dot(&dx, gamma);
        }
        let denom = sigma + ps.meta.penalty.eval(gamma)?;
        best = best.max(mean_rnorm(&z, r) / denom);
    }
    Ok(best)
}
