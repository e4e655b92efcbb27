//! A size-alpha comparison of the worst-case out-of-sample error of two
//! coefficient vectors.
//!
//! The decision is only meaningful when both worst cases over the comparison
//! set are attained by the explicit worst-case distributions of the two
//! vectors. That condition cannot be checked from data; it is a maintained
//! assumption of every verdict.

use serde::{Deserialize, Serialize};

use crate::dataset::{residual_rnorm, Dataset};
use crate::error::{check_dim, Error, Result};
use crate::numeric::BaseNorm;
use crate::problem::RobustProblem;
use crate::tuning::{compact_constant, moment_constant};

/// How the critical value's constant is obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CriticalRoute {
    /// Compact support with diameter `diam`.
    Compact { diam: f64 },
    /// Moment bound `gamma` of order `s > 2r`; adds the `log(2n+1)^(r/s)` factor.
    General { s: f64, gamma: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingComponents {
    pub rnorm1: f64,
    pub rnorm2: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub n: usize,
    pub r: f64,
    pub delta: f64,
    pub sigma: f64,
}

impl RankingComponents {
    /// `n^(1/(2r)) (rn1 - rn2 + delta rho1 - delta rho2) / (2 sigma + rho1 + rho2)`.
    ///
    /// Grouped so that swapping the two vectors flips the sign exactly.
    pub fn t_n(&self) -> f64 {
        let w1 = self.rnorm1 + self.delta * self.rho1;
        let w2 = self.rnorm2 + self.delta * self.rho2;
        (self.n as f64).powf(1.0 / (2.0 * self.r)) * (w1 - w2) / (2.0 * self.sigma + (self.rho1 + self.rho2))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingVerdict {
    pub t_n: f64,
    pub critical_value: f64,
    /// `t_n > critical_value`: evidence that `beta1` is worse than `beta2`.
    pub reject: bool,
    pub components: RankingComponents,
}

/// Tests `H0: worst-case error of beta1 <= worst-case error of beta2` with the
/// compact-support critical value `c_{rho,d} C^(1/r)`, `c_{rho,d}` taken
/// relative to the Euclidean norm.
pub fn rank_estimators(data: &Dataset, prob: &RobustProblem, beta1: &[f64], beta2: &[f64], diam: f64, alpha: f64) -> Result<RankingVerdict> {
    rank_estimators_with(data, prob, beta1, beta2, alpha, &CriticalRoute::Compact { diam }, BaseNorm::L2)
}

/// [`rank_estimators`] with an explicit critical-value route and base norm.
pub fn rank_estimators_with(
    data: &Dataset,
    prob: &RobustProblem,
    beta1: &[f64],
    beta2: &[f64],
    alpha: f64,
    route: &CriticalRoute,
    base: BaseNorm,
) -> Result<RankingVerdict> {
    prob.validate()?;
    check_dim(data.d(), beta1.len())?;
    check_dim(data.d(), beta2.len())?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::validation(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (n, d, r) = (data.n(), data.d(), prob.r);
    let c_rho_d = prob.penalty.embedding_constant(base, d)?.c_rho_d;
    let constant = match route {
        CriticalRoute::Compact { diam } => {
            if !(*diam > 0.0 && diam.is_finite()) {
                return Err(Error::validation(format!("support diameter must be positive, got {diam}")));
            }
            compact_constant(r, d, alpha, *diam)
        }
        CriticalRoute::General { s, gamma } => {
            if !(*s > 2.0 * r) || !(*gamma > 0.0) {
                return Err(Error::validation("general route needs s > 2r and gamma > 0"));
            }
            moment_constant(r, *s, d, alpha, *gamma) * (2.0 * n as f64 + 1.0).ln().powf(r / s)
        }
    };
    let components = RankingComponents {
        rnorm1: residual_rnorm(data, beta1, r)?,
        rnorm2: residual_rnorm(data, beta2, r)?,
        rho1: prob.penalty.eval(beta1)?,
        rho2: prob.penalty.eval(beta2)?,
        n,
        r,
        delta: prob.delta,
        sigma: prob.sigma,
    };
    let t_n = components.t_n();
    let critical_value = c_rho_d * constant.powf(1.0 / r);
    Ok(RankingVerdict { t_n, critical_value, reject: t_n > critical_value, components })
}
