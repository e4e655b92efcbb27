//! The robust regression problem `(r, sigma, delta, rho)` and coefficient
//! vectors with cached residual statistics.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::dataset::{residual_rnorm, Dataset};
use crate::error::{check_dim, Error, Result};
use crate::penalty::PenaltySpec;

/// Exponent `r >= 1`, outcome scale `sigma >= 1`, radius `delta >= 0` and
/// penalty `rho`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustProblem {
    pub r: f64,
    pub sigma: f64,
    pub delta: f64,
    pub penalty: PenaltySpec,
}

impl RobustProblem {
    pub fn new(r: f64, sigma: f64, delta: f64, penalty: PenaltySpec) -> Result<Self> {
        let p = RobustProblem { r, sigma, delta, penalty };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r >= 1.0 && self.r.is_finite()) {
            return Err(Error::validation(format!("r must be finite and >= 1, got {}", self.r)));
        }
        if !(self.sigma >= 1.0 && self.sigma.is_finite()) {
            return Err(Error::validation(format!("sigma must be finite and >= 1, got {}", self.sigma)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::validation(format!("delta must be finite and >= 0, got {}", self.delta)));
        }
        self.penalty.validate()
    }

    /// `E_Pn[|Y - X'beta|^r]^(1/r) + delta * rho(beta)`.
    pub fn objective(&self, data: &Dataset, beta: &[f64]) -> Result<f64> {
        Ok(residual_rnorm(data, beta, self.r)? + self.delta * self.penalty.eval(beta)?)
    }
}

/// A coefficient vector bound to a dataset and exponent; the residual
/// r-norm is computed on first use and cached.
#[derive(Debug)]
pub struct CoefficientVector<'a> {
    data: &'a Dataset,
    beta: Vec<f64>,
    r: f64,
    rnorm: OnceLock<f64>,
}

impl<'a> CoefficientVector<'a> {
    pub fn new(data: &'a Dataset, beta: Vec<f64>, r: f64) -> Result<Self> {
        check_dim(data.d(), beta.len())?;
        if !(r >= 1.0 && r.is_finite()) {
            return Err(Error::validation(format!("r must be finite and >= 1, got {r}")));
        }
        Ok(CoefficientVector { data, beta, r, rnorm: OnceLock::new() })
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn residual_rnorm(&self) -> f64 {
        *self.rnorm.get_or_init(|| {
            residual_rnorm(self.data, &self.beta, self.r).expect("dimensions checked at construction")
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_hyperparameters() {
        assert!(RobustProblem::new(0.5, 1.0, 0.1, PenaltySpec::L1).is_err());
        assert!(RobustProblem::new(2.0, 0.5, 0.1, PenaltySpec::L1).is_err());
        assert!(RobustProblem::new(2.0, 1.0, -0.1, PenaltySpec::L1).is_err());
        assert!(RobustProblem::new(2.0, 1.0, 0.0, PenaltySpec::L1).is_ok());
    }

    #[test]
    fn cached_rnorm_matches_direct() {
        let ds = Dataset::new(vec![vec![1.0], vec![2.0]], vec![1.0, 5.0]).unwrap();
        let cv = CoefficientVector::new(&ds, vec![2.0], 2.0).unwrap();
        let direct = residual_rnorm(&ds, &[2.0], 2.0).unwrap();
        assert_eq!(cv.residual_rnorm(), direct);
        assert_eq!(cv.residual_rnorm(), direct);
    }
}
