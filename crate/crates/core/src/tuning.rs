//! Radius recommendations, literature comparators, the special functions
//! they need, and covariate normalization.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numeric::BaseNorm;

/// Inputs shared by the radius formulas. `gamma` and `diam` are only read by
/// the formulas that need them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningInputs {
    pub n: usize,
    pub d: usize,
    pub r: f64,
    /// Moment order; must exceed `2r`.
    pub s: f64,
    pub alpha: f64,
    /// Moment bound `E ||(X, Y)||_*^s`.
    pub gamma: Option<f64>,
    /// Embedding constant of the penalty.
    pub c_d: f64,
    /// Support diameter.
    pub diam: Option<f64>,
    pub sigma: f64,
}

impl TuningInputs {
    fn check_common(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("n must be >= 1"));
        }
        if !(self.r >= 1.0 && self.r.is_finite()) {
            return Err(Error::validation(format!("r must be finite and >= 1, got {}", self.r)));
        }
        check_alpha(self.alpha)?;
        if !(self.c_d > 0.0 && self.c_d.is_finite()) {
            return Err(Error::validation(format!("c_d must be positive, got {}", self.c_d)));
        }
        Ok(())
    }

    fn check_moments(&self) -> Result<()> {
        if !(self.s > 2.0 * self.r && self.s.is_finite()) {
            return Err(Error::validation(format!("moment order s = {} must exceed 2r = {}", self.s, 2.0 * self.r)));
        }
        Ok(())
    }

    fn diam(&self) -> Result<f64> {
        match self.diam {
            Some(v) if v > 0.0 && v.is_finite() => Ok(v),
            Some(v) => Err(Error::validation(format!("support diameter must be positive, got {v}"))),
            None => Err(Error::validation("support diameter is required")),
        }
    }

    fn c_rho_d(&self) -> f64 {
        (1.0 / self.c_d).max(1.0)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_unit_interval(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("probability must lie in (0, 1), got {p}")))
    }
}

/// Finite-sample constant under a moment bound `gamma`:
/// `2^r r (180 sqrt(d+2) + sqrt(2 log(1/a)) + sqrt(gamma/a) 8/(s/2 - r) sqrt(log(8/a) + d + 2))`.
pub fn moment_constant(r: f64, s: f64, d: usize, alpha: f64, gamma: f64) -> f64 {
    let d2 = d as f64 + 2.0;
    let inner = 180.0 * d2.sqrt()
        + (2.0 * (1.0 / alpha).ln()).sqrt()
        + (gamma / alpha).sqrt() * (8.0 / (s / 2.0 - r)) * ((8.0 / alpha).ln() + d2).sqrt();
    2f64.powf(r) * r * inner
}

/// Finite-sample constant under compact support:
/// `(180 sqrt(d+2) + sqrt(2 log(1/a))) diam^r`.
pub fn compact_constant(r: f64, d: usize, alpha: f64, diam: f64) -> f64 {
    (180.0 * (d as f64 + 2.0).sqrt() + (2.0 * (1.0 / alpha).ln()).sqrt()) * diam.powf(r)
}

/// `max(1/c_d, 1) [C log(2n+1)^(r/s) / sqrt(n)]^(1/r)` with the moment constant.
pub fn delta_general(t: &TuningInputs) -> Result<f64> {
    t.check_common()?;
    t.check_moments()?;
    let gamma = match t.gamma {
        Some(g) if g > 0.0 && g.is_finite() => g,
        Some(g) => return Err(Error::validation(format!("moment bound must be positive, got {g}"))),
        None => return Err(Error::validation("moment bound gamma is required")),
    };
    let c = moment_constant(t.r, t.s, t.d, t.alpha, gamma);
    let n = t.n as f64;
    Ok(t.c_rho_d() * (c * (2.0 * n + 1.0).ln().powf(t.r / t.s) / n.sqrt()).powf(1.0 / t.r))
}

/// `max(1/c_d, 1) [C / sqrt(n)]^(1/r)` with the compact-support constant.
pub fn delta_compact(t: &TuningInputs) -> Result<f64> {
    t.check_common()?;
    let c = compact_constant(t.r, t.d, t.alpha, t.diam()?);
    Ok(t.c_rho_d() * (c / (t.n as f64).sqrt()).powf(1.0 / t.r))
}

/// Pivotal recommendation after covariate normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PivotalDelta {
    pub delta: f64,
    /// Empirical plug-in `max((mean |y|^s)^(1/s), 1)`.
    pub sigma: f64,
    /// Always `2^s`.
    pub gamma: f64,
}

/// [`delta_general`] with the moment bound pinned to `2^s`; `sigma` is the
/// empirical s-th moment plug-in of the outcome, floored at 1.
///
/// The covariates are assumed already normalized by [`normalize_covariates`].
pub fn delta_pivotal(data: &Dataset, r: f64, s: f64, alpha: f64, c_d: f64) -> Result<PivotalDelta> {
    let gamma = 2f64.powf(s);
    let t = TuningInputs {
        n: data.n(),
        d: data.d(),
        r,
        s,
        alpha,
        gamma: Some(gamma),
        c_d,
        diam: None,
        sigma: 1.0,
    };
    let delta = delta_general(&t)?;
    Ok(PivotalDelta { delta, sigma: outcome_moment_sigma(data.y(), s), gamma })
}

/// `max((mean |y|^s)^(1/s), 1)`; `||(0,...,0,y)||_* = |y|` for every base norm.
pub fn outcome_moment_sigma(y: &[f64], s: f64) -> f64 {
    crate::numeric::mean_rnorm(y, s).max(1.0)
}

/// Empirical plug-in for the moment bound, `mean_i ||(x_i, y_i)||_*^s`, where
/// `*` is the dual of `base`. This is a plug-in, not an oracle value.
pub fn gamma_plugin(data: &Dataset, s: f64, base: BaseNorm) -> f64 {
    let dual = base.dual();
    let mut z = Vec::with_capacity(data.d() + 1);
    (0..data.n())
        .map(|i| {
            z.clear();
            z.extend_from_slice(data.x_row(i));
            z.push(data.y()[i]);
            dual.norm(&z).powf(s)
        })
        .sum::<f64>()
        / data.n() as f64
}

/// `c_{rho,d} [q_{1-alpha} / sqrt(n)]^(1/r) diam` with `q` the Kolmogorov
/// quantile and `c_{rho,d} = max(1/c_d, 1)`.
pub fn delta_asymptotic(t: &TuningInputs) -> Result<f64> {
    t.check_common()?;
    let q = kolmogorov_quantile(1.0 - t.alpha)?;
    Ok(t.c_rho_d() * (q / (t.n as f64).sqrt()).powf(1.0 / t.r) * t.diam()?)
}

/// Classical square-root LASSO radius for the uniform design:
/// `n^(-1/2) 3^(-1/2) sigma lambda Phi^-1(1/2 + (1 - alpha)^(1/d) / 2)`.
pub fn delta_bcw_sqrt_lasso(n: usize, d: usize, alpha: f64, sigma_noise: f64, lambda_scale: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if n == 0 || d == 0 {
        return Err(Error::validation("n and d must be >= 1"));
    }
    let p = 0.5 + (1.0 - alpha).powf(1.0 / d as f64) / 2.0;
    let q = if p >= 1.0 { f64::INFINITY } else { normal_quantile(p)? };
    Ok(sigma_noise * lambda_scale * q / (3f64.sqrt() * (n as f64).sqrt()))
}

/// Practice variant `1.1 Phi^-1(1 - alpha/(2d)) / sqrt(n)`.
pub fn delta_bcw_practice(n: usize, d: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if n == 0 || d == 0 {
        return Err(Error::validation("n and d must be >= 1"));
    }
    Ok(1.1 * normal_quantile(1.0 - alpha / (2.0 * d as f64))? / (n as f64).sqrt())
}

/// Profile-function comparator `pi/(pi-2) Phi^-1(1 - alpha/(2d)) / sqrt(n)`.
///
/// The sliced-ball analogue of this target never needs a larger radius, so
/// this value is an upper bound for it.
pub fn delta_blanchet_comparator(n: usize, d: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if n == 0 || d == 0 {
        return Err(Error::validation("n and d must be >= 1"));
    }
    let pi = std::f64::consts::PI;
    Ok(pi / (pi - 2.0) * normal_quantile(1.0 - alpha / (2.0 * d as f64))? / (n as f64).sqrt())
}

/// Kolmogorov distribution function `P(sup |B(t)| <= x)`.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < 1.0 {
        // Theta-transformed series; the alternating form converges slowly here.
        let c = (2.0 * std::f64::consts::PI).sqrt() / x;
        let e = std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let mut s = 0.0;
        for k in 1.. {
            let m = (2 * k - 1) as f64;
            let term = (-m * m * e).exp();
            s += term;
            if term < 1e-16 * s.max(1e-300) || term == 0.0 {
                break;
            }
        }
        return (c * s).min(1.0);
    }
    let mut s = 0.0;
    for k in 1.. {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        if term < 1e-16 {
            break;
        }
        s += if k % 2 == 1 { term } else { -term };
    }
    1.0 - 2.0 * s
}

/// Inverse of [`kolmogorov_cdf`] by bisection on `[1e-6, 5]` to width `1e-12`.
pub fn kolmogorov_quantile(p: f64) -> Result<f64> {
    check_unit_interval(p)?;
    let (mut lo, mut hi) = (1e-6, 5.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Standard normal distribution function via `erfc`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse standard normal distribution function: rational approximation
/// followed by Newton polishing against [`normal_cdf`].
pub fn normal_quantile(p: f64) -> Result<f64> {
    check_unit_interval(p)?;
    const A: [f64; 6] = [-3.969683028665376e1, 2.209460984245205e2, -2.759285104469687e2, 1.383577518672690e2, -3.066479806614716e1, 2.506628277459239];
    const B: [f64; 5] = [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    const C: [f64; 6] = [-7.784894002430293e-3, -3.223964580411365e-1, -2.400758277161838, -2.549732539343734, 4.374664141464968, 2.938163982698783];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let mut x = if p < 0.02425 {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - 0.02425 {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let t = q * q;
        (((((A[0] * t + A[1]) * t + A[2]) * t + A[3]) * t + A[4]) * t + A[5]) * q
            / (((((B[0] * t + B[1]) * t + B[2]) * t + B[3]) * t + B[4]) * t + 1.0)
    };
    for _ in 0..2 {
        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if pdf > 0.0 {
            x -= (normal_cdf(x) - p) / pdf;
        }
    }
    Ok(x)
}

/// Normalized dataset and the scale the covariates were divided by.
#[derive(Clone, Debug)]
pub struct Normalized {
    pub data: Dataset,
    pub scale: f64,
}

/// Divides every covariate row by `(mean_i ||(x_i, 0)||_*^s)^(1/s)`, where `*`
/// is the dual of `base`, so the normalized moment equals one.
pub fn normalize_covariates(data: &Dataset, s: f64, base: BaseNorm) -> Result<Normalized> {
    if !(s >= 1.0 && s.is_finite()) {
        return Err(Error::validation(format!("moment order s must be >= 1, got {s}")));
    }
    let dual = base.dual();
    let norms: Vec<f64> = (0..data.n()).map(|i| dual.norm(data.x_row(i))).collect();
    let scale = crate::numeric::mean_rnorm(&norms, s);
    if scale == 0.0 {
        return Err(Error::Degenerate("all covariates are zero".into()));
    }
    let x: Vec<f64> = data.x_flat().iter().map(|v| v / scale).collect();
    let out = Dataset::from_flat(data.d(), x, data.y().to_vec())?
        .with_names(data.x_names().to_vec(), data.y_name().to_string())?;
    Ok(Normalized { data: out, scale })
}

/// `sigma lambda sqrt(d + (||beta||_1 + 2/lambda)^2)` for the uniform design.
pub fn support_diameter_uniform_design(sigma: f64, lambda: f64, d: usize, beta: &[f64]) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::validation(format!("lambda must be positive, got {lambda}")));
    }
    let b1 = crate::numeric::norm_l1(beta);
    Ok(sigma * lambda * (d as f64 + (b1 + 2.0 / lambda).powi(2)).sqrt())
}

/// Sample size below which the large radius is expected to zero out the
/// square-root LASSO: `9 ||beta/||beta||_2||_inf^-4 q^2 (d + (||beta||_1 + 2/lambda)^2)^2`.
pub fn zero_solution_sample_bound(beta: &[f64], lambda: f64, d: usize, alpha: f64) -> Result<f64> {
    let q = kolmogorov_quantile(1.0 - alpha)?;
    zero_solution_sample_bound_with_quantile(beta, lambda, d, q)
}

/// [`zero_solution_sample_bound`] with the Kolmogorov quantile supplied.
pub fn zero_solution_sample_bound_with_quantile(beta: &[f64], lambda: f64, d: usize, q: f64) -> Result<f64> {
    let b2 = crate::numeric::norm_l2(beta);
    if b2 == 0.0 {
        return Err(Error::validation("beta must be nonzero"));
    }
    if !(lambda > 0.0) {
        return Err(Error::validation(format!("lambda must be positive, got {lambda}")));
    }
    let ratio = crate::numeric::norm_linf(beta) / b2;
    let b1 = crate::numeric::norm_l1(beta);
    Ok(9.0 * ratio.powi(-4) * q * q * (d as f64 + (b1 + 2.0 / lambda).powi(2)).powi(2))
}
