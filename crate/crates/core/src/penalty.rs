//! Convex penalties `rho` and the convex-analysis objects the worst-case
//! construction needs: a subgradient, its conjugate value, the dual norm,
//! the embedding constant `c_d`, and the proximal map used by the solvers.
//!
//! Supported kinds: `l1`, `lp(p)` for finite `p >= 1`, sorted-l1 (SLOPE)
//! with nonincreasing nonnegative weights, and the support function of a
//! finite symmetric point set.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numeric::{dot, norm_l1, norm_linf, norm_lp, sign, BaseNorm};

/// A convex, nonnegative, positively homogeneous and even penalty.
///
/// JSON form: `{"kind":"l1"}`, `{"kind":"lp","p":2}`,
/// `{"kind":"slope","lambda":[...]}`, `{"kind":"support_function","points":[[...],...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltySpec {
    L1,
    Lp { p: f64 },
    Slope { lambda: Vec<f64> },
    SupportFunction { points: Vec<Vec<f64>> },
}

/// A subgradient `beta_star` of `rho` at `beta`, with `rho*(beta_star)` and
/// the loading vector `beta_star - beta * rho*(beta_star) / (beta'beta)`
/// (just `beta_star` when `beta = 0`).
///
/// Invariants: `rho(beta) = beta_star'beta - conjugate_value`, and
/// `|gamma'adjusted_direction| <= rho(gamma)` for every `gamma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgradientCertificate {
    pub beta: Vec<f64>,
    pub beta_star: Vec<f64>,
    pub conjugate_value: f64,
    pub adjusted_direction: Vec<f64>,
}

/// Largest `c_d` with `c_d * ||(gamma, -1)|| <= rho(gamma) + 1` for all
/// `gamma`, and `c_rho_d = max(1 / c_d, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConstant {
    pub c_d: f64,
    pub c_rho_d: f64,
}

impl PenaltySpec {
    pub fn lp(p: f64) -> Result<Self> {
        let s = PenaltySpec::Lp { p };
        s.validate()?;
        Ok(s)
    }

    pub fn slope(lambda: Vec<f64>) -> Result<Self> {
        let s = PenaltySpec::Slope { lambda };
        s.validate()?;
        Ok(s)
    }

    pub fn support_function(points: Vec<Vec<f64>>) -> Result<Self> {
        let s = PenaltySpec::SupportFunction { points };
        s.validate()?;
        Ok(s)
    }

    /// Checks the kind-specific invariants.
    pub fn validate(&self) -> Result<()> {
        match self {
            PenaltySpec::L1 => Ok(()),
            PenaltySpec::Lp { p } => {
                if *p >= 1.0 && p.is_finite() {
                    Ok(())
                } else {
                    Err(Error::validation(format!("lp exponent must be finite and >= 1, got {p}")))
                }
            }
            PenaltySpec::Slope { lambda } => {
                if lambda.is_empty() {
                    return Err(Error::validation("slope weights are empty"));
                }
                if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                    return Err(Error::validation("slope weights must be finite and >= 0"));
                }
                if lambda.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::validation("slope weights must be nonincreasing"));
                }
                Ok(())
            }
            PenaltySpec::SupportFunction { points } => {
                let d = points.first().map(Vec::len).ok_or_else(|| Error::validation("support set is empty"))?;
                for k in points {
                    check_dim(d, k.len())?;
                    if k.iter().any(|v| !v.is_finite()) {
                        return Err(Error::validation("support set has a non-finite entry"));
                    }
                }
                for k in points {
                    let mirrored = points
                        .iter()
                        .any(|m| m.iter().zip(k).all(|(a, b)| (a + b).abs() <= 1e-12 * (1.0 + b.abs())));
                    if !mirrored {
                        return Err(Error::validation("support set is not symmetric (K != -K)"));
                    }
                }
                Ok(())
            }
        }
    }

    /// Intrinsic dimension, when the kind fixes one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            PenaltySpec::Slope { lambda } => Some(lambda.len()),
            PenaltySpec::SupportFunction { points } => points.first().map(Vec::len),
            _ => None,
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        match self.dim() {
            Some(d) => check_dim(d, len),
            None => Ok(()),
        }
    }

    /// True for kinds with a dual norm and embedding constant.
    pub fn is_norm(&self) -> bool {
        match self {
            PenaltySpec::L1 | PenaltySpec::Lp { .. } => true,
            PenaltySpec::Slope { lambda } => lambda[0] > 0.0,
            PenaltySpec::SupportFunction { .. } => false,
        }
    }

    fn require_norm(&self, what: &str) -> Result<()> {
        if self.is_norm() {
            Ok(())
        } else {
            Err(Error::unsupported(format!("{what} requires a norm penalty (l1, lp or slope with lambda_1 > 0)")))
        }
    }

    pub fn name(&self) -> String {
        match self {
            PenaltySpec::L1 => "l1".into(),
            PenaltySpec::Lp { p } => format!("lp({p})"),
            PenaltySpec::Slope { .. } => "slope".into(),
            PenaltySpec::SupportFunction { .. } => "support_function".into(),
        }
    }

    /// `rho(gamma)`.
    pub fn eval(&self, gamma: &[f64]) -> Result<f64> {
        self.check_len(gamma.len())?;
        Ok(match self {
            PenaltySpec::L1 => norm_l1(gamma),
            PenaltySpec::Lp { p } => norm_lp(gamma, *p),
            PenaltySpec::Slope { lambda } => {
                sorted_abs_desc(gamma).iter().zip(lambda).map(|(g, l)| g * l).sum()
            }
            PenaltySpec::SupportFunction { points } => {
                points.iter().map(|k| dot(k, gamma)).fold(f64::NEG_INFINITY, f64::max).max(0.0)
            }
        })
    }

    /// A subgradient at `beta` satisfying the loading condition; `beta = 0`
    /// yields `beta_star = 0`.
    pub fn subgradient_certificate(&self, beta: &[f64]) -> Result<SubgradientCertificate> {
        self.check_len(beta.len())?;
        let d = beta.len();
        let zero = beta.iter().all(|b| *b == 0.0);
        let beta_star: Vec<f64> = if zero {
            vec![0.0; d]
        } else {
            match self {
                PenaltySpec::L1 => beta.iter().map(|b| sign(*b)).collect(),
                PenaltySpec::Lp { p } => {
                    if *p == 1.0 {
                        beta.iter().map(|b| sign(*b)).collect()
                    } else {
                        let nrm = norm_lp(beta, *p);
                        beta.iter().map(|b| sign(*b) * (b.abs() / nrm).powf(p - 1.0)).collect()
                    }
                }
                PenaltySpec::Slope { lambda } => {
                    let mut out = vec![0.0; d];
                    for (rank, &j) in order_abs_desc(beta).iter().enumerate() {
                        out[j] = lambda[rank] * sign(beta[j]);
                    }
                    out
                }
                PenaltySpec::SupportFunction { points } => {
                    let mut best = &points[0];
                    let mut best_val = dot(best, beta);
                    for k in &points[1..] {
                        let v = dot(k, beta);
                        if v > best_val {
                            best = k;
                            best_val = v;
                        }
                    }
                    best.clone()
                }
            }
        };
        // Every supported kind is the support function of a set containing
        // beta_star, so the conjugate vanishes there.
        let conjugate_value = 0.0;
        let bb = dot(beta, beta);
        let adjusted_direction = if bb > 0.0 {
            beta_star.iter().zip(beta).map(|(s, b)| s - b * conjugate_value / bb).collect()
        } else {
            beta_star.clone()
        };
        Ok(SubgradientCertificate {
            beta: beta.to_vec(),
            beta_star,
            conjugate_value,
            adjusted_direction,
        })
    }

    /// `sup { x'y : rho(y) <= 1 }`.
    pub fn dual_norm(&self, x: &[f64]) -> Result<f64> {
        self.require_norm("dual_norm")?;
        self.check_len(x.len())?;
        Ok(match self {
            PenaltySpec::L1 => norm_linf(x),
            PenaltySpec::Lp { p } => {
                if *p == 1.0 {
                    norm_linf(x)
                } else {
                    norm_lp(x, p / (p - 1.0))
                }
            }
            PenaltySpec::Slope { lambda } => {
                // Unit-ball vertices are signed permutations of
                // (1,..,1,0,..,0) / (lambda_1 + .. + lambda_k).
                let a = sorted_abs_desc(x);
                let (mut s, mut l, mut best) = (0.0, 0.0, 0.0f64);
                for (ak, lk) in a.iter().zip(lambda) {
                    s += ak;
                    l += lk;
                    best = best.max(s / l);
                }
                best
            }
            PenaltySpec::SupportFunction { .. } => unreachable!("rejected by require_norm"),
        })
    }

    /// The embedding constant relative to `base` on `R^d` (covariate block).
    ///
    /// Along any ray `t * u` the ratio `(t rho(u) + 1) / ||(t u, -1)||` is
    /// quasi-concave in `t`, so its infimum sits at `t = 0` (value 1) or
    /// `t -> inf` (value `rho(u) / ||u||`). Hence
    /// `c_d = min(1, 1 / max{ ||v|| : v extreme in the rho unit ball })`,
    /// which has a closed form for every supported kind.
    pub fn embedding_constant(&self, base: BaseNorm, d: usize) -> Result<EmbeddingConstant> {
        self.require_norm("embedding_constant")?;
        self.check_len(d)?;
        if d == 0 {
            return Err(Error::validation("dimension must be >= 1"));
        }
        let df = d as f64;
        let ratio = match self {
            PenaltySpec::L1 => 1.0,
            PenaltySpec::Lp { p } => {
                let inv_s = match base {
                    BaseNorm::L1 => 1.0,
                    BaseNorm::L2 => 0.5,
                    BaseNorm::Linf => 0.0,
                };
                df.powf(-(inv_s - 1.0 / p).max(0.0))
            }
            PenaltySpec::Slope { lambda } => {
                let mut cum = 0.0;
                let mut best = f64::INFINITY;
                for (k, l) in lambda.iter().enumerate() {
                    cum += l;
                    let kf = (k + 1) as f64;
                    let vertex_norm = match base {
                        BaseNorm::L1 => kf,
                        BaseNorm::L2 => kf.sqrt(),
                        BaseNorm::Linf => 1.0,
                    };
                    best = best.min(cum / vertex_norm);
                }
                best
            }
            PenaltySpec::SupportFunction { .. } => unreachable!("rejected by require_norm"),
        };
        let c_d = ratio.min(1.0);
        Ok(EmbeddingConstant { c_d, c_rho_d: (1.0 / c_d).max(1.0) })
    }

    /// `argmin_z 0.5 ||z - v||^2 + t rho(z)` for `t >= 0`.
    pub fn prox(&self, v: &[f64], t: f64) -> Result<Vec<f64>> {
        self.check_len(v.len())?;
        if t == 0.0 {
            return Ok(v.to_vec());
        }
        match self {
            PenaltySpec::L1 => Ok(v.iter().map(|x| soft_threshold(*x, t)).collect()),
            PenaltySpec::Lp { p } if *p == 1.0 => Ok(v.iter().map(|x| soft_threshold(*x, t)).collect()),
            PenaltySpec::Lp { p } if *p == 2.0 => {
                let nrm = crate::numeric::norm_l2(v);
                if nrm <= t {
                    Ok(vec![0.0; v.len()])
                } else {
                    Ok(v.iter().map(|x| x * (1.0 - t / nrm)).collect())
                }
            }
            PenaltySpec::Lp { p } => {
                // Moreau: prox of a norm is the residual of projecting onto
                // the scaled dual ball.
                let q = p / (p - 1.0);
                let proj = project_lq_ball(v, q, t);
                Ok(v.iter().zip(proj).map(|(a, b)| a - b).collect())
            }
            PenaltySpec::Slope { lambda } => Ok(prox_sorted_l1(v, lambda, t)),
            PenaltySpec::SupportFunction { .. } => {
                Err(Error::unsupported("proximal map of a support-function penalty"))
            }
        }
    }
}

pub(crate) fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Indices sorted by `|v_j|` decreasing; ties keep index order.
fn order_abs_desc(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()));
    idx
}

fn sorted_abs_desc(v: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    a.sort_by(|x, y| y.total_cmp(x));
    a
}

/// Sorted-l1 proximal map via pool-adjacent-violators on the sorted
/// magnitudes.
fn prox_sorted_l1(v: &[f64], lambda: &[f64], t: f64) -> Vec<f64> {
    let order = order_abs_desc(v);
    // Blocks of (sum, count) whose means must be nonincreasing.
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(v.len());
    for (rank, &j) in order.iter().enumerate() {
        blocks.push((v[j].abs() - t * lambda[rank], 1));
        while blocks.len() >= 2 {
            let (s1, c1) = blocks[blocks.len() - 1];
            let (s0, c0) = blocks[blocks.len() - 2];
            if s0 / c0 as f64 <= s1 / c1 as f64 {
                blocks.pop();
                let last = blocks.len() - 1;
                blocks[last] = (s0 + s1, c0 + c1);
            } else {
                break;
            }
        }
    }
    let mut out = vec![0.0; v.len()];
    let mut rank = 0;
    for (s, c) in blocks {
        let level = (s / c as f64).max(0.0);
        for _ in 0..c {
            let j = order[rank];
            out[j] = sign(v[j]) * level;
            rank += 1;
        }
    }
    out
}

/// Euclidean projection of `v` onto `{ z : ||z||_q <= radius }`, `q > 1`.
fn project_lq_ball(v: &[f64], q: f64, radius: f64) -> Vec<f64> {
    if norm_lp(v, q) <= radius {
        return v.to_vec();
    }
    if q.is_infinite() {
        return v.iter().map(|x| x.clamp(-radius, radius)).collect();
    }
    if q == 2.0 {
        let s = radius / crate::numeric::norm_l2(v);
        return v.iter().map(|x| x * s).collect();
    }
    // KKT: z_j = sign(v_j) t_j with t_j + mu q t_j^(q-1) = |v_j|; mu chosen
    // so that ||z||_q = radius. Both levels solved by bisection.
    let solve_t = |a: f64, mu: f64| -> f64 {
        let (mut lo, mut hi) = (0.0, a);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid + mu * q * mid.powf(q - 1.0) > a {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-16 * a {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let norm_at = |mu: f64| -> f64 {
        let t: Vec<f64> = v.iter().map(|x| solve_t(x.abs(), mu)).collect();
        norm_lp(&t, q)
    };
    let mut hi = 1.0;
    while norm_at(hi) > radius {
        hi *= 4.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm_at(mid) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    v.iter().map(|x| sign(*x) * solve_t(x.abs(), hi)).collect()
}
