//! Numeric helpers: tolerant comparison, scaled power means, vector norms
//! and a golden-section line search.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Default absolute-plus-relative tolerance.
pub const TOL: f64 = 1e-9;

/// `|a - b| <= tol * (1 + max(|a|, |b|))`.
pub fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn norm_l2(v: &[f64]) -> f64 {
    let m = norm_linf(v);
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    m * v.iter().map(|x| (x / m) * (x / m)).sum::<f64>().sqrt()
}

pub fn norm_linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// `(sum |v_i|^p)^(1/p)` for finite `p >= 1`, evaluated on a max-scaled copy.
pub fn norm_lp(v: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        return norm_l1(v);
    }
    if p == 2.0 {
        return norm_l2(v);
    }
    if p.is_infinite() {
        return norm_linf(v);
    }
    let m = norm_linf(v);
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    m * v.iter().map(|x| (x.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Power mean `((1/n) sum |v_i|^r)^(1/r)`; zero for an empty slice.
pub fn mean_rnorm(v: &[f64], r: f64) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let m = norm_linf(v);
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let s: f64 = if r == 1.0 {
        v.iter().map(|x| x.abs() / m).sum()
    } else if r == 2.0 {
        v.iter().map(|x| (x / m) * (x / m)).sum()
    } else {
        v.iter().map(|x| (x.abs() / m).powf(r)).sum()
    };
    if r == 1.0 {
        m * s / n
    } else if r == 2.0 {
        m * (s / n).sqrt()
    } else {
        m * (s / n).powf(1.0 / r)
    }
}

pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A base norm on `R^k` used to normalize projection directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseNorm {
    L1,
    L2,
    Linf,
}

impl BaseNorm {
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            BaseNorm::L1 => norm_l1(v),
            BaseNorm::L2 => norm_l2(v),
            BaseNorm::Linf => norm_linf(v),
        }
    }

    /// Dual norm: l1 and linf swap, l2 is self-dual.
    pub fn dual(self) -> BaseNorm {
        match self {
            BaseNorm::L1 => BaseNorm::Linf,
            BaseNorm::L2 => BaseNorm::L2,
            BaseNorm::Linf => BaseNorm::L1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BaseNorm::L1 => "l1",
            BaseNorm::L2 => "l2",
            BaseNorm::Linf => "linf",
        }
    }
}

impl fmt::Display for BaseNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaseNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(BaseNorm::L1),
            "l2" => Ok(BaseNorm::L2),
            "linf" | "inf" => Ok(BaseNorm::Linf),
            other => Err(Error::validation(format!(
                "unknown norm `{other}` (expected l1, l2 or linf)"
            ))),
        }
    }
}

/// Minimizes a unimodal `f` on `[a, b]`; returns `(argmin, min)`.
///
/// Stops once the bracket is narrower than `tol * (1 + |x|)`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..500 {
        if (b - a).abs() <= tol * (1.0 + c.abs().max(d.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
