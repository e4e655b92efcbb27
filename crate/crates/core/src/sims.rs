//! Data generators and replication experiments.
//!
//! Replication `k` draws its training rows from stream `k` and its test rows
//! from stream `k + TEST_STREAM`, one row at a time, so training sets of
//! different sizes within a replication share their leading rows. Replications
//! run on the current rayon pool and are collected in index order, which keeps
//! results bit-identical for any thread count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{residual_rnorm, Dataset};
use crate::dro::{coupled_rho_msw, worst_case_distribution};
use crate::error::{Error, Result};
use crate::numeric::{norm_l1, norm_l2};
use crate::penalty::PenaltySpec;
use crate::problem::RobustProblem;
use crate::rng::Rng;
use crate::solver::{solve_lasso, solve_ols, solve_penalized, solve_ridge, SolverOptions};
use crate::tuning::{delta_asymptotic, delta_bcw_practice, delta_bcw_sqrt_lasso, support_diameter_uniform_design, TuningInputs};

const TEST_STREAM: u64 = 1 << 32;

/// Entries with `|beta_j|` above this count as selected.
pub const NONZERO_THRESHOLD: f64 = 1e-8;

/// `x = sigma lambda U[0,1]^d`, `y = x'beta + sigma U[-1,1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformDesign {
    pub beta: Vec<f64>,
    pub sigma: f64,
    pub lambda_scale: f64,
}

/// `x ~ N(0, I_d)`, `y = x'beta + sigma_eps N(0,1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianDesign {
    pub beta: Vec<f64>,
    pub sigma_eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Design {
    Uniform(UniformDesign),
    Gaussian(GaussianDesign),
}

impl Design {
    pub fn beta(&self) -> &[f64] {
        match self {
            Design::Uniform(u) => &u.beta,
            Design::Gaussian(g) => &g.beta,
        }
    }

    pub fn d(&self) -> usize {
        self.beta().len()
    }

    /// Standard deviation of the noise term.
    pub fn noise_sd(&self) -> f64 {
        match self {
            Design::Uniform(u) => u.sigma / 3f64.sqrt(),
            Design::Gaussian(g) => g.sigma_eps,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d() == 0 || self.beta().iter().any(|b| !b.is_finite()) {
            return Err(Error::validation("design needs a finite, nonempty beta"));
        }
        match self {
            Design::Uniform(u) if !(u.sigma > 0.0 && u.lambda_scale > 0.0) => {
                Err(Error::validation("uniform design needs sigma > 0 and lambda_scale > 0"))
            }
            Design::Gaussian(g) if !(g.sigma_eps >= 0.0) => Err(Error::validation("sigma_eps must be >= 0")),
            _ => Ok(()),
        }
    }
}

/// Draws `n` rows from the design on the given stream.
pub fn generate(design: &Design, n: usize, rng: &Rng) -> Result<Dataset> {
    design.validate()?;
    if n == 0 {
        return Err(Error::validation("n must be >= 1"));
    }
    let d = design.d();
    let mut g = rng.generator();
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let start = x.len();
        match design {
            Design::Uniform(u) => {
                for _ in 0..d {
                    x.push(u.sigma * u.lambda_scale * g.random::<f64>());
                }
                let eps = 2.0 * g.random::<f64>() - 1.0;
                y.push(crate::numeric::dot(&x[start..], &u.beta) + u.sigma * eps);
            }
            Design::Gaussian(gd) => {
                for _ in 0..d {
                    x.push(g.sample(StandardNormal));
                }
                let eps: f64 = g.sample(StandardNormal);
                y.push(crate::numeric::dot(&x[start..], &gd.beta) + gd.sigma_eps * eps);
            }
        }
    }
    Dataset::from_flat(d, x, y)
}

/// Coefficient estimators compared in the experiments. Penalty levels follow
/// the solver conventions: ridge `(X'X + n lambda I)`, LASSO
/// `(1/(2n)) ||y - X beta||^2 + lambda ||beta||_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    Ols,
    Ridge { lambda: f64 },
    Lasso { lambda: f64 },
    SqrtLasso { delta: f64 },
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Ols => "ols",
            Estimator::Ridge { .. } => "ridge",
            Estimator::Lasso { .. } => "lasso",
            Estimator::SqrtLasso { .. } => "sqrt_lasso",
        }
    }

    pub fn fit(&self, data: &Dataset, opts: &SolverOptions) -> Result<Vec<f64>> {
        match self {
            Estimator::Ols => solve_ols(data),
            Estimator::Ridge { lambda } => solve_ridge(data, *lambda),
            Estimator::Lasso { lambda } => Ok(solve_lasso(data, *lambda, opts)?.beta_hat),
            Estimator::SqrtLasso { delta } => Ok(solve_penalized(data, &sqrt_lasso_problem(*delta)?, opts)?.beta_hat),
        }
    }
}

fn sqrt_lasso_problem(delta: f64) -> Result<RobustProblem> {
    RobustProblem::new(2.0, 1.0, delta, PenaltySpec::L1)
}

/// Radius rules for the square-root LASSO.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRule {
    /// Asymptotic recommendation from the support diameter (uniform design only).
    New,
    /// Classical uniform-design recommendation.
    Bcw,
    /// `1.1 Phi^-1(1 - alpha/(2d)) / sqrt(n)`.
    Practice,
    Fixed(f64),
}

impl DeltaRule {
    pub fn label(&self) -> String {
        match self {
            DeltaRule::New => "new".into(),
            DeltaRule::Bcw => "bcw".into(),
            DeltaRule::Practice => "practice".into(),
            DeltaRule::Fixed(v) => format!("fixed({v})"),
        }
    }

    pub fn delta(&self, design: &Design, n: usize, alpha: f64) -> Result<f64> {
        let d = design.d();
        match (self, design) {
            (DeltaRule::New, Design::Uniform(u)) => {
                let diam = support_diameter_uniform_design(u.sigma, u.lambda_scale, d, &u.beta)?;
                // The l1 penalty embeds with constant 1 against the Euclidean norm.
                let t = TuningInputs { n, d, r: 2.0, s: 5.0, alpha, gamma: None, c_d: 1.0, diam: Some(diam), sigma: 1.0 };
                delta_asymptotic(&t)
            }
            (DeltaRule::New, Design::Gaussian(_)) => Err(Error::validation("the new rule needs a bounded design")),
            (DeltaRule::Bcw, Design::Uniform(u)) => delta_bcw_sqrt_lasso(n, d, alpha, u.sigma, u.lambda_scale),
            (DeltaRule::Bcw, Design::Gaussian(_)) => Err(Error::validation("the bcw rule is derived for the uniform design")),
            (DeltaRule::Practice, _) => delta_bcw_practice(n, d, alpha),
            (DeltaRule::Fixed(v), _) if *v >= 0.0 && v.is_finite() => Ok(*v),
            (DeltaRule::Fixed(v), _) => Err(Error::validation(format!("fixed delta must be finite and >= 0, got {v}"))),
        }
    }
}

/// One (replication, sample size, estimator) outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub seed: u64,
    pub rep: u64,
    pub n: usize,
    pub estimator: String,
    pub train_rmspe: f64,
    pub test_rmspe: Option<f64>,
    pub nonzero_count: usize,
    pub bound_lhs: Option<f64>,
    pub bound_rhs: Option<f64>,
    /// Tuning level used, when the estimator is penalized.
    pub tuning: Option<f64>,
    /// Reparameterized LASSO level over the oracle LASSO level.
    pub lambda_ratio: Option<f64>,
    /// Sup-norm distance between reparameterized LASSO and square-root LASSO.
    pub coef_gap: Option<f64>,
}

impl Record {
    fn new(seed: u64, rep: u64, n: usize, estimator: String, train_rmspe: f64, beta: &[f64]) -> Self {
        Record {
            seed,
            rep,
            n,
            estimator,
            train_rmspe,
            test_rmspe: None,
            nonzero_count: beta.iter().filter(|b| b.abs() > NONZERO_THRESHOLD).count(),
            bound_lhs: None,
            bound_rhs: None,
            tuning: None,
            lambda_ratio: None,
            coef_gap: None,
        }
    }
}

/// Per (n, estimator) summaries, recomputable from the records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub estimator: String,
    pub count: usize,
    pub mean_train_rmspe: f64,
    pub mean_test_rmspe: Option<f64>,
    pub nonzero_histogram: Vec<usize>,
    pub bound_coverage: Option<f64>,
    pub mean_lambda_ratio: Option<f64>,
    pub max_coef_gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub d: usize,
    pub records: Vec<Record>,
    pub aggregates: Vec<Aggregate>,
}

fn mean_of(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (c > 0).then(|| s / c as f64)
}

/// Groups records by `(n, estimator)` in sorted order.
pub fn aggregate(records: &[Record], d: usize) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(usize, String), Vec<&Record>> = BTreeMap::new();
    for r in records {
        groups.entry((r.n, r.estimator.clone())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((n, estimator), rs)| {
            let mut hist = vec![0; d + 1];
            for r in &rs {
                hist[r.nonzero_count.min(d)] += 1;
            }
            let bounds: Vec<bool> = rs
                .iter()
                .filter_map(|r| Some(r.bound_lhs? <= r.bound_rhs?))
                .collect();
            Aggregate {
                n,
                count: rs.len(),
                mean_train_rmspe: mean_of(rs.iter().map(|r| r.train_rmspe)).unwrap_or(f64::NAN),
                mean_test_rmspe: mean_of(rs.iter().filter_map(|r| r.test_rmspe)),
                nonzero_histogram: hist,
                bound_coverage: mean_of(bounds.iter().map(|b| *b as u8 as f64)),
                mean_lambda_ratio: mean_of(rs.iter().filter_map(|r| r.lambda_ratio)),
                max_coef_gap: rs.iter().filter_map(|r| r.coef_gap).reduce(f64::max),
                estimator,
            }
        })
        .collect()
}

fn finish(experiment: &str, d: usize, records: Vec<Record>) -> ExperimentResult {
    let aggregates = aggregate(&records, d);
    ExperimentResult { experiment: experiment.to_string(), d, records, aggregates }
}

fn rmspe(data: &Dataset, beta: &[f64]) -> Result<f64> {
    residual_rnorm(data, beta, 2.0)
}

fn tight() -> SolverOptions {
    SolverOptions { kkt_tol: 1e-10, ..Default::default() }
}

/// Square-root LASSO selection counts for each `(n, rule)`.
pub fn run_selection_histogram(design: &UniformDesign, n_grid: &[usize], reps: usize, rules: &[DeltaRule], alpha: f64, rng: &Rng) -> Result<ExperimentResult> {
    let design = Design::Uniform(design.clone());
    let max_n = n_grid.iter().copied().max().ok_or_else(|| Error::validation("empty n grid"))?;
    let per_rep: Vec<Result<Vec<Record>>> = (0..reps as u64)
        .into_par_iter()
        .map(|k| {
            let full = generate(&design, max_n, &rng.with_stream(rng.stream.wrapping_add(k)))?;
            let mut out = Vec::new();
            for &n in n_grid {
                let data = full.head(n)?;
                for rule in rules {
                    let delta = rule.delta(&design, n, alpha)?;
                    let beta = Estimator::SqrtLasso { delta }.fit(&data, &tight())?;
                    let mut rec = Record::new(rng.seed, k, n, format!("sqrt_lasso[{}]", rule.label()), rmspe(&data, &beta)?, &beta);
                    rec.tuning = Some(delta);
                    out.push(rec);
                }
            }
            Ok(out)
        })
        .collect();
    let mut records = Vec::new();
    for r in per_rep {
        records.extend(r?);
    }
    Ok(finish("histogram", design.d(), records))
}

/// Test-set construction for [`run_train_test`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    /// Fresh draws from the design.
    None,
    /// Fresh draws moved to the worst case at radius `delta` (`sigma` in the
    /// outcome direction, l1 loadings) computed at each estimator's fit.
    WorstCase { delta: f64, sigma: f64 },
}

/// Train/test prediction error for each estimator. Every estimator sees the
/// same training and (unperturbed) test draws within a replication.
#[allow(clippy::too_many_arguments)]
pub fn run_train_test(
    design: &Design,
    n_train: usize,
    n_test: usize,
    perturb: &Perturbation,
    estimators: &[Estimator],
    reps: usize,
    self_check: bool,
    rng: &Rng,
) -> Result<ExperimentResult> {
    let per_rep: Vec<Result<Vec<Record>>> = (0..reps as u64)
        .into_par_iter()
        .map(|k| {
            let stream = rng.stream.wrapping_add(k);
            let train = generate(design, n_train, &rng.with_stream(stream))?;
            let test = generate(design, n_test, &rng.with_stream(stream.wrapping_add(TEST_STREAM)))?;
            let mut out = Vec::new();
            for est in estimators {
                let beta = est.fit(&train, &tight())?;
                let mut rec = Record::new(rng.seed, k, n_train, est.name().to_string(), rmspe(&train, &beta)?, &beta);
                rec.tuning = match est {
                    Estimator::Ols => None,
                    Estimator::Ridge { lambda } | Estimator::Lasso { lambda } => Some(*lambda),
                    Estimator::SqrtLasso { delta } => Some(*delta),
                };
                rec.test_rmspe = Some(match perturb {
                    Perturbation::None => rmspe(&test, &beta)?,
                    Perturbation::WorstCase { delta, sigma } => {
                        let prob = RobustProblem::new(2.0, *sigma, *delta, PenaltySpec::L1)?;
                        let ps = worst_case_distribution(&test, &prob, &beta)?;
                        if self_check {
                            let v = coupled_rho_msw(&ps)?;
                            if v > delta + 1e-9 * delta.max(1.0) {
                                return Err(Error::Degenerate(format!("test perturbation leaves the ball: {v} > {delta}")));
                            }
                        }
                        rmspe(&ps.perturbed, &beta)?
                    }
                });
                out.push(rec);
            }
            Ok(out)
        })
        .collect();
    let mut records = Vec::new();
    for r in per_rep {
        records.extend(r?);
    }
    Ok(finish("traintest", design.d(), records))
}

/// The comparison set used for the Gaussian design: OLS, ridge at the
/// `sigma_eps d / ||beta||^2` oracle (converted to the `n lambda` scaling),
/// LASSO at `delta sigma_eps`, and the square-root LASSO at `delta`, with
/// `delta` the practice rule.
pub fn comparison_estimators(design: &GaussianDesign, n: usize, alpha: f64) -> Result<Vec<Estimator>> {
    let d = design.beta.len();
    let delta = delta_bcw_practice(n, d, alpha)?;
    let b2 = norm_l2(&design.beta).powi(2);
    if b2 == 0.0 {
        return Err(Error::validation("ridge oracle needs beta != 0"));
    }
    Ok(vec![
        Estimator::Ols,
        Estimator::Ridge { lambda: design.sigma_eps * d as f64 / (n as f64 * b2) },
        Estimator::Lasso { lambda: delta * design.sigma_eps },
        Estimator::SqrtLasso { delta },
    ])
}

/// Test distribution for [`verify_generalization_bound`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundProtocol {
    /// Fresh draws moved to the worst case at radius `epsilon`, built at the
    /// design's coefficients; the test law is within `epsilon` of the design.
    WithinBall,
    /// Fresh draws moved to the worst case at the radius given by `radius`
    /// (the adversarial test set), built at the design's coefficients, with
    /// the bound crediting only `epsilon`.
    Adversarial { radius: DeltaRule },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCoverage {
    pub coverage: f64,
    pub result: ExperimentResult,
}

/// Fraction of replications in which
/// `rn_Q(beta_hat) <= rn_Pn(beta_hat) + (delta + epsilon)(sigma + ||beta_hat||_1)`
/// at the square-root LASSO fit, with `sigma = 1`.
#[allow(clippy::too_many_arguments)]
pub fn verify_generalization_bound(
    design: &UniformDesign,
    n: usize,
    n_test: usize,
    reps: usize,
    rule: &DeltaRule,
    epsilon: f64,
    protocol: &BoundProtocol,
    alpha: f64,
    rng: &Rng,
) -> Result<BoundCoverage> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::validation(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    let design_e = Design::Uniform(design.clone());
    let delta = rule.delta(&design_e, n, alpha)?;
    let radius = match protocol {
        BoundProtocol::WithinBall => epsilon,
        BoundProtocol::Adversarial { radius } => radius.delta(&design_e, n, alpha)?,
    };
    let sigma = 1.0;
    let q_prob = RobustProblem::new(2.0, sigma, radius, PenaltySpec::L1)?;
    let per_rep: Vec<Result<Record>> = (0..reps as u64)
        .into_par_iter()
        .map(|k| {
            let stream = rng.stream.wrapping_add(k);
            let train = generate(&design_e, n, &rng.with_stream(stream))?;
            let fresh = generate(&design_e, n_test, &rng.with_stream(stream.wrapping_add(TEST_STREAM)))?;
            let q = worst_case_distribution(&fresh, &q_prob, &design.beta)?.perturbed;
            let beta = Estimator::SqrtLasso { delta }.fit(&train, &tight())?;
            let train_rn = rmspe(&train, &beta)?;
            let mut rec = Record::new(rng.seed, k, n, format!("sqrt_lasso[{}]", rule.label()), train_rn, &beta);
            let test_rn = rmspe(&q, &beta)?;
            rec.test_rmspe = Some(test_rn);
            rec.bound_lhs = Some(test_rn);
            rec.bound_rhs = Some(train_rn + (delta + epsilon) * (sigma + norm_l1(&beta)));
            rec.tuning = Some(delta);
            Ok(rec)
        })
        .collect();
    let records: Vec<Record> = per_rep.into_iter().collect::<Result<_>>()?;
    let holds = records.iter().filter(|r| r.bound_lhs <= r.bound_rhs).count();
    let coverage = holds as f64 / records.len().max(1) as f64;
    Ok(BoundCoverage { coverage, result: finish("bound", design.beta.len(), records) })
}

/// For each replication: fit the square-root LASSO at the practice radius,
/// refit the LASSO at `lambda = delta rn_2(beta_sql)`, and compare
/// coefficients, tuning levels (against `delta sigma_eps`) and worst-case
/// test error.
pub fn run_lasso_equivalence(design: &GaussianDesign, n_grid: &[usize], n_test: usize, reps: usize, alpha: f64, rng: &Rng) -> Result<ExperimentResult> {
    let d = design.beta.len();
    let design_e = Design::Gaussian(design.clone());
    let max_n = n_grid.iter().copied().max().ok_or_else(|| Error::validation("empty n grid"))?;
    let opts = SolverOptions { kkt_tol: 1e-13, ..Default::default() };
    let per_rep: Vec<Result<Vec<Record>>> = (0..reps as u64)
        .into_par_iter()
        .map(|k| {
            let stream = rng.stream.wrapping_add(k);
            let full = generate(&design_e, max_n, &rng.with_stream(stream))?;
            let test = generate(&design_e, n_test, &rng.with_stream(stream.wrapping_add(TEST_STREAM)))?;
            let mut out = Vec::new();
            for &n in n_grid {
                let train = full.head(n)?;
                let delta = delta_bcw_practice(n, d, alpha)?;
                let sql = Estimator::SqrtLasso { delta }.fit(&train, &opts)?;
                let sql_rn = rmspe(&train, &sql)?;
                let lambda = delta * sql_rn;
                let lasso = solve_lasso(&train, lambda, &opts)?.beta_hat;
                let prob = RobustProblem::new(2.0, 1.0, delta, PenaltySpec::L1)?;
                let wc = |beta: &[f64]| -> Result<f64> { rmspe(&worst_case_distribution(&test, &prob, beta)?.perturbed, beta) };
                let mut a = Record::new(rng.seed, k, n, "sqrt_lasso".into(), sql_rn, &sql);
                a.tuning = Some(delta);
                a.test_rmspe = Some(wc(&sql)?);
                let mut b = Record::new(rng.seed, k, n, "lasso_reparam".into(), rmspe(&train, &lasso)?, &lasso);
                b.tuning = Some(lambda);
                b.test_rmspe = Some(wc(&lasso)?);
                b.lambda_ratio = Some(lambda / (delta * design.sigma_eps));
                b.coef_gap = Some(sql.iter().zip(&lasso).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
                out.push(a);
                out.push(b);
            }
            Ok(out)
        })
        .collect();
    let mut records = Vec::new();
    for r in per_rep {
        records.extend(r?);
    }
    Ok(finish("lasso-equiv", d, records))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// `records.csv` text with a header row.
pub fn records_csv(result: &ExperimentResult) -> String {
    let mut s = String::from("seed,rep,n,estimator,train_rmspe,test_rmspe,nonzero_count,bound_lhs,bound_rhs,tuning,lambda_ratio,coef_gap\n");
    for r in &result.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.rep,
            r.n,
            r.estimator,
            r.train_rmspe,
            opt(r.test_rmspe),
            r.nonzero_count,
            opt(r.bound_lhs),
            opt(r.bound_rhs),
            opt(r.tuning),
            opt(r.lambda_ratio),
            opt(r.coef_gap)
        );
    }
    s
}

/// Writes `records.csv`, `aggregates.json` and `summary.svg` into `dir`.
pub fn write_outputs(result: &ExperimentResult, config: &serde_json::Value, dir: &Path) -> Result<()> {
    let io = |path: &Path| {
        let p = path.to_path_buf();
        move |source| Error::Io { path: p, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let rec = dir.join("records.csv");
    std::fs::write(&rec, records_csv(result)).map_err(io(&rec))?;
    let agg = dir.join("aggregates.json");
    let body = serde_json::json!({
        "config": config,
        "experiment": result.experiment,
        "aggregates": serde_json::to_value(&result.aggregates).expect("plain data"),
    });
    std::fs::write(&agg, serde_json::to_string_pretty(&body).expect("plain data") + "\n").map_err(io(&agg))?;
    let svg = dir.join("summary.svg");
    std::fs::write(&svg, crate::svg::summary_chart(result)).map_err(io(&svg))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn e1(d: usize) -> Vec<f64> {
        let mut b = vec![0.0; d];
        b[0] = 1.0;
        b
    }

    fn uniform() -> UniformDesign {
        UniformDesign { beta: e1(10), sigma: 1.0, lambda_scale: 10.0 }
    }

    #[test]
    fn uniform_noise_is_bounded() {
        let d = Design::Uniform(UniformDesign { beta: vec![0.0; 3], sigma: 1.0, lambda_scale: 10.0 });
        let ds = generate(&d, 1000, &Rng::new(1, 0)).unwrap();
        assert!(ds.y().iter().all(|y| y.abs() <= 1.0));
    }

    #[test]
    fn uniform_rows_stay_within_the_support_diameter() {
        let u = UniformDesign { beta: vec![1.0, -0.5, 0.0], sigma: 1.3, lambda_scale: 4.0 };
        let diam = support_diameter_uniform_design(u.sigma, u.lambda_scale, 3, &u.beta).unwrap();
        let ds = generate(&Design::Uniform(u.clone()), 100_000, &Rng::new(2, 0)).unwrap();
        // Pairwise distance is bounded by the extent of the bounding box.
        let mut lo = [f64::INFINITY; 4];
        let mut hi = [f64::NEG_INFINITY; 4];
        for i in 0..ds.n() {
            let mut z = ds.x_row(i).to_vec();
            z.push(ds.y()[i]);
            for k in 0..4 {
                lo[k] = lo[k].min(z[k]);
                hi[k] = hi[k].max(z[k]);
            }
        }
        let extent: f64 = lo.iter().zip(&hi).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt();
        assert!(extent <= diam, "{extent} > {diam}");
        // The outcome box is sigma*lambda*||beta||_1 + 2 sigma wide at most.
        assert!(hi[3] - lo[3] <= u.sigma * u.lambda_scale * 1.5 + 2.0 * u.sigma + 1e-12);
    }

    #[test]
    fn gaussian_covariance_is_identity() {
        let d = Design::Gaussian(GaussianDesign { beta: vec![0.0; 10], sigma_eps: 1.0 });
        let n = 20_000;
        let ds = generate(&d, n, &Rng::new(3, 0)).unwrap();
        for a in 0..10 {
            for b in 0..10 {
                let c = (0..n).map(|i| ds.x_row(i)[a] * ds.x_row(i)[b]).sum::<f64>() / n as f64;
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((c - want).abs() < 3.0 / (n as f64).sqrt() * 2.0, "({a},{b}) {c}");
            }
        }
    }

    #[test]
    fn training_sets_share_prefixes() {
        let d = Design::Uniform(uniform());
        let big = generate(&d, 50, &Rng::new(4, 7)).unwrap();
        let small = generate(&d, 20, &Rng::new(4, 7)).unwrap();
        assert_eq!(big.head(20).unwrap(), small);
    }

    #[test]
    fn zero_radius_selects_everything() {
        let res = run_selection_histogram(&uniform(), &[200], 5, &[DeltaRule::Fixed(0.0)], 0.05, &Rng::new(5, 0)).unwrap();
        assert!(res.records.iter().all(|r| r.nonzero_count == 10));
    }

    #[test]
    fn runs_are_deterministic_and_aggregates_recompute() {
        let a = run_selection_histogram(&uniform(), &[300, 400], 6, &[DeltaRule::New, DeltaRule::Bcw], 0.05, &Rng::new(6, 0)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_selection_histogram(&uniform(), &[300, 400], 6, &[DeltaRule::New, DeltaRule::Bcw], 0.05, &Rng::new(6, 0)).unwrap());
        assert_eq!(a, b);
        assert_eq!(aggregate(&a.records, 10), a.aggregates);
        let mut keys: Vec<_> = a.records.iter().map(|r| (r.rep, r.n, r.estimator.clone())).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), a.records.len());
    }

    #[test]
    fn unperturbed_test_errors_are_finite() {
        let g = GaussianDesign { beta: vec![1.0; 5], sigma_eps: 1.0 };
        let ests = comparison_estimators(&g, 100, 0.05).unwrap();
        let res = run_train_test(&Design::Gaussian(g), 100, 200, &Perturbation::None, &ests, 4, false, &Rng::new(7, 0)).unwrap();
        assert!(res.records.iter().all(|r| r.test_rmspe.unwrap().is_finite() && r.test_rmspe.unwrap() >= 0.0));
        assert_eq!(res.records.len(), 16);
    }

    #[test]
    fn worst_case_test_sets_pass_the_self_check() {
        let g = GaussianDesign { beta: vec![1.0; 4], sigma_eps: 1.0 };
        let ests = comparison_estimators(&g, 80, 0.05).unwrap();
        let p = Perturbation::WorstCase { delta: 0.3, sigma: 1.0 };
        let res = run_train_test(&Design::Gaussian(g), 80, 60, &p, &ests, 3, true, &Rng::new(8, 0)).unwrap();
        for r in &res.records {
            assert!(r.test_rmspe.unwrap() > r.train_rmspe * 0.5);
        }
    }

    #[test]
    fn huge_radius_bound_always_holds() {
        let cov = verify_generalization_bound(&uniform(), 200, 200, 20, &DeltaRule::Fixed(50.0), 0.0, &BoundProtocol::WithinBall, 0.05, &Rng::new(9, 0)).unwrap();
        assert_eq!(cov.coverage, 1.0);
    }

    #[test]
    fn lasso_equivalence_small() {
        let g = GaussianDesign { beta: vec![1.0; 8], sigma_eps: 1.0 };
        let res = run_lasso_equivalence(&g, &[40, 80], 50, 3, 0.05, &Rng::new(10, 0)).unwrap();
        for r in res.records.iter().filter(|r| r.estimator == "lasso_reparam") {
            assert!(r.coef_gap.unwrap() <= 1e-6, "{r:?}");
        }
        let sql: Vec<_> = res.records.iter().filter(|r| r.estimator == "sqrt_lasso").collect();
        let las: Vec<_> = res.records.iter().filter(|r| r.estimator == "lasso_reparam").collect();
        for (a, b) in sql.iter().zip(&las) {
            assert!((b.test_rmspe.unwrap() / a.test_rmspe.unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn outputs_are_written() {
        let res = run_selection_histogram(&uniform(), &[100], 3, &[DeltaRule::Bcw], 0.05, &Rng::new(11, 0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_outputs(&res, &serde_json::json!({"k": 1}), dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
        let agg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("aggregates.json")).unwrap()).unwrap();
        assert_eq!(agg["config"]["k"], 1);
        assert!(std::fs::read_to_string(dir.path().join("summary.svg")).unwrap().starts_with("<svg"));
    }
}
