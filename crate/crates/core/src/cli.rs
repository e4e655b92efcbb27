//! Command-line front end. [`run`] takes argv and output sinks so it can be
//! exercised in-process; `main` only forwards the exit code.
//!
//! Exit codes: 0 success, 1 usage error, 2 numeric or validation error.
//! Data goes to the output stream (or `--out`), diagnostics to the error stream.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::dataset::load_dataset;
use crate::dro::worst_case_distribution;
use crate::error::{Error, Result};
use crate::numeric::BaseNorm;
use crate::penalty::PenaltySpec;
use crate::problem::RobustProblem;
use crate::ranking::{rank_estimators_with, CriticalRoute};
use crate::rng::Rng;
use crate::sims::{
    comparison_estimators, run_lasso_equivalence, run_selection_histogram, run_train_test, verify_generalization_bound, write_outputs, BoundProtocol,
    DeltaRule, Design, Estimator, ExperimentResult, Perturbation, Record, UniformDesign,
};
use crate::solver::{solve_penalized, SolverOptions};
use crate::transport::{msw_empirical, rho_msw_empirical, SearchOptions};
use crate::tuning::{
    compact_constant, delta_asymptotic, delta_bcw_practice, delta_bcw_sqrt_lasso, delta_blanchet_comparator, delta_compact, delta_general, delta_pivotal,
    kolmogorov_quantile, moment_constant, normal_quantile, TuningInputs,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "robust-linreg", version, about = "Distributionally robust penalized linear regression")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for `simulate` (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output file, or output directory for `simulate`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the penalized estimator on a CSV file.
    Fit(FitArgs),
    /// Compute a radius recommendation.
    Tune(TuneArgs),
    /// Write the worst-case perturbation of a CSV file next to it.
    Worstcase(WorstcaseArgs),
    /// Estimate the (rho-)max-sliced Wasserstein distance between two CSV files.
    Msw(MswArgs),
    /// Run a replication experiment.
    Simulate(SimulateArgs),
    /// Compare the worst-case error of two coefficient vectors.
    Rank(RankArgs),
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    outcome: String,
    #[arg(long, default_value_t = 2.0)]
    r: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    delta: f64,
    /// `l1`, `lp:P`, `slope:L1,L2,...` or the JSON form.
    #[arg(long, default_value = "l1")]
    penalty: String,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-7)]
    kkt_tol: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum TuneMethod {
    General,
    Compact,
    Pivotal,
    Asymptotic,
    Bcw,
    Blanchet,
}

#[derive(Args, Debug)]
struct TuneArgs {
    #[arg(long, value_enum)]
    method: TuneMethod,
    #[arg(long, default_value_t = 2.0)]
    r: f64,
    /// Moment order; must exceed 2r.
    #[arg(long, default_value_t = 5.0)]
    s: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    diam: Option<f64>,
    /// Embedding constant of the penalty.
    #[arg(long, conflicts_with = "c_rho_d")]
    c_d: Option<f64>,
    /// `max(1/c_d, 1)`; must be at least 1.
    #[arg(long)]
    c_rho_d: Option<f64>,
    /// Outcome-moment scale for the general and compact rules.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Noise scale for the bcw rule.
    #[arg(long, default_value_t = 1.0)]
    sigma_noise: f64,
    /// Design scale for the bcw rule.
    #[arg(long, default_value_t = 1.0)]
    lambda_scale: f64,
    /// Normalized data for the pivotal rule.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    outcome: String,
}

#[derive(Args, Debug)]
struct WorstcaseArgs {
    /// Input CSV.
    data: PathBuf,
    #[arg(long, default_value = "y")]
    outcome: String,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 2.0)]
    r: f64,
    #[arg(long, default_value = "l1")]
    penalty: String,
    #[arg(long)]
    beta_file: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum NormArg {
    L1,
    L2,
    Linf,
}

impl From<NormArg> for BaseNorm {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::L1 => BaseNorm::L1,
            NormArg::L2 => BaseNorm::L2,
            NormArg::Linf => BaseNorm::Linf,
        }
    }
}

#[derive(Args, Debug)]
struct MswArgs {
    file_a: PathBuf,
    file_b: PathBuf,
    /// Column treated as the last coordinate.
    #[arg(long, default_value = "y")]
    outcome: String,
    #[arg(long, default_value_t = 2.0)]
    r: f64,
    #[arg(long, value_enum, default_value_t = NormArg::L2)]
    norm: NormArg,
    /// Penalty for the rho-normalized distance; omit for the plain one.
    #[arg(long)]
    rho: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    #[arg(long, default_value_t = 512)]
    random_directions: usize,
}

/// Experiments reachable from `simulate`.
#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
pub enum Experiment {
    Histogram,
    Traintest,
    Bound,
    #[value(name = "lasso-equiv")]
    LassoEquiv,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Histogram => "histogram",
            Experiment::Traintest => "traintest",
            Experiment::Bound => "bound",
            Experiment::LassoEquiv => "lasso-equiv",
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    experiment: Experiment,
    /// JSON experiment configuration; missing keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RankArgs {
    data: PathBuf,
    #[arg(long, default_value = "y")]
    outcome: String,
    #[arg(long)]
    beta1_file: PathBuf,
    #[arg(long)]
    beta2_file: PathBuf,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 2.0)]
    r: f64,
    #[arg(long, default_value = "l1")]
    penalty: String,
    /// Support diameter (compact route).
    #[arg(long, required_unless_present = "gamma")]
    diam: Option<f64>,
    /// Moment bound (general route, with `--s`).
    #[arg(long, conflicts_with = "diam")]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 5.0)]
    s: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

/// Experiment configuration read by `simulate --config`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub design: Design,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub alpha: f64,
    /// Radius rules for `histogram` and `bound`.
    pub rules: Vec<DeltaRule>,
    pub n_test: usize,
    pub epsilon: f64,
    pub protocol: BoundProtocol,
    pub perturbation: Perturbation,
    /// Estimators for `traintest`; the Gaussian comparison set when absent.
    pub estimators: Option<Vec<Estimator>>,
    pub self_check: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        let mut beta = vec![0.0; 10];
        beta[0] = 1.0;
        SimConfig {
            design: Design::Uniform(UniformDesign { beta, sigma: 1.0, lambda_scale: 10.0 }),
            n_grid: vec![2000, 2125, 2250, 2500],
            reps: 500,
            alpha: 0.05,
            rules: vec![DeltaRule::New, DeltaRule::Bcw],
            n_test: 2500,
            epsilon: 0.0,
            protocol: BoundProtocol::Adversarial { radius: DeltaRule::New },
            perturbation: Perturbation::None,
            estimators: None,
            self_check: false,
        }
    }
}

/// Parses `l1`, `lp:P`, `slope:L1,L2,...`, or the JSON object form.
pub fn parse_penalty(s: &str) -> Result<PenaltySpec> {
    let t = s.trim();
    let spec = if t.starts_with('{') {
        serde_json::from_str(t).map_err(|e| Error::validation(format!("bad penalty JSON `{t}`: {e}")))?
    } else if t.eq_ignore_ascii_case("l1") {
        PenaltySpec::L1
    } else if let Some(p) = t.strip_prefix("lp:") {
        PenaltySpec::Lp { p: parse_number(p)? }
    } else if let Some(l) = t.strip_prefix("slope:") {
        PenaltySpec::Slope { lambda: l.split(',').map(parse_number).collect::<Result<_>>()? }
    } else {
        return Err(Error::validation(format!("unknown penalty `{t}`; use l1, lp:P, slope:L1,L2,... or JSON")));
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_number(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::validation(format!("not a number: `{s}`")))
}

/// Reads a coefficient vector: numbers separated by commas or whitespace,
/// with an optional non-numeric header line.
pub fn load_beta(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let tokens: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).collect();
        let parsed: std::result::Result<Vec<f64>, _> = tokens.iter().map(|t| t.parse::<f64>()).collect();
        match parsed {
            Ok(v) => out.extend(v),
            Err(_) if line_no == 0 => {}
            Err(e) => return Err(Error::Parse { row: line_no, column: None, msg: format!("{}: {e}", path.display()) }),
        }
    }
    if out.is_empty() {
        return Err(Error::validation(format!("{} holds no coefficients", path.display())));
    }
    Ok(out)
}

/// Flattens a JSON value into `key,value` rows with dotted keys.
fn flatten_csv(v: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        match v {
            Value::Object(m) => m.iter().for_each(|(k, x)| walk(&join(k), x, out)),
            Value::Array(a) => a.iter().enumerate().for_each(|(i, x)| walk(&join(&i.to_string()), x, out)),
            Value::String(s) => out.push((prefix.to_string(), s.clone())),
            other => out.push((prefix.to_string(), other.to_string())),
        }
    }
    let mut rows = Vec::new();
    walk("", v, &mut rows);
    let mut s = String::from("key,value\n");
    for (k, v) in rows {
        let quote = |x: &str| if x.contains([',', '"', '\n']) { format!("\"{}\"", x.replace('"', "\"\"")) } else { x.to_string() };
        s.push_str(&format!("{},{}\n", quote(&k), quote(&v)));
    }
    s
}

fn to_value<T: serde::Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("plain data serializes")
}

/// Runs the CLI. Never panics on bad input; returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            // Help shown because arguments are missing is a usage error.
            return if e.use_stderr() || matches!(e.kind(), clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = write!(stderr, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            };
        }
    };
    match dispatch(&cli) {
        Ok(value) => {
            if let Some(v) = value {
                let text = match cli.global.format {
                    Format::Json => serde_json::to_string_pretty(&v).expect("plain data") + "\n",
                    Format::Csv => flatten_csv(&v),
                };
                let sink = match (&cli.command, &cli.global.out) {
                    (Command::Simulate(_), _) | (_, None) => None,
                    (_, Some(p)) => Some(p),
                };
                match sink {
                    Some(p) => {
                        if let Err(e) = std::fs::write(p, text) {
                            let _ = writeln!(stderr, "error: cannot write {}: {e}", p.display());
                            return EXIT_ERROR;
                        }
                    }
                    None => {
                        let _ = stdout.write_all(text.as_bytes());
                    }
                }
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn global_config(g: &Global) -> Value {
    json!({
        "seed": g.seed,
        "threads": g.threads,
        "out": g.out.as_ref().map(|p| p.display().to_string()),
        "format": match g.format { Format::Json => "json", Format::Csv => "csv" },
    })
}

fn dispatch(cli: &Cli) -> Result<Option<Value>> {
    let g = &cli.global;
    let mut v = match &cli.command {
        Command::Fit(a) => fit(a)?,
        Command::Tune(a) => tune(a)?,
        Command::Worstcase(a) => worstcase(a)?,
        Command::Msw(a) => msw(a, g.seed)?,
        Command::Simulate(a) => simulate(a, g)?,
        Command::Rank(a) => rank(a)?,
    };
    if let Value::Object(m) = &mut v {
        if let Some(Value::Object(c)) = m.get_mut("config") {
            c.insert("global".into(), global_config(g));
        }
    }
    Ok(Some(v))
}

fn fit(a: &FitArgs) -> Result<Value> {
    let data = load_dataset(&a.data, &a.outcome)?;
    let penalty = parse_penalty(&a.penalty)?;
    let prob = RobustProblem::new(a.r, a.sigma, a.delta, penalty)?;
    let opts = SolverOptions { max_iter: a.max_iter, kkt_tol: a.kkt_tol, ..Default::default() };
    let rep = solve_penalized(&data, &prob, &opts)?;
    Ok(json!({
        "config": {
            "subcommand": "fit",
            "data": a.data.display().to_string(),
            "outcome": a.outcome,
            "problem": to_value(&prob),
            "solver": to_value(&opts),
        },
        "names": data.x_names(),
        "beta_hat": rep.beta_hat,
        "objective_value": rep.objective_value,
        "iterations": rep.iterations,
        "converged": rep.converged,
        "kkt_residual": rep.kkt_residual,
    }))
}

fn tune(a: &TuneArgs) -> Result<Value> {
    let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| Error::validation(format!("--{flag} is required for this method")));
    let c_d = match (a.c_d, a.c_rho_d) {
        (Some(c), _) => c,
        (None, Some(c)) if c >= 1.0 && c.is_finite() => 1.0 / c,
        (None, Some(c)) => return Err(Error::validation(format!("--c-rho-d must be >= 1, got {c}"))),
        (None, None) => 1.0,
    };
    if !(c_d > 0.0 && c_d.is_finite()) {
        return Err(Error::validation(format!("--c-d must be positive, got {c_d}")));
    }
    let inputs = |n: usize, d: usize| TuningInputs { n, d, r: a.r, s: a.s, alpha: a.alpha, gamma: a.gamma, c_d, diam: a.diam, sigma: a.sigma };
    let (delta, constants, resolved) = match a.method {
        TuneMethod::General => {
            let t = inputs(need(a.n, "n")?, need(a.d, "d")?);
            let delta = delta_general(&t)?;
            let gamma = t.gamma.unwrap_or(f64::NAN);
            (delta, json!({"C": moment_constant(t.r, t.s, t.d, t.alpha, gamma), "c_d": c_d}), to_value(&t))
        }
        TuneMethod::Compact => {
            let t = inputs(need(a.n, "n")?, need(a.d, "d")?);
            let delta = delta_compact(&t)?;
            (delta, json!({"C": compact_constant(t.r, t.d, t.alpha, t.diam.unwrap_or(f64::NAN)), "c_d": c_d}), to_value(&t))
        }
        TuneMethod::Asymptotic => {
            // The dimension does not enter this rule.
            let t = inputs(need(a.n, "n")?, a.d.unwrap_or(1));
            let delta = delta_asymptotic(&t)?;
            (delta, json!({"q": kolmogorov_quantile(1.0 - a.alpha)?, "c_d": c_d}), to_value(&t))
        }
        TuneMethod::Pivotal => {
            let path = a.data.as_ref().ok_or_else(|| Error::validation("--data is required for the pivotal method"))?;
            let data = load_dataset(path, &a.outcome)?;
            let p = delta_pivotal(&data, a.r, a.s, a.alpha, c_d)?;
            let t = TuningInputs { gamma: Some(p.gamma), sigma: p.sigma, ..inputs(data.n(), data.d()) };
            (p.delta, json!({"C": moment_constant(a.r, a.s, data.d(), a.alpha, p.gamma), "c_d": c_d, "sigma_hat": p.sigma}), to_value(&t))
        }
        TuneMethod::Bcw => {
            let (n, d) = (need(a.n, "n")?, need(a.d, "d")?);
            let delta = delta_bcw_sqrt_lasso(n, d, a.alpha, a.sigma_noise, a.lambda_scale)?;
            let p = 0.5 + (1.0 - a.alpha).powf(1.0 / d as f64) / 2.0;
            let q = if p < 1.0 { normal_quantile(p)? } else { f64::INFINITY };
            let practice = delta_bcw_practice(n, d, a.alpha)?;
            (delta, json!({"normal_quantile": q, "practice_delta": practice}), json!({"n": n, "d": d, "alpha": a.alpha, "sigma_noise": a.sigma_noise, "lambda_scale": a.lambda_scale}))
        }
        TuneMethod::Blanchet => {
            let (n, d) = (need(a.n, "n")?, need(a.d, "d")?);
            let delta = delta_blanchet_comparator(n, d, a.alpha)?;
            let q = normal_quantile(1.0 - a.alpha / (2.0 * d as f64))?;
            (delta, json!({"normal_quantile": q}), json!({"n": n, "d": d, "alpha": a.alpha}))
        }
    };
    let method = a.method.to_possible_value().expect("no skipped variants").get_name().to_string();
    Ok(json!({
        "config": {"subcommand": "tune", "method": method},
        "delta": delta,
        "inputs": resolved,
        "constants": constants,
    }))
}

/// `<stem>.worstcase.csv` beside the input.
pub fn worstcase_path(input: &Path) -> PathBuf {
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "data".into());
    input.with_file_name(format!("{stem}.worstcase.csv"))
}

fn worstcase(a: &WorstcaseArgs) -> Result<Value> {
    let data = load_dataset(&a.data, &a.outcome)?;
    let beta = load_beta(&a.beta_file)?;
    let prob = RobustProblem::new(a.r, a.sigma, a.delta, parse_penalty(&a.penalty)?)?;
    let ps = worst_case_distribution(&data, &prob, &beta)?;
    let out = worstcase_path(&a.data);
    ps.perturbed.write_csv(&out)?;
    let base_rn = crate::dataset::residual_rnorm(&ps.base, &beta, a.r)?;
    let worst_rn = crate::dataset::residual_rnorm(&ps.perturbed, &beta, a.r)?;
    Ok(json!({
        "config": {
            "subcommand": "worstcase",
            "data": a.data.display().to_string(),
            "outcome": a.outcome,
            "beta_file": a.beta_file.display().to_string(),
            "problem": to_value(&prob),
        },
        "output": out.display().to_string(),
        "meta": to_value(&ps.meta),
        "base_rnorm": base_rn,
        "worst_case_rnorm": worst_rn,
    }))
}

fn msw(a: &MswArgs, seed: u64) -> Result<Value> {
    let p = load_dataset(&a.file_a, &a.outcome)?;
    let q = load_dataset(&a.file_b, &a.outcome)?;
    let opts = SearchOptions { restarts: a.restarts, random_directions: a.random_directions, seed, ..Default::default() };
    let report = match &a.rho {
        Some(rho) => {
            let prob = RobustProblem::new(a.r, a.sigma, 0.0, parse_penalty(rho)?)?;
            rho_msw_empirical(&p, &q, &prob, &opts)?
        }
        None => msw_empirical(&p, &q, a.r, a.norm.into(), &opts)?,
    };
    Ok(json!({
        "config": {
            "subcommand": "msw",
            "file_a": a.file_a.display().to_string(),
            "file_b": a.file_b.display().to_string(),
            "outcome": a.outcome,
            "r": a.r,
            "norm": BaseNorm::from(a.norm).name(),
            "rho": a.rho,
            "sigma": a.sigma,
            "search": to_value(&opts),
        },
        "value": report.value,
        "argmax_direction": report.argmax_direction.gamma_tilde,
        "normalization": to_value(&report.argmax_direction.normalization),
        "evaluations": report.evaluations,
        "lower_bound": report.lower_bound,
    }))
}

fn rank(a: &RankArgs) -> Result<Value> {
    let data = load_dataset(&a.data, &a.outcome)?;
    let b1 = load_beta(&a.beta1_file)?;
    let b2 = load_beta(&a.beta2_file)?;
    let prob = RobustProblem::new(a.r, a.sigma, a.delta, parse_penalty(&a.penalty)?)?;
    let route = match (a.diam, a.gamma) {
        (Some(diam), _) => CriticalRoute::Compact { diam },
        (None, Some(gamma)) => CriticalRoute::General { s: a.s, gamma },
        (None, None) => return Err(Error::validation("one of --diam or --gamma is required")),
    };
    let verdict = rank_estimators_with(&data, &prob, &b1, &b2, a.alpha, &route, BaseNorm::L2)?;
    Ok(json!({
        "config": {
            "subcommand": "rank",
            "data": a.data.display().to_string(),
            "outcome": a.outcome,
            "beta1_file": a.beta1_file.display().to_string(),
            "beta2_file": a.beta2_file.display().to_string(),
            "problem": to_value(&prob),
            "route": to_value(&route),
            "alpha": a.alpha,
        },
        "verdict": to_value(&verdict),
        "assumption": "both worst cases over the comparison set are attained by the explicit worst-case distributions of the two vectors",
    }))
}

fn simulate(a: &SimulateArgs, g: &Global) -> Result<Value> {
    let cfg: SimConfig = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.clone(), source })?;
            serde_json::from_str(&text).map_err(|e| Error::validation(format!("bad config {}: {e}", path.display())))?
        }
        None => SimConfig::default(),
    };
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("simulate_out"));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(g.threads)
        .build()
        .map_err(|e| Error::validation(format!("cannot build thread pool: {e}")))?;
    let result = pool.install(|| run_experiment(a.experiment, &cfg, &Rng::new(g.seed, 0)))?;
    let config = json!({
        "subcommand": "simulate",
        "experiment": a.experiment.name(),
        "config_file": a.config.as_ref().map(|p| p.display().to_string()),
        "resolved": to_value(&cfg),
        "global": global_config(g),
    });
    write_outputs(&result, &config, &out)?;
    Ok(json!({
        "config": config,
        "out": out.display().to_string(),
        "records": result.records.len(),
        "aggregates": to_value(&result.aggregates),
    }))
}

/// Runs one experiment over the whole `n_grid`.
pub fn run_experiment(experiment: Experiment, cfg: &SimConfig, rng: &Rng) -> Result<ExperimentResult> {
    if cfg.n_grid.is_empty() || cfg.reps == 0 {
        return Err(Error::validation("n_grid must be nonempty and reps >= 1"));
    }
    let uniform = || match &cfg.design {
        Design::Uniform(u) => Ok(u.clone()),
        Design::Gaussian(_) => Err(Error::validation(format!("{} needs a uniform design", experiment.name()))),
    };
    let mut records: Vec<Record> = Vec::new();
    let name = experiment.name();
    match experiment {
        Experiment::Histogram => return run_selection_histogram(&uniform()?, &cfg.n_grid, cfg.reps, &cfg.rules, cfg.alpha, rng),
        Experiment::LassoEquiv => {
            let Design::Gaussian(gd) = &cfg.design else {
                return Err(Error::validation("lasso-equiv needs a gaussian design"));
            };
            return run_lasso_equivalence(gd, &cfg.n_grid, cfg.n_test, cfg.reps, cfg.alpha, rng);
        }
        Experiment::Traintest => {
            for &n in &cfg.n_grid {
                let ests = match (&cfg.estimators, &cfg.design) {
                    (Some(e), _) => e.clone(),
                    (None, Design::Gaussian(gd)) => comparison_estimators(gd, n, cfg.alpha)?,
                    (None, Design::Uniform(_)) => return Err(Error::validation("traintest on a uniform design needs explicit estimators")),
                };
                records.extend(run_train_test(&cfg.design, n, cfg.n_test, &cfg.perturbation, &ests, cfg.reps, cfg.self_check, rng)?.records);
            }
        }
        Experiment::Bound => {
            let u = uniform()?;
            for &n in &cfg.n_grid {
                for rule in &cfg.rules {
                    let cov = verify_generalization_bound(&u, n, cfg.n_test, cfg.reps, rule, cfg.epsilon, &cfg.protocol, cfg.alpha, rng)?;
                    records.extend(cov.result.records);
                }
            }
        }
    }
    let aggregates = crate::sims::aggregate(&records, cfg.design.d());
    Ok(ExperimentResult { experiment: name.into(), d: cfg.design.d(), records, aggregates })
}
