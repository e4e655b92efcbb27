//! End-to-end acceptance run. Each criterion prints one PASS/FAIL line with
//! the measured quantities; the test fails if any criterion fails.

use std::time::{Duration, Instant};

use rand::Rng as _;
use rand_distr::StandardNormal;
use robust_linreg::dro::{verify_ball_membership, verify_duality, worst_case_distribution, Ball};
use robust_linreg::sims::{
    comparison_estimators, run_lasso_equivalence, run_selection_histogram, run_train_test, verify_generalization_bound, BoundProtocol, DeltaRule,
    Design, GaussianDesign, Perturbation, UniformDesign,
};
use robust_linreg::solver::{solve_ols, solve_penalized, SolverOptions};
use robust_linreg::transport::wasserstein_1d;
use robust_linreg::tuning::{
    delta_asymptotic, delta_bcw_practice, delta_bcw_sqrt_lasso, kolmogorov_cdf, kolmogorov_quantile, support_diameter_uniform_design, TuningInputs,
};
use robust_linreg::{BaseNorm, Dataset, PenaltySpec, RobustProblem, Rng};

type Outcome = (bool, String);

fn e1(d: usize) -> Vec<f64> {
    let mut b = vec![0.0; d];
    b[0] = 1.0;
    b
}

fn fig_design() -> UniformDesign {
    UniformDesign { beta: e1(10), sigma: 1.0, lambda_scale: 10.0 }
}

fn random_dataset(g: &mut impl rand::Rng, n: usize, d: usize) -> Dataset {
    let beta: Vec<f64> = (0..d).map(|_| g.random_range(-2.0..2.0)).collect();
    let x: Vec<f64> = (0..n * d).map(|_| g.sample(StandardNormal)).collect();
    let y = (0..n)
        .map(|i| x[i * d..(i + 1) * d].iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + g.sample::<f64, _>(StandardNormal))
        .collect();
    Dataset::from_flat(d, x, y).unwrap()
}

fn random_slope(g: &mut impl rand::Rng, d: usize) -> PenaltySpec {
    let mut l: Vec<f64> = (0..d).map(|_| g.random_range(0.1..2.0)).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    PenaltySpec::Slope { lambda: l }
}

fn duality_tightness() -> Outcome {
    let mut g = Rng::new(1001, 0).generator();
    let (mut worst_gap, mut worst_violation) = (0.0f64, 0.0f64);
    for k in 0..100u64 {
        let n = g.random_range(20..=200);
        let d = g.random_range(1..=10);
        let r = if g.random_bool(0.5) { 1.0 } else { 2.0 };
        let penalty = match k % 3 {
            0 => PenaltySpec::L1,
            1 => PenaltySpec::Lp { p: 2.0 },
            _ => random_slope(&mut g, d),
        };
        let delta = g.random_range(0.0..2.0);
        let sigma = g.random_range(1.0..3.0);
        let data = random_dataset(&mut g, n, d);
        let beta: Vec<f64> = (0..d).map(|_| if g.random_bool(0.3) { 0.0 } else { g.random_range(-2.0..2.0) }).collect();
        let prob = RobustProblem::new(r, sigma, delta, penalty).unwrap();
        let c = verify_duality(&data, &prob, &beta, 50, &Rng::new(1001, 1000 * k)).unwrap();
        worst_gap = worst_gap.max((c.attained - c.rhs).abs() / c.rhs.max(1.0));
        worst_violation = worst_violation.max(c.max_violation);
    }
    (worst_gap <= 1e-8 && worst_violation <= 1e-8, format!("max rel |attained-rhs| = {worst_gap:.3e}, max violation = {worst_violation:.3e}"))
}

fn ball_membership() -> Outcome {
    let mut g = Rng::new(1002, 0).generator();
    let mut failures = 0;
    let mut checks = 0;
    let mut max_active_gap = 0.0f64;
    for k in 0..60 {
        let n = g.random_range(20..=120);
        let d = g.random_range(1..=8);
        let data = random_dataset(&mut g, n, d);
        let beta: Vec<f64> = (0..d).map(|j| if j > 0 && g.random_bool(0.3) { 0.0 } else { g.random_range(-2.0..2.0) }).collect();
        let nnz = beta.iter().filter(|b| **b != 0.0).count();
        let (penalty, ball) = if k % 2 == 0 {
            (PenaltySpec::L1, Ball::SqrtLasso)
        } else {
            let p = random_slope(&mut g, d);
            let PenaltySpec::Slope { lambda } = &p else { unreachable!() };
            let ball = Ball::Slope { lambda: lambda.clone() };
            (p, ball)
        };
        let prob = RobustProblem::new(2.0, g.random_range(1.0..3.0), g.random_range(0.05..2.0), penalty).unwrap();
        let ps = worst_case_distribution(&data, &prob, &beta).unwrap();
        let res = verify_ball_membership(&ps, &ball).unwrap();
        for (j, c) in res.iter().enumerate() {
            checks += 1;
            failures += usize::from(!c.pass);
            let active = match ball {
                Ball::SqrtLasso => c.name == "y" || beta[j] != 0.0,
                Ball::Slope { .. } => c.name == "y" || j < nnz,
            };
            if active {
                max_active_gap = max_active_gap.max((c.lhs - c.bound).abs() / c.bound.max(1.0));
            }
        }
    }
    (failures == 0 && max_active_gap <= 1e-9, format!("{checks} checks, {failures} failed, max active |lhs-bound| = {max_active_gap:.3e}"))
}

fn exhaustive_wr(a: &[f64], b: &[f64], r: f64) -> f64 {
    fn permute(k: usize, idx: &mut Vec<usize>, a: &[f64], b: &[f64], r: f64, best: &mut f64) {
        if k == idx.len() {
            let s: f64 = idx.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).abs().powf(r)).sum();
            *best = best.min(s);
            return;
        }
        for i in k..idx.len() {
            idx.swap(k, i);
            permute(k + 1, idx, a, b, r, best);
            idx.swap(k, i);
        }
    }
    let mut idx: Vec<usize> = (0..a.len()).collect();
    let mut best = f64::INFINITY;
    permute(0, &mut idx, a, b, r, &mut best);
    (best / a.len() as f64).powf(1.0 / r)
}

fn wasserstein_oracle() -> Outcome {
    let mut g = Rng::new(1003, 0).generator();
    let mut worst = 0.0f64;
    for k in 0..200 {
        let n = 1 + k % 6;
        let a: Vec<f64> = (0..n).map(|_| g.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..n).map(|_| 3.0 * g.random::<f64>() - 1.0).collect();
        for r in [1.0, 2.0, 3.0] {
            worst = worst.max((wasserstein_1d(&a, &b, r).unwrap() - exhaustive_wr(&a, &b, r)).abs());
        }
    }
    (worst <= 1e-12, format!("max |sorted - exhaustive| = {worst:.3e}"))
}

fn kolmogorov() -> Outcome {
    let q = kolmogorov_quantile(0.95).unwrap();
    let worst = (1..100)
        .map(|k| {
            let p = k as f64 / 100.0;
            (kolmogorov_cdf(kolmogorov_quantile(p).unwrap()) - p).abs()
        })
        .fold(0.0f64, f64::max);
    ((q - 1.358).abs() <= 1e-3 && worst <= 1e-9, format!("q_0.95 = {q:.6}, max |K(q(p)) - p| = {worst:.3e}"))
}

fn delta_ratio() -> Outcome {
    let u = fig_design();
    let (n, d) = (2500, 10);
    let diam = support_diameter_uniform_design(u.sigma, u.lambda_scale, d, &u.beta).unwrap();
    let c_d = PenaltySpec::L1.embedding_constant(BaseNorm::L2, d).unwrap().c_d;
    let t = TuningInputs { n, d, r: 2.0, s: 5.0, alpha: 0.05, gamma: None, c_d, diam: Some(diam), sigma: 1.0 };
    let new = delta_asymptotic(&t).unwrap();
    let bcw = delta_bcw_sqrt_lasso(n, d, 0.05, u.sigma, u.lambda_scale).unwrap();
    let ratio = new / bcw;
    (ratio > 10.0, format!("delta_new = {new:.4}, delta_bcw = {bcw:.4}, ratio = {ratio:.2}"))
}

fn zero_selection() -> Outcome {
    let res = run_selection_histogram(&fig_design(), &[2125, 2500], 200, &[DeltaRule::New], 0.05, &Rng::new(1006, 0)).unwrap();
    let hist = |n: usize| res.aggregates.iter().find(|a| a.n == n).unwrap().nonzero_histogram.clone();
    let (h1, h2) = (hist(2125), hist(2500));
    let mode = h1.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).unwrap().0;
    let sel = |h: &[usize]| 1.0 - h[0] as f64 / h.iter().sum::<usize>() as f64;
    let (s1, s2) = (sel(&h1), sel(&h2));
    (mode == 0 && s2 > s1, format!("mode at n=2125: {mode}, P(select>=1): n=2125 {s1:.3}, n=2500 {s2:.3}"))
}

fn bound_coverage() -> Outcome {
    let u = fig_design();
    let protocol = BoundProtocol::Adversarial { radius: DeltaRule::New };
    let run = |rule: DeltaRule, protocol: &BoundProtocol| {
        verify_generalization_bound(&u, 2500, 2500, 500, &rule, 0.0, protocol, 0.05, &Rng::new(1007, 0)).unwrap().coverage
    };
    let new = run(DeltaRule::New, &protocol);
    let bcw = run(DeltaRule::Bcw, &protocol);
    // Reported only: the test law sits inside a ball of radius epsilon.
    let eps = 0.05;
    let within = |rule: DeltaRule| {
        verify_generalization_bound(&u, 2500, 2500, 100, &rule, eps, &BoundProtocol::WithinBall, 0.05, &Rng::new(1007, 0)).unwrap().coverage
    };
    let (wn, wb) = (within(DeltaRule::New), within(DeltaRule::Bcw));
    (
        new >= 0.95 - 0.03 && new - bcw >= 0.10,
        format!("coverage new = {new:.3}, bcw = {bcw:.3} (within-ball eps={eps}, 100 reps: new {wn:.3}, bcw {wb:.3})"),
    )
}

fn adversarial_comparison() -> Outcome {
    let g = GaussianDesign { beta: vec![1.0; 100], sigma_eps: 1.0 };
    let (n, alpha) = (2000, 0.05);
    let ests = comparison_estimators(&g, n, alpha).unwrap();
    let delta = delta_bcw_practice(n, 100, alpha).unwrap();
    let design = Design::Gaussian(g);
    let mean = |p: &Perturbation| {
        let res = run_train_test(&design, n, 1000, p, &ests, 200, false, &Rng::new(1008, 0)).unwrap();
        let get = |name: &str| res.aggregates.iter().find(|a| a.estimator == name).unwrap().mean_test_rmspe.unwrap();
        [get("ols"), get("ridge"), get("lasso"), get("sqrt_lasso")]
    };
    let wc = mean(&Perturbation::WorstCase { delta, sigma: 1.0 });
    let clean = mean(&Perturbation::None);
    let adv = wc[3] < wc[0] && wc[3] < wc[1] && wc[3] < wc[2];
    let calm = clean[1] >= clean[0] && clean[2] >= clean[0] && clean[3] >= clean[0];
    (
        adv && calm,
        format!(
            "worst-case [ols ridge lasso sqrt] = [{:.4} {:.4} {:.4} {:.4}]; clean = [{:.7} {:.7} {:.7} {:.7}], clean ridge - ols = {:.3e}",
            wc[0], wc[1], wc[2], wc[3], clean[0], clean[1], clean[2], clean[3], clean[1] - clean[0]
        ),
    )
}

fn reparameterization() -> Outcome {
    let g = GaussianDesign { beta: vec![1.0; 100], sigma_eps: 1.0 };
    let grid: Vec<usize> = (1..=10).map(|k| 200 * k).collect();
    let res = run_lasso_equivalence(&g, &grid, 1000, 10, 0.05, &Rng::new(1009, 0)).unwrap();
    let las: Vec<_> = res.records.iter().filter(|r| r.estimator == "lasso_reparam").collect();
    let gap = las.iter().map(|r| r.coef_gap.unwrap()).fold(0.0f64, f64::max);
    let ratio = las.iter().map(|r| r.lambda_ratio.unwrap()).sum::<f64>() / las.len() as f64;
    (
        las.len() == 100 && gap <= 1e-6 && (5.0..=20.0).contains(&ratio),
        format!("{} replications, max sup-norm gap = {gap:.3e}, mean lambda ratio = {ratio:.3}", las.len()),
    )
}

/// Coarse-to-fine grid minimum of a convex objective on `[-w, w]^d` around `center`.
fn grid_oracle(f: &dyn Fn(&[f64]) -> f64, center: &[f64], mut w: f64) -> f64 {
    let d = center.len();
    let mut c = center.to_vec();
    let mut best = f(&c);
    let k = 20;
    for _ in 0..40 {
        let mut arg = c.clone();
        let steps: Vec<f64> = (0..=k).map(|i| -w + 2.0 * w * i as f64 / k as f64).collect();
        let mut p = vec![0.0; d];
        let mut visit = |p: &[f64]| {
            let v = f(p);
            if v < best {
                best = v;
                arg = p.to_vec();
            }
        };
        if d == 1 {
            for s in &steps {
                p[0] = c[0] + s;
                visit(&p);
            }
        } else {
            for s in &steps {
                for t in &steps {
                    p[0] = c[0] + s;
                    p[1] = c[1] + t;
                    visit(&p);
                }
            }
        }
        c = arg;
        w *= 0.5;
    }
    best
}

fn solver_oracle() -> Outcome {
    let mut g = Rng::new(1010, 0).generator();
    let mut worst = 0.0f64;
    let mut cells = 0;
    for r in [1.0, 1.5, 2.0] {
        for kind in 0..3 {
            cells += 1;
            for inst in 0..50 {
                let d = 1 + inst % 2;
                let n = g.random_range(8..=40);
                let data = random_dataset(&mut g, n, d);
                let penalty = match kind {
                    0 => PenaltySpec::L1,
                    1 => PenaltySpec::Lp { p: 2.0 },
                    _ => random_slope(&mut g, d),
                };
                let prob = RobustProblem::new(r, 1.0, g.random_range(0.0..1.5), penalty).unwrap();
                let rep = solve_penalized(&data, &prob, &SolverOptions::default()).unwrap();
                let ols = solve_ols(&data).unwrap();
                let w = 4.0 * (1.0 + ols.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                let f = |b: &[f64]| prob.objective(&data, b).unwrap();
                let oracle = grid_oracle(&f, &vec![0.0; d], w);
                worst = worst.max((rep.objective_value - oracle).abs());
            }
        }
    }
    (worst <= 1e-3, format!("{cells} cells x 50 instances, max |solver - oracle| = {worst:.3e}"))
}

#[test]
fn acceptance() {
    let criteria: [(&str, Duration, fn() -> Outcome); 10] = [
        ("duality tightness", Duration::from_secs(30), duality_tightness),
        ("ball membership", Duration::from_secs(5), ball_membership),
        ("1-D Wasserstein oracle", Duration::from_secs(60), wasserstein_oracle),
        ("Kolmogorov quantile", Duration::from_secs(60), kolmogorov),
        ("delta ratio", Duration::from_secs(1), delta_ratio),
        ("zero-selection threshold", Duration::from_secs(600), zero_selection),
        ("generalization-bound coverage", Duration::from_secs(900), bound_coverage),
        ("adversarial comparison", Duration::from_secs(1200), adversarial_comparison),
        ("LASSO reparameterization", Duration::from_secs(1200), reparameterization),
        ("solver oracle equivalence", Duration::from_secs(600), solver_oracle),
    ];
    let mut failed = Vec::new();
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = f();
        let took = start.elapsed();
        let pass = ok && took <= *limit;
        println!("{} criterion {:>2} {name}: {detail} [{:.2}s, limit {}s]", if pass { "PASS" } else { "FAIL" }, i + 1, took.as_secs_f64(), limit.as_secs());
        if !pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
