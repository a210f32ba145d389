//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are always printed.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use regimeweave::cli::{cmd_validate, load_config, Grid};
use regimeweave::compose::kronecker_sum_oracle;
use regimeweave::hjb::{Partials, ValueField};
use regimeweave::portfolio::{hedge_weight, merton_weight};
use regimeweave::{
    compose_copula, compose_independent, estimate_h_mc, estimate_value_rho0, evaluate_policy,
    marginalize, optimal_strategy, simulate_path, solve_h_ode, solve_m, stationary_distribution,
    transition_probabilities, value_function, Case, Component, CopulaSpec, MarketModel,
    NormalIncomeValue, RngStream, ValueOptions,
};

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Criterion 1: independent composition equals the Kronecker-sum oracle.
fn c1_kronecker() -> Outcome {
    let mut rng = rng(1);
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let m = 2 + k % 3;
        let n = 2 + (k / 3) % 3;
        let a = random_generator(&mut rng, m);
        let b = random_generator(&mut rng, n);
        let got = compose_independent(&a, &b).generator;
        let want = kronecker_sum_oracle(&a, &b);
        let scale = want.matrix().amax().max(1.0);
        worst = worst.max((got.matrix() - want.matrix()).amax() / scale);
    }
    // 2x2 symbolic pattern
    let (a0, a1, b0, b1) = (0.7, 0.2, 0.4, 1.1);
    let g = compose_independent(&two_state(a0, a1), &two_state(b0, b1)).generator;
    let pattern = [
        [-(a0 + b0), a0, b0, 0.0],
        [a1, -(a1 + b0), 0.0, b0],
        [b1, 0.0, -(a0 + b1), a0],
        [0.0, b1, a1, -(a1 + b1)],
    ];
    let pattern_ok = (0..4).all(|i| (0..4).all(|j| g.rate(i, j) == pattern[i][j]));
    let simultaneous_zero = g.rate(0, 3) == 0.0 && g.rate(1, 2) == 0.0 && g.rate(2, 1) == 0.0 && g.rate(3, 0) == 0.0;
    outcome(
        worst <= 4.0 * f64::EPSILON && pattern_ok && simultaneous_zero,
        format!("max relative diff {worst:.2e} over 200 pairs; 2x2 pattern exact: {pattern_ok}"),
    )
}

/// Criterion 2: marginals of an independent composition are the components.
fn c2_marginals() -> Outcome {
    let mut rng = rng(2);
    let mut worst: f64 = 0.0;
    for (m, n) in [(2, 2), (2, 3), (3, 4)] {
        let a = random_generator(&mut rng, m);
        let b = random_generator(&mut rng, n);
        let spec = compose_independent(&a, &b);
        for t in [0.1, 1.0, 5.0] {
            let pe = marginalize(&spec, Component::Epsilon, t, None).unwrap();
            let pz = marginalize(&spec, Component::Zeta, t, None).unwrap();
            let ea = transition_probabilities(&a, t).unwrap();
            let eb = transition_probabilities(&b, t).unwrap();
            worst = worst
                .max(max_abs_diff(&pe.to_rows(), &ea.to_rows()))
                .max(max_abs_diff(&pz.to_rows(), &eb.to_rows()));
        }
    }
    outcome(worst < 1e-10, format!("max |marginal - component| {worst:.2e} (tol 1e-10)"))
}

/// Criterion 3: the copula composition at zero correlation converges to the
/// independent composition.
fn c3_copula() -> Outcome {
    let a = two_state(0.5, 0.3);
    let b = two_state(0.2, 0.4);
    let ind = compose_independent(&a, &b).generator;
    let err = |fd: f64| {
        let spec = CopulaSpec::from_matrix([[1.0, 0.0], [0.0, 1.0]], fd).unwrap();
        let c = compose_copula(&a, &b, &spec).unwrap().generator;
        (c.matrix() - ind.matrix()).amax()
    };
    let (e3, e4) = (err(1e-3), err(1e-4));
    let ratio = if e4 > 0.0 { e3 / e4 } else { f64::INFINITY };
    outcome(
        e3 < 10.0 * 1e-3 && e4 < 10.0 * 1e-4 && ratio >= 5.0,
        format!("err(1e-3)={e3:.2e} err(1e-4)={e4:.2e} shrink x{ratio:.1}"),
    )
}

/// Criterion 4: long-run occupancy and holding times of simulated paths.
fn c4_chain_statistics() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    let chains = [
        ("2-state", two_state(0.5, 0.3)),
        ("reference compound", compose_independent(&two_state(0.5, 0.3), &two_state(0.2, 0.4)).generator),
    ];
    for (name, q) in chains {
        let pi = stationary_distribution(&q).unwrap();
        let jump_rate: f64 = pi.iter().enumerate().map(|(i, p)| p * q.exit_rate(i)).sum();
        let horizon = 1e6 / jump_rate;
        let mut rng = RngStream::new(4, 0).rng();
        let path = simulate_path(&q, 0, 0.0, horizon, &mut rng).unwrap();
        let occ: Vec<f64> = path.occupancy(q.n_states()).iter().map(|o| o / horizon).collect();
        let occ_err = occ.iter().zip(&pi).fold(0.0f64, |m, (o, p)| m.max((o - p).abs()));
        // completed holding times only; the last segment is censored
        let n = q.n_states();
        let mut total = vec![0.0; n];
        let mut count = vec![0usize; n];
        let segs: Vec<_> = path.segments().collect();
        for &(a, b, s) in &segs[..segs.len() - 1] {
            total[s] += b - a;
            count[s] += 1;
        }
        let hold_err = (0..n)
            .map(|s| ((total[s] / count[s] as f64) * q.exit_rate(s) - 1.0).abs())
            .fold(0.0f64, f64::max);
        ok &= occ_err < 0.01 && hold_err < 0.01;
        detail.push(format!(
            "{name}: {} jumps, occupancy err {occ_err:.1e}, holding-mean rel err {hold_err:.1e}",
            path.n_jumps()
        ));
    }
    outcome(ok, detail.join("; "))
}

/// Backward RK4 for `M' = γ e^{r(T-t)}`, `M(T) = 0`, reported on `n` points.
fn m_oracle(gamma: f64, r: f64, horizon: f64, n: usize) -> Vec<(f64, f64)> {
    let sub = 50;
    let f = |t: f64| gamma * (r * (horizon - t)).exp();
    let dt = horizon / ((n - 1) * sub) as f64;
    let mut out = vec![(horizon, 0.0)];
    let mut m = 0.0;
    for k in (0..(n - 1) * sub).rev() {
        let t1 = (k + 1) as f64 * dt;
        let t0 = k as f64 * dt;
        let tm = 0.5 * (t0 + t1);
        // the right-hand side does not depend on M
        m -= dt / 6.0 * (f(t1) + 4.0 * f(tm) + f(t0));
        if k % sub == 0 {
            out.push((t0, m));
        }
    }
    out.reverse();
    out
}

/// Criterion 5: closed-form M against numeric integration.
fn c5_m_curve() -> Outcome {
    let mut worst: f64 = 0.0;
    for r in [0.03, 1e-8, 0.0, -0.02] {
        let model = reference_model(0.3).with_r(r).unwrap();
        let curve = solve_m(&model);
        for (t, want) in m_oracle(model.gamma(), r, model.horizon(), 1000) {
            worst = worst.max((curve.value(t) - want).abs());
        }
    }
    outcome(worst < 1e-8, format!("max |closed - numeric| {worst:.2e} on 1000 points, r in {{0.03, 1e-8, 0, -0.02}}"))
}

/// `exp(∫_t^T c(s) ds)` for one regime, with the integrals of M and M² in
/// closed form.
fn single_regime_h(model: &MarketModel, t: f64) -> f64 {
    let p = model.regime(0);
    let (r, gamma, rho) = (model.r(), model.gamma(), model.rho());
    let tau = model.horizon() - t;
    let e = (r * tau).exp();
    let int_m = -(gamma / r) * ((e - 1.0) / r - tau);
    let int_m2 = (gamma / r).powi(2) * (((2.0 * r * tau).exp() - 1.0) / (2.0 * r) - 2.0 * (e - 1.0) / r + tau);
    let premium = (p.alpha - r).powi(2) / (2.0 * p.sigma * p.sigma);
    let loading = p.mu - rho * (p.alpha - r) * p.delta / p.sigma;
    (-premium * tau + loading * int_m + 0.5 * (1.0 - rho * rho) * p.delta * p.delta * int_m2).exp()
}

/// Criterion 6: the h ODE against closed form, matrix exponential and MC.
fn c6_h() -> Outcome {
    // (a) single regime
    let single = single_regime(regime(0.09, 0.2, 0.8, 0.3), 0.03, 0.4, 2.0, 2.0);
    let h = solve_h_ode(&single, 2048).unwrap();
    let mut err_a: f64 = 0.0;
    for k in 0..=40 {
        let t = 2.0 * k as f64 / 40.0;
        let want = single_regime_h(&single, t);
        err_a = err_a.max(((h.value(t, 0) - want) / want).abs());
    }
    // (b) two regimes with constant coefficients: ρ = 0, δ = 0, μ = 0
    let q = two_state(0.6, 0.9);
    let chain = compose_independent(&q, &one_state());
    let regs = vec![regime(0.12, 0.2, 0.0, 0.0), regime(0.0, 0.3, 0.0, 0.0)];
    let model = MarketModel::new(chain, 0.03, 0.0, 2.0, 1.5, regs).unwrap();
    let h2 = solve_h_ode(&model, 2048).unwrap();
    let c: Vec<f64> = model
        .regimes()
        .iter()
        .map(|p| -(p.alpha - 0.03f64).powi(2) / (2.0 * p.sigma * p.sigma))
        .collect();
    let a = DMatrix::from_fn(2, 2, |i, j| q.rate(i, j) + if i == j { c[i] } else { 0.0 });
    let mut err_b: f64 = 0.0;
    for k in 0..=30 {
        let t = 1.5 * k as f64 / 30.0;
        let e = (a.clone() * (1.5 - t)).exp();
        for i in 0..2 {
            let want = e[(i, 0)] + e[(i, 1)];
            err_b = err_b.max(((h2.value(t, i) - want) / want).abs());
        }
    }
    // (c) Monte Carlo on the four-regime reference model
    let reference = reference_model(0.3);
    let h4 = solve_h_ode(&reference, 2048).unwrap();
    let mut worst_sigma: f64 = 0.0;
    let mut ok_c = true;
    for &t in &[0.0, 0.5] {
        for i in 0..4 {
            let mc = estimate_h_mc(&reference, t, i, 100_000, 606).unwrap();
            let z = (mc.mean - h4.value(t, i)).abs() / mc.stderr;
            worst_sigma = worst_sigma.max(z);
            ok_c &= z < 3.0;
        }
    }
    outcome(
        err_a < 1e-6 && err_b < 1e-8 && ok_c,
        format!("(a) rel err {err_a:.2e}; (b) rel err {err_b:.2e}; (c) max |MC-ODE|/stderr {worst_sigma:.2}"),
    )
}

/// Criterion 7: the ρ = 0 Monte Carlo value against two references.
fn c7_rho0_value() -> Outcome {
    // (a) one regime, deterministic income y + μ(s - t)
    let (alpha, sigma, mu, r, gamma, horizon) = (0.08, 0.2, 0.5, 0.03, 1.5, 2.0);
    let model = single_regime(regime(alpha, sigma, mu, 0.0), r, 0.0, gamma, horizon);
    let mut ok_a = true;
    let mut worst_a: f64 = 0.0;
    for &(t, x, y) in &[(0.0, 1.0, 1.0), (0.7, -0.5, 2.0), (1.5, 0.3, 0.0)] {
        let tau = horizon - t;
        let e = (r * tau).exp();
        let income = y * (e - 1.0) / r + mu * (tau * (e - 1.0) / r - (e * (r * tau - 1.0) + 1.0) / (r * r));
        let premium = (alpha - r).powi(2) / (2.0 * sigma * sigma) * tau;
        let want = -(1.0 / gamma) * (-gamma * x * e).exp() * (-(gamma * income + premium)).exp();
        let mc = estimate_value_rho0(&model, t, x, y, 0, 100_000, tau / 512.0, 7).unwrap();
        let diff = (mc.mean - want).abs();
        worst_a = worst_a.max(diff / want.abs());
        ok_a &= diff <= 3.0 * mc.stderr + 1e-12 * want.abs();
    }
    // (b) ρ = 0 normal-income model against its closed form + ODE
    let model = reference_model(0.0);
    let ode = value_function(&model, Case::NormalIncome, ValueOptions::default()).unwrap();
    let mut ok_b = true;
    let mut worst_b: f64 = 0.0;
    for &(t, x, y, i) in &[(0.0, 1.0, 1.0, 0), (0.0, 0.5, 0.5, 3), (0.5, 1.0, 1.0, 1), (0.5, 0.0, 2.0, 2)] {
        let det = ode.value(t, x, y, i).unwrap().value;
        let mc = estimate_value_rho0(&model, t, x, y, i, 100_000, (1.0 - t) / 512.0, 77).unwrap();
        let z = (mc.mean - det).abs() / mc.stderr;
        worst_b = worst_b.max(z);
        ok_b &= z < 3.0;
    }
    outcome(
        ok_a && ok_b,
        format!("(a) max rel diff {worst_a:.2e} (zero variance); (b) max |MC-ODE|/stderr {worst_b:.2}"),
    )
}

/// Criterion 8: the optimal policy's expected utility matches the value
/// function and beats ±25 % perturbations.
fn c8_policy() -> Outcome {
    let model = reference_model(0.3);
    let bundle = value_function(&model, Case::NormalIncome, ValueOptions::default()).unwrap();
    let (x0, y0, i0, n, dt, seed) = (1.0, 1.0, 0, 100_000, 1.0 / 512.0, 88);
    let v = bundle.value(0.0, x0, y0, i0).unwrap();
    let score = |s: &regimeweave::Strategy| evaluate_policy(&model, s, 0.0, x0, y0, i0, n, dt, seed).unwrap();
    let opt = score(bundle.strategy());
    let z = (opt.mean - v.value).abs() / opt.stderr.hypot(v.stderr);
    let mut ok = z < 3.0;
    let mut excess = Vec::new();
    for f in [0.75, 1.25] {
        let e = score(&bundle.strategy().scaled(f));
        let se = e.stderr.max(opt.stderr);
        let over = (e.mean - opt.mean) / se;
        ok &= over <= 2.0;
        excess.push(format!("x{f}: {over:+.2} stderr"));
    }
    outcome(ok, format!("|E[U]-V|/stderr {z:.2}; perturbed excess {}", excess.join(", ")))
}

/// `h` multiplied by `1 + ε(T - t)/T`.
struct PerturbedH<'a> {
    base: &'a NormalIncomeValue,
    eps: f64,
    horizon: f64,
}

impl PerturbedH<'_> {
    fn factor(&self, t: f64) -> (f64, f64) {
        (1.0 + self.eps * (self.horizon - t) / self.horizon, -self.eps / self.horizon)
    }
}

impl ValueField for PerturbedH<'_> {
    fn value(&self, t: f64, x: f64, y: f64, i: usize) -> f64 {
        self.factor(t).0 * self.base.value(t, x, y, i)
    }

    fn partials(&self, t: f64, x: f64, y: f64, i: usize) -> Partials {
        let (f, df) = self.factor(t);
        let d = self.base.partials(t, x, y, i);
        Partials {
            v: f * d.v,
            v_t: f * d.v_t + df * d.v,
            v_x: f * d.v_x,
            v_y: f * d.v_y,
            v_xx: f * d.v_xx,
            v_yy: f * d.v_yy,
            v_xy: f * d.v_xy,
        }
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Criterion 9: HJB residual on a grid, and its sensitivity to h.
fn c9_hjb() -> Outcome {
    let model = reference_model(0.3);
    let bundle = value_function(&model, Case::NormalIncome, ValueOptions::default()).unwrap();
    let field = bundle.field().unwrap();
    let perturbed = PerturbedH { base: field, eps: 0.01, horizon: model.horizon() };
    let grid = Grid::default_for(&model);
    let mut worst: f64 = 0.0;
    let (mut base, mut bumped) = (Vec::new(), Vec::new());
    for t in grid.t.points() {
        for x in grid.x.points() {
            for y in grid.y.points() {
                for i in 0..model.n_regimes() {
                    let v = field.value(t, x, y, i);
                    let r = regimeweave::hjb_residual(&model, field, (t, x, y), i).unwrap();
                    let rp = regimeweave::hjb_residual(&model, &perturbed, (t, x, y), i).unwrap();
                    worst = worst.max(r.abs() / (1.0 + v.abs()));
                    base.push(r.abs());
                    bumped.push(rp.abs());
                }
            }
        }
    }
    let (mb, mp) = (median(base), median(bumped));
    let inflation = if mb > 0.0 { mp / mb } else { f64::INFINITY };
    outcome(
        worst < 1e-4 && inflation >= 10.0,
        format!("max |res|/(1+|V|) {worst:.2e} on 500 points; 1% h perturbation inflates median x{inflation:.1e}"),
    )
}

/// Criterion 10: strategy algebra.
fn c10_strategy() -> Outcome {
    let mut ok = true;
    let m0 = reference_model(0.0);
    let normal = optimal_strategy(&m0, Case::NormalIncome).unwrap();
    let rho0 = optimal_strategy(&m0, Case::Rho0).unwrap();
    for k in 0..=20 {
        let t = k as f64 / 20.0;
        for i in 0..4 {
            ok &= hedge_weight(&m0, i, t) == 0.0;
            ok &= normal.weight(t, 1.0, i) == rho0.weight(t, 1.0, i);
        }
    }
    let base = reference_model(0.3);
    for pair in [0.5, 1.0, 2.0, 4.0].windows(2) {
        let (a, b) = (base.with_gamma(pair[0]).unwrap(), base.with_gamma(pair[1]).unwrap());
        for i in 0..4 {
            for t in [0.0, 0.4, 0.9] {
                let half = merton_weight(&b, i, t) - 0.5 * merton_weight(&a, i, t);
                ok &= half.abs() <= 1e-15 * merton_weight(&a, i, t).abs();
                ok &= hedge_weight(&a, i, t) == hedge_weight(&b, i, t);
            }
        }
    }
    let one = single_regime(regime(0.10, 0.2, 0.0, 0.1), 0.03, 0.5, 2.0, 1.0);
    let merton_t = merton_weight(&one, 0, 1.0);
    let e = 0.03f64.exp();
    let hedge_hand = -0.1 * 0.5 * (e - 1.0) / (0.03 * 0.2 * e);
    let reg = (merton_t - 0.875).abs() < 1e-10
        && (merton_weight(&one, 0, 0.0) - 0.875 / e).abs() < 1e-10
        && (hedge_weight(&one, 0, 0.0) - hedge_hand).abs() < 1e-10;
    outcome(
        ok && reg,
        format!("merton(T)={merton_t:.12}, hedge(T-1)={:.10} vs hand {hedge_hand:.10}", hedge_weight(&one, 0, 0.0)),
    )
}

/// Criterion 11: byte-identical validation reports across repeats and
/// worker counts.
fn c11_reproducibility() -> Outcome {
    let cfg = load_config(&reference_config()).unwrap().with_paths(20_000);
    let grid = Grid::default_for(&cfg.model);
    let run = || cmd_validate(&cfg, &grid).unwrap().to_json();
    std::env::remove_var("REGIMEWEAVE_THREADS");
    let first = run();
    let second = run();
    std::env::set_var("REGIMEWEAVE_THREADS", "3");
    let threaded = run();
    std::env::set_var("REGIMEWEAVE_THREADS", "1");
    let single = run();
    std::env::remove_var("REGIMEWEAVE_THREADS");
    let passed = serde_json::from_str::<serde_json::Value>(&first).unwrap()["results"]["passed"] == true;
    outcome(
        first == second && first == threaded && first == single && passed,
        format!(
            "repeat identical: {}; threads 3/1 identical: {}/{}; report passed: {passed}",
            first == second,
            first == threaded,
            first == single
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 11] = [
        ("1 generator composition exactness", c1_kronecker, Duration::from_secs(1)),
        ("2 marginal preservation", c2_marginals, Duration::from_secs(1)),
        ("3 copula consistency", c3_copula, Duration::from_secs(10)),
        ("4 chain simulation statistics", c4_chain_statistics, Duration::from_secs(30)),
        ("5 M closed form vs numeric", c5_m_curve, Duration::from_secs(1)),
        ("6 h ODE vs oracles and MC", c6_h, Duration::from_secs(120)),
        ("7 rho=0 value function", c7_rho0_value, Duration::from_secs(180)),
        ("8 policy optimality", c8_policy, Duration::from_secs(180)),
        ("9 HJB residual", c9_hjb, Duration::from_secs(30)),
        ("10 strategy algebra", c10_strategy, Duration::from_secs(1)),
        ("11 reproducibility", c11_reproducibility, Duration::from_secs(600)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (name, run, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(_) => (false, "panicked".to_string()),
        };
        let pass = pass && elapsed <= budget;
        if !pass {
            failures += 1;
        }
        println!(
            "{} criterion {name}: {detail} [{:.2}s, budget {}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
