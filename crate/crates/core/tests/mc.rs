mod common;

use common::*;
use regimeweave::mc::{default_dt, THREADS_ENV};
use regimeweave::{
    estimate_g_mc, estimate_h_mc, estimate_value_rho0, simulate_income_path, simulate_path, solve_h_ode,
    utility, Error, RegimePath, RngStream,
};

#[test]
fn estimates_ignore_worker_count() {
    let model = reference_model(0.0);
    let run = || {
        (
            estimate_h_mc(&model, 0.2, 1, 4000, 5).unwrap(),
            estimate_g_mc(&model, 0.2, 1.0, 2, 4000, 0.01, 5).unwrap(),
        )
    };
    std::env::set_var(THREADS_ENV, "1");
    let one = run();
    std::env::set_var(THREADS_ENV, "4");
    let four = run();
    std::env::remove_var(THREADS_ENV);
    assert_eq!(one, four);
    assert_eq!(one, run());
}

#[test]
fn single_regime_h_is_exact() {
    let model = single_regime(regime(0.09, 0.2, 0.8, 0.3), 0.03, 0.4, 2.0, 1.0);
    let mc = estimate_h_mc(&model, 0.25, 0, 100, 1).unwrap();
    let ode = solve_h_ode(&model, 2048).unwrap();
    assert_eq!(mc.stderr, 0.0);
    assert!((mc.mean / ode.value(0.25, 0) - 1.0).abs() < 1e-10);
}

#[test]
fn two_regime_h_matches_ode() {
    let chain = regimeweave::compose_independent(&two_state(0.8, 0.5), &one_state());
    let regs = vec![regime(0.11, 0.18, 0.7, 0.25), regime(0.01, 0.3, 0.2, 0.4)];
    let model = regimeweave::MarketModel::new(chain, 0.04, 0.35, 3.0, 1.0, regs).unwrap();
    let ode = solve_h_ode(&model, 2048).unwrap();
    for i in 0..2 {
        let mc = estimate_h_mc(&model, 0.0, i, 100_000, 11).unwrap();
        assert!((mc.mean - ode.value(0.0, i)).abs() < 3.0 * mc.stderr, "regime {i}");
    }
}

#[test]
fn stderr_scales_with_root_n() {
    let model = reference_model(0.3);
    let a = estimate_h_mc(&model, 0.0, 0, 20_000, 3).unwrap();
    let b = estimate_h_mc(&model, 0.0, 0, 40_000, 3).unwrap();
    let ratio = a.stderr / b.stderr;
    assert!((ratio - 2f64.sqrt()).abs() < 0.1, "{ratio}");
}

#[test]
fn g_degenerate_functional() {
    let chain = regimeweave::compose_independent(&two_state(0.5, 0.3), &one_state());
    let regs = vec![regime(0.03, 0.2, 0.5, 0.3), regime(0.03, 0.3, 0.1, 0.1)];
    let model = regimeweave::MarketModel::new(chain, 0.03, 0.0, 1e-300, 1.0, regs).unwrap();
    let g = estimate_g_mc(&model, 0.0, 1.0, 0, 1000, 0.01, 2).unwrap();
    assert_eq!(g.mean, 1.0);
    assert!(g.stderr < 1e-200);
}

#[test]
fn g_deterministic_income_closed_form() {
    let (alpha, sigma, r, gamma, y) = (0.09, 0.25, 0.03, 2.0, 0.8);
    let model = single_regime(regime(alpha, sigma, 0.0, 0.0), r, 0.0, gamma, 1.0);
    let g = estimate_g_mc(&model, 0.4, y, 0, 1000, default_dt(&model, 0.4), 9).unwrap();
    let tau = 0.6;
    let want = (-tau * (alpha - r).powi(2) / (2.0 * sigma * sigma) - gamma * y * ((r * tau).exp() - 1.0) / r).exp();
    assert!((g.mean - want).abs() <= 3.0 * g.stderr + 1e-13 * want);
}

#[test]
fn g_step_halving_stays_within_noise() {
    let model = reference_model(0.0);
    let dt = default_dt(&model, 0.0);
    let coarse = estimate_g_mc(&model, 0.0, 1.0, 0, 100_000, dt, 21).unwrap();
    let fine = estimate_g_mc(&model, 0.0, 1.0, 0, 100_000, dt / 2.0, 21).unwrap();
    assert!((coarse.mean - fine.mean).abs() < coarse.stderr, "{coarse:?} {fine:?}");
}

#[test]
fn value_rho0_properties() {
    let model = reference_model(0.0);
    let terminal = estimate_value_rho0(&model, 1.0, 0.7, 1.0, 2, 100, 0.01, 1).unwrap();
    assert_eq!(terminal.mean, utility(0.7, 2.0));
    let lo = estimate_value_rho0(&model, 0.3, 0.0, 1.0, 1, 2000, 0.01, 4).unwrap();
    let hi = estimate_value_rho0(&model, 0.3, 0.5, 1.0, 1, 2000, 0.01, 4).unwrap();
    assert!(hi.mean > lo.mean);
    assert!(lo.mean < 0.0);
    assert!(matches!(
        estimate_value_rho0(&reference_model(0.3), 0.0, 0.0, 0.0, 0, 10, 0.01, 1),
        Err(Error::NonZeroRho { .. })
    ));
}

#[test]
fn estimates_are_positive() {
    let model = reference_model(0.0);
    assert!(estimate_h_mc(&model, 0.0, 3, 1000, 8).unwrap().mean > 0.0);
    assert!(estimate_g_mc(&model, 0.0, -3.0, 3, 1000, 0.01, 8).unwrap().mean > 0.0);
}

#[test]
fn deterministic_income_path() {
    let model = single_regime(regime(0.05, 0.2, 0.4, 0.0), 0.03, 0.0, 2.0, 1.0);
    let chain = RegimePath::constant(0.2, 1.0, 0).unwrap();
    let path = simulate_income_path(&model, &chain, 1.5, 0.1, &mut RngStream::new(1, 0).rng()).unwrap();
    for (t, y) in path.times.iter().zip(&path.values) {
        assert!((y - (1.5 + 0.4 * (t - 0.2))).abs() < 1e-12);
    }
    assert_eq!(*path.times.last().unwrap(), 1.0);
}

#[test]
fn income_variance_is_exact() {
    let delta = 0.3;
    let model = single_regime(regime(0.05, 0.2, 0.4, delta), 0.03, 0.0, 2.0, 1.0);
    let n = 100_000;
    let chain = RegimePath::constant(0.0, 1.0, 0).unwrap();
    let ends: Vec<f64> = (0..n)
        .map(|k| {
            let mut rng = RngStream::new(2, k).rng();
            let p = simulate_income_path(&model, &chain, 0.0, 0.1, &mut rng).unwrap();
            *p.values.last().unwrap() - 0.4
        })
        .collect();
    let mean = ends.iter().sum::<f64>() / n as f64;
    let var = ends.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    // stderr of a Gaussian sample variance is σ²√(2/(n-1))
    let se = delta * delta * (2.0 / (n - 1) as f64).sqrt();
    assert!((var - delta * delta).abs() < 3.0 * se, "{var}");
}

#[test]
fn income_steps_split_at_jumps() {
    let chain_q = two_state(0.5, 0.3);
    let chain = regimeweave::compose_independent(&chain_q, &one_state());
    let regs = vec![regime(0.05, 0.2, 1.0, 0.0), regime(0.05, 0.2, -1.0, 0.0)];
    let model = regimeweave::MarketModel::new(chain, 0.03, 0.0, 2.0, 1.0, regs).unwrap();
    let forced = RegimePath::new(0.0, 1.0, vec![(0.0, 0), (0.35, 1)]).unwrap();
    let path = simulate_income_path(&model, &forced, 0.0, 0.25, &mut RngStream::new(0, 0).rng()).unwrap();
    assert!(path.times.contains(&0.35));
    let end = *path.values.last().unwrap();
    assert!((end - (0.35 - 0.65)).abs() < 1e-12);
    assert!(simulate_path(&chain_q, 0, 0.0, 1.0, &mut RngStream::new(0, 0).rng()).is_ok());
}
