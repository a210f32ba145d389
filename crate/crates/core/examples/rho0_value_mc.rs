//! With uncorrelated income the value function has no closed form and is
//! estimated by Monte Carlo; the estimate tightens as paths are added.

use regimeweave::{
    compose_independent, estimate_value_rho0, optimal_strategy, validate_generator, Case, MarketModel,
    RegimeParams,
};

fn main() -> regimeweave::Result<()> {
    let eps = validate_generator(&[vec![-0.5, 0.5], vec![0.3, -0.3]])?;
    let zeta = validate_generator(&[vec![-0.2, 0.2], vec![0.4, -0.4]])?;
    let regimes = vec![
        RegimeParams { alpha: 0.10, sigma: 0.15, mu: 1.0, delta: 0.2 },
        RegimeParams { alpha: 0.02, sigma: 0.25, mu: 1.0, delta: 0.2 },
        RegimeParams { alpha: 0.10, sigma: 0.15, mu: 0.5, delta: 0.35 },
        RegimeParams { alpha: 0.02, sigma: 0.25, mu: 0.5, delta: 0.35 },
    ];
    let model = MarketModel::new(compose_independent(&eps, &zeta), 0.03, 0.0, 2.0, 1.0, regimes)?;
    let dt = 1.0 / 512.0;

    for n in [1_000, 4_000, 16_000] {
        let v = estimate_value_rho0(&model, 0.0, 1.0, 1.0, 0, n, dt, 7)?;
        println!("n_paths={n:>6}  V(0, 1, 1, 0) = {:.8} ± {:.2e}", v.mean, v.stderr);
    }
    let pi = optimal_strategy(&model, Case::Rho0)?;
    println!("optimal weight in regime 0 at t=0: {:.6}", pi.weight(0.0, 1.0, 0));
    Ok(())
}
