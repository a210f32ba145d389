//! Compares the expected terminal utility of the optimal policy against
//! rescaled, constant and wealth-free alternatives on common random numbers.

use regimeweave::{
    compose_independent, evaluate_policy, optimal_strategy, validate_generator, value_function, Case,
    MarketModel, RegimeParams, Strategy, ValueOptions,
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
    let model = MarketModel::new(compose_independent(&eps, &zeta), 0.03, 0.3, 2.0, 1.0, regimes)?;
    let optimal = optimal_strategy(&model, Case::NormalIncome)?;
    let exact = value_function(&model, Case::NormalIncome, ValueOptions::default())?.value(0.0, 1.0, 1.0, 0)?;
    println!("closed-form V(0, 1, 1, 0) = {:.8}", exact.value);

    let (n, dt, seed) = (20_000, 1.0 / 256.0, 11);
    let candidates = [
        ("optimal", optimal.clone()),
        ("optimal x0.5", optimal.scaled(0.5)),
        ("optimal x1.5", optimal.scaled(1.5)),
        ("constant 1.0", Strategy::constant(&model, 1.0)),
        ("cash only", Strategy::constant(&model, 0.0)),
    ];
    for (name, s) in &candidates {
        let e = evaluate_policy(&model, s, 0.0, 1.0, 1.0, 0, n, dt, seed)?;
        println!("{name:<14} E[U(X_T)] = {:.8} ± {:.2e}", e.mean, e.stderr);
    }
    Ok(())
}
