//! Simulates a handful of wealth trajectories under the optimal strategy.

use regimeweave::{
    compose_independent, optimal_strategy, simulate_wealth, validate_generator, Case, MarketModel,
    RegimeParams, RngStream,
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
    let strategy = optimal_strategy(&model, Case::NormalIncome)?;

    for k in 0..5 {
        let mut rng = RngStream::new(2026, k).rng();
        let path = simulate_wealth(&model, &strategy, 0.0, 1.0, 1.0, 0, 1.0 / 256.0, &mut rng)?;
        let switches = path.regimes.windows(2).filter(|w| w[0] != w[1]).count();
        println!(
            "path {k}: X(T) = {:.5}  Y(T) = {:.5}  regime switches = {switches}",
            path.terminal_wealth(),
            path.income.last().unwrap()
        );
    }
    Ok(())
}
