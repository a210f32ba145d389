//! Solves the correlated normal-income problem: the M curve, the regime
//! factors h(t, i), the optimal weights and a few value-function points.

use regimeweave::{
    compose_independent, validate_generator, value_function, Case, MarketModel, RegimeParams, ValueOptions,
};

fn main() -> regimeweave::Result<()> {
    let eps = validate_generator(&[vec![-0.5, 0.5], vec![0.3, -0.3]])?;
    let zeta = validate_generator(&[vec![-0.2, 0.2], vec![0.4, -0.4]])?;
    let chain = compose_independent(&eps, &zeta);
    let labels: Vec<String> = (0..4).map(|i| chain.mapping.label(i)).collect();
    let regimes = vec![
        RegimeParams { alpha: 0.10, sigma: 0.15, mu: 1.0, delta: 0.2 },
        RegimeParams { alpha: 0.02, sigma: 0.25, mu: 1.0, delta: 0.2 },
        RegimeParams { alpha: 0.10, sigma: 0.15, mu: 0.5, delta: 0.35 },
        RegimeParams { alpha: 0.02, sigma: 0.25, mu: 0.5, delta: 0.35 },
    ];
    let model = MarketModel::new(chain, 0.03, 0.3, 2.0, 1.0, regimes)?;
    let bundle = value_function(&model, Case::NormalIncome, ValueOptions::default())?;

    let m = bundle.m_curve().expect("closed-form case");
    let h = bundle.h_table().expect("closed-form case");
    println!("M(0) = {:.10}", m.value(0.0));
    for (i, label) in labels.iter().enumerate() {
        println!(
            "{label:<18} h(0) = {:.8}  pi*(0) = {:.6}  V(0, 1, 1) = {:.8}",
            h.value(0.0, i),
            bundle.strategy().weight(0.0, 1.0, i),
            bundle.value(0.0, 1.0, 1.0, i)?.value
        );
    }
    println!("HJB residual at (0.5, 1, 1), regime 0: {:.3e}", bundle.hjb_residual((0.5, 1.0, 1.0), 0)?);
    Ok(())
}
