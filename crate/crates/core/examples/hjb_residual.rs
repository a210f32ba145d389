//! Checks the closed-form value function against the HJB equation, both with
//! its analytic partials and with finite differences.

use regimeweave::hjb::{apply_operator_l, finite_difference_partials, foc_control, ValueField};
use regimeweave::{
    compose_independent, hjb_residual, solve_h_ode, validate_generator, MarketModel, NormalIncomeValue,
    RegimeParams,
};
use std::sync::Arc;

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
    let h = Arc::new(solve_h_ode(&model, 2048)?);
    let field = NormalIncomeValue::new(model.clone(), h);

    for &(t, x, y) in &[(0.0, 1.0, 1.0), (0.4, -0.5, 2.0), (0.9, 2.0, 0.0)] {
        for i in 0..model.n_regimes() {
            let analytic = hjb_residual(&model, &field, (t, x, y), i)?;
            let fd = finite_difference_partials(|t, x, y| field.value(t, x, y, i), t, x, y);
            let pi = foc_control(&model, &fd, (t, x, y), i)?;
            // the coupling term needs the other regimes, which the FD stencil omits
            let coupling: f64 = (0..model.n_regimes())
                .map(|j| model.generator().rate(i, j) * field.value(t, x, y, j))
                .sum();
            let fd_residual = apply_operator_l(&model, &fd, (t, x, y), pi, i) + coupling;
            println!(
                "t={t:.1} x={x:+.1} y={y:.1} i={i}  analytic {analytic:+.2e}  finite-difference {fd_residual:+.2e}"
            );
        }
    }
    Ok(())
}
