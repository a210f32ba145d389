//! Builds the compound generator of two independent two-state chains, then
//! prints its embedded jump chain, stationary law and one-year transitions.

use regimeweave::compose::kronecker_sum_oracle;
use regimeweave::{
    compose_independent, embedded_chain, marginalize, stationary_distribution,
    transition_probabilities, validate_generator, Component,
};

fn main() -> regimeweave::Result<()> {
    let eps = validate_generator(&[vec![-0.5, 0.5], vec![0.3, -0.3]])?;
    let zeta = validate_generator(&[vec![-0.2, 0.2], vec![0.4, -0.4]])?;
    let spec = compose_independent(&eps, &zeta);

    println!("compound generator:");
    for (i, row) in spec.generator.to_rows().iter().enumerate() {
        println!("  {:<18} {:?}", spec.mapping.label(i), row);
    }
    let oracle = kronecker_sum_oracle(&eps, &zeta);
    println!("matches Kronecker sum: {}", oracle == spec.generator);

    let jumps = embedded_chain(&spec.generator)?;
    println!("embedded chain row 0: {:?}", jumps.to_rows()[0]);
    println!("stationary: {:?}", stationary_distribution(&spec.generator)?);
    let p = transition_probabilities(&spec.generator, 1.0)?;
    println!("P(1) row 0: {:?}", p.to_rows()[0]);

    let marginal = marginalize(&spec, Component::Epsilon, 1.0, None)?;
    let direct = transition_probabilities(&eps, 1.0)?;
    println!("epsilon marginal {:?} vs direct {:?}", marginal.to_rows()[0], direct.to_rows()[0]);
    Ok(())
}
