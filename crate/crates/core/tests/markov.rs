mod common;

use common::*;
use proptest::prelude::*;
use regimeweave::markov::rebuild_generator;
use regimeweave::{
    embedded_chain, simulate_path, stationary_distribution, transition_probabilities,
    validate_generator, Error, RngStream,
};

fn generator_strategy() -> impl Strategy<Value = regimeweave::GeneratorMatrix> {
    (2usize..=5, any::<u64>()).prop_map(|(n, seed)| random_generator(&mut rng(seed), n))
}

proptest! {
    #[test]
    fn validated_rows_balance(q in generator_strategy()) {
        for i in 0..q.n_states() {
            let off: f64 = (0..q.n_states()).filter(|&j| j != i).map(|j| q.rate(i, j)).sum();
            prop_assert!((0..q.n_states()).filter(|&j| j != i).all(|j| q.rate(i, j) >= 0.0));
            prop_assert_eq!(off + q.rate(i, i), 0.0);
        }
    }

    #[test]
    fn embedded_chain_round_trips(q in generator_strategy()) {
        let p = embedded_chain(&q).unwrap();
        let back = rebuild_generator(&p, &q.exit_rates()).unwrap();
        let scale = q.matrix().amax();
        prop_assert!((back.matrix() - q.matrix()).amax() <= 1e-14 * scale);
    }

    #[test]
    fn transition_rows_are_distributions(q in generator_strategy(), t in 0.0f64..20.0) {
        let p = transition_probabilities(&q, t).unwrap();
        for row in p.to_rows() {
            prop_assert!(row.iter().all(|v| *v >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn semigroup(q in generator_strategy(), s in 0.0f64..3.0, t in 0.0f64..3.0) {
        let ps = transition_probabilities(&q, s).unwrap();
        let pt = transition_probabilities(&q, t).unwrap();
        let pst = transition_probabilities(&q, s + t).unwrap();
        prop_assert!((ps.matrix() * pt.matrix() - pst.matrix()).amax() < 1e-12);
    }

    #[test]
    fn stationary_is_invariant(q in generator_strategy()) {
        let pi = stationary_distribution(&q).unwrap();
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        for j in 0..q.n_states() {
            let flow: f64 = (0..q.n_states()).map(|i| pi[i] * q.rate(i, j)).sum();
            prop_assert!(flow.abs() < 1e-12);
        }
    }
}

#[test]
fn derivative_at_zero_is_generator() {
    let q = random_generator(&mut rng(9), 4);
    let n = q.n_states();
    let diff = |h: f64| {
        let p = transition_probabilities(&q, h).unwrap();
        (p.matrix() - nalgebra::DMatrix::<f64>::identity(n, n)) / h
    };
    for h in [1e-2, 1e-3] {
        // Richardson removes the O(h) term of the forward difference
        let d = diff(h / 2.0) * 2.0 - diff(h);
        let err = (d - q.matrix()).amax();
        assert!(err < 10.0 * h * h * q.matrix().amax().powi(3), "h={h}: {err}");
    }
}

#[test]
fn simulation_is_deterministic() {
    let q = two_state(0.5, 0.3);
    let a = simulate_path(&q, 0, 0.0, 50.0, &mut RngStream::new(3, 7).rng()).unwrap();
    let b = simulate_path(&q, 0, 0.0, 50.0, &mut RngStream::new(3, 7).rng()).unwrap();
    let c = simulate_path(&q, 0, 0.0, 50.0, &mut RngStream::new(3, 8).rng()).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn path_validation() {
    let q = two_state(0.5, 0.3);
    let mut rng = RngStream::new(0, 0).rng();
    assert!(matches!(
        simulate_path(&q, 2, 0.0, 1.0, &mut rng),
        Err(Error::StateOutOfRange { .. })
    ));
    assert!(matches!(
        simulate_path(&q, 0, 1.0, 0.5, &mut rng),
        Err(Error::InvalidInterval { .. })
    ));
}

#[test]
fn validation_errors() {
    assert!(matches!(
        validate_generator(&[vec![-1.0, 1.0], vec![0.5]]),
        Err(Error::NonSquare { .. })
    ));
    assert!(matches!(
        validate_generator(&[vec![0.5, -0.5], vec![0.3, -0.3]]),
        Err(Error::NegativeOffDiagonal { .. })
    ));
    assert!(matches!(
        validate_generator(&[vec![-1.0, 1.1], vec![0.3, -0.3]]),
        Err(Error::RowSumViolation { .. })
    ));
    assert!(matches!(validate_generator(&[]), Err(Error::Empty)));
    assert!(matches!(
        validate_generator(&[vec![f64::NAN, 0.0], vec![0.0, 0.0]]),
        Err(Error::NonFinite { .. })
    ));
    let repaired = validate_generator(&[vec![-1.0 + 5e-10, 1.0], vec![0.3, -0.3]]).unwrap();
    assert_eq!(repaired.rate(0, 0), -1.0);
}

#[test]
fn reducible_chain_has_no_unique_stationary() {
    let q = validate_generator(&[vec![-1.0, 1.0], vec![0.0, 0.0]]).unwrap();
    assert!(matches!(stationary_distribution(&q), Err(Error::Reducible)));
    assert!(matches!(embedded_chain(&q), Err(Error::AbsorbingState { state: 1 })));
    assert!(!q.is_strongly_irreducible());
}
