#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regimeweave::{compose_independent, validate_generator, GeneratorMatrix, MarketModel, RegimeParams};

pub fn reference_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.json")
}

pub fn two_state(a: f64, b: f64) -> GeneratorMatrix {
    validate_generator(&[vec![-a, a], vec![b, -b]]).unwrap()
}

pub fn one_state() -> GeneratorMatrix {
    validate_generator(&[vec![0.0]]).unwrap()
}

pub fn regime(alpha: f64, sigma: f64, mu: f64, delta: f64) -> RegimeParams {
    RegimeParams { alpha, sigma, mu, delta }
}

pub fn reference_regimes() -> Vec<RegimeParams> {
    vec![
        regime(0.10, 0.15, 1.0, 0.2),
        regime(0.02, 0.25, 1.0, 0.2),
        regime(0.10, 0.15, 0.5, 0.35),
        regime(0.02, 0.25, 0.5, 0.35),
    ]
}

/// The four-regime model shipped in `configs/reference.json`.
pub fn reference_model(rho: f64) -> MarketModel {
    let chain = compose_independent(&two_state(0.5, 0.3), &two_state(0.2, 0.4));
    MarketModel::new(chain, 0.03, rho, 2.0, 1.0, reference_regimes()).unwrap()
}

pub fn single_regime(p: RegimeParams, r: f64, rho: f64, gamma: f64, horizon: f64) -> MarketModel {
    let chain = compose_independent(&one_state(), &one_state());
    MarketModel::new(chain, r, rho, gamma, horizon, vec![p]).unwrap()
}

/// Random generator with off-diagonal rates in `[0, 2)`; each row keeps at
/// least one positive rate.
pub fn random_generator(rng: &mut impl Rng, n: usize) -> GeneratorMatrix {
    let mut rows = vec![vec![0.0; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        let mut sum = 0.0;
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = 2.0 * rng.random::<f64>();
                sum += *v;
            }
        }
        if n > 1 && sum == 0.0 {
            row[(i + 1) % n] = 1.0;
            sum = 1.0;
        }
        row[i] = -sum;
    }
    validate_generator(&rows).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
