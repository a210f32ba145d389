//! Monte Carlo estimators of the Feynman–Kac representations of `g` and `h`.
//!
//! Path `k` of an estimator draws from `RngStream::new(seed, k)`, and the
//! per-path samples are reduced by pairwise summation in path order, so an
//! estimate depends only on its arguments and not on the worker count. The
//! `REGIMEWEAVE_THREADS` environment variable caps the number of workers.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hjb::{phi1, phi2, solve_m, RegimeCoefficients};
use crate::markov::{simulate_path, RegimePath, RngStream};
use crate::model::{IncomeKind, MarketModel};
use crate::portfolio::utility;

pub const DEFAULT_N_PATHS: usize = 100_000;
/// Steps per unit of remaining horizon used by [`default_dt`].
pub const DEFAULT_STEPS_PER_HORIZON: f64 = 512.0;
pub const THREADS_ENV: &str = "REGIMEWEAVE_THREADS";

/// `(T - t)/512`.
pub fn default_dt(model: &MarketModel, t: f64) -> f64 {
    (model.horizon() - t) / DEFAULT_STEPS_PER_HORIZON
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl MCEstimate {
    /// Mean and `sd/√n` of per-path samples, both by pairwise summation.
    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        let n = samples.len();
        assert!(n >= 2, "an estimate needs at least two paths");
        let mean = pairwise_sum(samples) / n as f64;
        let sq: Vec<f64> = samples.iter().map(|s| (s - mean) * (s - mean)).collect();
        let var = pairwise_sum(&sq) / (n - 1) as f64;
        Self {
            mean,
            stderr: (var / n as f64).sqrt(),
            n_paths: n,
            seed,
        }
    }

    /// A deterministic value reported in estimate form.
    pub fn exact(value: f64, n_paths: usize, seed: u64) -> Self {
        Self {
            mean: value,
            stderr: 0.0,
            n_paths,
            seed,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mean: self.mean * factor,
            stderr: self.stderr * factor.abs(),
            ..*self
        }
    }
}

pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Worker cap from [`THREADS_ENV`], if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
}

/// Evaluates `f(k)` for `k in 0..n` in parallel, preserving order.
pub fn map_paths<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let run = || (0..n as u64).into_par_iter().map(&f).collect::<Vec<T>>();
    match thread_cap() {
        Some(threads) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
        None => run(),
    }
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < 2 {
        return Err(Error::InvalidArgument(format!(
            "n_paths must be >= 2, got {n_paths}"
        )));
    }
    Ok(())
}

/// Splits `[t_start, t_end]` at the uniform nodes `t_start + k·dt` and at
/// every regime jump. Each piece is `(start, end, regime)`.
pub fn step_grid(path: &RegimePath, dt: f64) -> Vec<(f64, f64, usize)> {
    let t0 = path.t_start();
    let mut out = Vec::new();
    for (a, b, s) in path.segments() {
        let mut lo = a;
        let mut k = ((lo - t0) / dt).floor() as u64 + 1;
        loop {
            let node = t0 + k as f64 * dt;
            if node < b - 1e-9 * dt {
                if node > lo {
                    out.push((lo, node, s));
                    lo = node;
                }
                k += 1;
            } else {
                out.push((lo, b, s));
                break;
            }
        }
    }
    out
}

/// Income trajectory on the step grid of a regime path.
#[derive(Debug, Clone, PartialEq)]
pub struct IncomePath {
    /// Grid `t_0 < … < t_n`.
    pub times: Vec<f64>,
    /// `Y(t_k)`.
    pub values: Vec<f64>,
    /// Regime on `[t_k, t_{k+1})`.
    pub regimes: Vec<usize>,
    /// Standard normal shock of each step.
    pub shocks: Vec<f64>,
    pub antithetic: bool,
    pub dt: f64,
    pub chain: RegimePath,
}

impl IncomePath {
    fn build(model: &MarketModel, chain: &RegimePath, y0: f64, dt: f64, shocks: Vec<f64>, antithetic: bool) -> Self {
        let grid = step_grid(chain, dt);
        let mut times = Vec::with_capacity(grid.len() + 1);
        let mut values = Vec::with_capacity(grid.len() + 1);
        let mut regimes = Vec::with_capacity(grid.len());
        times.push(chain.t_start());
        values.push(y0);
        let mut y = y0;
        for (&(a, b, s), z) in grid.iter().zip(&shocks) {
            let step = b - a;
            let z = if antithetic { -z } else { *z };
            y += model.income_drift(y, s, a) * step + model.income_volatility(y, s, a) * step.sqrt() * z;
            times.push(b);
            values.push(y);
            regimes.push(s);
        }
        Self {
            times,
            values,
            regimes,
            shocks,
            antithetic,
            dt,
            chain: chain.clone(),
        }
    }

    /// The mirrored path driven by the negated shocks.
    pub fn antithetic(&self, model: &MarketModel) -> Self {
        Self::build(
            model,
            &self.chain,
            self.values[0],
            self.dt,
            self.shocks.clone(),
            !self.antithetic,
        )
    }

    /// `∫ γ e^{r(T-s)} Y(s) ds` with `Y` linear between grid points and the
    /// exponential weight integrated exactly.
    pub fn discounted_integral(&self, model: &MarketModel) -> f64 {
        let r = model.r();
        let horizon = model.horizon();
        let mut acc = 0.0;
        for k in 0..self.regimes.len() {
            let (a, b) = (self.times[k], self.times[k + 1]);
            let (ya, yb) = (self.values[k], self.values[k + 1]);
            let step = b - a;
            let x = r * step;
            acc += (r * (horizon - b)).exp() * step * (ya * phi1(x) + (yb - ya) * phi2(x));
        }
        model.gamma() * acc
    }
}

/// Income along a given regime path. Normal-level income uses the exact
/// Gaussian increment `μ_i Δ + δ_i √Δ N(0,1)` per step; level-dependent
/// income uses Euler–Maruyama. Steps are split at regime jumps.
pub fn simulate_income_path<R: Rng + ?Sized>(
    model: &MarketModel,
    chain_path: &RegimePath,
    y0: f64,
    dt: f64,
    rng: &mut R,
) -> Result<IncomePath> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !y0.is_finite() {
        return Err(Error::InvalidArgument("y0 must be finite".into()));
    }
    let n = step_grid(chain_path, dt).len();
    let shocks: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let path = IncomePath::build(model, chain_path, y0, dt, shocks, false);
    Ok(path)
}

fn check_point(model: &MarketModel, t: f64, i: usize) -> Result<()> {
    model.check_time(t)?;
    model.check_regime(i)
}

/// `h(t, i) = E^i[exp(∫_t^T c_ξ(s)(s) ds)]`, integrating `c` exactly on each
/// constant-regime segment.
pub fn estimate_h_mc(model: &MarketModel, t: f64, i: usize, n_paths: usize, seed: u64) -> Result<MCEstimate> {
    check_paths(n_paths)?;
    check_point(model, t, i)?;
    if !model.is_normal_income() {
        return Err(Error::CaseMismatch(
            "h is defined for regime-constant income coefficients".into(),
        ));
    }
    let horizon = model.horizon();
    if t == horizon {
        return Ok(MCEstimate::exact(1.0, n_paths, seed));
    }
    let coeffs = RegimeCoefficients::all(model);
    let m = solve_m(model);
    let q = model.generator();
    let samples = map_paths(n_paths, |k| {
        let mut rng = RngStream::new(seed, k).rng();
        let path = simulate_path(q, i, t, horizon, &mut rng).expect("validated arguments");
        let exponent: f64 = path
            .segments()
            .map(|(a, b, s)| coeffs[s].integral(&m, a, b))
            .sum();
        exponent.exp()
    });
    Ok(MCEstimate::from_samples(&samples, seed))
}

/// `g(t, y, i) = E^{y,i}[exp(-∫_t^T (γ e^{r(T-s)} Y_s + (α_ξ(s) - r)²/(2σ_ξ(s)²)) ds)]`
/// for `ρ = 0`. Each sample averages an antithetic pair of income paths over
/// one shared regime path.
pub fn estimate_g_mc(
    model: &MarketModel,
    t: f64,
    y: f64,
    i: usize,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<MCEstimate> {
    if model.rho() != 0.0 {
        return Err(Error::NonZeroRho { rho: model.rho() });
    }
    check_paths(n_paths)?;
    check_point(model, t, i)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let horizon = model.horizon();
    if t == horizon {
        return Ok(MCEstimate::exact(1.0, n_paths, seed));
    }
    let premium_cost: Vec<f64> = model
        .regimes()
        .iter()
        .map(|p| (p.alpha - model.r()).powi(2) / (2.0 * p.sigma * p.sigma))
        .collect();
    let q = model.generator();
    let deterministic_income = match model.income() {
        IncomeKind::NormalLevels => model.regimes().iter().all(|p| p.delta == 0.0),
        IncomeKind::General(_) => false,
    };
    let samples = map_paths(n_paths, |k| {
        let mut rng = RngStream::new(seed, k).rng();
        let chain = simulate_path(q, i, t, horizon, &mut rng).expect("validated arguments");
        let regime_part: f64 = chain
            .segments()
            .map(|(a, b, s)| premium_cost[s] * (b - a))
            .sum();
        let income = simulate_income_path(model, &chain, y, dt, &mut rng).expect("validated arguments");
        let plus = (-(income.discounted_integral(model) + regime_part)).exp();
        if deterministic_income {
            return plus;
        }
        let minus_path = income.antithetic(model);
        let minus = (-(minus_path.discounted_integral(model) + regime_part)).exp();
        0.5 * (plus + minus)
    });
    Ok(MCEstimate::from_samples(&samples, seed))
}

/// `V(t, x, y, i) = -(1/γ) exp(-γ x e^{r(T-t)}) g(t, y, i)` for `ρ = 0`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_value_rho0(
    model: &MarketModel,
    t: f64,
    x: f64,
    y: f64,
    i: usize,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<MCEstimate> {
    let g = estimate_g_mc(model, t, y, i, n_paths, dt, seed)?;
    let prefactor = utility(x * model.growth(t), model.gamma());
    Ok(g.scaled(prefactor))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|k| (k as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
    }

    #[test]
    fn estimate_statistics() {
        let e = MCEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0], 7);
        assert_eq!(e.mean, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((e.stderr - sd / 2.0).abs() < 1e-15);
    }

    #[test]
    fn step_grid_splits_at_jumps() {
        let path = RegimePath::new(0.0, 1.0, vec![(0.0, 0), (0.3, 1)]).unwrap();
        let grid = step_grid(&path, 0.25);
        assert_eq!(
            grid,
            vec![(0.0, 0.25, 0), (0.25, 0.3, 0), (0.3, 0.5, 1), (0.5, 0.75, 1), (0.75, 1.0, 1)]
        );
    }
}
