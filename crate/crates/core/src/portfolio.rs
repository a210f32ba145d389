//! Portfolio layer: utility, optimal strategies, value functions and
//! wealth simulation.
//!
//! The stock position `π` is a monetary amount: wealth follows
//! `dX = [rX + π(α_ξ - r) + Y] dt + π σ_ξ dB` and `X - π` sits in the bond.
//! Neither `X` nor `π` is constrained in sign.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hjb::{
    hjb_residual, phi1, phi2, solve_h_ode, HTable, MCurve, NormalIncomeValue, ValueField,
    DEFAULT_H_STEPS,
};
use crate::markov::{simulate_path, RngStream};
use crate::mc::{default_dt, estimate_value_rho0, map_paths, step_grid, MCEstimate, DEFAULT_N_PATHS};
use crate::model::{IncomeKind, MarketModel};

/// `U(x) = -(1/γ) e^{-γx}`.
pub fn utility(x: f64, gamma: f64) -> f64 {
    -(-gamma * x).exp() / gamma
}

/// Mean-variance component `(α_i - r) / (γ σ_i² e^{r(T-t)})`.
pub fn merton_weight(model: &MarketModel, i: usize, t: f64) -> f64 {
    let p = model.regime(i);
    (p.alpha - model.r()) / (model.gamma() * p.sigma * p.sigma * model.growth(t))
}

/// Income hedge `-δ_i ρ (e^{r(T-t)} - 1) / (r σ_i e^{r(T-t)})`; at `r = 0`
/// this is `-δ_i ρ (T-t) / σ_i`. Independent of `γ`.
pub fn hedge_weight(model: &MarketModel, i: usize, t: f64) -> f64 {
    let p = model.regime(i);
    let tau = model.horizon() - t;
    let annuity = tau * phi1(model.r() * tau);
    -p.delta * model.rho() * annuity / (p.sigma * model.growth(t))
}

/// `π̂ = (α_i - r)/(γσ_i² e^{r(T-t)}) + δ_i ρ g_y / (γ σ_i e^{r(T-t)} g)` for a
/// value function of the form `-(1/γ) e^{-γ x e^{r(T-t)}} g(t, y, i)`.
pub fn ansatz_weight(model: &MarketModel, i: usize, t: f64, y: f64, g_y_over_g: f64) -> f64 {
    let p = model.regime(i);
    let delta = model.income_volatility(y, i, t);
    merton_weight(model, i, t)
        + delta * model.rho() * g_y_over_g / (model.gamma() * p.sigma * model.growth(t))
}

/// Which closed-form case a model is solved under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    /// Uncorrelated stock and income noise.
    Rho0,
    /// Regime-constant income drift and volatility.
    NormalIncome,
}

impl Case {
    pub fn check(&self, model: &MarketModel) -> Result<()> {
        match self {
            Case::Rho0 if model.rho() != 0.0 => Err(Error::CaseMismatch(format!(
                "rho0 case requires rho = 0, model has {}",
                model.rho()
            ))),
            Case::NormalIncome if !model.is_normal_income() => Err(Error::CaseMismatch(
                "normal-income case requires regime-constant income coefficients".into(),
            )),
            _ => Ok(()),
        }
    }
}

pub type WeightFn = Arc<dyn Fn(f64, f64, usize) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum StrategyKind {
    MertonRho0,
    NormalIncome,
    Constant(f64),
    /// Strategy from a user `g(t, y, i)`, with `g_y` by central differences.
    FromG(WeightFn),
    /// Arbitrary `(t, y, i) ↦ π`.
    Custom(WeightFn),
}

impl fmt::Debug for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::MertonRho0 => f.write_str("MertonRho0"),
            StrategyKind::NormalIncome => f.write_str("NormalIncome"),
            StrategyKind::Constant(c) => write!(f, "Constant({c})"),
            StrategyKind::FromG(_) => f.write_str("FromG(..)"),
            StrategyKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// A feedback rule `(t, y, i) ↦ π`, independent of wealth.
#[derive(Debug, Clone)]
pub struct Strategy {
    kind: StrategyKind,
    model: MarketModel,
    scale: f64,
}

impl Strategy {
    pub fn new(kind: StrategyKind, model: &MarketModel) -> Self {
        Self {
            kind,
            model: model.clone(),
            scale: 1.0,
        }
    }

    pub fn constant(model: &MarketModel, pi: f64) -> Self {
        Self::new(StrategyKind::Constant(pi), model)
    }

    pub fn kind(&self) -> &StrategyKind {
        &self.kind
    }

    /// The same rule with every position multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            scale: self.scale * factor,
            ..self.clone()
        }
    }

    pub fn weight(&self, t: f64, y: f64, i: usize) -> f64 {
        let m = &self.model;
        let raw = match &self.kind {
            StrategyKind::MertonRho0 => merton_weight(m, i, t),
            StrategyKind::NormalIncome => merton_weight(m, i, t) + hedge_weight(m, i, t),
            StrategyKind::Constant(c) => *c,
            StrategyKind::FromG(g) => {
                let h = 1e-5 * y.abs().max(1.0);
                let g0 = g(t, y, i);
                let g_y = (g(t, y + h, i) - g(t, y - h, i)) / (2.0 * h);
                ansatz_weight(m, i, t, y, g_y / g0)
            }
            StrategyKind::Custom(f) => f(t, y, i),
        };
        self.scale * raw
    }

    /// Rows `t, π(t, regime 0), …` on `n_points` times in `[0, T]`.
    pub fn table(&self, y: f64, n_points: usize) -> crate::table::Table {
        let map = self.model.chain().mapping;
        let mut cols = vec!["t [years]".to_string()];
        cols.extend(
            (0..self.model.n_regimes()).map(|i| format!("pi[{}] [wealth units]", map.label(i))),
        );
        let mut table = crate::table::Table::new(format!("closed-form ({:?})", self.kind), cols);
        let n = n_points.max(2);
        for k in 0..n {
            let t = self.model.horizon() * k as f64 / (n - 1) as f64;
            let mut row = vec![t];
            row.extend((0..self.model.n_regimes()).map(|i| self.weight(t, y, i)));
            table.push(row);
        }
        table
    }
}

/// Built-in optimal strategy for a case: `merton + hedge` for normal income,
/// `merton` alone for `ρ = 0`.
pub fn optimal_strategy(model: &MarketModel, case: Case) -> Result<Strategy> {
    case.check(model)?;
    let kind = match case {
        Case::Rho0 => StrategyKind::MertonRho0,
        Case::NormalIncome => StrategyKind::NormalIncome,
    };
    Ok(Strategy::new(kind, model))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueProvenance {
    ClosedOde,
    MonteCarlo,
}

impl fmt::Display for ValueProvenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueProvenance::ClosedOde => f.write_str("closed-ODE"),
            ValueProvenance::MonteCarlo => f.write_str("MC"),
        }
    }
}

/// A value with its standard error (zero for deterministic routes) and where
/// it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValuePoint {
    pub value: f64,
    pub stderr: f64,
    pub provenance: ValueProvenance,
}

/// Numerical settings for [`value_function`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueOptions {
    pub n_steps: usize,
    pub n_paths: usize,
    /// `None` uses [`default_dt`] at each evaluation time.
    pub dt: Option<f64>,
    pub seed: u64,
}

impl Default for ValueOptions {
    fn default() -> Self {
        Self {
            n_steps: DEFAULT_H_STEPS,
            n_paths: DEFAULT_N_PATHS,
            dt: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
enum ValueRoute {
    ClosedOde(NormalIncomeValue),
    MonteCarlo(ValueOptions),
}

/// Optimal strategy plus a value-function evaluator for one model and case.
#[derive(Debug, Clone)]
pub struct SolutionBundle {
    model: MarketModel,
    case: Case,
    strategy: Strategy,
    route: ValueRoute,
}

impl SolutionBundle {
    pub fn model(&self) -> &MarketModel {
        &self.model
    }

    pub fn case(&self) -> Case {
        self.case
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn provenance(&self) -> ValueProvenance {
        match self.route {
            ValueRoute::ClosedOde(_) => ValueProvenance::ClosedOde,
            ValueRoute::MonteCarlo(_) => ValueProvenance::MonteCarlo,
        }
    }

    pub fn m_curve(&self) -> Option<&MCurve> {
        match &self.route {
            ValueRoute::ClosedOde(v) => Some(v.m_curve()),
            ValueRoute::MonteCarlo(_) => None,
        }
    }

    pub fn h_table(&self) -> Option<&HTable> {
        match &self.route {
            ValueRoute::ClosedOde(v) => Some(v.h_table()),
            ValueRoute::MonteCarlo(_) => None,
        }
    }

    /// Deterministic field, when the bundle has one.
    pub fn field(&self) -> Option<&NormalIncomeValue> {
        match &self.route {
            ValueRoute::ClosedOde(v) => Some(v),
            ValueRoute::MonteCarlo(_) => None,
        }
    }

    pub fn value(&self, t: f64, x: f64, y: f64, i: usize) -> Result<ValuePoint> {
        self.model.check_time(t)?;
        self.model.check_regime(i)?;
        match &self.route {
            ValueRoute::ClosedOde(v) => Ok(ValuePoint {
                value: v.value(t, x, y, i),
                stderr: 0.0,
                provenance: ValueProvenance::ClosedOde,
            }),
            ValueRoute::MonteCarlo(opts) => {
                if t == self.model.horizon() {
                    return Ok(ValuePoint {
                        value: utility(x, self.model.gamma()),
                        stderr: 0.0,
                        provenance: ValueProvenance::MonteCarlo,
                    });
                }
                let dt = opts.dt.unwrap_or_else(|| default_dt(&self.model, t));
                let e = estimate_value_rho0(&self.model, t, x, y, i, opts.n_paths, dt, opts.seed)?;
                Ok(ValuePoint {
                    value: e.mean,
                    stderr: e.stderr,
                    provenance: ValueProvenance::MonteCarlo,
                })
            }
        }
    }

    /// HJB residual at one point; only meaningful for the deterministic route.
    pub fn hjb_residual(&self, point: (f64, f64, f64), i: usize) -> Result<f64> {
        match &self.route {
            ValueRoute::ClosedOde(v) => hjb_residual(&self.model, v, point, i),
            ValueRoute::MonteCarlo(_) => Err(Error::Unsupported(
                "HJB residuals need a deterministic value function".into(),
            )),
        }
    }
}

/// Value function and optimal strategy: closed form plus the `h` ODE for
/// normal income, Monte Carlo for `ρ = 0`.
pub fn value_function(model: &MarketModel, case: Case, options: ValueOptions) -> Result<SolutionBundle> {
    let strategy = optimal_strategy(model, case)?;
    let route = match case {
        Case::NormalIncome => {
            let h = solve_h_ode(model, options.n_steps)?;
            ValueRoute::ClosedOde(NormalIncomeValue::new(model.clone(), Arc::new(h)))
        }
        Case::Rho0 => ValueRoute::MonteCarlo(options),
    };
    Ok(SolutionBundle {
        model: model.clone(),
        case,
        strategy,
        route,
    })
}

/// One simulated trajectory of wealth, income and regime.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthPath {
    pub times: Vec<f64>,
    pub wealth: Vec<f64>,
    pub income: Vec<f64>,
    /// Regime on `[t_k, t_{k+1})`.
    pub regimes: Vec<usize>,
    /// Stock Brownian increments `ΔB`.
    pub db: Vec<f64>,
    /// Income Brownian increments `ΔZ = ρΔB + √(1-ρ²)ΔW`.
    pub dz: Vec<f64>,
}

impl WealthPath {
    pub fn terminal_wealth(&self) -> f64 {
        *self.wealth.last().unwrap()
    }
}

/// Steps wealth and income along one regime path, calling `record` after
/// every step with `(t, X, Y, regime, ΔB, ΔZ)`; returns `X(T)`.
#[allow(clippy::too_many_arguments)]
fn step_wealth<R: Rng + ?Sized>(
    model: &MarketModel,
    strategy: &Strategy,
    t0: f64,
    x0: f64,
    y0: f64,
    i0: usize,
    dt: f64,
    rng: &mut R,
    mut record: impl FnMut(f64, f64, f64, usize, f64, f64),
) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    model.check_time(t0)?;
    model.check_regime(i0)?;
    if t0 == model.horizon() {
        return Ok(x0);
    }
    let chain = simulate_path(model.generator(), i0, t0, model.horizon(), rng)?;
    let r = model.r();
    let rho = model.rho();
    let rho_perp = (1.0 - rho * rho).max(0.0).sqrt();
    let normal_income = matches!(model.income(), IncomeKind::NormalLevels);
    let (mut x, mut y) = (x0, y0);
    for (a, b, s) in step_grid(&chain, dt) {
        let step = b - a;
        let sq = step.sqrt();
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let db = sq * z1;
        let dz = rho * db + rho_perp * sq * z2;
        let p = model.regime(s);
        let pi = strategy.weight(0.5 * (a + b), y, s);
        let y_next = if normal_income {
            y + p.mu * step + p.delta * dz
        } else {
            y + model.income_drift(y, s, a) * step + model.income_volatility(y, s, a) * dz
        };
        let xr = r * step;
        x = (xr).exp() * x
            + step * (phi1(xr) * (pi * (p.alpha - r) + y) + phi2(xr) * (y_next - y))
            + pi * p.sigma * (0.5 * xr).exp() * db;
        y = y_next;
        record(b, x, y, s, db, dz);
    }
    Ok(x)
}

/// Simulates wealth under `strategy` from `(t0, x0, y0, i0)` to `T`.
///
/// The bond drift is integrated exactly per step (exponential Euler) with
/// income linear across the step; the stock term is Euler–Maruyama with the
/// position taken at the step midpoint. Steps split at regime jumps.
#[allow(clippy::too_many_arguments)]
pub fn simulate_wealth<R: Rng + ?Sized>(
    model: &MarketModel,
    strategy: &Strategy,
    t0: f64,
    x0: f64,
    y0: f64,
    i0: usize,
    dt: f64,
    rng: &mut R,
) -> Result<WealthPath> {
    let mut path = WealthPath {
        times: vec![t0],
        wealth: vec![x0],
        income: vec![y0],
        regimes: Vec::new(),
        db: Vec::new(),
        dz: Vec::new(),
    };
    step_wealth(model, strategy, t0, x0, y0, i0, dt, rng, |t, x, y, s, db, dz| {
        path.times.push(t);
        path.wealth.push(x);
        path.income.push(y);
        path.regimes.push(s);
        path.db.push(db);
        path.dz.push(dz);
    })?;
    Ok(path)
}

/// `E[U(X(T))]` under `strategy`. Path `k` uses `RngStream::new(seed, k)`,
/// so strategies evaluated with the same seed share random numbers.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_policy(
    model: &MarketModel,
    strategy: &Strategy,
    t0: f64,
    x0: f64,
    y0: f64,
    i0: usize,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<MCEstimate> {
    if n_paths < 2 {
        return Err(Error::InvalidArgument(format!(
            "n_paths must be >= 2, got {n_paths}"
        )));
    }
    // surface argument errors before spawning workers
    step_wealth(model, strategy, t0, x0, y0, i0, dt, &mut RngStream::new(seed, 0).rng(), |_, _, _, _, _, _| {})?;
    let gamma = model.gamma();
    let samples = map_paths(n_paths, |k| {
        let mut rng = RngStream::new(seed, k).rng();
        let x_t = step_wealth(model, strategy, t0, x0, y0, i0, dt, &mut rng, |_, _, _, _, _, _| {})
            .expect("validated arguments");
        utility(x_t, gamma)
    });
    Ok(MCEstimate::from_samples(&samples, seed))
}
