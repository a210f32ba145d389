//! Regime-switching market with a riskless bond, one stock and labour income.
//!
//! Per regime `i` of the compound chain the stock has drift `alpha` and
//! volatility `sigma`; income has drift `mu` and volatility `delta`. The
//! income Brownian motion is `Z = ρB + √(1-ρ²)W` with `B` driving the stock.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::compose::CompoundChainSpec;
use crate::error::{Error, Result};
use crate::markov::GeneratorMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub alpha: f64,
    pub sigma: f64,
    pub mu: f64,
    pub delta: f64,
}

/// Level-dependent income coefficients `μ(y, i, t)` and `δ(y, i, t)`.
pub trait IncomeDynamics: Send + Sync {
    fn drift(&self, y: f64, regime: usize, t: f64) -> f64;
    fn volatility(&self, y: f64, regime: usize, t: f64) -> f64;
}

#[derive(Clone)]
pub enum IncomeKind {
    /// `dY = μ_i dt + δ_i dZ` with the per-regime constants of [`RegimeParams`].
    NormalLevels,
    General(Arc<dyn IncomeDynamics>),
}

impl fmt::Debug for IncomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IncomeKind::NormalLevels => f.write_str("NormalLevels"),
            IncomeKind::General(_) => f.write_str("General(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MarketModel {
    chain: CompoundChainSpec,
    r: f64,
    rho: f64,
    gamma: f64,
    horizon: f64,
    regimes: Vec<RegimeParams>,
    income: IncomeKind,
}

impl MarketModel {
    pub fn new(
        chain: CompoundChainSpec,
        r: f64,
        rho: f64,
        gamma: f64,
        horizon: f64,
        regimes: Vec<RegimeParams>,
    ) -> Result<Self> {
        Self::with_income(chain, r, rho, gamma, horizon, regimes, IncomeKind::NormalLevels)
    }

    pub fn with_income(
        chain: CompoundChainSpec,
        r: f64,
        rho: f64,
        gamma: f64,
        horizon: f64,
        regimes: Vec<RegimeParams>,
        income: IncomeKind,
    ) -> Result<Self> {
        let problems = Self::violations(chain.n_states(), r, rho, gamma, horizon, &regimes);
        if !problems.is_empty() {
            return Err(Error::InvalidModel(problems.join("; ")));
        }
        Ok(Self {
            chain,
            r,
            rho,
            gamma,
            horizon,
            regimes,
            income,
        })
    }

    /// Every violated invariant for a chain with `n_states` compound states,
    /// as `field: message` strings.
    pub fn violations(
        n_states: usize,
        r: f64,
        rho: f64,
        gamma: f64,
        horizon: f64,
        regimes: &[RegimeParams],
    ) -> Vec<String> {
        let mut out = Vec::new();
        if !r.is_finite() {
            out.push(format!("r: must be finite, got {r}"));
        }
        if !(rho.abs() <= 1.0) {
            out.push(format!("rho: must lie in [-1, 1], got {rho}"));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            out.push(format!("gamma: must be positive, got {gamma}"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            out.push(format!("T: must be positive, got {horizon}"));
        }
        if regimes.len() != n_states {
            out.push(format!(
                "regimes: {} entries for a {n_states}-state compound chain",
                regimes.len()
            ));
        }
        for (i, p) in regimes.iter().enumerate() {
            if !(p.sigma > 0.0 && p.sigma.is_finite()) {
                out.push(format!("regimes[{i}].sigma: must be positive, got {}", p.sigma));
            }
            if !(p.delta >= 0.0 && p.delta.is_finite()) {
                out.push(format!("regimes[{i}].delta: must be >= 0, got {}", p.delta));
            }
            if !p.alpha.is_finite() {
                out.push(format!("regimes[{i}].alpha: must be finite"));
            }
            if !p.mu.is_finite() {
                out.push(format!("regimes[{i}].mu: must be finite"));
            }
        }
        out
    }

    pub fn chain(&self) -> &CompoundChainSpec {
        &self.chain
    }

    pub fn generator(&self) -> &GeneratorMatrix {
        &self.chain.generator
    }

    pub fn n_regimes(&self) -> usize {
        self.regimes.len()
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn regime(&self, i: usize) -> &RegimeParams {
        &self.regimes[i]
    }

    pub fn regimes(&self) -> &[RegimeParams] {
        &self.regimes
    }

    pub fn income(&self) -> &IncomeKind {
        &self.income
    }

    pub fn is_normal_income(&self) -> bool {
        matches!(self.income, IncomeKind::NormalLevels)
    }

    pub fn income_drift(&self, y: f64, i: usize, t: f64) -> f64 {
        match &self.income {
            IncomeKind::NormalLevels => self.regimes[i].mu,
            IncomeKind::General(d) => d.drift(y, i, t),
        }
    }

    pub fn income_volatility(&self, y: f64, i: usize, t: f64) -> f64 {
        match &self.income {
            IncomeKind::NormalLevels => self.regimes[i].delta,
            IncomeKind::General(d) => d.volatility(y, i, t),
        }
    }

    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        let m = self.clone();
        Self::with_income(m.chain, m.r, rho, m.gamma, m.horizon, m.regimes, m.income)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let m = self.clone();
        Self::with_income(m.chain, m.r, m.rho, gamma, m.horizon, m.regimes, m.income)
    }

    pub fn with_r(&self, r: f64) -> Result<Self> {
        let m = self.clone();
        Self::with_income(m.chain, r, m.rho, m.gamma, m.horizon, m.regimes, m.income)
    }

    pub fn with_regimes(&self, regimes: Vec<RegimeParams>) -> Result<Self> {
        let m = self.clone();
        Self::with_income(m.chain, m.r, m.rho, m.gamma, m.horizon, regimes, m.income)
    }

    pub fn with_income_kind(&self, income: IncomeKind) -> Self {
        let mut m = self.clone();
        m.income = income;
        m
    }

    /// `e^{r(T-t)}`.
    pub fn growth(&self, t: f64) -> f64 {
        (self.r * (self.horizon - t)).exp()
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::InvalidArgument(format!(
                "time {t} outside [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }

    pub(crate) fn check_regime(&self, i: usize) -> Result<()> {
        if i >= self.n_regimes() {
            return Err(Error::StateOutOfRange {
                state: i,
                n_states: self.n_regimes(),
            });
        }
        Ok(())
    }
}
