//! JSON model configuration.
//!
//! ```json
//! {
//!   "chains": {
//!     "epsilon": [[-0.5, 0.5], [0.3, -0.3]],
//!     "zeta": [[-0.2, 0.2], [0.4, -0.4]],
//!     "composition": "independent"
//!   },
//!   "market": {"r": 0.03, "rho": 0.3, "gamma": 2.0, "T": 1.0,
//!              "regimes": [{"alpha": 0.1, "sigma": 0.15, "mu": 1.0, "delta": 0.2}, ...]},
//!   "numerics": {"n_steps": 2048, "n_paths": 100000, "dt": 0.001953125, "seed": 7},
//!   "case": "normal_income"
//! }
//! ```
//!
//! `composition` is `"independent"` or `{"copula": {"correlation": ρ, "fd_step": h}}`,
//! where `correlation` may also be a 2×2 matrix. A `"compound"` generator
//! replaces `epsilon`/`zeta` entirely.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error as ThisError;

use crate::compose::{compose_copula, compose_independent, CompoundChainSpec, CopulaSpec};
use crate::hjb::DEFAULT_H_STEPS;
use crate::markov::{validate_generator, GeneratorMatrix};
use crate::mc::{default_dt, DEFAULT_N_PATHS};
use crate::model::{MarketModel, RegimeParams};
use crate::portfolio::{Case, ValueOptions};

#[derive(Debug, ThisError)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
}

impl ConfigError {
    /// Field-path messages for validation failures.
    pub fn violations(&self) -> &[String] {
        match self {
            ConfigError::Validation(v) => v,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorrelationInput {
    Scalar(f64),
    Matrix([[f64; 2]; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositionInput {
    Independent,
    Copula {
        correlation: CorrelationInput,
        #[serde(default)]
        fd_step: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainsInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compound: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composition: Option<CompositionInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketInput {
    pub r: f64,
    pub rho: f64,
    pub gamma: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub regimes: Vec<RegimeParams>,
}

fn default_steps() -> usize {
    DEFAULT_H_STEPS
}

fn default_paths() -> usize {
    DEFAULT_N_PATHS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsInput {
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    /// Monte Carlo step; `(T - t)/512` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NumericsInput {
    fn default() -> Self {
        Self {
            n_steps: DEFAULT_H_STEPS,
            n_paths: DEFAULT_N_PATHS,
            dt: None,
            seed: 0,
        }
    }
}

/// Starting state for `simulate`, `evaluate` and `validate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialInput {
    pub x0: f64,
    pub y0: f64,
    pub i0: usize,
}

impl Default for InitialInput {
    fn default() -> Self {
        Self {
            x0: 1.0,
            y0: 1.0,
            i0: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigInput {
    pub chains: ChainsInput,
    pub market: MarketInput,
    #[serde(default)]
    pub numerics: NumericsInput,
    #[serde(default)]
    pub initial: InitialInput,
    pub case: Case,
}

/// A validated configuration together with the model it describes.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub input: ConfigInput,
    pub model: MarketModel,
    /// Hex SHA-256 of the configuration bytes.
    pub hash: String,
}

impl ModelConfig {
    pub fn case(&self) -> Case {
        self.input.case
    }

    pub fn numerics(&self) -> &NumericsInput {
        &self.input.numerics
    }

    pub fn initial(&self) -> InitialInput {
        self.input.initial
    }

    /// Monte Carlo step for paths starting at `t`.
    pub fn dt(&self, t: f64) -> f64 {
        self.input.numerics.dt.unwrap_or_else(|| default_dt(&self.model, t))
    }

    pub fn value_options(&self) -> ValueOptions {
        let n = &self.input.numerics;
        ValueOptions {
            n_steps: n.n_steps,
            n_paths: n.n_paths,
            dt: n.dt,
            seed: n.seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.input.numerics.seed = seed;
        self
    }

    pub fn with_paths(mut self, n_paths: usize) -> Self {
        self.input.numerics.n_paths = n_paths;
        self
    }

    /// Component generators, when the chain was composed from them.
    pub fn components(&self) -> Option<(GeneratorMatrix, GeneratorMatrix)> {
        let c = &self.input.chains;
        let e = validate_generator(c.epsilon.as_ref()?).ok()?;
        let z = validate_generator(c.zeta.as_ref()?).ok()?;
        Some((e, z))
    }
}

pub fn load_config(path: &Path) -> Result<ModelConfig, ConfigError> {
    let bytes = std::fs::read(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&bytes)
}

pub fn parse_config(bytes: &[u8]) -> Result<ModelConfig, ConfigError> {
    let input: ConfigInput =
        serde_json::from_slice(bytes).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let hash = hex(&Sha256::digest(bytes));
    build(input, hash)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn build_chain(c: &ChainsInput, errors: &mut Vec<String>) -> Option<CompoundChainSpec> {
    let generator = |field: &str, rows: &Vec<Vec<f64>>, errors: &mut Vec<String>| {
        validate_generator(rows)
            .map_err(|e| errors.push(format!("chains.{field}: {e}")))
            .ok()
    };
    if let Some(rows) = &c.compound {
        if c.epsilon.is_some() || c.zeta.is_some() || c.composition.is_some() {
            errors.push(
                "chains: give either `compound` or `epsilon`/`zeta`/`composition`, not both".into(),
            );
        }
        return generator("compound", rows, errors).map(CompoundChainSpec::user_supplied);
    }
    let (Some(e_rows), Some(z_rows)) = (&c.epsilon, &c.zeta) else {
        errors.push("chains: need `compound` or both `epsilon` and `zeta`".into());
        return None;
    };
    let eps = generator("epsilon", e_rows, errors);
    let zeta = generator("zeta", z_rows, errors);
    let composition = c.composition.clone().unwrap_or(CompositionInput::Independent);
    let copula = match &composition {
        CompositionInput::Independent => None,
        CompositionInput::Copula {
            correlation,
            fd_step,
        } => {
            let fd = fd_step.unwrap_or(CopulaSpec::DEFAULT_FD_STEP);
            let spec = match correlation {
                CorrelationInput::Scalar(rho) => CopulaSpec::new(*rho, fd),
                CorrelationInput::Matrix(k) => CopulaSpec::from_matrix(*k, fd),
            };
            match spec {
                Ok(s) => Some(s),
                Err(e) => {
                    errors.push(format!("chains.composition.copula: {e}"));
                    return None;
                }
            }
        }
    };
    let (eps, zeta) = (eps?, zeta?);
    match copula {
        None => Some(compose_independent(&eps, &zeta)),
        Some(spec) => compose_copula(&eps, &zeta, &spec)
            .map_err(|e| errors.push(format!("chains.composition: {e}")))
            .ok(),
    }
}

fn build(input: ConfigInput, hash: String) -> Result<ModelConfig, ConfigError> {
    let mut errors = Vec::new();
    let chain = build_chain(&input.chains, &mut errors);
    let m = &input.market;
    let n_states = chain
        .as_ref()
        .map_or(m.regimes.len(), CompoundChainSpec::n_states);
    errors.extend(
        MarketModel::violations(n_states, m.r, m.rho, m.gamma, m.horizon, &m.regimes)
            .into_iter()
            .map(|v| format!("market.{v}")),
    );
    let n = &input.numerics;
    if n.n_steps < 2 || !n.n_steps.is_multiple_of(2) {
        errors.push(format!("numerics.n_steps: must be even and >= 2, got {}", n.n_steps));
    }
    if n.n_paths < 2 {
        errors.push(format!("numerics.n_paths: must be >= 2, got {}", n.n_paths));
    }
    if let Some(dt) = n.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            errors.push(format!("numerics.dt: must be positive, got {dt}"));
        }
    }
    if input.case == Case::Rho0 && m.rho != 0.0 {
        errors.push(format!("case: rho0 requires market.rho = 0, got {}", m.rho));
    }
    if input.initial.i0 >= n_states {
        errors.push(format!(
            "initial.i0: regime {} outside a {n_states}-state chain",
            input.initial.i0
        ));
    }
    if !errors.is_empty() {
        return Err(ConfigError::Validation(errors));
    }
    let chain = chain.expect("no errors means the chain was built");
    let model = MarketModel::new(chain, m.r, m.rho, m.gamma, m.horizon, m.regimes.clone())
        .map_err(|e| ConfigError::Validation(vec![format!("market: {e}")]))?;
    Ok(ModelConfig { input, model, hash })
}
