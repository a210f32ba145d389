//! Compound regime-switching Markov chains and optimal consumption-free
//! investment with labour income under exponential utility.
//!
//! The crate builds a compound market chain from two component chains
//! ([`compose`]), solves the regime-switching HJB problem in closed form plus
//! a linear ODE ([`hjb`]), estimates the same quantities by Monte Carlo
//! ([`mc`]), and simulates and scores investment strategies ([`portfolio`]).
//! [`cli`] wires everything to JSON configs and CSV outputs.

// `!(x < y)` guards reject NaN as well as out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bvn;
pub mod cli;
pub mod compose;
pub mod error;
pub mod hjb;
pub mod markov;
pub mod mc;
pub mod model;
pub mod portfolio;
pub mod table;

pub use compose::{
    compose_copula, compose_discrete_product, compose_independent, marginalize, Component,
    CompoundChainSpec, CopulaSpec, Provenance, StateMapping,
};
pub use error::{Error, Result};
pub use hjb::{hjb_residual, solve_h_ode, solve_m, HTable, MCurve, NormalIncomeValue, ValueField};
pub use markov::{
    embedded_chain, simulate_path, stationary_distribution, transition_probabilities,
    validate_generator, GeneratorMatrix, RegimePath, RngStream, TransitionMatrix,
};
pub use mc::{estimate_g_mc, estimate_h_mc, estimate_value_rho0, simulate_income_path, MCEstimate};
pub use model::{IncomeDynamics, IncomeKind, MarketModel, RegimeParams};
pub use portfolio::{
    evaluate_policy, optimal_strategy, simulate_wealth, utility, value_function, Case,
    SolutionBundle, Strategy, StrategyKind, ValueOptions, WealthPath,
};
