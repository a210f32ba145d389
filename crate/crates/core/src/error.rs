use thiserror::Error;

/// Errors raised by chain construction, solvers and estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows} rows, row {bad_row} has {cols} columns")]
    NonSquare {
        rows: usize,
        bad_row: usize,
        cols: usize,
    },
    #[error("matrix is empty")]
    Empty,
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("negative off-diagonal rate {value} at ({row}, {col})")]
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, expected 0")]
    RowSumViolation { row: usize, sum: f64 },
    #[error("row {row} is not a probability distribution (sum {sum})")]
    NotStochastic { row: usize, sum: f64 },
    #[error("state {state} is absorbing (zero exit rate)")]
    AbsorbingState { state: usize },
    #[error("generator is reducible")]
    Reducible,
    #[error("state {state} out of range for a {n_states}-state chain")]
    StateOutOfRange { state: usize, n_states: usize },
    #[error("invalid time interval [{start}, {end}]")]
    InvalidInterval { start: f64, end: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid copula specification: {0}")]
    InvalidCopula(String),
    #[error("bivariate normal quadrature failed for h={h}, k={k}, rho={rho}")]
    QuadratureFailure { h: f64, k: f64, rho: f64 },
    #[error("extrapolated rate {value} at ({row}, {col}) is negative beyond tolerance")]
    NonGenerator { row: usize, col: usize, value: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("step too coarse: Richardson error estimate {estimate:e} exceeds {tolerance:e}")]
    StepTooCoarse { estimate: f64, tolerance: f64 },
    #[error("V_xx = {v_xx} is not negative; first-order condition is not a maximum")]
    ConcavityViolation { v_xx: f64 },
    #[error("estimator requires rho = 0, model has rho = {rho}")]
    NonZeroRho { rho: f64 },
    #[error("case mismatch: {0}")]
    CaseMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
