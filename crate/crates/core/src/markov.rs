//! Continuous-time Markov chains over a finite state space.
//!
//! Rates are stored with the (from, to) = (row, col) convention: entry
//! `(i, j)` of a [`GeneratorMatrix`] is the intensity of jumping from state
//! `i` to state `j`. Displays that label the entries of row `i` as `q_{ji}`
//! are read the same way (row `i` lists the exits from state `i`), so no
//! transposition is ever applied. States are 0-indexed; a chain written with
//! labels `1..=n` maps label `k` to index `k - 1`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest |row sum| that is silently repaired by resetting the diagonal.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Poisson tail mass at which the uniformization series is truncated.
const UNIFORMIZATION_TAIL: f64 = 1e-14;

/// Largest uniformized time `Λt` handled without scaling and squaring.
const UNIFORMIZATION_MAX_MEAN: f64 = 16.0;

fn check_square(rows: &[Vec<f64>]) -> Result<usize> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    for (r, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::NonSquare {
                rows: n,
                bad_row: r,
                cols: row.len(),
            });
        }
        for (c, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: r, col: c });
            }
        }
    }
    Ok(n)
}

/// Infinitesimal generator of a finite CTMC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct GeneratorMatrix {
    rates: DMatrix<f64>,
}

impl GeneratorMatrix {
    /// Validates a rate matrix given as rows, repairing the diagonal when the
    /// row sums are within [`ROW_SUM_TOLERANCE`] of zero.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = check_square(rows)?;
        let mut rates = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut sum = 0.0;
            let mut off = 0.0;
            for j in 0..n {
                let v = rows[i][j];
                sum += v;
                if i != j {
                    if v < 0.0 {
                        return Err(Error::NegativeOffDiagonal {
                            row: i,
                            col: j,
                            value: v,
                        });
                    }
                    off += v;
                    rates[(i, j)] = v;
                }
            }
            if sum.abs() > ROW_SUM_TOLERANCE {
                return Err(Error::RowSumViolation { row: i, sum });
            }
            rates[(i, i)] = -off;
        }
        Ok(Self { rates })
    }

    /// Builds a generator from a matrix whose off-diagonal entries are the
    /// rates; the diagonal is ignored and set to the negative row sum.
    pub fn from_off_diagonal(rates: DMatrix<f64>) -> Result<Self> {
        let n = rates.nrows();
        if n == 0 {
            return Err(Error::Empty);
        }
        if rates.ncols() != n {
            return Err(Error::NonSquare {
                rows: n,
                bad_row: 0,
                cols: rates.ncols(),
            });
        }
        let mut rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| rates[(i, j)]).collect())
            .collect();
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 0.0;
            let off: f64 = row.iter().sum();
            row[i] = -off;
        }
        Self::from_rows(&rows)
    }

    pub fn n_states(&self) -> usize {
        self.rates.nrows()
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rates[(from, to)]
    }

    /// Total exit rate `λ_i = -q_ii`.
    pub fn exit_rate(&self, state: usize) -> f64 {
        -self.rates[(state, state)]
    }

    pub fn exit_rates(&self) -> Vec<f64> {
        (0..self.n_states()).map(|i| self.exit_rate(i)).collect()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        let n = self.n_states();
        (0..n)
            .map(|i| (0..n).map(|j| self.rates[(i, j)]).collect())
            .collect()
    }

    /// True when every state reaches every other state through positive rates.
    pub fn is_irreducible(&self) -> bool {
        let n = self.n_states();
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(s) = stack.pop() {
                #[allow(clippy::needless_range_loop)]
                for t in 0..n {
                    let r = if forward {
                        self.rates[(s, t)]
                    } else {
                        self.rates[(t, s)]
                    };
                    if t != s && r > 0.0 && !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
            seen.into_iter().all(|x| x)
        };
        reach(true) && reach(false)
    }

    /// Irreducible with a strictly negative diagonal in every state.
    pub fn is_strongly_irreducible(&self) -> bool {
        (0..self.n_states()).all(|i| self.exit_rate(i) > 0.0) && self.is_irreducible()
    }
}

impl TryFrom<Vec<Vec<f64>>> for GeneratorMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<GeneratorMatrix> for Vec<Vec<f64>> {
    fn from(q: GeneratorMatrix) -> Self {
        q.to_rows()
    }
}

/// Validates a rate matrix. See [`GeneratorMatrix::from_rows`].
pub fn validate_generator(rows: &[Vec<f64>]) -> Result<GeneratorMatrix> {
    GeneratorMatrix::from_rows(rows)
}

/// Row-stochastic matrix of a discrete-time chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TransitionMatrix {
    probs: DMatrix<f64>,
}

impl TransitionMatrix {
    pub const ROW_TOLERANCE: f64 = 1e-12;

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = check_square(rows)?;
        let probs = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::from_matrix(probs)
    }

    pub fn from_matrix(probs: DMatrix<f64>) -> Result<Self> {
        let n = probs.nrows();
        if n == 0 {
            return Err(Error::Empty);
        }
        if probs.ncols() != n {
            return Err(Error::NonSquare {
                rows: n,
                bad_row: 0,
                cols: probs.ncols(),
            });
        }
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                let p = probs[(i, j)];
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::NotStochastic { row: i, sum: p });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > Self::ROW_TOLERANCE {
                return Err(Error::NotStochastic { row: i, sum });
            }
        }
        Ok(Self { probs })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            probs: DMatrix::identity(n, n),
        }
    }

    pub fn n_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.probs[(from, to)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        let n = self.n_states();
        (0..n)
            .map(|i| (0..n).map(|j| self.probs[(i, j)]).collect())
            .collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for TransitionMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<TransitionMatrix> for Vec<Vec<f64>> {
    fn from(p: TransitionMatrix) -> Self {
        p.to_rows()
    }
}

/// Jump chain `P = I - diag(Q)^{-1} Q`.
pub fn embedded_chain(q: &GeneratorMatrix) -> Result<TransitionMatrix> {
    let n = q.n_states();
    let mut probs = DMatrix::zeros(n, n);
    for i in 0..n {
        let lambda = q.exit_rate(i);
        if lambda <= 0.0 {
            return Err(Error::AbsorbingState { state: i });
        }
        for j in 0..n {
            if j != i {
                probs[(i, j)] = q.rate(i, j) / lambda;
            }
        }
    }
    Ok(TransitionMatrix { probs })
}

/// Inverse of [`embedded_chain`]: `q_ij = λ_i p_ij`, `q_ii = -λ_i`.
pub fn rebuild_generator(p: &TransitionMatrix, exit_rates: &[f64]) -> Result<GeneratorMatrix> {
    let n = p.n_states();
    if exit_rates.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} exit rates for a {n}-state jump chain",
            exit_rates.len()
        )));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        -exit_rates[i]
                    } else {
                        exit_rates[i] * p.prob(i, j)
                    }
                })
                .collect()
        })
        .collect();
    GeneratorMatrix::from_rows(&rows)
}

/// Unique `π` with `πQ = 0`, `Σπ = 1`.
pub fn stationary_distribution(q: &GeneratorMatrix) -> Result<Vec<f64>> {
    let n = q.n_states();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    if !q.is_irreducible() {
        return Err(Error::Reducible);
    }
    // Qᵀ πᵀ = 0 with the last equation replaced by normalization.
    let mut a = q.matrix().transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut pi = lu.solve(&b).ok_or(Error::Reducible)?;
    // one step of iterative refinement
    let resid = &b - &a * &pi;
    if let Some(corr) = lu.solve(&resid) {
        pi += corr;
    }
    if pi.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::Reducible);
    }
    let total: f64 = pi.iter().sum();
    Ok(pi.iter().map(|p| p / total).collect())
}

/// Seed and substream identifier of a reproducible random stream.
///
/// Streams with the same seed and different ids are disjoint ChaCha
/// keystreams, so per-path draws do not depend on how paths are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// One trajectory of a chain on `[t_start, t_end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimePath {
    t_start: f64,
    t_end: f64,
    /// `(time, state)` records; the first is `(t_start, initial_state)`.
    records: Vec<(f64, usize)>,
}

impl RegimePath {
    /// Builds a path from explicit records; times must be strictly increasing
    /// and lie in `[t_start, t_end)`.
    pub fn new(t_start: f64, t_end: f64, records: Vec<(f64, usize)>) -> Result<Self> {
        if !(t_end > t_start) {
            return Err(Error::InvalidInterval {
                start: t_start,
                end: t_end,
            });
        }
        match records.first() {
            Some(&(t, _)) if t == t_start => {}
            _ => {
                return Err(Error::InvalidArgument(
                    "first record must sit at t_start".into(),
                ))
            }
        }
        if records.windows(2).any(|w| !(w[1].0 > w[0].0)) || records.last().unwrap().0 >= t_end
        {
            return Err(Error::InvalidArgument(
                "record times must be strictly increasing inside [t_start, t_end)".into(),
            ));
        }
        Ok(Self {
            t_start,
            t_end,
            records,
        })
    }

    /// Single-regime path without jumps.
    pub fn constant(t_start: f64, t_end: f64, state: usize) -> Result<Self> {
        Self::new(t_start, t_end, vec![(t_start, state)])
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn records(&self) -> &[(f64, usize)] {
        &self.records
    }

    pub fn initial_state(&self) -> usize {
        self.records[0].1
    }

    pub fn n_jumps(&self) -> usize {
        self.records.len() - 1
    }

    /// State occupied at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> usize {
        let idx = self.records.partition_point(|&(s, _)| s <= t);
        self.records[idx.saturating_sub(1)].1
    }

    /// Constant-regime pieces `(start, end, state)` covering `[t_start, t_end]`.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.records.iter().enumerate().map(move |(k, &(t, s))| {
            let end = self.records.get(k + 1).map_or(self.t_end, |r| r.0);
            (t, end, s)
        })
    }

    /// Time spent in each state.
    pub fn occupancy(&self, n_states: usize) -> Vec<f64> {
        let mut occ = vec![0.0; n_states];
        for (a, b, s) in self.segments() {
            occ[s] += b - a;
        }
        occ
    }
}

/// Samples a trajectory: exponential holding times with rate `λ_state`, then
/// a jump drawn from the embedded-chain row. The final holding time is
/// truncated at `t_end`.
pub fn simulate_path<R: Rng + ?Sized>(
    q: &GeneratorMatrix,
    initial_state: usize,
    t_start: f64,
    t_end: f64,
    rng: &mut R,
) -> Result<RegimePath> {
    let n = q.n_states();
    if initial_state >= n {
        return Err(Error::StateOutOfRange {
            state: initial_state,
            n_states: n,
        });
    }
    if !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
        return Err(Error::InvalidInterval {
            start: t_start,
            end: t_end,
        });
    }
    let mut records = vec![(t_start, initial_state)];
    let mut state = initial_state;
    let mut t = t_start;
    loop {
        let lambda = q.exit_rate(state);
        if lambda <= 0.0 {
            break;
        }
        let hold: f64 = Exp::new(lambda).expect("positive rate").sample(rng);
        t += hold;
        if t >= t_end {
            break;
        }
        state = next_state(q, state, lambda, rng);
        records.push((t, state));
    }
    Ok(RegimePath {
        t_start,
        t_end,
        records,
    })
}

fn next_state<R: Rng + ?Sized>(q: &GeneratorMatrix, from: usize, lambda: f64, rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * lambda;
    let mut acc = 0.0;
    let mut last = from;
    for j in 0..q.n_states() {
        if j == from {
            continue;
        }
        let r = q.rate(from, j);
        if r <= 0.0 {
            continue;
        }
        acc += r;
        last = j;
        if u < acc {
            return j;
        }
    }
    last
}

/// `exp(Qt)` by uniformization.
///
/// With `Λ = max_i λ_i` and `P = I + Q/Λ`, `exp(Qt) = Σ_k Pois(k; Λt) P^k`.
/// The series is cut once the remaining Poisson mass drops below 1e-14. Large
/// `Λt` is split into `2^s` equal pieces whose results are squared back.
pub fn transition_probabilities(q: &GeneratorMatrix, t: f64) -> Result<TransitionMatrix> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time must be finite and >= 0, got {t}")));
    }
    let n = q.n_states();
    let lambda = q.exit_rates().into_iter().fold(0.0, f64::max);
    if t == 0.0 || lambda == 0.0 {
        return Ok(TransitionMatrix::identity(n));
    }
    let mut squarings = 0u32;
    let mut tau = t;
    while lambda * tau > UNIFORMIZATION_MAX_MEAN {
        tau *= 0.5;
        squarings += 1;
    }
    let p = DMatrix::identity(n, n) + q.matrix() / lambda;
    let mean = lambda * tau;
    let mut weight = (-mean).exp();
    let mut cumulative = weight;
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut result = &power * weight;
    let mut k = 0u32;
    while 1.0 - cumulative > UNIFORMIZATION_TAIL && k < 10_000 {
        k += 1;
        power = &power * &p;
        weight *= mean / f64::from(k);
        cumulative += weight;
        result += &power * weight;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    // remove the truncated tail mass
    for i in 0..n {
        let s: f64 = result.row(i).sum();
        for j in 0..n {
            result[(i, j)] = (result[(i, j)] / s).clamp(0.0, 1.0);
        }
    }
    Ok(TransitionMatrix { probs: result })
}
