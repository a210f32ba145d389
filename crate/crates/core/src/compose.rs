//! Synthesis of a compound chain `ξ` from two component chains `ε`, `ζ`.
//!
//! The pair `(i, j)` (ε in state `i`, ζ in state `j`) is stored at compound
//! index `i + m·j`. For two 2-state components this gives
//! `(0,0)→0, (1,0)→1, (0,1)→2, (1,1)→3`, i.e. the labels `ξ = 1..4` shifted
//! down by one.
//!
//! Composing more than two chains is done pairwise: compose `ε` and `ζ`,
//! then compose the result with the next component.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bvn::{bvn_upper, gaussian_copula, normal_quantile};
use crate::error::{Error, Result};
use crate::markov::{transition_probabilities, GeneratorMatrix, TransitionMatrix};

/// Bijection between component pairs and compound states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateMapping {
    pub m: usize,
    pub n: usize,
}

impl StateMapping {
    pub fn new(m: usize, n: usize) -> Self {
        assert!(m > 0 && n > 0, "component chains need at least one state");
        Self { m, n }
    }

    pub fn n_states(&self) -> usize {
        self.m * self.n
    }

    pub fn index(&self, eps: usize, zeta: usize) -> usize {
        debug_assert!(eps < self.m && zeta < self.n);
        eps + self.m * zeta
    }

    pub fn pair(&self, state: usize) -> (usize, usize) {
        debug_assert!(state < self.n_states());
        (state % self.m, state / self.m)
    }

    /// Display label such as `3 (eps=1,zeta=1)`.
    pub fn label(&self, state: usize) -> String {
        let (i, j) = self.pair(state);
        format!("{state} (eps={i},zeta={j})")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    IndependentAnalytic,
    CopulaNumeric,
    UserSupplied,
}

/// Compound chain: mapping plus generator over the `m·n` product states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundChainSpec {
    pub mapping: StateMapping,
    pub generator: GeneratorMatrix,
    pub provenance: Provenance,
}

impl CompoundChainSpec {
    /// A user-supplied compound generator, viewed as an `n × 1` product.
    pub fn user_supplied(generator: GeneratorMatrix) -> Self {
        let n = generator.n_states();
        Self {
            mapping: StateMapping::new(n, 1),
            generator,
            provenance: Provenance::UserSupplied,
        }
    }

    pub fn n_states(&self) -> usize {
        self.generator.n_states()
    }
}

/// Which component of a compound chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Epsilon,
    Zeta,
}

/// Gaussian copula coupling the jump counts of the two components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaSpec {
    correlation: f64,
    fd_step: f64,
}

impl CopulaSpec {
    pub const DEFAULT_FD_STEP: f64 = 1e-3;

    pub fn new(correlation: f64, fd_step: f64) -> Result<Self> {
        if !(correlation.abs() < 1.0) {
            return Err(Error::InvalidCopula(format!(
                "|correlation| must be < 1, got {correlation}"
            )));
        }
        if !(fd_step > 0.0 && fd_step <= 0.1) {
            return Err(Error::InvalidCopula(format!(
                "fd_step must lie in (0, 0.1], got {fd_step}"
            )));
        }
        Ok(Self {
            correlation,
            fd_step,
        })
    }

    /// From a 2×2 association matrix with unit diagonal.
    pub fn from_matrix(k: [[f64; 2]; 2], fd_step: f64) -> Result<Self> {
        if k[0][0] != 1.0 || k[1][1] != 1.0 {
            return Err(Error::InvalidCopula("diagonal must be 1".into()));
        }
        if k[0][1] != k[1][0] {
            return Err(Error::InvalidCopula("matrix must be symmetric".into()));
        }
        Self::new(k[0][1], fd_step)
    }

    pub fn independent(fd_step: f64) -> Result<Self> {
        Self::new(0.0, fd_step)
    }

    pub fn correlation(&self) -> f64 {
        self.correlation
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn with_fd_step(&self, fd_step: f64) -> Result<Self> {
        Self::new(self.correlation, fd_step)
    }
}

/// Transition matrix of two independent discrete chains on the product space.
pub fn compose_discrete_product(
    p_eps: &TransitionMatrix,
    p_zeta: &TransitionMatrix,
) -> TransitionMatrix {
    let map = StateMapping::new(p_eps.n_states(), p_zeta.n_states());
    let n = map.n_states();
    let mut out = DMatrix::zeros(n, n);
    for from in 0..n {
        let (i, j) = map.pair(from);
        for to in 0..n {
            let (k, l) = map.pair(to);
            out[(from, to)] = p_eps.prob(i, k) * p_zeta.prob(j, l);
        }
    }
    TransitionMatrix::from_matrix(out).expect("product of stochastic rows is stochastic")
}

/// Generator of two independent chains evolving jointly.
///
/// One coordinate moves at a time with its own rate; no transition changes
/// both coordinates, and the exit rate of `(i, j)` is `λ_i^ε + λ_j^ζ`.
pub fn compose_independent(q_eps: &GeneratorMatrix, q_zeta: &GeneratorMatrix) -> CompoundChainSpec {
    let map = StateMapping::new(q_eps.n_states(), q_zeta.n_states());
    let n = map.n_states();
    let mut rates = DMatrix::zeros(n, n);
    for from in 0..n {
        let (i, j) = map.pair(from);
        for k in (0..map.m).filter(|&k| k != i) {
            rates[(from, map.index(k, j))] = q_eps.rate(i, k);
        }
        for l in (0..map.n).filter(|&l| l != j) {
            rates[(from, map.index(i, l))] = q_zeta.rate(j, l);
        }
        rates[(from, from)] = -(q_eps.exit_rate(i) + q_zeta.exit_rate(j));
    }
    CompoundChainSpec {
        mapping: map,
        generator: GeneratorMatrix::from_off_diagonal(rates).expect("kronecker sum is a generator"),
        provenance: Provenance::IndependentAnalytic,
    }
}

/// Kronecker sum of the component generators in compound-index order,
/// `I_n ⊗ Qε + Qζ ⊗ I_m`. Kept as a cross-check of [`compose_independent`].
pub fn kronecker_sum_oracle(q_eps: &GeneratorMatrix, q_zeta: &GeneratorMatrix) -> GeneratorMatrix {
    let m = q_eps.n_states();
    let n = q_zeta.n_states();
    let sum = DMatrix::<f64>::identity(n, n).kronecker(q_eps.matrix())
        + q_zeta.matrix().kronecker(&DMatrix::<f64>::identity(m, m));
    let rows: Vec<Vec<f64>> = (0..m * n)
        .map(|i| (0..m * n).map(|j| sum[(i, j)]).collect())
        .collect();
    GeneratorMatrix::from_rows(&rows).expect("kronecker sum is a generator")
}

/// Poisson CDF `F(y; λ)`; `F(-1) = 0`.
pub fn poisson_cdf(y: i64, lambda: f64) -> f64 {
    if y < 0 {
        return 0.0;
    }
    if lambda == 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(y as f64 + 1.0, lambda)
}

/// `P(Y1 = y1, Y2 = y2)` for Poisson marginals coupled by a Gaussian copula,
/// via inclusion–exclusion over the rectangle `[F(y-1), F(y)]²`.
pub fn copula_joint_pmf(counts: (u64, u64), lambdas: (f64, f64), copula: &CopulaSpec) -> Result<f64> {
    let (l1, l2) = lambdas;
    if !(l1 > 0.0 && l2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Poisson means must be positive, got ({l1}, {l2})"
        )));
    }
    let (y1, y2) = (counts.0 as i64, counts.1 as i64);
    let u1 = [poisson_cdf(y1, l1), poisson_cdf(y1 - 1, l1)];
    let u2 = [poisson_cdf(y2, l2), poisson_cdf(y2 - 1, l2)];
    let rho = copula.correlation();
    let mut total = 0.0;
    for (a, &ua) in u1.iter().enumerate() {
        for (b, &ub) in u2.iter().enumerate() {
            let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
            total += sign * gaussian_copula(ua, ub, rho)?;
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Short-step jump probabilities from a compound state over `[0, h]`:
/// `(only ε jumps, only ζ jumps, both jump)`.
///
/// Each component's jump count is Poisson with mean `λ h` for its current
/// exit rate; a count of at least one means that component switched. The
/// joint tail `P(N1 ≥ 1, N2 ≥ 1)` is the copula's upper orthant at the
/// survival quantiles, which avoids the cancellation of `1 - F1 - F2 + C`.
fn step_jump_probabilities(a: f64, b: f64, rho: f64, h: f64) -> Result<(f64, f64, f64)> {
    let p1 = -(-a * h).exp_m1();
    let p2 = -(-b * h).exp_m1();
    let z1 = -normal_quantile(p1);
    let z2 = -normal_quantile(p2);
    let both = bvn_upper(z1, z2, rho)?;
    Ok((p1 - both, p2 - both, both))
}

/// Extrapolated copula rates before any repair; the diagonal is zero.
///
/// Rates are `P_h / h` combined as `2 R(h/2) - R(h)`, which cancels the
/// leading `O(h)` bias.
pub fn copula_rate_matrix(
    q_eps: &GeneratorMatrix,
    q_zeta: &GeneratorMatrix,
    copula: &CopulaSpec,
) -> Result<DMatrix<f64>> {
    if q_eps.n_states() != 2 || q_zeta.n_states() != 2 {
        return Err(Error::Unsupported(format!(
            "copula composition needs two 2-state components, got {}x{}",
            q_eps.n_states(),
            q_zeta.n_states()
        )));
    }
    let map = StateMapping::new(2, 2);
    let h = copula.fd_step();
    let rho = copula.correlation();
    let mut rates = DMatrix::zeros(4, 4);
    for from in 0..4 {
        let (i, j) = map.pair(from);
        let a = q_eps.exit_rate(i);
        let b = q_zeta.exit_rate(j);
        let coarse = step_jump_probabilities(a, b, rho, h)?;
        let fine = step_jump_probabilities(a, b, rho, h / 2.0)?;
        let extrapolate = |fine: f64, coarse: f64| 2.0 * fine / (h / 2.0) - coarse / h;
        rates[(from, map.index(1 - i, j))] = extrapolate(fine.0, coarse.0);
        rates[(from, map.index(i, 1 - j))] = extrapolate(fine.1, coarse.1);
        rates[(from, map.index(1 - i, 1 - j))] = extrapolate(fine.2, coarse.2);
    }
    Ok(rates)
}

/// Generator whose component jumps are coupled through a Gaussian copula on
/// short-step jump counts. Only two 2-state components are supported.
///
/// Extrapolated rates in `[-1e-8, 0)` are treated as rounding and set to 0;
/// anything more negative is reported as [`Error::NonGenerator`].
pub fn compose_copula(
    q_eps: &GeneratorMatrix,
    q_zeta: &GeneratorMatrix,
    copula: &CopulaSpec,
) -> Result<CompoundChainSpec> {
    const CLAMP: f64 = 1e-8;
    let mut rates = copula_rate_matrix(q_eps, q_zeta, copula)?;
    for r in 0..4 {
        for c in 0..4 {
            if r == c {
                continue;
            }
            let v = rates[(r, c)];
            if v < -CLAMP {
                return Err(Error::NonGenerator {
                    row: r,
                    col: c,
                    value: v,
                });
            }
            if v < 0.0 {
                rates[(r, c)] = 0.0;
            }
        }
    }
    Ok(CompoundChainSpec {
        mapping: StateMapping::new(2, 2),
        generator: GeneratorMatrix::from_off_diagonal(rates)?,
        provenance: Provenance::CopulaNumeric,
    })
}

/// Marginal transition matrix of one component at time `t`, starting the
/// other component from `other_initial` (uniform when `None`).
pub fn marginalize(
    spec: &CompoundChainSpec,
    which: Component,
    t: f64,
    other_initial: Option<&[f64]>,
) -> Result<TransitionMatrix> {
    let map = spec.mapping;
    let p = transition_probabilities(&spec.generator, t)?;
    let (keep, other) = match which {
        Component::Epsilon => (map.m, map.n),
        Component::Zeta => (map.n, map.m),
    };
    let weights: Vec<f64> = match other_initial {
        Some(w) => {
            if w.len() != other {
                return Err(Error::DimensionMismatch(format!(
                    "initial distribution has {} entries, other component has {other} states",
                    w.len()
                )));
            }
            let s: f64 = w.iter().sum();
            if w.iter().any(|x| *x < 0.0) || (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(
                    "initial distribution must be a probability vector".into(),
                ));
            }
            w.to_vec()
        }
        None => vec![1.0 / other as f64; other],
    };
    let compound = |a: usize, b: usize| match which {
        Component::Epsilon => map.index(a, b),
        Component::Zeta => map.index(b, a),
    };
    let mut out = DMatrix::zeros(keep, keep);
    for a in 0..keep {
        for (b, w) in weights.iter().enumerate() {
            let from = compound(a, b);
            for c in 0..keep {
                let mut mass = 0.0;
                for d in 0..other {
                    mass += p.prob(from, compound(c, d));
                }
                out[(a, c)] += w * mass;
            }
        }
    }
    for a in 0..keep {
        let s: f64 = out.row(a).sum();
        for c in 0..keep {
            out[(a, c)] /= s;
        }
    }
    TransitionMatrix::from_matrix(out)
}
