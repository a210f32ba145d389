//! Deterministic solution machinery for the normal-income portfolio problem.
//!
//! With exponential utility the value function separates as
//! `V = -(1/γ) exp(-γ x e^{r(T-t)}) h(t, i) exp(M(t) y)`. The income
//! loading `M` solves `M' = γ e^{r(T-t)}`, `M(T) = 0`, and `h` solves the
//! coupled linear system
//!
//! ```text
//! h_t(t, i) = -c_i(t) h(t, i) - Σ_j q_ij h(t, j),   h(T, i) = 1,
//! c_i(t)    = -(α_i - r)²/(2σ_i²) + M(t)[μ_i - ρ(α_i - r)δ_i/σ_i] + ½(1-ρ²)δ_i² M(t)².
//! ```
//!
//! The sign of the risk-premium term is the one obtained by substituting the
//! ansatz into the HJB system; it makes `h(t, i) = E^i[exp(∫ c_ξ(s)(s) ds)]`
//! agree with the `ρ = 0` representation `E[exp(-∫(γ e^{r(T-s)} Y + (α-r)²/2σ²))]`.

use std::sync::Arc;

use crate::compose::StateMapping;
use crate::error::{Error, Result};
use crate::model::MarketModel;
use crate::table::Table;

pub const DEFAULT_H_STEPS: usize = 2048;
/// Tolerance on the Richardson estimate of the RK4 error in `h`.
pub const H_STEP_TOLERANCE: f64 = 1e-8;

/// `(e^x - 1)/x`.
pub fn phi1(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x.abs() < 1e-5 {
        1.0 + x / 2.0 + x * x / 6.0
    } else {
        x.exp_m1() / x
    }
}

/// `(e^x - 1 - x)/x²`.
pub fn phi2(x: f64) -> f64 {
    if x.abs() < 0.5 {
        // Σ x^k/(k+2)!
        let mut term = 0.5;
        let mut sum = term;
        for k in 1..30 {
            term *= x / (k as f64 + 2.0);
            sum += term;
        }
        sum
    } else {
        (x.exp_m1() - x) / (x * x)
    }
}

/// `[(e^{2x}-1)/(2x) - 2(e^x-1)/x + 1]/x²`.
fn psi(x: f64) -> f64 {
    if x.abs() < 0.5 {
        // Σ_{n≥3} (2^{n-1} - 2) x^{n-3}/n!
        let mut sum = 0.0;
        let mut fact = 6.0;
        let mut xp = 1.0;
        let mut two = 4.0;
        for n in 3..40 {
            sum += (two - 2.0) * xp / fact;
            xp *= x;
            two *= 2.0;
            fact *= (n + 1) as f64;
        }
        sum
    } else {
        ((2.0 * x).exp_m1() / (2.0 * x) - 2.0 * x.exp_m1() / x + 1.0) / (x * x)
    }
}

/// Closed-form income loading `M(t) = -(γ/r)(e^{r(T-t)} - 1)`, with the
/// limit `-γ(T-t)` at `r = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCurve {
    gamma: f64,
    r: f64,
    horizon: f64,
}

impl MCurve {
    pub fn value(&self, t: f64) -> f64 {
        let tau = self.horizon - t;
        if self.r == 0.0 {
            -self.gamma * tau
        } else {
            -self.gamma * tau * phi1(self.r * tau)
        }
    }

    /// `M'(t) = γ e^{r(T-t)}`.
    pub fn derivative(&self, t: f64) -> f64 {
        self.gamma * (self.r * (self.horizon - t)).exp()
    }

    /// `∫_0^u (e^{rv}-1)/r dv`.
    fn f1(&self, u: f64) -> f64 {
        u * u * phi2(self.r * u)
    }

    /// `∫_0^u ((e^{rv}-1)/r)² dv`.
    fn f2(&self, u: f64) -> f64 {
        u * u * u * psi(self.r * u)
    }

    /// `∫_a^b M(s) ds`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        -self.gamma * (self.f1(self.horizon - a) - self.f1(self.horizon - b))
    }

    /// `∫_a^b M(s)² ds`.
    pub fn integral_sq(&self, a: f64, b: f64) -> f64 {
        self.gamma * self.gamma * (self.f2(self.horizon - a) - self.f2(self.horizon - b))
    }

    pub fn to_table(&self, n_points: usize) -> Table {
        let mut table = Table::new(
            "closed-form",
            vec!["t [years]".into(), "M(t) [1/income]".into()],
        );
        let n = n_points.max(2);
        for k in 0..n {
            let t = self.horizon * k as f64 / (n - 1) as f64;
            table.push(vec![t, self.value(t)]);
        }
        table
    }
}

pub fn solve_m(model: &MarketModel) -> MCurve {
    MCurve {
        gamma: model.gamma(),
        r: model.r(),
        horizon: model.horizon(),
    }
}

/// `c_i(t) = a + b M(t) + c M(t)²`, the potential of the `h` system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl RegimeCoefficients {
    pub fn of(model: &MarketModel, i: usize) -> Self {
        let p = model.regime(i);
        let premium = p.alpha - model.r();
        let rho = model.rho();
        Self {
            a: -premium * premium / (2.0 * p.sigma * p.sigma),
            b: p.mu - rho * premium * p.delta / p.sigma,
            c: 0.5 * (1.0 - rho * rho) * p.delta * p.delta,
        }
    }

    pub fn all(model: &MarketModel) -> Vec<Self> {
        (0..model.n_regimes()).map(|i| Self::of(model, i)).collect()
    }

    pub fn rate(&self, m: &MCurve, t: f64) -> f64 {
        let mt = m.value(t);
        self.a + self.b * mt + self.c * mt * mt
    }

    /// `∫_s1^s2 c(s) ds`, exact.
    pub fn integral(&self, m: &MCurve, s1: f64, s2: f64) -> f64 {
        self.a * (s2 - s1) + self.b * m.integral(s1, s2) + self.c * m.integral_sq(s1, s2)
    }
}

/// `h(t, i)` on a uniform grid with node slopes for cubic Hermite
/// interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct HTable {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
    n_steps: usize,
}

impl HTable {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Node values; `values()[k][i]` is `h(t_k, i)`.
    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_regimes(&self) -> usize {
        self.values[0].len()
    }

    fn locate(&self, t: f64) -> (usize, f64, f64) {
        let t0 = self.times[0];
        let dt = self.times[1] - self.times[0];
        let k = (((t - t0) / dt).floor() as isize).clamp(0, self.n_steps as isize - 1) as usize;
        let s = (t - self.times[k]) / dt;
        (k, s, dt)
    }

    /// Interpolated `h(t, i)`.
    pub fn value(&self, t: f64, i: usize) -> f64 {
        if t == self.times[self.n_steps] {
            return self.values[self.n_steps][i];
        }
        let (k, s, dt) = self.locate(t);
        let (y0, y1) = (self.values[k][i], self.values[k + 1][i]);
        let (d0, d1) = (self.slopes[k][i] * dt, self.slopes[k + 1][i] * dt);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1
    }

    /// Interpolated `∂h/∂t(t, i)`.
    pub fn derivative(&self, t: f64, i: usize) -> f64 {
        let (k, s, dt) = self.locate(t);
        let (y0, y1) = (self.values[k][i], self.values[k + 1][i]);
        let (d0, d1) = (self.slopes[k][i] * dt, self.slopes[k + 1][i] * dt);
        let s2 = s * s;
        ((6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * d0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * d1)
            / dt
    }

    /// Columns `t`, then one per regime.
    pub fn to_table(&self, mapping: &StateMapping) -> Table {
        let mut columns = vec!["t [years]".to_string()];
        columns.extend((0..self.n_regimes()).map(|i| format!("h[{}] [-]", mapping.label(i))));
        let mut table = Table::new(format!("ODE (RK4, n_steps={})", self.n_steps), columns);
        for (t, row) in self.times.iter().zip(&self.values) {
            let mut r = vec![*t];
            r.extend(row);
            table.push(r);
        }
        table
    }
}

/// `-(c(t) ∘ h + Q h)`, the time derivative of `h`.
fn h_slope(model: &MarketModel, coeffs: &[RegimeCoefficients], m: &MCurve, t: f64, h: &[f64]) -> Vec<f64> {
    let q = model.generator();
    let k = h.len();
    (0..k)
        .map(|i| {
            let coupling: f64 = (0..k).map(|j| q.rate(i, j) * h[j]).sum();
            -(coeffs[i].rate(m, t) * h[i] + coupling)
        })
        .collect()
}

/// Backward RK4 integration of the `h` system without the step-size check.
pub fn integrate_h(model: &MarketModel, n_steps: usize) -> Result<HTable> {
    if !model.is_normal_income() {
        return Err(Error::CaseMismatch(
            "the h system needs regime-constant income coefficients".into(),
        ));
    }
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be positive".into()));
    }
    let coeffs = RegimeCoefficients::all(model);
    let m = solve_m(model);
    let horizon = model.horizon();
    let k = model.n_regimes();
    let dt = horizon / n_steps as f64;
    let mut values = vec![vec![0.0; k]; n_steps + 1];
    values[n_steps] = vec![1.0; k];
    for step in (0..n_steps).rev() {
        let t1 = horizon * (step + 1) as f64 / n_steps as f64;
        let tm = t1 - 0.5 * dt;
        let t0 = t1 - dt;
        let h = &values[step + 1];
        // stepping backwards: dh = slope · (-dt)
        let k1 = h_slope(model, &coeffs, &m, t1, h);
        let y2: Vec<f64> = h.iter().zip(&k1).map(|(y, d)| y - 0.5 * dt * d).collect();
        let k2 = h_slope(model, &coeffs, &m, tm, &y2);
        let y3: Vec<f64> = h.iter().zip(&k2).map(|(y, d)| y - 0.5 * dt * d).collect();
        let k3 = h_slope(model, &coeffs, &m, tm, &y3);
        let y4: Vec<f64> = h.iter().zip(&k3).map(|(y, d)| y - dt * d).collect();
        let k4 = h_slope(model, &coeffs, &m, t0, &y4);
        values[step] = (0..k)
            .map(|i| h[i] - dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
    }
    let times: Vec<f64> = (0..=n_steps)
        .map(|s| horizon * s as f64 / n_steps as f64)
        .collect();
    let slopes = times
        .iter()
        .zip(&values)
        .map(|(t, h)| h_slope(model, &coeffs, &m, *t, h))
        .collect();
    Ok(HTable {
        times,
        values,
        slopes,
        n_steps,
    })
}

/// Solves the `h` system and checks the RK4 error against a half-resolution
/// run: the Richardson estimate `max |h_N - h_{N/2}| / (15 |h_N|)` must stay
/// below [`H_STEP_TOLERANCE`].
pub fn solve_h_ode(model: &MarketModel, n_steps: usize) -> Result<HTable> {
    if n_steps < 2 || !n_steps.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "n_steps must be even and >= 2, got {n_steps}"
        )));
    }
    let fine = integrate_h(model, n_steps)?;
    let coarse = integrate_h(model, n_steps / 2)?;
    let mut estimate: f64 = 0.0;
    for (kc, row) in coarse.values.iter().enumerate() {
        for (i, hc) in row.iter().enumerate() {
            let hf = fine.values[2 * kc][i];
            estimate = estimate.max((hf - hc).abs() / (15.0 * hf.abs()));
        }
    }
    if !(estimate <= H_STEP_TOLERANCE) {
        return Err(Error::StepTooCoarse {
            estimate,
            tolerance: H_STEP_TOLERANCE,
        });
    }
    if fine.values.iter().flatten().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidModel("h lost positivity".into()));
    }
    Ok(fine)
}

/// A value function and its partial derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Partials {
    pub v: f64,
    pub v_t: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub v_xx: f64,
    pub v_yy: f64,
    pub v_xy: f64,
}

/// Relative step of the central finite differences.
pub const FD_RELATIVE_STEP: f64 = 1e-5;

/// Central-difference partials of `f(t, x, y)`.
pub fn finite_difference_partials(f: impl Fn(f64, f64, f64) -> f64, t: f64, x: f64, y: f64) -> Partials {
    let ht = FD_RELATIVE_STEP * t.abs().max(1.0);
    let hx = FD_RELATIVE_STEP * x.abs().max(1.0);
    let hy = FD_RELATIVE_STEP * y.abs().max(1.0);
    let v = f(t, x, y);
    let (xp, xm) = (f(t, x + hx, y), f(t, x - hx, y));
    let (yp, ym) = (f(t, x, y + hy), f(t, x, y - hy));
    Partials {
        v,
        v_t: (f(t + ht, x, y) - f(t - ht, x, y)) / (2.0 * ht),
        v_x: (xp - xm) / (2.0 * hx),
        v_y: (yp - ym) / (2.0 * hy),
        v_xx: (xp - 2.0 * v + xm) / (hx * hx),
        v_yy: (yp - 2.0 * v + ym) / (hy * hy),
        v_xy: (f(t, x + hx, y + hy) - f(t, x + hx, y - hy) - f(t, x - hx, y + hy)
            + f(t, x - hx, y - hy))
            / (4.0 * hx * hy),
    }
}

/// A regime-indexed scalar field `V(t, x, y, i)`.
pub trait ValueField {
    fn value(&self, t: f64, x: f64, y: f64, i: usize) -> f64;

    fn partials(&self, t: f64, x: f64, y: f64, i: usize) -> Partials {
        finite_difference_partials(|t, x, y| self.value(t, x, y, i), t, x, y)
    }
}

/// `L_i(π)V`: the controlled generator of `(X, Y)` acting on `V` in regime `i`.
pub fn apply_operator_l(model: &MarketModel, d: &Partials, point: (f64, f64, f64), pi: f64, i: usize) -> f64 {
    let (t, x, y) = point;
    let p = model.regime(i);
    let r = model.r();
    let delta = model.income_volatility(y, i, t);
    let mu = model.income_drift(y, i, t);
    0.5 * pi * pi * p.sigma * p.sigma * d.v_xx
        + (r * x + y) * d.v_x
        + pi * (p.alpha - r) * d.v_x
        + 0.5 * delta * delta * d.v_yy
        + mu * d.v_y
        + pi * p.sigma * model.rho() * delta * d.v_xy
        + d.v_t
}

/// Maximizer of `π ↦ L_i(π)V` from the first-order condition.
pub fn foc_control(model: &MarketModel, d: &Partials, point: (f64, f64, f64), i: usize) -> Result<f64> {
    if !(d.v_xx < 0.0) {
        return Err(Error::ConcavityViolation { v_xx: d.v_xx });
    }
    let (t, _, y) = point;
    let p = model.regime(i);
    let delta = model.income_volatility(y, i, t);
    Ok(-((p.alpha - model.r()) * d.v_x + p.sigma * delta * model.rho() * d.v_xy)
        / (p.sigma * p.sigma * d.v_xx))
}

/// `sup_π L_i(π)V + Σ_j q_ij V(·, j)` at one point; zero for the value
/// function.
pub fn hjb_residual(model: &MarketModel, field: &dyn ValueField, point: (f64, f64, f64), i: usize) -> Result<f64> {
    model.check_regime(i)?;
    let (t, x, y) = point;
    let d = field.partials(t, x, y, i);
    let pi = foc_control(model, &d, point, i)?;
    let q = model.generator();
    let coupling: f64 = (0..model.n_regimes())
        .map(|j| {
            let v = if j == i { d.v } else { field.value(t, x, y, j) };
            q.rate(i, j) * v
        })
        .sum();
    Ok(apply_operator_l(model, &d, point, pi, i) + coupling)
}

/// `V = -(1/γ) exp(-γ x e^{r(T-t)}) h(t, i) e^{M(t) y}` with analytic partials.
#[derive(Debug, Clone)]
pub struct NormalIncomeValue {
    model: MarketModel,
    m: MCurve,
    h: Arc<HTable>,
}

impl NormalIncomeValue {
    pub fn new(model: MarketModel, h: Arc<HTable>) -> Self {
        let m = solve_m(&model);
        Self { model, m, h }
    }

    pub fn m_curve(&self) -> &MCurve {
        &self.m
    }

    pub fn h_table(&self) -> &Arc<HTable> {
        &self.h
    }

    pub fn model(&self) -> &MarketModel {
        &self.model
    }
}

impl ValueField for NormalIncomeValue {
    fn value(&self, t: f64, x: f64, y: f64, i: usize) -> f64 {
        let gamma = self.model.gamma();
        let g = self.model.growth(t);
        -(1.0 / gamma) * (-gamma * x * g + self.m.value(t) * y).exp() * self.h.value(t, i)
    }

    fn partials(&self, t: f64, x: f64, y: f64, i: usize) -> Partials {
        let gamma = self.model.gamma();
        let g = self.model.growth(t);
        let m = self.m.value(t);
        let h = self.h.value(t, i);
        let h_t = self.h.derivative(t, i);
        let v = -(1.0 / gamma) * (-gamma * x * g + m * y).exp() * h;
        Partials {
            v,
            v_t: v * (gamma * self.model.r() * x * g + self.m.derivative(t) * y + h_t / h),
            v_x: -gamma * g * v,
            v_y: m * v,
            v_xx: gamma * gamma * g * g * v,
            v_yy: m * m * v,
            v_xy: -gamma * g * m * v,
        }
    }
}
