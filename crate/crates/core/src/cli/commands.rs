//! Subcommands. Each returns a [`RunReport`] holding its tables; nothing is
//! written until the caller asks.

use std::str::FromStr;

use serde_json::json;

use crate::cli::config::ModelConfig;
use crate::cli::report::{Check, RunReport};
use crate::compose::{compose_independent, kronecker_sum_oracle, Provenance};
use crate::error::{Error, Result};
use crate::hjb::solve_m;
use crate::markov::{embedded_chain, stationary_distribution, RngStream};
use crate::mc::{estimate_g_mc, estimate_h_mc, MCEstimate};
use crate::model::MarketModel;
use crate::portfolio::{
    evaluate_policy, hedge_weight, merton_weight, optimal_strategy, simulate_wealth, utility,
    value_function, Case, SolutionBundle, Strategy,
};
use crate::table::Table;

/// Points per curve in the M and strategy tables.
const CURVE_POINTS: usize = 101;

/// `lo:hi:n`, `n` evenly spaced points including both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        (0..self.n)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / (self.n - 1) as f64)
            .collect()
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts.as_slice() else {
            return Err(format!("expected lo:hi:n, got `{s}`"));
        };
        let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
        let n: usize = n.trim().parse().map_err(|e| format!("`{n}`: {e}"))?;
        if n == 0 {
            return Err("grid axis needs at least one point".into());
        }
        Ok(Axis::new(num(lo)?, num(hi)?, n))
    }
}

/// Evaluation grid over `(t, x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub t: Axis,
    pub x: Axis,
    pub y: Axis,
}

impl Grid {
    /// Five points per axis: `t` in `[0, 0.8T]`, `x` in `[-1, 2]`, `y` in `[0, 2]`.
    pub fn default_for(model: &MarketModel) -> Self {
        Self {
            t: Axis::new(0.0, 0.8 * model.horizon(), 5),
            x: Axis::new(-1.0, 2.0, 5),
            y: Axis::new(0.0, 2.0, 5),
        }
    }

    /// Parses `t0:t1:n[,x0:x1:n[,y0:y1:n]]`; missing axes keep their defaults.
    pub fn parse(spec: &str, model: &MarketModel) -> std::result::Result<Self, String> {
        let mut grid = Self::default_for(model);
        let axes: Vec<&str> = spec.split(',').collect();
        if axes.len() > 3 {
            return Err(format!("at most three axes (t, x, y), got {}", axes.len()));
        }
        for (k, a) in axes.iter().enumerate() {
            let axis: Axis = a.parse()?;
            match k {
                0 => grid.t = axis,
                1 => grid.x = axis,
                _ => grid.y = axis,
            }
        }
        if grid.t.lo < 0.0 || grid.t.hi > model.horizon() {
            return Err(format!("t axis must lie in [0, {}]", model.horizon()));
        }
        Ok(grid)
    }
}

fn new_report(command: &str, cfg: &ModelConfig) -> RunReport {
    let inputs = serde_json::to_value(&cfg.input).expect("config serializes");
    RunReport::new(command, &cfg.hash, inputs)
}

fn generator_table(model: &MarketModel, rows: &[Vec<f64>], provenance: &str) -> Table {
    let map = model.chain().mapping;
    let n = rows.len();
    let mut cols = vec!["from [state]".to_string()];
    cols.extend((0..n).map(|j| format!("to {} [1/years]", map.label(j))));
    let mut t = Table::new(provenance, cols);
    for (i, row) in rows.iter().enumerate() {
        let mut r = vec![i as f64];
        r.extend(row);
        t.push(r);
    }
    t
}

fn chain_provenance(p: Provenance) -> &'static str {
    match p {
        Provenance::IndependentAnalytic => "closed-form (independent composition)",
        Provenance::CopulaNumeric => "numeric (copula composition, extrapolated finite step)",
        Provenance::UserSupplied => "user-supplied",
    }
}

/// Compound generator, embedded jump chain and stationary distribution.
pub fn cmd_compose(cfg: &ModelConfig) -> Result<RunReport> {
    let mut report = new_report("compose", cfg);
    report.phase("compose");
    let model = &cfg.model;
    let chain = model.chain();
    let q = &chain.generator;
    let provenance = chain_provenance(chain.provenance);
    let labels: Vec<String> = (0..chain.n_states()).map(|i| chain.mapping.label(i)).collect();
    report.result("n_states", chain.n_states());
    report.result("provenance", chain.provenance);
    report.result("labels", &labels);
    report.json_file("compound_generator.json", chain);
    report.table("compound_generator.csv", &generator_table(model, &q.to_rows(), provenance));

    match embedded_chain(q) {
        Ok(p) => {
            let mut t = generator_table(model, &p.to_rows(), "closed-form (embedded jump chain)");
            for c in t.columns.iter_mut().skip(1) {
                *c = c.replace("[1/years]", "[-]");
            }
            report.table("embedded_chain.csv", &t);
        }
        Err(e) => report.result("embedded_chain_error", e.to_string()),
    }
    match stationary_distribution(q) {
        Ok(pi) => {
            let mut t = Table::new(
                "linear solve (stationary distribution)",
                vec!["state [index]".into(), "probability [-]".into()],
            );
            for (i, p) in pi.iter().enumerate() {
                t.push(vec![i as f64, *p]);
            }
            report.result("stationary", &pi);
            report.table("stationary.csv", &t);
        }
        Err(e) => report.result("stationary_error", e.to_string()),
    }
    if chain.provenance == Provenance::CopulaNumeric {
        if let Some((eps, zeta)) = cfg.components() {
            let ind = compose_independent(&eps, &zeta).generator;
            let diff: Vec<Vec<f64>> = q
                .to_rows()
                .iter()
                .zip(ind.to_rows())
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect();
            let max = diff.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            report.result("max_abs_diff_vs_independent", max);
            report.table(
                "copula_minus_independent.csv",
                &generator_table(model, &diff, "numeric (copula minus independent generator)"),
            );
        }
    }
    report.end_phase();
    Ok(report)
}

fn strategy_table(model: &MarketModel) -> Table {
    let map = model.chain().mapping;
    let mut cols = vec!["t [years]".to_string()];
    for i in 0..model.n_regimes() {
        let l = map.label(i);
        cols.push(format!("merton[{l}] [wealth units]"));
        cols.push(format!("hedge[{l}] [wealth units]"));
        cols.push(format!("pi[{l}] [wealth units]"));
    }
    let mut t = Table::new("closed-form", cols);
    for k in 0..CURVE_POINTS {
        let time = model.horizon() * k as f64 / (CURVE_POINTS - 1) as f64;
        let mut row = vec![time];
        for i in 0..model.n_regimes() {
            let m = merton_weight(model, i, time);
            let h = hedge_weight(model, i, time);
            row.extend([m, h, m + h]);
        }
        t.push(row);
    }
    t
}

fn value_columns() -> Vec<String> {
    [
        "t [years]",
        "x [wealth units]",
        "y [income/year]",
        "regime [state]",
        "V [utility]",
        "stderr [utility]",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// M curve, `h` table or `g` estimates, strategy table and value grid.
pub fn cmd_solve(cfg: &ModelConfig, grid: &Grid) -> Result<RunReport> {
    let mut report = new_report("solve", cfg);
    let model = &cfg.model;
    report.phase("m_curve");
    report.table("m_curve.csv", &solve_m(model).to_table(CURVE_POINTS));
    report.phase("strategy");
    report.table("strategy.csv", &strategy_table(model));
    match cfg.case() {
        Case::NormalIncome => {
            report.phase("h_ode");
            let bundle = value_function(model, Case::NormalIncome, cfg.value_options())?;
            let h = bundle.h_table().expect("ODE route");
            report.table("h.csv", &h.to_table(&model.chain().mapping));
            report.result("h_at_0", (0..model.n_regimes()).map(|i| h.value(0.0, i)).collect::<Vec<_>>());
            report.phase("value_grid");
            let mut v = Table::new(format!("closed-form + ODE (RK4, n_steps={})", h.n_steps()), value_columns());
            for t in grid.t.points() {
                for x in grid.x.points() {
                    for y in grid.y.points() {
                        for i in 0..model.n_regimes() {
                            v.push(vec![t, x, y, i as f64, bundle.value(t, x, y, i)?.value, 0.0]);
                        }
                    }
                }
            }
            report.table("value.csv", &v);
        }
        Case::Rho0 => {
            report.phase("g_mc");
            let n = cfg.numerics();
            let provenance = format!("MC±stderr (n_paths={}, seed={})", n.n_paths, n.seed);
            let cols = vec![
                "t [years]".to_string(),
                "y [income/year]".into(),
                "regime [state]".into(),
                "g [-]".into(),
                "stderr [-]".into(),
            ];
            let mut g_table = Table::new(provenance.clone(), cols);
            let mut v = Table::new(provenance, value_columns());
            for t in grid.t.points() {
                for y in grid.y.points() {
                    for i in 0..model.n_regimes() {
                        let g = estimate_g_mc(model, t, y, i, n.n_paths, cfg.dt(t), n.seed)?;
                        g_table.push(vec![t, y, i as f64, g.mean, g.stderr]);
                        for x in grid.x.points() {
                            let e = g.scaled(utility(x * model.growth(t), model.gamma()));
                            v.push(vec![t, x, y, i as f64, e.mean, e.stderr]);
                        }
                    }
                }
            }
            report.table("g.csv", &g_table);
            report.table("value.csv", &v);
        }
    }
    report.end_phase();
    Ok(report)
}

/// Sample wealth, income and regime paths under the case's optimal strategy.
pub fn cmd_simulate(cfg: &ModelConfig, x0: f64, y0: f64, i0: usize, n_sample: usize) -> Result<RunReport> {
    let mut report = new_report("simulate", cfg);
    report.phase("simulate");
    let model = &cfg.model;
    let strategy = optimal_strategy(model, cfg.case())?;
    let seed = cfg.numerics().seed;
    let dt = cfg.dt(0.0);
    let mut t = Table::new(
        format!("MC sample paths (seed={seed}, dt={dt})"),
        vec![
            "path [index]".into(),
            "t [years]".into(),
            "X [wealth units]".into(),
            "Y [income/year]".into(),
            "regime [state]".into(),
        ],
    );
    let mut terminal = Vec::with_capacity(n_sample);
    for k in 0..n_sample {
        let mut rng = RngStream::new(seed, k as u64).rng();
        let path = simulate_wealth(model, &strategy, 0.0, x0, y0, i0, dt, &mut rng)?;
        for s in 0..path.times.len() {
            // regime in force from this node onwards; the final node repeats the last one
            let regime = path.regimes.get(s).or(path.regimes.last()).copied().unwrap_or(i0);
            t.push(vec![k as f64, path.times[s], path.wealth[s], path.income[s], regime as f64]);
        }
        terminal.push(path.terminal_wealth());
    }
    report.result("terminal_wealth", &terminal);
    report.table("paths.csv", &t);
    report.end_phase();
    Ok(report)
}

/// `E[U(X(T))]` under the optimal strategy and constant comparisons, next to
/// the value-function prediction.
pub fn cmd_evaluate(cfg: &ModelConfig, x0: f64, y0: f64, i0: usize, compare: &[f64]) -> Result<RunReport> {
    let mut report = new_report("evaluate", cfg);
    let model = &cfg.model;
    let n = cfg.numerics();
    let dt = cfg.dt(0.0);
    report.phase("value_function");
    let bundle = value_function(model, cfg.case(), cfg.value_options())?;
    let predicted = bundle.value(0.0, x0, y0, i0)?;
    report.result("value_function", predicted);
    report.phase("policies");
    let mut table = Table::new(
        format!("MC±stderr (n_paths={}, seed={})", n.n_paths, n.seed),
        vec![
            "constant pi [wealth units]".into(),
            "E[U] [utility]".into(),
            "stderr [utility]".into(),
        ],
    );
    let mut policies = Vec::new();
    let optimal = evaluate_policy(model, bundle.strategy(), 0.0, x0, y0, i0, n.n_paths, dt, n.seed)?;
    table.push(vec![f64::NAN, optimal.mean, optimal.stderr]);
    policies.push(json!({"policy": "optimal", "estimate": optimal}));
    for &c in compare {
        let e = evaluate_policy(model, &Strategy::constant(model, c), 0.0, x0, y0, i0, n.n_paths, dt, n.seed)?;
        table.push(vec![c, e.mean, e.stderr]);
        policies.push(json!({"policy": format!("constant {c}"), "estimate": e}));
    }
    report.result("policies", policies);
    report.table("evaluation.csv", &table);
    report.end_phase();
    Ok(report)
}

fn combined(a: &MCEstimate, b_stderr: f64) -> f64 {
    (a.stderr * a.stderr + b_stderr * b_stderr).sqrt()
}

fn check_kronecker(cfg: &ModelConfig) -> Check {
    let Some((eps, zeta)) = cfg.components() else {
        return Check::skipped("kronecker-oracle", "compound generator supplied directly");
    };
    let ind = compose_independent(&eps, &zeta).generator;
    let oracle = kronecker_sum_oracle(&eps, &zeta);
    let diff = (ind.matrix() - oracle.matrix()).amax();
    let scale = oracle.matrix().amax().max(1.0);
    Check::new("kronecker-oracle", diff, 1e-14 * scale, "max |independent - kronecker sum|")
}

fn check_h(cfg: &ModelConfig, ode: &SolutionBundle, report: &mut RunReport) -> Result<Vec<Check>> {
    let model = &cfg.model;
    let n = cfg.numerics();
    let h = ode.h_table().expect("ODE route");
    let mut out = Vec::new();
    let mut rows = Vec::new();
    for i in 0..model.n_regimes() {
        let mc = estimate_h_mc(model, 0.0, i, n.n_paths, n.seed)?;
        let exact = h.value(0.0, i);
        let diff = (mc.mean - exact).abs();
        rows.push(json!({"regime": i, "ode": exact, "mc": mc}));
        out.push(Check::new(
            format!("h-mc-vs-ode[{}]", model.chain().mapping.label(i)),
            diff,
            3.0 * mc.stderr + 1e-12 * exact.abs(),
            format!("|MC - ODE| vs 3 stderr, stderr={:.3e}", mc.stderr),
        ));
    }
    report.result("h_mc_vs_ode", rows);
    Ok(out)
}

fn check_policy(cfg: &ModelConfig, report: &mut RunReport) -> Result<Vec<Check>> {
    let model = &cfg.model;
    let n = cfg.numerics();
    let init = cfg.initial();
    let dt = cfg.dt(0.0);
    let bundle = value_function(model, cfg.case(), cfg.value_options())?;
    let v = bundle.value(0.0, init.x0, init.y0, init.i0)?;
    let score = |s: &Strategy| evaluate_policy(model, s, 0.0, init.x0, init.y0, init.i0, n.n_paths, dt, n.seed);
    let optimal = score(bundle.strategy())?;
    let mut out = vec![Check::new(
        "policy-vs-value",
        (optimal.mean - v.value).abs(),
        3.0 * combined(&optimal, v.stderr),
        format!("E[U] under optimal vs V ({}), 3 combined stderr", v.provenance),
    )];
    let mut rows = vec![json!({"scale": 1.0, "estimate": optimal})];
    for factor in [0.75, 1.25] {
        let e = score(&bundle.strategy().scaled(factor))?;
        rows.push(json!({"scale": factor, "estimate": e}));
        out.push(Check::new(
            format!("perturbed-policy[x{factor}]"),
            e.mean - optimal.mean,
            2.0 * e.stderr.max(optimal.stderr),
            "excess over optimal vs 2 stderr (common random numbers)",
        ));
    }
    report.result("value_prediction", v);
    report.result("policy_scores", rows);
    Ok(out)
}

fn check_hjb(cfg: &ModelConfig, ode: &SolutionBundle, grid: &Grid) -> Result<Check> {
    let model = &cfg.model;
    let mut worst: f64 = 0.0;
    let mut count = 0usize;
    for t in grid.t.points() {
        for x in grid.x.points() {
            for y in grid.y.points() {
                for i in 0..model.n_regimes() {
                    let v = ode.value(t, x, y, i)?.value;
                    let r = ode.hjb_residual((t, x, y), i)?;
                    worst = worst.max(r.abs() / (1.0 + v.abs()));
                    count += 1;
                }
            }
        }
    }
    Ok(Check::new(
        "hjb-residual",
        worst,
        1e-4,
        format!("max |residual|/(1+|V|) over {count} points"),
    ))
}

fn check_rho0_collapse(cfg: &ModelConfig) -> Result<Check> {
    let m0 = cfg.model.with_rho(0.0)?;
    let normal = optimal_strategy(&m0, Case::NormalIncome)?;
    let rho0 = optimal_strategy(&m0, Case::Rho0)?;
    let mut worst: f64 = 0.0;
    for k in 0..CURVE_POINTS {
        let t = m0.horizon() * k as f64 / (CURVE_POINTS - 1) as f64;
        for i in 0..m0.n_regimes() {
            worst = worst
                .max(hedge_weight(&m0, i, t).abs())
                .max((normal.weight(t, 0.0, i) - rho0.weight(t, 0.0, i)).abs());
        }
    }
    Ok(Check::new("rho0-collapse", worst, 0.0, "hedge term and strategy difference at rho = 0"))
}

fn check_rho0_cross(cfg: &ModelConfig, ode: &SolutionBundle) -> Result<Option<Check>> {
    let model = &cfg.model;
    if model.rho() != 0.0 {
        return Ok(None);
    }
    let init = cfg.initial();
    let mc = value_function(model, Case::Rho0, cfg.value_options())?.value(0.0, init.x0, init.y0, init.i0)?;
    let det = ode.value(0.0, init.x0, init.y0, init.i0)?;
    Ok(Some(Check::new(
        "rho0-mc-vs-ode-value",
        (mc.value - det.value).abs(),
        3.0 * mc.stderr + 1e-12 * det.value.abs(),
        "MC value (rho = 0 route) vs ODE value",
    )))
}

/// Full cross-check battery. The report passes when every check does.
pub fn cmd_validate(cfg: &ModelConfig, grid: &Grid) -> Result<RunReport> {
    let mut report = new_report("validate", cfg);
    report.phase("kronecker");
    report.check(check_kronecker(cfg));
    report.phase("h_ode");
    let ode = value_function(&cfg.model, Case::NormalIncome, cfg.value_options())?;
    report.phase("h_mc");
    for c in check_h(cfg, &ode, &mut report)? {
        report.check(c);
    }
    report.phase("policy");
    for c in check_policy(cfg, &mut report)? {
        report.check(c);
    }
    report.phase("hjb");
    report.check(check_hjb(cfg, &ode, grid)?);
    report.phase("rho0");
    report.check(check_rho0_collapse(cfg)?);
    if let Some(c) = check_rho0_cross(cfg, &ode)? {
        report.check(c);
    }
    report.end_phase();
    let passed = report.passed();
    report.result("passed", passed);
    Ok(report)
}

/// Maps a command failure onto the CLI exit-code contract.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidModel(_) | Error::CaseMismatch(_) | Error::StepTooCoarse { .. } | Error::InvalidArgument(_) => {
            super::EXIT_CONFIG
        }
        _ => super::EXIT_VALIDATION,
    }
}
