//! Batch front end: JSON config in, `report.json` plus CSV tables out.
//!
//! Exit codes: 0 success, 1 validation failure, 2 configuration error.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_compose, cmd_evaluate, cmd_simulate, cmd_solve, cmd_validate, Axis, Grid};
pub use config::{load_config, parse_config, ConfigError, ModelConfig};
pub use report::{Check, RunReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "regimeweave", version, about = "Regime-switching portfolio control with labour income")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `numerics.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides `numerics.n_paths`.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Evaluation grid `t0:t1:n[,x0:x1:n[,y0:y1:n]]`.
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct Start {
    /// Initial wealth; defaults to `initial.x0`.
    #[arg(long, allow_negative_numbers = true)]
    pub x0: Option<f64>,
    /// Initial income rate; defaults to `initial.y0`.
    #[arg(long, allow_negative_numbers = true)]
    pub y0: Option<f64>,
    /// Initial compound regime; defaults to `initial.i0`.
    #[arg(long)]
    pub i0: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compound generator, embedded chain and stationary distribution.
    Compose(Common),
    /// M curve, h table or g estimates, strategy and value grid.
    Solve(Common),
    /// Sample wealth/income/regime paths under the optimal strategy.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        start: Start,
        /// Number of sample paths.
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Expected utility of the optimal and constant strategies.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        start: Start,
        /// Constant stock positions to compare, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        compare: Vec<f64>,
    },
    /// Cross-check battery; exits 1 if any check fails.
    Validate(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Compose(c) | Command::Solve(c) | Command::Validate(c) => c,
            Command::Simulate { common, .. } | Command::Evaluate { common, .. } => common,
        }
    }
}

fn load(common: &Common) -> Result<ModelConfig, ConfigError> {
    let mut cfg = load_config(&common.config)?;
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(paths) = common.paths {
        if paths < 2 {
            return Err(ConfigError::Validation(vec![format!("--paths: must be >= 2, got {paths}")]));
        }
        cfg = cfg.with_paths(paths);
    }
    Ok(cfg)
}

/// Runs one parsed invocation and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let common = cli.command.common();
    let cfg = match load(common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    let grid = match &common.grid {
        Some(spec) => match Grid::parse(spec, &cfg.model) {
            Ok(g) => g,
            Err(e) => {
                eprintln!("--grid: {e}");
                return EXIT_CONFIG;
            }
        },
        None => Grid::default_for(&cfg.model),
    };
    let start = |s: &Start| {
        let init = cfg.initial();
        (s.x0.unwrap_or(init.x0), s.y0.unwrap_or(init.y0), s.i0.unwrap_or(init.i0))
    };
    let result = match &cli.command {
        Command::Compose(_) => cmd_compose(&cfg),
        Command::Solve(_) => cmd_solve(&cfg, &grid),
        Command::Simulate { start: s, n, .. } => {
            let (x0, y0, i0) = start(s);
            cmd_simulate(&cfg, x0, y0, i0, *n)
        }
        Command::Evaluate { start: s, compare, .. } => {
            let (x0, y0, i0) = start(s);
            cmd_evaluate(&cfg, x0, y0, i0, compare)
        }
        Command::Validate(_) => cmd_validate(&cfg, &grid),
    };
    let mut report = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return commands::exit_code(&e);
        }
    };
    if let Err(e) = report.write(&common.out) {
        eprintln!("cannot write {}: {e}", common.out.display());
        return EXIT_CONFIG;
    }
    print!("{}", report.summary());
    println!("wrote {} files to {}", report.files().len() + 2, common.out.display());
    if report.passed() {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    }
}
