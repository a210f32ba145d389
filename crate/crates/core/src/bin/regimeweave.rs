use clap::Parser;
use regimeweave::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
