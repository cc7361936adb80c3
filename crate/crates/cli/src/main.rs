mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ticlab::Arithmetic;

/// Environment variable naming the directory reports go to when `--output`
/// is not given. Without either, reports go to stdout.
pub const OUTPUT_DIR_ENV: &str = "TICLAB_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "ticlab", version, about = "Exact reports for a time-inconsistent control problem")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArithmeticArg {
    Exact,
    Float,
}

impl From<ArithmeticArg> for Arithmetic {
    fn from(a: ArithmeticArg) -> Self {
        match a {
            ArithmeticArg::Exact => Arithmetic::Exact,
            ArithmeticArg::Float => Arithmetic::Float,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Materialized schedule generations (optimizer truncation N, Pareto generations).
    #[arg(long, global = true, default_value_t = 12)]
    pub depth: u32,
    /// Equilibrium and table grids use spacing 2^-grid_depth.
    #[arg(long, global = true, default_value_t = 8)]
    pub grid_depth: u32,
    #[arg(long, global = true, value_enum, default_value_t = ArithmeticArg::Exact)]
    pub arithmetic: ArithmeticArg,
    /// Non-negative tolerance: p/q, integer or decimal.
    #[arg(long, global = true, default_value = "0")]
    pub tol: String,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Report file; defaults to $TICLAB_OUTPUT_DIR/<command>.<format>, else stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Digits after the point in decimal renderings (round half to even).
    #[arg(long, global = true, default_value_t = 12)]
    pub precision: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dominance of the alternating control over the zero equilibrium.
    ReproduceExample1 {
        /// Flip the alternating control on its B-intervals before checking.
        #[arg(long, hide = true)]
        tamper: bool,
    },
    /// The naive strategy against T - t under absolute-deviation cost.
    ReproduceExample2 {
        #[arg(long, default_value = "1")]
        horizon: String,
    },
    /// Maximize the truncated path objective and assemble the inconsistency witness.
    Optimize {
        #[arg(long, default_value_t = 8)]
        restarts: u32,
        #[arg(long, default_value_t = 200)]
        iterations: u32,
        /// Start only from the zero path.
        #[arg(long)]
        zero_start_only: bool,
    },
    /// Spike-variation test of one control on the dyadic grid.
    VerifyEquilibrium {
        /// `zero`, `alpha-hat`, or a path to a control JSON file.
        #[arg(long, default_value = "zero")]
        control: String,
        /// Finest spike width is 2^-k_max.
        #[arg(long, default_value_t = 20)]
        k_max: u32,
    },
    /// Run every property suite.
    Verify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ReproduceExample1 { .. } => "reproduce-example1",
            Command::ReproduceExample2 { .. } => "reproduce-example2",
            Command::Optimize { .. } => "optimize",
            Command::VerifyEquilibrium { .. } => "verify-equilibrium",
            Command::Verify => "verify",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(&cli.common, &cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
