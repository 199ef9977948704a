//! Command-line front end: dataset generation, guiding, baselines,
//! evaluation and gradient checks.

pub mod commands;
pub mod error;
pub mod manifest;
pub mod settings;

use clap::{Parser, Subcommand};

pub use commands::{cmd_baseline, cmd_evaluate, cmd_generate, cmd_gradcheck, cmd_guide};
pub use error::{CliError, CliResult};

/// Environment variable holding the log filter, e.g. `FAIRLINK_LOG=info`.
pub const LOG_ENV: &str = "FAIRLINK_LOG";

#[derive(Debug, Parser)]
#[command(name = "fairlink", version, about = "Fairness-guided link addition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic block-model dataset.
    Generate(commands::GenerateArgs),
    /// Add fairness-guided links to a dataset.
    Guide(commands::GuideArgs),
    /// Add links with a naive baseline.
    Baseline(commands::BaselineArgs),
    /// Compare downstream fairness and utility across graphs.
    Evaluate(commands::EvaluateArgs),
    /// Compare the analytic structure gradient with finite differences.
    Gradcheck(commands::GradCheckArgs),
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Guide(a) => cmd_guide(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    }
}

/// Parses `args` and runs the command, returning the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
