use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use obstacle_well::{run, Command, Options};

#[derive(Parser)]
#[command(name = "obstacle-well", version, about = "Penalized obstacle problems in a steep potential well")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the solver and the randomized checks; overrides `[solver] rng_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Mountain-pass critical point of the penalized functional.
    Solve,
    /// Continuation in ε at fixed λ.
    SweepEps,
    /// Continuation in λ, each step an ε-sweep.
    SweepLambda,
    /// Geometry, penalty axioms and the inequality checks on an ε-sweep.
    Verify,
    /// Mountain-pass geometry around the obstacle.
    Geometry,
    /// Discrete Sobolev constant and the μ-threshold scan (N = 3).
    EstimateSobolev,
    /// Randomized check of the penalty-operator axioms.
    Axioms,
    /// Grayscale PGM of a field dump with the well rings overlaid.
    Heatmap {
        /// Field dump (`.csv` or raw with its `.json` sidecar).
        #[arg(long)]
        input: PathBuf,
        /// Plane `x3 = const` (node index) for 3-dimensional fields.
        #[arg(long)]
        slice: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let Some(config) = cli.config else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(1);
    };
    let mut opts = Options { config, out: cli.out, seed: cli.seed, ..Options::default() };
    let cmd = match cli.command {
        Cmd::Solve => Command::Solve,
        Cmd::SweepEps => Command::SweepEps,
        Cmd::SweepLambda => Command::SweepLambda,
        Cmd::Verify => Command::Verify,
        Cmd::Geometry => Command::Geometry,
        Cmd::EstimateSobolev => Command::EstimateSobolev,
        Cmd::Axioms => Command::Axioms,
        Cmd::Heatmap { input, slice } => {
            opts.input = Some(input);
            opts.slice = slice;
            Command::Heatmap
        }
    };
    match run(cmd, &opts) {
        Ok(outcome) => {
            eprintln!("{}", outcome.summary);
            eprintln!("report: {}", outcome.report_path.display());
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
