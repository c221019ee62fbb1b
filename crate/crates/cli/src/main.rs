//! `mfoc`: command-line runs of the mean-field control solver.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{Backend, RunConfig};
use error::CliError;
use output::RunOutput;

#[derive(Parser, Debug)]
#[command(name = "mfoc", version, about = "Entropy-regularized mean-field control of continuous-depth ResNets")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration document; defaults apply to absent keys.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory; falls back to $OUTPUT_DIR, then `mfoc-out`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Overrides `problem.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for the numerical kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Dotted-path override, e.g. `--set problem.epsilon=0.25` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    #[arg(long, global = true, hide = true)]
    inject_fault: Option<Fault>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Fault {
    /// Reverse the sign of the adjoint transport.
    AdjointSign,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the first-order system by damped Picard iteration.
    Solve,
    /// Run the measure-space gradient descent from the prior.
    Descent {
        #[arg(long)]
        backend: Option<Backend>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        h: Option<f64>,
    },
    /// Solve, then probe the spectrum of the linearized map.
    Stability,
    /// Solve, then sample the Polyak–Łojasiewicz ratio near the minimizer.
    PlScan,
    /// Run the property battery and print a pass/fail table.
    Check,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Descent { .. } => "descent",
            Command::Stability => "stability",
            Command::PlScan => "pl-scan",
            Command::Check => "check",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut run = RunConfig::load(cli.config.as_deref(), &cli.sets, cli.seed)?;
    if let Command::Descent { backend, steps, h } = &cli.command {
        if let Some(b) = backend {
            run.descent.backend = *b;
        }
        if let Some(s) = steps {
            run.descent.steps = *s;
        }
        if let Some(h) = h {
            run.descent.h = *h;
        }
        run.validate()?;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config("--threads", e.to_string()))?;
    }
    let mut config: mfoc::Config = run.problem.build()?;
    if let Some(Fault::AdjointSign) = cli.inject_fault {
        config.adjoint_sign_flip = true;
    }
    let dir = cli
        .out
        .or_else(|| std::env::var_os("OUTPUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("mfoc-out"));
    let mut out = RunOutput::create(&dir)?;
    let result = match cli.command {
        Command::Solve => commands::cmd_solve(&run, &config, &mut out),
        Command::Descent { .. } => commands::cmd_descent(&run, &config, &mut out),
        Command::Stability => commands::cmd_stability(&run, &config, &mut out),
        Command::PlScan => commands::cmd_pl_scan(&run, &config, &mut out),
        Command::Check => commands::cmd_check(&run, &config, &mut out),
    };
    let resolved = serde_json::to_value(&run).map_err(|e| CliError::Invariant(e.to_string()))?;
    out.finish(cli.command.name(), run.problem.seed, &resolved)?;
    result
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mfoc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
