use serde::Serialize;

use mfoc::Config;

use super::{not_converged, solve_and_record, write_path};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::RunOutput;

#[derive(Serialize)]
struct SolveSummary {
    converged: bool,
    iterations: usize,
    j: f64,
    terminal: f64,
    entropy: f64,
    fisher: Option<f64>,
    residual: Option<f64>,
    /// `U(t0, γ0)`, the converged cost.
    value_function: f64,
}

pub fn cmd_solve(run: &RunConfig, config: &Config, out: &mut RunOutput) -> Result<(), CliError> {
    let outcome = solve_and_record(config, &run.solve, out)?;
    let r = outcome.report;
    out.json(
        "summary.json",
        &SolveSummary {
            converged: outcome.converged,
            iterations: outcome.iterations,
            j: r.j,
            terminal: r.terminal,
            entropy: r.entropy,
            fisher: r.fisher,
            residual: r.picard_residual,
            value_function: r.j,
        },
    )?;
    write_path(out, "nu_star.csv", &outcome.path)?;
    if outcome.converged {
        Ok(())
    } else {
        Err(not_converged(&outcome))
    }
}
