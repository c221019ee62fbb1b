//! One module per subcommand; each writes its files through [`RunOutput`]
//! and returns the exit status it wants.

mod check;
mod descent;
mod pl_scan;
mod solve;
mod stability;

pub use check::cmd_check;
pub use descent::cmd_descent;
pub use pl_scan::cmd_pl_scan;
pub use solve::cmd_solve;
pub use stability::cmd_stability;

use mfoc::csv::fmt_f64;
use mfoc::optimizer::{picard_solve, PicardOptions, PicardOutcome};
use mfoc::{Config, Path};

use crate::error::CliError;
use crate::output::RunOutput;

pub fn prior_path(config: &Config) -> Path {
    Path::constant_grid(config.grid, &config.prior.measure)
}

/// Picard from the prior; writes the residual history.
pub(crate) fn solve_and_record(config: &Config, options: &PicardOptions, out: &mut RunOutput) -> Result<PicardOutcome<f64>, CliError> {
    let outcome = picard_solve(config, &prior_path(config), options)?;
    out.csv(
        "history.csv",
        &["iteration", "j", "terminal", "entropy", "fisher", "residual"],
        |w| {
            for r in &outcome.history {
                let rep = r.report;
                w.row(&[
                    r.iteration.to_string(),
                    fmt_f64(rep.j),
                    fmt_f64(rep.terminal),
                    fmt_f64(rep.entropy),
                    fmt_f64(rep.fisher.unwrap_or(f64::NAN)),
                    fmt_f64(rep.picard_residual.unwrap_or(f64::NAN)),
                ])?;
            }
            Ok(())
        },
    )?;
    Ok(outcome)
}

/// Every node of a grid path in long format.
pub(crate) fn write_path(out: &mut RunOutput, name: &str, path: &Path) -> Result<(), CliError> {
    let ms = path.grid_measures()?;
    let dim = path.param_dim();
    let mut header = vec!["node".to_string(), "t".to_string()];
    header.extend((0..dim).map(|i| format!("a{i}")));
    header.push("density".into());
    out.csv(name, &header, |w| {
        let mut a = vec![0.0; dim];
        for (k, m) in ms.iter().enumerate() {
            let t = fmt_f64(path.grid.time(k));
            for (c, &v) in m.values.iter().enumerate() {
                m.spec.point_into(c, &mut a);
                let mut row = vec![k.to_string(), t.clone()];
                row.extend(a.iter().map(|&x| fmt_f64(x)));
                row.push(fmt_f64(v));
                w.row(&row)?;
            }
        }
        Ok(())
    })
}

pub(crate) fn not_converged(outcome: &PicardOutcome<f64>) -> CliError {
    CliError::NonConvergence(format!(
        "Picard residual {:e} after {} updates",
        outcome.report.picard_residual.unwrap_or(f64::NAN),
        outcome.iterations
    ))
}
