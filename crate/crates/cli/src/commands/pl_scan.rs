use serde::Serialize;

use mfoc::csv::fmt_f64;
use mfoc::linearization::{pl_scan, TimeProfile};
use mfoc::Config;

use super::{not_converged, solve_and_record};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{fmt_opt, RunOutput};

#[derive(Serialize)]
struct PlSummary {
    j_star: f64,
    radius: f64,
    samples: usize,
    informative: usize,
    c_emp: Option<f64>,
    /// `c_emp` over the first half of the samples, for a stability read.
    c_emp_half: Option<f64>,
    notes: Vec<String>,
}

fn profile_name(p: &TimeProfile) -> String {
    match *p {
        TimeProfile::Constant => "constant".into(),
        TimeProfile::Bump { centre, width } => format!("bump({}|{})", fmt_f64(centre), fmt_f64(width)),
        TimeProfile::Wave { omega, phase } => format!("wave({}|{})", fmt_f64(omega), fmt_f64(phase)),
    }
}

pub fn cmd_pl_scan(run: &RunConfig, config: &Config, out: &mut RunOutput) -> Result<(), CliError> {
    let outcome = solve_and_record(config, &run.solve, out)?;
    if !outcome.converged {
        return Err(not_converged(&outcome));
    }
    let scan = pl_scan(config, &outcome.path, &run.pl)?;
    out.csv(
        "samples.csv",
        &["index", "profile", "theta", "entropy", "j", "fisher", "ratio"],
        |w| {
            for s in &scan.samples {
                w.row(&[
                    s.index.to_string(),
                    profile_name(&s.profile),
                    fmt_f64(s.theta),
                    fmt_f64(s.entropy),
                    fmt_f64(s.j),
                    fmt_f64(s.fisher),
                    fmt_opt(s.ratio),
                ])?;
            }
            Ok(())
        },
    )?;
    out.json(
        "summary.json",
        &PlSummary {
            j_star: scan.j_star,
            radius: run.pl.radius,
            samples: scan.samples.len(),
            informative: scan.samples.iter().filter(|s| s.ratio.is_some()).count(),
            c_emp: scan.c_emp(usize::MAX),
            c_emp_half: scan.c_emp(scan.samples.len() / 2),
            notes: scan.report.notes.clone(),
        },
    )
}
