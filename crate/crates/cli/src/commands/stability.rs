use serde::Serialize;

use mfoc::csv::fmt_f64;
use mfoc::linearization::{random_direction, second_derivative_check, stability_probe, LinearizedSystem};
use mfoc::rng::{purpose, stream};
use mfoc::Config;

use super::{not_converged, solve_and_record};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{fmt_opt, RunOutput};

/// Ladder for the second-difference comparison on the sampled direction.
const LADDER: [f64; 2] = [1e-2, 1e-3];

#[derive(Serialize)]
struct StabilitySummary {
    j_star: f64,
    j_form: Option<f64>,
    fd2_discrepancy: Option<f64>,
    dominant_eig: Option<f64>,
    eta_residual: Option<f64>,
    ritz_max: Option<f64>,
    margin: f64,
    converged: bool,
    stable_evidence: bool,
    notes: Vec<String>,
}

pub fn cmd_stability(run: &RunConfig, config: &Config, out: &mut RunOutput) -> Result<(), CliError> {
    let outcome = solve_and_record(config, &run.solve, out)?;
    if !outcome.converged {
        return Err(not_converged(&outcome));
    }
    let sys = LinearizedSystem::new(config, &outcome.path)?;
    let probe = stability_probe(&sys, &run.stability)?;
    let mut rng = stream(config.seed, purpose::PERTURBATION, 0);
    let eta = random_direction(&outcome.path, &mut rng)?;
    let second = second_derivative_check(&sys, &eta, &LADDER)?;

    let mut report = probe.report.clone();
    report.j_form = second.j_form;
    report.fd2 = second.fd2.clone();
    report.notes.extend(second.notes.iter().cloned());

    out.csv("report.csv", &["quantity", "value"], |w| {
        let rows = [
            ("j_form", fmt_opt(report.j_form)),
            ("fd2_discrepancy", fmt_opt(report.fd2_discrepancy(1e-8))),
            ("dominant_eig", fmt_opt(report.dominant_eig)),
            ("eta_residual", fmt_opt(report.eta_residual)),
            ("margin", fmt_f64(probe.margin)),
            ("converged", u8::from(probe.converged).to_string()),
            ("stable_evidence", u8::from(probe.stable_evidence).to_string()),
        ];
        for (k, v) in rows {
            w.row(&[k.to_string(), v])?;
        }
        Ok(())
    })?;
    out.csv("fd2.csv", &["lambda", "fd2"], |w| {
        for &(l, d) in &report.fd2 {
            w.row_f64(&[l, d])?;
        }
        Ok(())
    })?;
    out.csv("power.csv", &["iteration", "rayleigh"], |w| {
        for (i, &q) in probe.history.iter().enumerate() {
            w.row(&[i.to_string(), fmt_f64(q)])?;
        }
        Ok(())
    })?;
    out.csv("ritz.csv", &["index", "value"], |w| {
        for (i, &q) in probe.ritz.iter().enumerate() {
            w.row(&[i.to_string(), fmt_f64(q)])?;
        }
        Ok(())
    })?;
    out.json(
        "summary.json",
        &StabilitySummary {
            j_star: outcome.report.j,
            j_form: report.j_form,
            fd2_discrepancy: report.fd2_discrepancy(1e-8),
            dominant_eig: report.dominant_eig,
            eta_residual: report.eta_residual,
            ritz_max: probe.ritz.iter().cloned().reduce(f64::max),
            margin: probe.margin,
            converged: probe.converged,
            stable_evidence: probe.stable_evidence,
            notes: report.notes.clone(),
        },
    )
}
