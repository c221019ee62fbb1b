use serde::Serialize;

use mfoc::csv::fmt_f64;
use mfoc::optimizer::{fp_descent, langevin_descent_step, particle_path_from_grid, terminal_cost, DescentRecord};
use mfoc::trajectory::forward_solve;
use mfoc::{Config, Path};

use super::{prior_path, write_path};
use crate::config::{Backend, RunConfig};
use crate::error::CliError;
use crate::output::{fmt_opt, RunOutput};

/// Steps before this index are excluded from the identity fraction; the
/// first steps from the prior carry the largest O(h) curvature error.
const IDENTITY_BURN_IN: usize = 10;

#[derive(Serialize)]
struct GridSummary {
    backend: Backend,
    steps: usize,
    h: f64,
    j_initial: f64,
    j_final: f64,
    /// `J` never increased by more than 1e-12 between steps.
    monotone: bool,
    /// Share of steps after the burn-in with `|ΔJ/h + I| ≤ 0.05 I`.
    identity_fraction: Option<f64>,
}

#[derive(Serialize)]
struct ParticleSummary {
    backend: Backend,
    steps: usize,
    h: f64,
    particles: usize,
    terminal_initial: f64,
    terminal_final: f64,
    resampled: usize,
}

pub fn identity_fraction(records: &[DescentRecord<f64>], burn_in: usize) -> Option<f64> {
    let checked: Vec<bool> = records
        .iter()
        .filter(|r| r.step >= burn_in)
        .filter_map(|r| {
            let i = r.report.fisher?;
            r.dj_over_h.map(|d| (d + i).abs() <= 0.05 * i)
        })
        .collect();
    (!checked.is_empty()).then(|| checked.iter().filter(|&&ok| ok).count() as f64 / checked.len() as f64)
}

pub fn cmd_descent(run: &RunConfig, config: &Config, out: &mut RunOutput) -> Result<(), CliError> {
    match run.descent.backend {
        Backend::Grid => grid(run, config, out),
        Backend::Particle => particle(run, config, out),
    }
}

fn grid(run: &RunConfig, config: &Config, out: &mut RunOutput) -> Result<(), CliError> {
    let s = run.descent;
    let (end, records) = fp_descent(config, &prior_path(config), s.steps, s.h)?;
    out.csv(
        "descent.csv",
        &["step", "j", "terminal", "entropy", "fisher", "residual", "dj_over_h", "h"],
        |w| {
            for r in &records {
                w.row(&[
                    r.step.to_string(),
                    fmt_f64(r.report.j),
                    fmt_f64(r.report.terminal),
                    fmt_f64(r.report.entropy),
                    fmt_opt(r.report.fisher),
                    fmt_opt(r.report.picard_residual),
                    fmt_opt(r.dj_over_h),
                    fmt_f64(r.h),
                ])?;
            }
            Ok(())
        },
    )?;
    write_path(out, "nu_final.csv", &end)?;
    let monotone = records.windows(2).all(|w| w[1].report.j <= w[0].report.j + 1e-12);
    out.json(
        "summary.json",
        &GridSummary {
            backend: Backend::Grid,
            steps: s.steps,
            h: s.h,
            j_initial: records[0].report.j,
            j_final: records[records.len() - 1].report.j,
            monotone,
            identity_fraction: identity_fraction(&records, IDENTITY_BURN_IN),
        },
    )
}

fn particle(run: &RunConfig, config: &Config, out: &mut RunOutput) -> Result<(), CliError> {
    let s = run.descent;
    let mut path: Path = particle_path_from_grid(config, &config.prior.measure, s.particles)?;
    let mut series = Vec::with_capacity(s.steps + 1);
    let mut moments = Vec::new();
    let mut resampled_total = 0;
    for step in 0..=s.steps {
        let flow = forward_solve(config, &path)?;
        for (k, cloud) in path.particle_measures()?.iter().enumerate() {
            let (m, v) = (cloud.mean(), cloud.variance());
            moments.push((step, k, m, v));
        }
        let mut resampled = 0;
        if step < s.steps {
            let next = langevin_descent_step(config, &path, s.h, step as u32)?;
            resampled = next.resampled;
            path = next.path;
        }
        resampled_total += resampled;
        series.push((step, terminal_cost(config, &flow), resampled));
    }
    out.csv("descent.csv", &["step", "terminal", "resampled"], |w| {
        for &(step, t, r) in &series {
            w.row(&[step.to_string(), fmt_f64(t), r.to_string()])?;
        }
        Ok(())
    })?;
    let dim = path.param_dim();
    let mut header = vec!["step".to_string(), "node".to_string()];
    header.extend((0..dim).map(|i| format!("mean{i}")));
    header.extend((0..dim).map(|i| format!("var{i}")));
    out.csv("moments.csv", &header, |w| {
        for (step, k, m, v) in &moments {
            let mut row = vec![step.to_string(), k.to_string()];
            row.extend(m.iter().chain(v).map(|&x| fmt_f64(x)));
            w.row(&row)?;
        }
        Ok(())
    })?;
    let mut header = vec!["node".to_string(), "particle".to_string()];
    header.extend((0..dim).map(|i| format!("a{i}")));
    let clouds = path.particle_measures()?;
    out.csv("particles.csv", &header, |w| {
        for (k, cloud) in clouds.iter().enumerate() {
            for p in 0..cloud.len() {
                let mut row = vec![k.to_string(), p.to_string()];
                row.extend(cloud.particle(p).iter().map(|&x| fmt_f64(x)));
                w.row(&row)?;
            }
        }
        Ok(())
    })?;
    out.json(
        "summary.json",
        &ParticleSummary {
            backend: Backend::Particle,
            steps: s.steps,
            h: s.h,
            particles: s.particles,
            terminal_initial: series[0].1,
            terminal_final: series[series.len() - 1].1,
            resampled: resampled_total,
        },
    )
}
