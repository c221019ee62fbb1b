use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{ControlPath, GridMeasure};
use crate::model::ProblemConfig;
use crate::scalar::Real;

use super::cost::{evaluate, CostReport, Evaluation};
use super::gibbs::GibbsSnapshot;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardOptions {
    /// Geometric damping `τ ∈ (0, 1]`.
    pub damping: f64,
    pub tol: f64,
    /// Maximum number of damped updates.
    pub max_iters: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-8,
            max_iters: 500,
        }
    }
}

impl PicardOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::config("solve.damping", "must lie in (0, 1]"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("solve.tol", "must be > 0"));
        }
        Ok(())
    }
}

/// One line of the residual history.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicardRecord<R> {
    pub iteration: usize,
    pub report: CostReport<R>,
}

#[derive(Clone, Debug)]
pub struct PicardOutcome<R> {
    pub path: ControlPath<R>,
    /// Report at the returned path, with `I` and the residual filled in.
    pub report: CostReport<R>,
    /// Number of damped updates performed.
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<PicardRecord<R>>,
    /// Evaluation at the returned path.
    pub evaluation: Evaluation<R>,
}

/// `log ν ← (1−τ) log ν + τ log Γ[ν]`, normalized per node.
pub fn damped_update<R: Real>(
    config: &ProblemConfig<R>,
    path: &ControlPath<R>,
    snap: &GibbsSnapshot<R>,
    damping: R,
) -> Result<ControlPath<R>> {
    let spec = &config.param_grid;
    let ell = spec.tabulate(|a| config.potential.value(a));
    let inv_eps = R::one() / config.epsilon;
    let keep = R::one() - damping;
    let measures = path
        .grid_measures()?
        .iter()
        .zip(&snap.phi)
        .map(|(m, phi)| {
            let logd: Vec<R> = m
                .log_values()
                .iter()
                .zip(ell.iter().zip(phi))
                .map(|(&lv, (&l, &p))| keep * lv + damping * (-l - p * inv_eps))
                .collect();
            GridMeasure::from_log_density(spec.clone(), &logd).map(|(g, _)| g)
        })
        .collect::<Result<Vec<_>>>()?;
    ControlPath::from_grid(path.grid, measures)
}

/// Damped fixed-point iteration for `ν = Γ[ν]`.
///
/// Stops when the residual `max_k E(ν_k ‖ Γ_k[ν])` drops below `tol`; when
/// `max_iters` updates do not suffice the last state is returned with
/// `converged = false`.
pub fn picard_solve<R: Real>(
    config: &ProblemConfig<R>,
    init: &ControlPath<R>,
    options: &PicardOptions,
) -> Result<PicardOutcome<R>> {
    options.validate()?;
    let tol = R::lit(options.tol);
    let tau = R::lit(options.damping);
    let mut path = init.clone();
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let eval = evaluate(config, &path)?;
        let residual = eval.report.picard_residual.expect("evaluate fills the residual");
        history.push(PicardRecord {
            iteration: iterations,
            report: eval.report,
        });
        let converged = residual <= tol;
        if converged || iterations >= options.max_iters {
            return Ok(PicardOutcome {
                path,
                report: eval.report,
                iterations,
                converged,
                history,
                evaluation: eval,
            });
        }
        path = damped_update(config, &path, &eval.snapshot, tau)?;
        iterations += 1;
    }
}
