use crate::error::Result;
use crate::measure::{fisher_divergence, path_entropy, relative_entropy, ControlPath};
use crate::model::ProblemConfig;
use crate::scalar::{pairwise_sum, Real};
use crate::trajectory::{forward_solve, EnsembleFlow};

use super::gibbs::{gibbs_map, GibbsSnapshot};

/// Cost decomposition at one control path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostReport<R> {
    pub terminal: R,
    pub entropy: R,
    /// `terminal + ε · entropy`.
    pub j: R,
    /// Fisher functional `I`, when evaluated.
    pub fisher: Option<R>,
    /// `max_k E(ν_k ‖ Γ_k[ν])`, when evaluated.
    pub picard_residual: Option<R>,
}

/// `(1/N) Σ_i L(X_i(T), Y_i)`.
pub fn terminal_cost<R: Real>(config: &ProblemConfig<R>, flow: &EnsembleFlow<R>) -> R {
    let last = flow.nodes() - 1;
    let terms: Vec<R> = (0..flow.n)
        .map(|i| config.loss.value(flow.position(last, i), flow.label(i)))
        .collect();
    pairwise_sum(&terms) / R::from_usize_lossy(flow.n)
}

fn assemble<R: Real>(config: &ProblemConfig<R>, path: &ControlPath<R>, flow: &EnsembleFlow<R>) -> Result<CostReport<R>> {
    let terminal = terminal_cost(config, flow);
    let entropy = path_entropy(path, &config.prior)?;
    Ok(CostReport {
        terminal,
        entropy,
        j: terminal + config.epsilon * entropy,
        fisher: None,
        picard_residual: None,
    })
}

/// `J(ν) = (1/N) Σ L(X_T, Y) + ε Σ_k E(ν_k ‖ ν∞) Δt`.
pub fn total_cost<R: Real>(config: &ProblemConfig<R>, path: &ControlPath<R>) -> Result<CostReport<R>> {
    let flow = forward_solve(config, path)?;
    assemble(config, path, &flow)
}

/// `Σ_k ε² ∫ |∇ log(ν_k/Γ_k)|² dν_k Δt` over the control intervals.
pub fn fisher_from_gibbs<R: Real>(config: &ProblemConfig<R>, path: &ControlPath<R>, snap: &GibbsSnapshot<R>) -> Result<R> {
    let dt = path.grid.dt();
    let eps2 = config.epsilon * config.epsilon;
    let mut total = R::zero();
    for (m, g) in path.grid_measures()?[..path.grid.intervals()].iter().zip(&snap.gibbs) {
        let d = fisher_divergence(m, g)?;
        if d.support_violation {
            return Ok(R::infinity());
        }
        total += eps2 * d.value * dt;
    }
    Ok(total)
}

pub fn fisher_functional<R: Real>(config: &ProblemConfig<R>, path: &ControlPath<R>) -> Result<R> {
    let (snap, _) = gibbs_map(config, path)?;
    fisher_from_gibbs(config, path, &snap)
}

/// `max_k E(ν_k ‖ Γ_k)` over every node.
pub fn picard_residual<R: Real>(path: &ControlPath<R>, snap: &GibbsSnapshot<R>) -> Result<R> {
    let mut worst = R::zero();
    for (m, g) in path.grid_measures()?.iter().zip(&snap.gibbs) {
        let e = relative_entropy(m, g)?.value;
        if !(e <= worst) {
            worst = e;
        }
    }
    Ok(worst)
}

/// Everything at one path: cost, Fisher functional, residual, and the
/// Gibbs snapshot and flow they came from.
#[derive(Clone, Debug)]
pub struct Evaluation<R> {
    pub report: CostReport<R>,
    pub snapshot: GibbsSnapshot<R>,
    pub flow: EnsembleFlow<R>,
}

pub fn evaluate<R: Real>(config: &ProblemConfig<R>, path: &ControlPath<R>) -> Result<Evaluation<R>> {
    let (snapshot, flow) = gibbs_map(config, path)?;
    let mut report = assemble(config, path, &flow)?;
    report.fisher = Some(fisher_from_gibbs(config, path, &snapshot)?);
    report.picard_residual = Some(picard_residual(path, &snapshot)?);
    Ok(Evaluation { report, snapshot, flow })
}
