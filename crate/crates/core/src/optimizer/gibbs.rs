use rayon::prelude::*;

use crate::error::Result;
use crate::measure::{ControlPath, GridMeasure};
use crate::model::ProblemConfig;
use crate::scalar::Real;
use crate::trajectory::{cell_sums, solve_flow, CellSumInput, EnsembleFlow};

/// Gibbs data at every node: the adjoint potential `Φ`, `log z` and `Γ`.
#[derive(Clone, Debug)]
pub struct GibbsSnapshot<R> {
    /// `Φ_k` tabulated on the parameter grid, one vector per node.
    pub phi: Vec<Vec<R>>,
    pub log_z: Vec<R>,
    pub gibbs: Vec<GridMeasure<R>>,
}

/// `Φ_k(a) = (1/N) Σ_i ∫ b(X_i, a)·Z_i dt / Δt` over interval `k`, evaluated
/// with the RK4 stage weights of the adjoint pass; at the final node the
/// pointwise value `(1/N) Σ_i b(X_i(T), a)·Z_i(T)`.
pub fn adjoint_potential<R: Real>(config: &ProblemConfig<R>, flow: &EnsembleFlow<R>) -> Vec<Vec<R>> {
    let spec = &config.param_grid;
    let inv_n = R::one() / R::from_usize_lossy(flow.n);
    let nodes = flow.nodes();
    (0..nodes)
        .into_par_iter()
        .map(|k| {
            let (xs, u): (&[R], Vec<R>) = if k + 1 < nodes {
                let w = flow.stage_weights(k).expect("adjoint pass has run");
                (flow.stage_positions(k), w.iter().map(|&v| v * inv_n).collect())
            } else {
                let z = flow.adjoints(k).expect("adjoint pass has run");
                (flow.positions(k), z.iter().map(|&v| v * inv_n).collect())
            };
            cell_sums(&config.field, spec, &CellSumInput { xs, u: &u, m: None })
        })
        .collect()
}

/// `Γ_k ∝ exp(−ℓ − Φ_k/ε)`, normalized in log-sum-exp form.
pub fn gibbs_from_potential<R: Real>(config: &ProblemConfig<R>, phi: Vec<Vec<R>>) -> Result<GibbsSnapshot<R>> {
    let spec = &config.param_grid;
    let ell = spec.tabulate(|a| config.potential.value(a));
    let inv_eps = R::one() / config.epsilon;
    let built: Vec<(GridMeasure<R>, R)> = phi
        .par_iter()
        .map(|p| {
            let logd: Vec<R> = ell.iter().zip(p).map(|(&l, &v)| -l - v * inv_eps).collect();
            GridMeasure::from_log_density(spec.clone(), &logd)
        })
        .collect::<Result<_>>()?;
    let (gibbs, log_z) = built.into_iter().unzip();
    Ok(GibbsSnapshot { phi, log_z, gibbs })
}

/// Gibbs map `Γ[ν]` together with the flow it was built from.
pub fn gibbs_map<R: Real>(config: &ProblemConfig<R>, path: &ControlPath<R>) -> Result<(GibbsSnapshot<R>, EnsembleFlow<R>)> {
    let flow = solve_flow(config, path)?;
    let phi = adjoint_potential(config, &flow);
    Ok((gibbs_from_potential(config, phi)?, flow))
}
