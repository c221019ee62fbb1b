use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::{ControlPath, GridMeasure};
use crate::model::ProblemConfig;
use crate::scalar::Real;

use super::cost::{evaluate, CostReport, Evaluation};
use super::gibbs::GibbsSnapshot;

/// Result of one explicit Fokker–Planck step.
#[derive(Clone, Debug)]
pub struct FpStep<R> {
    pub path: ControlPath<R>,
    /// Predicted `dJ/ds = −I` at the starting path.
    pub dj_estimate: R,
    /// `I` at the starting path.
    pub fisher: R,
    /// Step actually taken after halvings.
    pub step: R,
    pub halvings: usize,
}

const MAX_HALVINGS: usize = 10;

/// Harmonic mean of the two cell densities, the face value of `ν`.
///
/// Symmetric and second-order like the arithmetic mean, but bounded by
/// `2 min(ν_c, ν_r)`, so an explicit step stays positive under a CFL bound
/// even where the quartic tail makes neighbours differ by many decades.
fn face_density<R: Real>(a: R, b: R) -> R {
    let s = a + b;
    if s > R::zero() {
        R::lit(2.0) * a * b / s
    } else {
        R::zero()
    }
}

/// Explicit no-flux finite-volume step of `∂_s ν = div(ν ∇ξ)` with
/// `ξ = ε log ν + ε ℓ + Φ` at one node; `None` if a density turns negative.
fn fv_step<R: Real>(m: &GridMeasure<R>, xi: &[R], h: R) -> Option<Vec<R>> {
    let spec = &m.spec;
    let n = spec.res;
    let inv_h2 = R::one() / (spec.spacing * spec.spacing);
    let mut out = m.values.clone();
    for ax in 0..spec.dim {
        let s = spec.stride(ax);
        for c in 0..spec.cells() {
            if spec.coord_index(c, ax) + 1 == n {
                continue;
            }
            let r = c + s;
            let flux = face_density(m.values[c], m.values[r]) * (xi[r] - xi[c]) * inv_h2 * h;
            out[c] += flux;
            out[r] -= flux;
        }
    }
    out.iter().all(|v| *v >= R::zero() && v.is_finite()).then_some(out)
}

/// Chemical potential `ξ_k` at every node.
pub fn chemical_potential<R: Real>(config: &ProblemConfig<R>, path: &ControlPath<R>, snap: &GibbsSnapshot<R>) -> Result<Vec<Vec<R>>> {
    let ell = config.param_grid.tabulate(|a| config.potential.value(a));
    let eps = config.epsilon;
    Ok(path
        .grid_measures()?
        .iter()
        .zip(&snap.phi)
        .map(|(m, phi)| {
            m.log_values()
                .iter()
                .zip(ell.iter().zip(phi))
                .map(|(&lv, (&l, &p))| eps * (lv + l) + p)
                .collect()
        })
        .collect())
}

/// One step from a precomputed evaluation at `path`.
pub fn fp_step_from<R: Real>(
    config: &ProblemConfig<R>,
    path: &ControlPath<R>,
    eval: &Evaluation<R>,
    h: R,
) -> Result<FpStep<R>> {
    let xi = chemical_potential(config, path, &eval.snapshot)?;
    let fisher = eval.report.fisher.expect("evaluate fills I");
    let measures = path.grid_measures()?;
    let mut step = h;
    for halvings in 0..=MAX_HALVINGS {
        let next: Option<Vec<Vec<R>>> = measures
            .par_iter()
            .zip(&xi)
            .map(|(m, x)| fv_step(m, x, step))
            .collect();
        if let Some(values) = next {
            let ms = values
                .into_iter()
                .map(|v| GridMeasure::from_values(config.param_grid.clone(), v))
                .collect::<Result<Vec<_>>>()?;
            return Ok(FpStep {
                path: ControlPath::from_grid(path.grid, ms)?,
                dj_estimate: -fisher,
                fisher,
                step,
                halvings,
            });
        }
        step = step * R::lit(0.5);
    }
    Err(Error::StepRejected(format!(
        "density stayed negative after {MAX_HALVINGS} halvings of h = {h:e}"
    )))
}

/// One explicit Fokker–Planck step applied independently at every node,
/// with `Φ` from a fresh forward/backward solve.
pub fn fp_descent_step<R: Real>(config: &ProblemConfig<R>, path: &ControlPath<R>, h: R) -> Result<FpStep<R>> {
    let eval = evaluate(config, path)?;
    fp_step_from(config, path, &eval, h)
}

/// One row of a descent run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DescentRecord<R> {
    pub step: usize,
    pub report: CostReport<R>,
    /// `(J_{s+1} − J_s)/h` for the step leaving this state.
    pub dj_over_h: Option<R>,
    pub h: R,
}

/// Runs `steps` Fokker–Planck steps; returns the final path and one record
/// per visited state.
pub fn fp_descent<R: Real>(
    config: &ProblemConfig<R>,
    init: &ControlPath<R>,
    steps: usize,
    h: R,
) -> Result<(ControlPath<R>, Vec<DescentRecord<R>>)> {
    let mut path = init.clone();
    let mut eval = evaluate(config, &path)?;
    let mut records = Vec::with_capacity(steps + 1);
    for s in 0..steps {
        let st = fp_step_from(config, &path, &eval, h)?;
        let next_eval = evaluate(config, &st.path)?;
        records.push(DescentRecord {
            step: s,
            report: eval.report,
            dj_over_h: Some((next_eval.report.j - eval.report.j) / st.step),
            h: st.step,
        });
        path = st.path;
        eval = next_eval;
    }
    records.push(DescentRecord {
        step: steps,
        report: eval.report,
        dj_over_h: None,
        h,
    });
    Ok((path, records))
}
