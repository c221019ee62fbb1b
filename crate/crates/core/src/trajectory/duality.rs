use rayon::prelude::*;

use crate::error::Result;
use crate::measure::ControlPath;
use crate::model::{ProblemConfig, TimeGrid};
use crate::scalar::{pairwise_sum, Real};

use super::flow::{forward_solve, Drift, PathDrift, RK4_WEIGHTS};
use super::testfn::TestFunction;

/// RK4 characteristic from `x` at node `k` to the final node.
pub fn propagate_from<R: Real, D: Drift<R>>(drift: &D, grid: &TimeGrid<R>, k: usize, x: &[R]) -> Vec<R> {
    let d1 = x.len();
    let dt = grid.dt();
    let half = R::lit(0.5) * dt;
    let w: [R; 4] = RK4_WEIGHTS.map(R::lit);
    let mut x = x.to_vec();
    let mut ks = vec![vec![R::zero(); d1]; 4];
    let mut stage = vec![R::zero(); d1];
    for m in k..grid.nodes - 1 {
        for s in 0..4 {
            let (h, prev) = match s {
                0 => (R::zero(), 0),
                1 => (half, 0),
                2 => (half, 1),
                _ => (dt, 2),
            };
            for j in 0..d1 {
                stage[j] = x[j] + h * ks[prev][j];
            }
            drift.eval(m, &stage, &mut ks[s], None);
        }
        for j in 0..d1 {
            x[j] += dt * (w[0] * ks[0][j] + w[1] * ks[1][j] + w[2] * ks[2][j] + w[3] * ks[3][j]);
        }
    }
    x
}

/// `φ_{t0}(x) = φ(Ψ(x), y)` with the flow map `Ψ` followed along explicit
/// midpoint characteristics.
fn transported_value<R: Real, D: Drift<R>>(drift: &D, grid: &TimeGrid<R>, phi: &TestFunction<R>, x: &[R], y: &[R]) -> R {
    let d1 = x.len();
    let dt = grid.dt();
    let half = R::lit(0.5) * dt;
    let mut x = x.to_vec();
    let mut f = vec![R::zero(); d1];
    let mut mid = vec![R::zero(); d1];
    for m in 0..grid.nodes - 1 {
        drift.eval(m, &x, &mut f, None);
        for j in 0..d1 {
            mid[j] = x[j] + half * f[j];
        }
        drift.eval(m, &mid, &mut f, None);
        for j in 0..d1 {
            x[j] += dt * f[j];
        }
    }
    phi.value(&x, y)
}

/// Discrepancy between `∫ φ dγ_T` from the RK4 push-forward and
/// `∫ φ_{t0} dγ_0` from transporting `φ` back along the characteristics.
pub fn duality_residual<R: Real>(config: &ProblemConfig<R>, path: &ControlPath<R>, phi: &TestFunction<R>) -> Result<R> {
    let flow = forward_solve(config, path)?;
    let drift = PathDrift::new(config, path)?;
    let last = flow.nodes() - 1;
    let pushed: Vec<R> = (0..flow.n).map(|i| phi.value(flow.position(last, i), flow.label(i))).collect();
    let data = &config.dataset;
    let pulled: Vec<R> = (0..data.len())
        .into_par_iter()
        .map(|i| transported_value(&drift, &config.grid, phi, data.x(i), data.y(i)))
        .collect();
    let n = R::from_usize_lossy(flow.n);
    Ok(((pairwise_sum(&pushed) - pairwise_sum(&pulled)) / n).abs())
}
