use std::io::Write;

use rayon::prelude::*;

use crate::csv::{fmt_real, CsvWriter};
use crate::error::{Error, Result};
use crate::measure::PerturbationPath;
use crate::model::{ProblemConfig, TimeGrid};
use crate::scalar::Real;

use super::flow::{EnsembleFlow, RK4_WEIGHTS};
use super::kernel::{MeasureKernel, NodeMeasure};

/// Tangent particles `δX` of the linearized continuity equation.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentFlow<R> {
    pub grid: TimeGrid<R>,
    pub n: usize,
    pub d1: usize,
    /// `nodes × n × d1`.
    pub dx: Vec<R>,
}

impl<R: Real> TangentFlow<R> {
    pub fn at(&self, k: usize, i: usize) -> &[R] {
        let o = (k * self.n + i) * self.d1;
        &self.dx[o..o + self.d1]
    }

    pub fn node(&self, k: usize) -> &[R] {
        let w = self.n * self.d1;
        &self.dx[k * w..(k + 1) * w]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut header = vec!["node".to_string(), "particle".into(), "t".into()];
        header.extend((0..self.d1).map(|j| format!("dx{j}")));
        let mut out = CsvWriter::new(w, &header)?;
        for k in 0..self.grid.nodes {
            for i in 0..self.n {
                let mut row = vec![k.to_string(), i.to_string(), fmt_real(self.grid.time(k))];
                row.extend(self.at(k, i).iter().map(|&v| fmt_real(v)));
                out.row(&row)?;
            }
        }
        Ok(())
    }
}

/// Node-mass tolerance for admissible perturbations.
pub const PERTURBATION_MASS_TOL: f64 = 1e-10;

/// RK4 on `δẊ = ∇_x b(X, ν_t) δX + b(X, η_t)`, `δX(t0) = 0`, reusing the
/// stage points of `flow`; this is the exact derivative of the discrete
/// forward map in the direction `η`.
pub fn tangent_solve<R: Real>(
    config: &ProblemConfig<R>,
    flow: &EnsembleFlow<R>,
    eta: &PerturbationPath<R>,
) -> Result<TangentFlow<R>> {
    eta.check_admissible(R::lit(PERTURBATION_MASS_TOL))?;
    if eta.grid.nodes != flow.nodes() {
        return Err(Error::Dimension("perturbation and flow disagree on the time grid".into()));
    }
    let (n, d1) = (flow.n, flow.d1);
    let nodes = flow.nodes();
    let dt = flow.grid.dt();
    let half = R::lit(0.5) * dt;
    let w: [R; 4] = RK4_WEIGHTS.map(R::lit);
    let kernels: Vec<MeasureKernel<R>> = eta.nodes[..nodes - 1]
        .par_iter()
        .map(|e| MeasureKernel::new(&config.field, NodeMeasure::Signed(e)))
        .collect();

    let per_particle: Vec<Vec<R>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = vec![R::zero(); nodes * d1];
            let mut dx = vec![R::zero(); d1];
            let mut dk = vec![vec![R::zero(); d1]; 4];
            let mut stage = vec![R::zero(); d1];
            let mut src = vec![R::zero(); d1];
            for k in 0..nodes - 1 {
                let base = (k * n + i) * 4;
                for s in 0..4 {
                    let (h, prev) = match s {
                        0 => (R::zero(), 0),
                        1 => (half, 0),
                        2 => (half, 1),
                        _ => (dt, 2),
                    };
                    for j in 0..d1 {
                        stage[j] = dx[j] + h * dk[prev][j];
                    }
                    let xs = &flow.stage_x[(base + s) * d1..(base + s + 1) * d1];
                    let js = &flow.stage_jac[(base + s) * d1 * d1..(base + s + 1) * d1 * d1];
                    kernels[k].drift(xs, &mut src, None);
                    for j in 0..d1 {
                        let mut acc = src[j];
                        for l in 0..d1 {
                            acc += js[j * d1 + l] * stage[l];
                        }
                        dk[s][j] = acc;
                    }
                }
                for j in 0..d1 {
                    dx[j] += dt * (w[0] * dk[0][j] + w[1] * dk[1][j] + w[2] * dk[2][j] + w[3] * dk[3][j]);
                }
                out[(k + 1) * d1..(k + 2) * d1].copy_from_slice(&dx);
            }
            out
        })
        .collect();

    let mut dx = vec![R::zero(); nodes * n * d1];
    for (i, traj) in per_particle.into_iter().enumerate() {
        for k in 0..nodes {
            dx[(k * n + i) * d1..(k * n + i + 1) * d1].copy_from_slice(&traj[k * d1..(k + 1) * d1]);
        }
    }
    Ok(TangentFlow {
        grid: flow.grid,
        n,
        d1,
        dx,
    })
}
