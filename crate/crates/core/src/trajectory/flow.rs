use std::io::Write;

use rayon::prelude::*;

use crate::csv::{fmt_real, CsvWriter};
use crate::error::{Error, Result};
use crate::measure::{ControlPath, PathMeasures};
use crate::model::{Dataset, ProblemConfig, TimeGrid};
use crate::scalar::Real;

use super::kernel::{MeasureKernel, NodeMeasure};

/// RK4 stage weights `(1, 2, 2, 1)/6`.
pub(crate) const RK4_WEIGHTS: [f64; 4] = [1.0 / 6.0, 2.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0];

/// Velocity field on each control interval.
pub trait Drift<R: Real>: Sync {
    fn dim(&self) -> usize;
    /// Drift on interval `k` at `x`, with its Jacobian when requested.
    fn eval(&self, k: usize, x: &[R], f: &mut [R], jac: Option<&mut [R]>);
}

/// Mean-field drift `∫ b(x, a) dν_{τ_k}(a)` of a control path.
pub struct PathDrift<R> {
    d1: usize,
    kernels: Vec<MeasureKernel<R>>,
}

impl<R: Real> PathDrift<R> {
    pub fn new(config: &ProblemConfig<R>, path: &ControlPath<R>) -> Result<Self> {
        if path.nodes() != config.grid.nodes {
            return Err(Error::Dimension(format!(
                "path has {} nodes, time grid has {}",
                path.nodes(),
                config.grid.nodes
            )));
        }
        if path.param_dim() != config.field.dprime() {
            return Err(Error::Dimension("path lives on the wrong parameter space".into()));
        }
        let n = config.grid.intervals();
        let kernels = match &path.measures {
            PathMeasures::Grid(ms) => ms[..n]
                .par_iter()
                .map(|m| MeasureKernel::new(&config.field, NodeMeasure::Grid(m)))
                .collect(),
            PathMeasures::Particle(ms) => ms[..n]
                .par_iter()
                .map(|m| MeasureKernel::new(&config.field, NodeMeasure::Particle(m)))
                .collect(),
        };
        Ok(Self {
            d1: config.field.d1,
            kernels,
        })
    }

    pub fn kernel(&self, k: usize) -> &MeasureKernel<R> {
        &self.kernels[k]
    }
}

impl<R: Real> Drift<R> for PathDrift<R> {
    fn dim(&self) -> usize {
        self.d1
    }

    fn eval(&self, k: usize, x: &[R], f: &mut [R], jac: Option<&mut [R]>) {
        self.kernels[k].drift(x, f, jac);
    }
}

/// Spatially constant drift `c`; RK4 integrates it exactly.
pub struct ConstantDrift<R> {
    pub velocity: Vec<R>,
}

impl<R: Real> Drift<R> for ConstantDrift<R> {
    fn dim(&self) -> usize {
        self.velocity.len()
    }

    fn eval(&self, _k: usize, _x: &[R], f: &mut [R], jac: Option<&mut [R]>) {
        f.copy_from_slice(&self.velocity);
        if let Some(j) = jac {
            j.iter_mut().for_each(|v| *v = R::zero());
        }
    }
}

/// Feature characteristics `X`, labels `Y` and adjoints `Z` at every node,
/// with the RK4 stage data that the adjoint and tangent passes reuse.
#[derive(Clone, Debug)]
pub struct EnsembleFlow<R> {
    pub grid: TimeGrid<R>,
    pub n: usize,
    pub d1: usize,
    pub d2: usize,
    /// `nodes × n × d1`.
    pub x: Vec<R>,
    /// `n × d2`, constant in time.
    pub y: Vec<R>,
    /// `nodes × n × d1` once the backward pass has run.
    pub z: Option<Vec<R>>,
    /// Stage positions, `intervals × n × 4 × d1`.
    pub(crate) stage_x: Vec<R>,
    /// Stage drift Jacobians, `intervals × n × 4 × d1²`.
    pub(crate) stage_jac: Vec<R>,
    /// Adjoint stage weights, `intervals × n × 4 × d1`, such that
    /// `Φ_k(a) = (1/N) Σ_i Σ_s W·b(x_s, a)` is the discrete control gradient.
    pub(crate) stage_w: Option<Vec<R>>,
}

impl<R: Real> EnsembleFlow<R> {
    pub fn nodes(&self) -> usize {
        self.grid.nodes
    }

    /// Positions at node `k`, `n × d1`.
    pub fn positions(&self, k: usize) -> &[R] {
        let w = self.n * self.d1;
        &self.x[k * w..(k + 1) * w]
    }

    pub fn position(&self, k: usize, i: usize) -> &[R] {
        let o = (k * self.n + i) * self.d1;
        &self.x[o..o + self.d1]
    }

    pub fn label(&self, i: usize) -> &[R] {
        &self.y[i * self.d2..(i + 1) * self.d2]
    }

    pub fn adjoints(&self, k: usize) -> Option<&[R]> {
        let w = self.n * self.d1;
        self.z.as_ref().map(|z| &z[k * w..(k + 1) * w])
    }

    pub fn adjoint(&self, k: usize, i: usize) -> Option<&[R]> {
        let o = (k * self.n + i) * self.d1;
        self.z.as_ref().map(|z| &z[o..o + self.d1])
    }

    /// Stage positions of interval `k`, `n × 4 × d1`.
    pub fn stage_positions(&self, k: usize) -> &[R] {
        let w = self.n * 4 * self.d1;
        &self.stage_x[k * w..(k + 1) * w]
    }

    /// Adjoint stage weights of interval `k`, `n × 4 × d1`.
    pub fn stage_weights(&self, k: usize) -> Option<&[R]> {
        let w = self.n * 4 * self.d1;
        self.stage_w.as_ref().map(|s| &s[k * w..(k + 1) * w])
    }

    /// One row per `(node, particle)`: node, t, x, y, z and optionally δx.
    pub fn write_csv<W: Write>(&self, w: W, tangent: Option<&super::TangentFlow<R>>) -> std::io::Result<()> {
        let mut header = vec!["node".to_string(), "particle".into(), "t".into()];
        header.extend((0..self.d1).map(|j| format!("x{j}")));
        header.extend((0..self.d2).map(|j| format!("y{j}")));
        if self.z.is_some() {
            header.extend((0..self.d1).map(|j| format!("z{j}")));
        }
        if tangent.is_some() {
            header.extend((0..self.d1).map(|j| format!("dx{j}")));
        }
        let mut out = CsvWriter::new(w, &header)?;
        for k in 0..self.nodes() {
            let t = self.grid.time(k);
            for i in 0..self.n {
                let mut row = vec![k.to_string(), i.to_string(), fmt_real(t)];
                row.extend(self.position(k, i).iter().map(|&v| fmt_real(v)));
                row.extend(self.label(i).iter().map(|&v| fmt_real(v)));
                if let Some(z) = self.adjoint(k, i) {
                    row.extend(z.iter().map(|&v| fmt_real(v)));
                }
                if let Some(tf) = tangent {
                    row.extend(tf.at(k, i).iter().map(|&v| fmt_real(v)));
                }
                out.row(&row)?;
            }
        }
        Ok(())
    }
}

/// RK4 for `Ẋ = ∫ b(X, a) dν_t(a)` from the dataset features.
pub fn forward_solve<R: Real>(config: &ProblemConfig<R>, path: &ControlPath<R>) -> Result<EnsembleFlow<R>> {
    let drift = PathDrift::new(config, path)?;
    forward_solve_with(&config.dataset, &config.grid, &drift)
}

/// Per-particle trajectory: node positions, stage positions, stage Jacobians.
type Trajectory<R> = (Vec<R>, Vec<R>, Vec<R>);

/// Classical RK4 under an arbitrary drift; the control is frozen per interval.
pub fn forward_solve_with<R: Real, D: Drift<R>>(
    data: &Dataset<R>,
    grid: &TimeGrid<R>,
    drift: &D,
) -> Result<EnsembleFlow<R>> {
    let d1 = data.d1;
    if drift.dim() != d1 {
        return Err(Error::Dimension("drift and dataset disagree on d1".into()));
    }
    let n = data.len();
    let nodes = grid.nodes;
    let dt = grid.dt();
    let half = R::lit(0.5) * dt;
    let w: [R; 4] = RK4_WEIGHTS.map(R::lit);

    let per_particle: Vec<std::result::Result<Trajectory<R>, usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut xs = Vec::with_capacity(nodes * d1);
            let mut sx = Vec::with_capacity((nodes - 1) * 4 * d1);
            let mut sj = Vec::with_capacity((nodes - 1) * 4 * d1 * d1);
            let mut x = data.x(i).to_vec();
            xs.extend_from_slice(&x);
            let mut ks = vec![vec![R::zero(); d1]; 4];
            let mut jac = vec![R::zero(); d1 * d1];
            let mut stage = vec![R::zero(); d1];
            for k in 0..nodes - 1 {
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
                    drift.eval(k, &stage, &mut ks[s], Some(&mut jac));
                    sx.extend_from_slice(&stage);
                    sj.extend_from_slice(&jac);
                }
                for j in 0..d1 {
                    x[j] += dt * (w[0] * ks[0][j] + w[1] * ks[1][j] + w[2] * ks[2][j] + w[3] * ks[3][j]);
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(k + 1);
                }
                xs.extend_from_slice(&x);
            }
            Ok((xs, sx, sj))
        })
        .collect();

    let mut x = vec![R::zero(); nodes * n * d1];
    let mut stage_x = vec![R::zero(); (nodes - 1) * n * 4 * d1];
    let mut stage_jac = vec![R::zero(); (nodes - 1) * n * 4 * d1 * d1];
    let mut first_bad: Option<usize> = None;
    for (i, r) in per_particle.into_iter().enumerate() {
        match r {
            Ok((xs, sx, sj)) => {
                for k in 0..nodes {
                    x[(k * n + i) * d1..(k * n + i + 1) * d1].copy_from_slice(&xs[k * d1..(k + 1) * d1]);
                }
                let bs = 4 * d1;
                let bj = 4 * d1 * d1;
                for k in 0..nodes - 1 {
                    stage_x[(k * n + i) * bs..(k * n + i + 1) * bs].copy_from_slice(&sx[k * bs..(k + 1) * bs]);
                    stage_jac[(k * n + i) * bj..(k * n + i + 1) * bj].copy_from_slice(&sj[k * bj..(k + 1) * bj]);
                }
            }
            Err(node) => first_bad = Some(first_bad.map_or(node, |b: usize| b.min(node))),
        }
    }
    if let Some(node) = first_bad {
        return Err(Error::Divergence { node });
    }
    Ok(EnsembleFlow {
        grid: *grid,
        n,
        d1,
        d2: data.d2,
        x,
        y: data.ys.clone(),
        z: None,
        stage_x,
        stage_jac,
        stage_w: None,
    })
}

/// Adjoint pass `Ż = −∇_x b(X, ν_t)ᵀ Z`, `Z_T = ∇_x L(X_T, Y)`.
///
/// The recursion is the exact reverse-mode derivative of the RK4 forward
/// map, so `Z` at node `k` is the gradient of the terminal loss with respect
/// to `X_k` and the stage weights give the exact discrete control gradient.
pub fn backward_solve<R: Real>(config: &ProblemConfig<R>, mut flow: EnsembleFlow<R>) -> Result<EnsembleFlow<R>> {
    let (n, d1, d2) = (flow.n, flow.d1, flow.d2);
    let nodes = flow.nodes();
    let dt = flow.grid.dt();
    let half = R::lit(0.5) * dt;
    let w: [R; 4] = RK4_WEIGHTS.map(R::lit);
    let sign = if config.adjoint_sign_flip { -R::one() } else { R::one() };
    let loss = config.loss;

    let per_particle: Vec<std::result::Result<(Vec<R>, Vec<R>), usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut zs = vec![R::zero(); nodes * d1];
            let mut ws = vec![R::zero(); (nodes - 1) * 4 * d1];
            let xt = flow.position(nodes - 1, i);
            let mut lam = vec![R::zero(); d1];
            loss.grad_x_into(xt, &flow.y[i * d2..(i + 1) * d2], &mut lam);
            zs[(nodes - 1) * d1..].copy_from_slice(&lam);
            let mut g = vec![vec![R::zero(); d1]; 4];
            let mut xbar = vec![vec![R::zero(); d1]; 4];
            for k in (0..nodes - 1).rev() {
                let base = (k * n + i) * 4;
                let jac = |s: usize| {
                    let o = (base + s) * d1 * d1;
                    &flow.stage_jac[o..o + d1 * d1]
                };
                for s in 0..4 {
                    for j in 0..d1 {
                        g[s][j] = dt * w[s] * lam[j];
                    }
                }
                for s in (0..4).rev() {
                    if s < 3 {
                        let h = if s == 2 { dt } else { half };
                        for j in 0..d1 {
                            g[s][j] += h * xbar[s + 1][j];
                        }
                    }
                    let js = jac(s);
                    for l in 0..d1 {
                        let mut acc = R::zero();
                        for j in 0..d1 {
                            acc += js[j * d1 + l] * g[s][j];
                        }
                        xbar[s][l] = sign * acc;
                    }
                }
                for j in 0..d1 {
                    lam[j] += xbar[0][j] + xbar[1][j] + xbar[2][j] + xbar[3][j];
                }
                if lam.iter().any(|v| !v.is_finite()) {
                    return Err(k);
                }
                zs[k * d1..(k + 1) * d1].copy_from_slice(&lam);
                for s in 0..4 {
                    for j in 0..d1 {
                        ws[(k * 4 + s) * d1 + j] = g[s][j] / dt;
                    }
                }
            }
            Ok((zs, ws))
        })
        .collect();

    let mut z = vec![R::zero(); nodes * n * d1];
    let mut stage_w = vec![R::zero(); (nodes - 1) * n * 4 * d1];
    for (i, r) in per_particle.into_iter().enumerate() {
        let (zs, ws) = r.map_err(|node| Error::Divergence { node })?;
        for k in 0..nodes {
            z[(k * n + i) * d1..(k * n + i + 1) * d1].copy_from_slice(&zs[k * d1..(k + 1) * d1]);
        }
        let b = 4 * d1;
        for k in 0..nodes - 1 {
            stage_w[(k * n + i) * b..(k * n + i + 1) * b].copy_from_slice(&ws[k * b..(k + 1) * b]);
        }
    }
    flow.z = Some(z);
    flow.stage_w = Some(stage_w);
    Ok(flow)
}

/// Forward and backward passes together.
pub fn solve_flow<R: Real>(config: &ProblemConfig<R>, path: &ControlPath<R>) -> Result<EnsembleFlow<R>> {
    backward_solve(config, forward_solve(config, path)?)
}
