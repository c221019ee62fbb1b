use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::PerturbationPath;
use crate::model::TimeGrid;
use crate::scalar::{pairwise_sum, Real};
use crate::trajectory::{propagate_from, Drift, EnsembleFlow, MeasureKernel, NodeMeasure, PathDrift, TangentFlow, TestFunction};

use super::characteristics::SUBSTEPS;
use super::system::LinearizedSystem;

/// `⟨φ; ρ_k⟩ = (1/N) Σ_i ∇_x φ(X_i(τ_k), Y_i) · δX_i(τ_k)`.
pub fn rho_action<R: Real>(flow: &EnsembleFlow<R>, tangent: &TangentFlow<R>, phi: &TestFunction<R>, k: usize) -> R {
    let d1 = flow.d1;
    let mut g = vec![R::zero(); d1];
    let terms: Vec<R> = (0..flow.n)
        .map(|i| {
            phi.grad_x(flow.position(k, i), flow.label(i), &mut g);
            g.iter().zip(tangent.at(k, i)).fold(R::zero(), |s, (&a, &b)| s + a * b)
        })
        .collect();
    pairwise_sum(&terms) / R::from_usize_lossy(flow.n)
}

/// The multiplier `v` of the linearized system for one direction `η`:
/// values `v_k(X_i(τ_k))` at the control nodes and gradients `∇_x v` on the
/// refined characteristics grid.
#[derive(Clone, Debug)]
pub struct LinearizedMultiplier<R> {
    pub grid: TimeGrid<R>,
    pub fine: TimeGrid<R>,
    pub n: usize,
    pub d1: usize,
    /// `nodes × n`.
    pub values: Vec<R>,
    /// `fine nodes × n × d1`.
    pub grad: Vec<R>,
}

impl<R: Real> LinearizedMultiplier<R> {
    pub fn value(&self, k: usize, i: usize) -> R {
        self.values[k * self.n + i]
    }

    /// `∇_x v` at control node `k`.
    pub fn grad_at(&self, k: usize, i: usize) -> &[R] {
        self.grad_fine(SUBSTEPS * k, i)
    }

    pub fn grad_fine(&self, m: usize, i: usize) -> &[R] {
        let o = (m * self.n + i) * self.d1;
        &self.grad[o..o + self.d1]
    }
}

/// Builds `v` for the direction `η`. Values accumulate
/// `Σ_{j≥k} Δt Σ_s W_s · b(x_s, η_j)` over the RK4 stages of the flow, so
/// they are the exact derivative of the discrete terminal loss; gradients
/// solve the companion variational equation along the characteristics.
pub fn solve_v<R: Real>(sys: &LinearizedSystem<'_, R>, eta: &PerturbationPath<R>) -> Result<LinearizedMultiplier<R>> {
    let flow = &sys.flow;
    if eta.grid.nodes != flow.nodes() {
        return Err(Error::Dimension("perturbation and flow disagree on the time grid".into()));
    }
    let (n, d1) = (flow.n, flow.d1);
    let nodes = flow.nodes();
    let dt = flow.grid.dt();
    let kernels = sys.chars.kernels(sys.config, eta);
    let increments: Vec<Vec<R>> = (0..nodes - 1)
        .into_par_iter()
        .map(|k| {
            let xs = flow.stage_positions(k);
            let ws = flow.stage_weights(k).expect("flow carries adjoints");
            let mut b = vec![R::zero(); d1];
            (0..n)
                .map(|i| {
                    let mut acc = R::zero();
                    for s in 0..4 {
                        let o = (i * 4 + s) * d1;
                        kernels[k].drift(&xs[o..o + d1], &mut b, None);
                        acc += b.iter().zip(&ws[o..o + d1]).fold(R::zero(), |a, (&p, &q)| a + p * q);
                    }
                    acc * dt
                })
                .collect()
        })
        .collect();
    let mut values = vec![R::zero(); nodes * n];
    for k in (0..nodes - 1).rev() {
        for i in 0..n {
            values[k * n + i] = values[(k + 1) * n + i] + increments[k][i];
        }
    }
    Ok(LinearizedMultiplier {
        grid: flow.grid,
        fine: sys.chars.fine,
        n,
        d1,
        values,
        grad: sys.chars.grad_v(sys.config, eta),
    })
}

/// Joint drift of `(X, δX)` for the perturbed characteristics.
struct TangentDrift<'a, R> {
    base: &'a PathDrift<R>,
    source: &'a [MeasureKernel<R>],
    d1: usize,
}

impl<R: Real> Drift<R> for TangentDrift<'_, R> {
    fn dim(&self) -> usize {
        2 * self.d1
    }

    fn eval(&self, k: usize, x: &[R], f: &mut [R], _jac: Option<&mut [R]>) {
        let d1 = self.d1;
        let mut jac = vec![R::zero(); d1 * d1];
        let (fx, fd) = f.split_at_mut(d1);
        self.base.kernel(k).drift(&x[..d1], fx, Some(&mut jac));
        self.source[k].drift(&x[..d1], fd, None);
        for j in 0..d1 {
            for l in 0..d1 {
                fd[j] += jac[j * d1 + l] * x[d1 + l];
            }
        }
    }
}

/// Point probes of `v_k(x, y) = ∇_x L(X_T, y) · δX_T` for characteristics
/// started at an arbitrary `x` at node `k`.
pub struct MultiplierProbe<'a, R> {
    sys: &'a LinearizedSystem<'a, R>,
    base: PathDrift<R>,
    source: Vec<MeasureKernel<R>>,
}

impl<'a, R: Real> MultiplierProbe<'a, R> {
    pub fn new(sys: &'a LinearizedSystem<'a, R>, eta: &PerturbationPath<R>) -> Result<Self> {
        let base = PathDrift::new(sys.config, sys.path)?;
        let source = eta.nodes[..eta.grid.intervals()]
            .iter()
            .map(|e| MeasureKernel::new(&sys.config.field, NodeMeasure::Signed(e)))
            .collect();
        Ok(Self { sys, base, source })
    }

    pub fn value(&self, k: usize, x: &[R], y: &[R]) -> R {
        let d1 = x.len();
        let drift = TangentDrift {
            base: &self.base,
            source: &self.source,
            d1,
        };
        let mut state = x.to_vec();
        state.resize(2 * d1, R::zero());
        let end = propagate_from(&drift, &self.sys.flow.grid, k, &state);
        let mut g = vec![R::zero(); d1];
        self.sys.config.loss.grad_x_into(&end[..d1], y, &mut g);
        g.iter().zip(&end[d1..]).fold(R::zero(), |s, (&a, &b)| s + a * b)
    }

    /// Central finite difference of `v_k(·, y)` with step `delta`.
    pub fn grad_fd(&self, k: usize, x: &[R], y: &[R], delta: R) -> Vec<R> {
        let mut xp = x.to_vec();
        (0..x.len())
            .map(|j| {
                xp[j] = x[j] + delta;
                let up = self.value(k, &xp, y);
                xp[j] = x[j] - delta;
                let dn = self.value(k, &xp, y);
                xp[j] = x[j];
                (up - dn) / (R::lit(2.0) * delta)
            })
            .collect()
    }
}
