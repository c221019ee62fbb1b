use crate::error::{Error, Result};
use crate::measure::{ControlPath, GridMeasure, PerturbationPath};
use crate::model::ProblemConfig;
use crate::scalar::Real;
use crate::trajectory::{solve_flow, tangent_solve, EnsembleFlow, TangentFlow};

use super::characteristics::Characteristics;

/// Everything the second-order operations need at a fixed control `ν*`:
/// the discrete flow with adjoints and the refined characteristics cache.
#[derive(Clone, Debug)]
pub struct LinearizedSystem<'a, R> {
    pub config: &'a ProblemConfig<R>,
    pub path: &'a ControlPath<R>,
    pub flow: EnsembleFlow<R>,
    pub chars: Characteristics<R>,
}

impl<'a, R: Real> LinearizedSystem<'a, R> {
    pub fn new(config: &'a ProblemConfig<R>, path: &'a ControlPath<R>) -> Result<Self> {
        let ms = path.grid_measures()?;
        if !ms[0].spec.same_layout(&config.param_grid) {
            return Err(Error::Backend("control path must live on the configured parameter grid".into()));
        }
        let flow = solve_flow(config, path)?;
        let chars = Characteristics::new(config, path)?;
        Ok(Self {
            config,
            path,
            flow,
            chars,
        })
    }

    pub fn measures(&self) -> &[GridMeasure<R>] {
        self.path.grid_measures().expect("grid path checked on construction")
    }

    /// Tangent particles on the control grid, exact for the RK4 push-forward.
    pub fn tangent(&self, eta: &PerturbationPath<R>) -> Result<TangentFlow<R>> {
        tangent_solve(self.config, &self.flow, eta)
    }

    /// Tangent particles on the refined characteristics grid.
    pub fn fine_tangent(&self, eta: &PerturbationPath<R>) -> TangentFlow<R> {
        self.chars.tangent(self.config, eta)
    }

    /// `⟨η, ζ⟩ = Σ_k Δt ∫ η_k ζ_k / ν*_k` over the control intervals.
    pub fn inner(&self, eta: &PerturbationPath<R>, zeta: &PerturbationPath<R>) -> R {
        let dt = self.path.grid.dt();
        let mut total = R::zero();
        for (k, m) in self.measures()[..self.path.grid.intervals()].iter().enumerate() {
            let prod: Vec<R> = m
                .values
                .iter()
                .zip(&eta.nodes[k].values)
                .zip(&zeta.nodes[k].values)
                .map(|((&v, &a), &b)| if v > R::zero() { a * b / v } else { R::zero() })
                .collect();
            total += m.spec.integrate(&prod) * dt;
        }
        total
    }

    /// Whether `η` charges some cell where `ν*` vanishes.
    pub fn singular(&self, eta: &PerturbationPath<R>) -> bool {
        self.measures()
            .iter()
            .zip(&eta.nodes)
            .take(self.path.grid.intervals())
            .any(|(m, e)| m.values.iter().zip(&e.values).any(|(&v, &d)| v <= R::zero() && d != R::zero()))
    }
}
