use crate::error::{Error, Result};
use crate::model::{ConfinementPotential, TimeGrid};
use crate::scalar::Real;

use super::divergence::relative_entropy;
use super::grid::{GridMeasure, GridSpec, SignedGrid};
use super::particle::ParticleMeasure;

/// Prior `ν∞ ∝ e^{−ℓ}` tabulated on the parameter grid.
#[derive(Clone, Debug)]
pub struct PriorMeasure<R> {
    pub measure: GridMeasure<R>,
    /// `log z∞` for the discrete normalization.
    pub log_z: R,
}

impl<R: Real> PriorMeasure<R> {
    pub fn new(potential: &ConfinementPotential, spec: &GridSpec<R>) -> Result<Self> {
        let log_density = spec.tabulate(|a| -potential.value(a));
        let (measure, log_z) = GridMeasure::from_log_density(spec.clone(), &log_density)?;
        Ok(Self { measure, log_z })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PathMeasures<R> {
    Grid(Vec<GridMeasure<R>>),
    Particle(Vec<ParticleMeasure<R>>),
}

/// One measure per time node; node `k` drives the interval `[τ_k, τ_{k+1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlPath<R> {
    pub grid: TimeGrid<R>,
    pub measures: PathMeasures<R>,
}

impl<R: Real> ControlPath<R> {
    pub fn from_grid(grid: TimeGrid<R>, measures: Vec<GridMeasure<R>>) -> Result<Self> {
        if measures.len() != grid.nodes {
            return Err(Error::Dimension(format!(
                "path has {} measures for {} nodes",
                measures.len(),
                grid.nodes
            )));
        }
        if measures.windows(2).any(|w| !w[0].spec.same_layout(&w[1].spec)) {
            return Err(Error::Backend("grid measures must share box and resolution".into()));
        }
        Ok(Self {
            grid,
            measures: PathMeasures::Grid(measures),
        })
    }

    pub fn from_particles(grid: TimeGrid<R>, measures: Vec<ParticleMeasure<R>>) -> Result<Self> {
        if measures.len() != grid.nodes {
            return Err(Error::Dimension(format!(
                "path has {} measures for {} nodes",
                measures.len(),
                grid.nodes
            )));
        }
        if measures.windows(2).any(|w| w[0].dim != w[1].dim) {
            return Err(Error::Backend("particle measures must share dimension".into()));
        }
        Ok(Self {
            grid,
            measures: PathMeasures::Particle(measures),
        })
    }

    pub fn constant_grid(grid: TimeGrid<R>, m: &GridMeasure<R>) -> Self {
        Self {
            grid,
            measures: PathMeasures::Grid(vec![m.clone(); grid.nodes]),
        }
    }

    pub fn constant_particle(grid: TimeGrid<R>, m: &ParticleMeasure<R>) -> Self {
        Self {
            grid,
            measures: PathMeasures::Particle(vec![m.clone(); grid.nodes]),
        }
    }

    pub fn nodes(&self) -> usize {
        self.grid.nodes
    }

    pub fn grid_measures(&self) -> Result<&[GridMeasure<R>]> {
        match &self.measures {
            PathMeasures::Grid(m) => Ok(m),
            PathMeasures::Particle(_) => Err(Error::Backend("operation requires the grid backend".into())),
        }
    }

    pub fn particle_measures(&self) -> Result<&[ParticleMeasure<R>]> {
        match &self.measures {
            PathMeasures::Particle(m) => Ok(m),
            PathMeasures::Grid(_) => Err(Error::Backend("operation requires the particle backend".into())),
        }
    }

    pub fn param_dim(&self) -> usize {
        match &self.measures {
            PathMeasures::Grid(m) => m[0].spec.dim,
            PathMeasures::Particle(m) => m[0].dim,
        }
    }
}

/// `Σ_k E(ν_{τ_k} ‖ ν∞) Δt` over the control intervals (left-endpoint rule).
pub fn path_entropy<R: Real>(path: &ControlPath<R>, prior: &PriorMeasure<R>) -> Result<R> {
    let dt = path.grid.dt();
    let mut total = R::zero();
    for m in &path.grid_measures()?[..path.grid.intervals()] {
        let e = relative_entropy(m, &prior.measure)?;
        total += e.value * dt;
    }
    Ok(total)
}

/// `Σ_k E(ν_{τ_k} ‖ μ_{τ_k}) Δt` between two grid paths.
pub fn path_relative_entropy<R: Real>(a: &ControlPath<R>, b: &ControlPath<R>) -> Result<R> {
    let dt = a.grid.dt();
    let (ma, mb) = (a.grid_measures()?, b.grid_measures()?);
    let mut total = R::zero();
    for k in 0..a.grid.intervals() {
        total += relative_entropy(&ma[k], &mb[k])?.value * dt;
    }
    Ok(total)
}

/// Signed perturbation path `η`: one grid density per node, each of zero mass.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationPath<R> {
    pub grid: TimeGrid<R>,
    pub nodes: Vec<SignedGrid<R>>,
}

impl<R: Real> PerturbationPath<R> {
    pub fn new(grid: TimeGrid<R>, nodes: Vec<SignedGrid<R>>) -> Result<Self> {
        if nodes.len() != grid.nodes {
            return Err(Error::Dimension(format!(
                "perturbation has {} nodes, grid has {}",
                nodes.len(),
                grid.nodes
            )));
        }
        if nodes.windows(2).any(|w| !w[0].spec.same_layout(&w[1].spec)) {
            return Err(Error::Backend("perturbation nodes must share box and resolution".into()));
        }
        Ok(Self { grid, nodes })
    }

    pub fn zeros(grid: TimeGrid<R>, spec: &GridSpec<R>) -> Self {
        Self {
            grid,
            nodes: vec![SignedGrid::zeros(spec.clone()); grid.nodes],
        }
    }

    /// Largest absolute node mass.
    pub fn max_node_mass(&self) -> R {
        self.nodes
            .iter()
            .map(|n| n.mass().abs())
            .fold(R::zero(), |a, b| if b > a { b } else { a })
    }

    /// Fails when some node mass exceeds `tol`.
    pub fn check_admissible(&self, tol: R) -> Result<()> {
        for (k, n) in self.nodes.iter().enumerate() {
            let m = n.mass();
            if !(m.abs() <= tol) {
                return Err(Error::Admissibility(format!("node {k} has mass {m:e}")));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, s: R) -> Self {
        let mut out = self.clone();
        out.nodes
            .iter_mut()
            .for_each(|n| n.values.iter_mut().for_each(|v| *v *= s));
        out
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: R, other: &Self) -> Self {
        let mut out = self.clone();
        for (n, o) in out.nodes.iter_mut().zip(&other.nodes) {
            n.values.iter_mut().zip(&o.values).for_each(|(v, &w)| *v += s * w);
        }
        out
    }

    /// `ν + λη` node by node; fails if a density would turn negative.
    pub fn perturb(&self, base: &ControlPath<R>, lambda: R) -> Result<ControlPath<R>> {
        let measures = base
            .grid_measures()?
            .iter()
            .zip(&self.nodes)
            .map(|(m, e)| {
                let values = m.values.iter().zip(&e.values).map(|(&v, &d)| v + lambda * d).collect();
                GridMeasure::from_values(m.spec.clone(), values)
            })
            .collect::<Result<Vec<_>>>()?;
        ControlPath::from_grid(base.grid, measures)
    }
}
