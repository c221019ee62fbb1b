//! Probability measures on the parameter space: tensor-grid densities and
//! particle ensembles, with the entropy, Fisher and moment functionals and
//! the Pinsker / log-Sobolev diagnostics.

mod divergence;
mod grid;
mod inequalities;
mod particle;
mod path;

pub use divergence::{fisher_divergence, moment_grid, moment_particles, relative_entropy, Divergence};
pub use grid::{confining_half_width, normalize, GridMeasure, GridSpec, SignedGrid};
pub use inequalities::{default_lsi_trials, fourth_moment_constant, lsi_ratio, pinsker_check, LsiEstimate, PinskerCheck};
pub use particle::ParticleMeasure;
pub use path::{path_entropy, path_relative_entropy, ControlPath, PathMeasures, PerturbationPath, PriorMeasure};
