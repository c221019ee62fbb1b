//! Cost evaluation, the Gibbs map, damped Picard iteration for the
//! first-order system, and the two measure-space descents (grid
//! Fokker–Planck and particle Langevin).

mod bounds;
mod cost;
mod fokker_planck;
mod gibbs;
mod langevin;
mod picard;

pub use bounds::{exponential_bounds, ExponentialBounds};
pub use cost::{evaluate, fisher_from_gibbs, fisher_functional, picard_residual, terminal_cost, total_cost, CostReport, Evaluation};
pub use fokker_planck::{chemical_potential, fp_descent, fp_descent_step, fp_step_from, DescentRecord, FpStep};
pub use gibbs::{adjoint_potential, gibbs_from_potential, gibbs_map, GibbsSnapshot};
pub use langevin::{langevin_descent_step, particle_path_from_grid, sample_grid, LangevinStep};
pub use picard::{damped_update, picard_solve, PicardOptions, PicardOutcome, PicardRecord};
