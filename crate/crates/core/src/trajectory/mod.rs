//! Characteristics of the feature dynamics: forward positions, backward
//! adjoints, tangent particles and the duality check between push-forward
//! and backward transport.

mod duality;
mod flow;
mod kernel;
mod tangent;
mod testfn;

pub use duality::{duality_residual, propagate_from};
pub use flow::{backward_solve, forward_solve, forward_solve_with, solve_flow, ConstantDrift, Drift, EnsembleFlow, PathDrift};
pub(crate) use flow::RK4_WEIGHTS;
pub use kernel::{cell_sums, meanfield_drift, CellSumInput, MeasureKernel, NodeMeasure};
pub use tangent::{tangent_solve, TangentFlow, PERTURBATION_MASS_TOL};
pub use testfn::TestFunction;
