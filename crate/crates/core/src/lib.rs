//! Entropy-regularized mean-field optimal control of continuous-depth
//! residual networks.
//!
//! Features evolve by `Ẋ = ∫ b(X, a) dν_t(a)` under a path of parameter
//! measures `ν_t`; the cost is the terminal loss plus `ε` times the relative
//! entropy of the path with respect to the prior `ν∞ ∝ e^{−ℓ}`. The crate
//! solves for Gibbs-form optimal paths, runs the measure-space gradient
//! flows, and evaluates the first- and second-order structure numerically.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the double-precision instantiation.

pub mod csv;
pub mod error;
pub mod linearization;
pub mod measure;
pub mod model;
pub mod optimizer;
pub mod rng;
pub mod scalar;
pub mod trajectory;

pub use error::{Error, Result};
pub use scalar::{pairwise_sum, Real};

pub type Config = model::ProblemConfig<f64>;
pub type Grid = measure::GridMeasure<f64>;
pub type Particles = measure::ParticleMeasure<f64>;
pub type Path = measure::ControlPath<f64>;
pub type Flow = trajectory::EnsembleFlow<f64>;
pub type Tangent = trajectory::TangentFlow<f64>;
pub type Perturbation = linearization::PerturbationPath<f64>;

pub type ConfigF32 = model::ProblemConfig<f32>;
pub type PathF32 = measure::ControlPath<f32>;
