//! Problem primitives: the activation field, confinement potential, terminal
//! loss, dataset, depth grid and the assembled problem configuration.

mod activation;
mod config;
mod dataset;
mod loss;
mod potential;
mod time;

pub use activation::{Activation, ActivationField, FieldFamily};
pub use config::{MeasureSettings, ProblemConfig, ProblemSpec};
pub use dataset::{Dataset, DatasetSpec, SamplePoint, SyntheticTarget};
pub use loss::{LossKind, TerminalLoss};
pub use potential::{ConfinementPotential, PotentialEval};
pub use time::TimeGrid;
