//! Second-order analysis at a converged control: the linearized triple
//! `(η, ρ, v)`, the quadratic form `𝒥`, the linearized fixed-point map and
//! its spectrum, and the empirical Polyak–Łojasiewicz scan.

mod characteristics;
mod directions;
mod eta;
mod form;
mod multiplier;
mod pl;
mod stability;
mod system;

pub use crate::measure::PerturbationPath;
pub use characteristics::{Characteristics, SUBSTEPS};
pub use directions::{centred_direction, random_direction, CubicPotential, TimeProfile};
pub use eta::{bracket, eta_from, eta_from_bracket, linearized_map};
pub use form::{central_second_difference, cross_term, quadratic_form, second_derivative_check, SecondOrderReport};
pub use multiplier::{rho_action, solve_v, LinearizedMultiplier, MultiplierProbe};
pub use pl::{calibrate_tilt, pl_scan, tilt, PlOptions, PlSample, PlScan, PL_GAP_FLOOR};
pub use stability::{stability_probe, stability_probe_from, StabilityOptions, StabilityProbe};
pub use system::LinearizedSystem;
