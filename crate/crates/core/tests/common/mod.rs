#![allow(dead_code)]

use mfoc::measure::ControlPath;
use mfoc::model::{DatasetSpec, MeasureSettings, ProblemSpec, SyntheticTarget, TimeGrid};
use mfoc::optimizer::{picard_solve, PicardOptions};
use mfoc::Config;

/// Reduced desk problem: 24² grid, 16 particles, 17 time nodes.
pub fn small_spec() -> ProblemSpec {
    ProblemSpec {
        dataset: DatasetSpec::Synthetic {
            n: 16,
            x_min: -1.5,
            x_max: 1.5,
            target: SyntheticTarget::Sine,
            amplitude: 0.5,
        },
        grid: TimeGrid {
            t0: 0.0,
            t_end: 1.0,
            nodes: 17,
        },
        measure: MeasureSettings {
            res: 24,
            ..Default::default()
        },
        ..Default::default()
    }
}

pub fn identity_spec() -> ProblemSpec {
    let mut spec = small_spec();
    if let DatasetSpec::Synthetic { target, .. } = &mut spec.dataset {
        *target = SyntheticTarget::Identity;
    }
    spec
}

pub fn prior_path(config: &Config) -> ControlPath<f64> {
    ControlPath::constant_grid(config.grid, &config.prior.measure)
}

pub fn solved(config: &Config) -> ControlPath<f64> {
    let out = picard_solve(config, &prior_path(config), &PicardOptions::default()).unwrap();
    assert!(out.converged);
    out.path
}
