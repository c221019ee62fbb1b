use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{confining_half_width, GridSpec, PriorMeasure};
use crate::scalar::Real;

use super::{ActivationField, ConfinementPotential, Dataset, DatasetSpec, TerminalLoss, TimeGrid};

/// Parameter-space discretization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureSettings {
    /// Grid points per parameter axis.
    pub res: usize,
    /// Box half-width; chosen from `tail_mass` when absent.
    pub half_width: Option<f64>,
    /// Admissible prior mass outside the box.
    pub tail_mass: f64,
}

impl Default for MeasureSettings {
    fn default() -> Self {
        Self {
            res: 64,
            half_width: None,
            tail_mass: 1e-10,
        }
    }
}

/// The problem as written in a configuration document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSpec {
    pub epsilon: f64,
    pub field: ActivationField,
    pub potential: ConfinementPotential,
    pub loss: TerminalLoss,
    pub dataset: DatasetSpec,
    pub grid: TimeGrid<f64>,
    pub seed: u64,
    pub measure: MeasureSettings,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            field: ActivationField::default(),
            potential: ConfinementPotential::default(),
            loss: TerminalLoss::default(),
            dataset: DatasetSpec::default(),
            grid: TimeGrid {
                t0: 0.0,
                t_end: 1.0,
                nodes: 65,
            },
            seed: 0,
            measure: MeasureSettings::default(),
        }
    }
}

impl ProblemSpec {
    pub fn build<R: Real>(&self) -> Result<ProblemConfig<R>> {
        ProblemConfig::new(self)
    }
}

/// Validated problem with every derived quantity resolved.
#[derive(Clone, Debug)]
pub struct ProblemConfig<R> {
    pub epsilon: R,
    pub field: ActivationField,
    pub potential: ConfinementPotential,
    pub loss: TerminalLoss,
    pub dataset: Dataset<R>,
    pub grid: TimeGrid<R>,
    pub seed: u64,
    /// Parameter grid shared by every grid-backend measure.
    pub param_grid: GridSpec<R>,
    pub prior: PriorMeasure<R>,
    /// Fault-injection hook: reverses the sign of the adjoint transport.
    #[doc(hidden)]
    pub adjoint_sign_flip: bool,
}

impl<R: Real> ProblemConfig<R> {
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        if !(spec.epsilon.is_finite() && spec.epsilon > 0.0) {
            return Err(Error::config("epsilon", "must be > 0"));
        }
        spec.field.validate()?;
        spec.potential.validate()?;
        spec.grid.validate()?;
        let dataset: Dataset<R> = spec.dataset.build(spec.field.d1)?;
        spec.loss.validate(dataset.d1, dataset.d2)?;
        let ms = &spec.measure;
        if !(ms.tail_mass > 0.0 && ms.tail_mass < 1.0) {
            return Err(Error::config("measure.tail_mass", "must lie in (0, 1)"));
        }
        let dim = spec.field.dprime();
        let half_width = match ms.half_width {
            Some(h) if !(h.is_finite() && h > 0.0) => {
                return Err(Error::config("measure.half_width", "must be positive"))
            }
            Some(h) => h,
            None => confining_half_width(&spec.potential, dim, ms.tail_mass),
        };
        let param_grid = GridSpec::new(dim, ms.res, R::lit(half_width))?;
        let prior = PriorMeasure::new(&spec.potential, &param_grid)?;
        Ok(Self {
            epsilon: R::lit(spec.epsilon),
            field: spec.field,
            potential: spec.potential,
            loss: spec.loss,
            dataset,
            grid: TimeGrid {
                t0: R::lit(spec.grid.t0),
                t_end: R::lit(spec.grid.t_end),
                nodes: spec.grid.nodes,
            },
            seed: spec.seed,
            param_grid,
            prior,
            adjoint_sign_flip: false,
        })
    }

    /// Copy with a different time grid (used by step-refinement oracles).
    pub fn with_grid(&self, grid: TimeGrid<R>) -> Self {
        Self { grid, ..self.clone() }
    }

    /// Copy on a different parameter grid.
    pub fn with_param_grid(&self, spec: GridSpec<R>) -> Result<Self> {
        let prior = PriorMeasure::new(&self.potential, &spec)?;
        Ok(Self {
            param_grid: spec,
            prior,
            ..self.clone()
        })
    }

    pub fn with_dataset(&self, dataset: Dataset<R>) -> Result<Self> {
        if dataset.d1 != self.field.d1 {
            return Err(Error::Dimension("dataset feature dimension differs from d1".into()));
        }
        self.loss.validate(dataset.d1, dataset.d2)?;
        Ok(Self { dataset, ..self.clone() })
    }

    pub fn with_epsilon(&self, epsilon: R) -> Self {
        Self { epsilon, ..self.clone() }
    }
}
