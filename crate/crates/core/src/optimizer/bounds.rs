use crate::error::Result;
use crate::measure::ControlPath;
use crate::model::ProblemConfig;
use crate::scalar::Real;

/// Two-sided exponential envelope of a grid path.
///
/// `upper = max_{t,a} [log ν_t(a) + ℓ(a)/2]` and
/// `lower = max_{t,a} [−log ν_t(a) − 2ℓ(a)]`, so that
/// `e^{−lower − 2ℓ} ≤ ν_t ≤ e^{upper − ℓ/2}` on the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentialBounds<R> {
    pub upper: R,
    pub lower: R,
}

impl<R: Real> ExponentialBounds<R> {
    /// Single constant `Λ = exp(max(upper, lower))` valid for both sides.
    pub fn lambda(&self) -> R {
        self.upper.max(self.lower).exp()
    }

    pub fn is_finite(&self) -> bool {
        self.upper.is_finite() && self.lower.is_finite()
    }
}

pub fn exponential_bounds<R: Real>(config: &ProblemConfig<R>, path: &ControlPath<R>) -> Result<ExponentialBounds<R>> {
    let ell = config.param_grid.tabulate(|a| config.potential.value(a));
    let half = R::lit(0.5);
    let two = R::lit(2.0);
    let mut upper = R::neg_infinity();
    let mut lower = R::neg_infinity();
    for m in path.grid_measures()? {
        for (&lv, &l) in m.log_values().iter().zip(&ell) {
            upper = upper.max(lv + half * l);
            lower = lower.max(-lv - two * l);
        }
    }
    Ok(ExponentialBounds { upper, lower })
}
