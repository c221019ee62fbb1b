use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Quartic confinement `ℓ(a) = c1|a|⁴ + c2|a|²` defining the prior `ν∞ ∝ e^{-ℓ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfinementPotential {
    pub c1: f64,
    pub c2: f64,
}

impl Default for ConfinementPotential {
    fn default() -> Self {
        Self { c1: 0.25, c2: 0.5 }
    }
}

/// Value, gradient and smallest Hessian eigenvalue of `ℓ` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialEval<R> {
    pub value: R,
    pub grad: Vec<R>,
    pub hess_min_eig: R,
}

impl ConfinementPotential {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1.is_finite() && self.c1 > 0.0) {
            return Err(Error::config("potential.c1", "quartic coefficient must be > 0"));
        }
        if !(self.c2.is_finite() && self.c2 > 0.0) {
            return Err(Error::config("potential.c2", "quadratic coefficient must be > 0"));
        }
        Ok(())
    }

    /// Uniform convexity constant: `∇²ℓ(a) ⪰ c(1+|a|²) Id`.
    pub fn convexity(&self) -> f64 {
        (4.0 * self.c1).min(2.0 * self.c2)
    }

    #[inline]
    pub fn value<R: Real>(&self, a: &[R]) -> R {
        let r2 = a.iter().fold(R::zero(), |s, &v| s + v * v);
        R::lit(self.c1) * r2 * r2 + R::lit(self.c2) * r2
    }

    /// Radial form `ℓ(r)` for `|a| = r`.
    #[inline]
    pub fn radial<R: Real>(&self, r: R) -> R {
        let r2 = r * r;
        R::lit(self.c1) * r2 * r2 + R::lit(self.c2) * r2
    }

    #[inline]
    pub fn grad_into<R: Real>(&self, a: &[R], out: &mut [R]) {
        let r2 = a.iter().fold(R::zero(), |s, &v| s + v * v);
        let k = R::lit(4.0 * self.c1) * r2 + R::lit(2.0 * self.c2);
        for (o, &v) in out.iter_mut().zip(a) {
            *o = k * v;
        }
    }

    /// Dense Hessian `(4c1|a|² + 2c2) Id + 8c1 a aᵀ`, row-major.
    pub fn hessian<R: Real>(&self, a: &[R]) -> Vec<R> {
        let d = a.len();
        let r2 = a.iter().fold(R::zero(), |s, &v| s + v * v);
        let diag = R::lit(4.0 * self.c1) * r2 + R::lit(2.0 * self.c2);
        let mut h = vec![R::zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                h[i * d + j] = R::lit(8.0 * self.c1) * a[i] * a[j];
            }
            h[i * d + i] += diag;
        }
        h
    }

    /// Smallest eigenvalue of the Hessian: `4c1|a|² + 2c2` for `d ≥ 2`
    /// (directions orthogonal to `a`), `12c1 a² + 2c2` in one dimension.
    pub fn hess_min_eig<R: Real>(&self, a: &[R]) -> R {
        let r2 = a.iter().fold(R::zero(), |s, &v| s + v * v);
        let base = R::lit(4.0 * self.c1) * r2 + R::lit(2.0 * self.c2);
        if a.len() >= 2 {
            base
        } else {
            base + R::lit(8.0 * self.c1) * r2
        }
    }

    pub fn eval_potential<R: Real>(&self, a: &[R]) -> PotentialEval<R> {
        let mut grad = vec![R::zero(); a.len()];
        self.grad_into(a, &mut grad);
        PotentialEval {
            value: self.value(a),
            grad,
            hess_min_eig: self.hess_min_eig(a),
        }
    }
}
