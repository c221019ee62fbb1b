use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Bounded smooth scalar activation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Tanh,
    Logistic,
}

impl Activation {
    /// Returns `(σ(z), σ'(z), σ''(z))`.
    #[inline]
    pub fn jet<R: Real>(self, z: R) -> (R, R, R) {
        let one = R::one();
        let two = R::lit(2.0);
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                let d = one - t * t;
                (t, d, -two * t * d)
            }
            Activation::Logistic => {
                let s = if z >= R::zero() {
                    one / (one + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (one + e)
                };
                let d = s * (one - s);
                (s, d, d * (one - two * s))
            }
        }
    }

    #[inline]
    pub fn value<R: Real>(self, z: R) -> R {
        self.jet(z).0
    }

    /// `(σ, σ', σ'')` from `e = exp(k z)` with `k = 2` for tanh and `k = 1` for the logistic.
    #[inline]
    pub(crate) fn jet_from_exp<R: Real>(self, e: R) -> (R, R, R) {
        let one = R::one();
        let two = R::lit(2.0);
        let denom = one / (e + one);
        match self {
            Activation::Tanh => {
                let t = (e - one) * denom;
                let d = R::lit(4.0) * e * denom * denom;
                (t, d, -two * t * d)
            }
            Activation::Logistic => {
                let s = e * denom;
                let d = e * denom * denom;
                (s, d, d * (one - two * s))
            }
        }
    }

    pub fn sup_abs(self) -> f64 {
        1.0
    }

    pub fn sup_abs_derivative(self) -> f64 {
        match self {
            Activation::Tanh => 1.0,
            Activation::Logistic => 0.25,
        }
    }

    pub(crate) fn vanishes_at_zero(self) -> bool {
        matches!(self, Activation::Tanh)
    }
}

/// Structure of the parameterized vector field `b(x, a)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FieldFamily {
    /// `b(x, a) = σ(a1·x + a2) a0` with `a = (a0, a1, a2) ∈ R^d1 × R^d1 × R`.
    RidgeWithOuterWeight,
    /// `b_j(x, a) = σ(A_j·x + c_j)` with `a = (A, c)`, `A` stored row-major.
    #[default]
    ComponentwiseRidge,
}

/// The activation field `b : R^d1 × A → R^d1`.
///
/// All matrices are row-major. For `d1 = 1` both families place the bias
/// `a2` on the last parameter axis and the slope `a1` on the one before it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationField {
    #[serde(default)]
    pub family: FieldFamily,
    #[serde(default, rename = "activation")]
    pub sigma: Activation,
    #[serde(default = "default_d1")]
    pub d1: usize,
}

fn default_d1() -> usize {
    1
}

impl Default for ActivationField {
    fn default() -> Self {
        Self {
            family: FieldFamily::ComponentwiseRidge,
            sigma: Activation::Tanh,
            d1: 1,
        }
    }
}

impl ActivationField {
    pub fn new(family: FieldFamily, sigma: Activation, d1: usize) -> Self {
        Self { family, sigma, d1 }
    }

    /// Dimension `d'` of the parameter space.
    pub fn dprime(&self) -> usize {
        match self.family {
            FieldFamily::RidgeWithOuterWeight => 2 * self.d1 + 1,
            FieldFamily::ComponentwiseRidge => self.d1 * (self.d1 + 1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d1 == 0 {
            return Err(Error::config("field.d1", "must be at least 1"));
        }
        if self.family == FieldFamily::ComponentwiseRidge && !self.sigma.vanishes_at_zero() {
            return Err(Error::config(
                "field.activation",
                "componentwise-ridge requires σ(0) = 0 so that b(x, 0) = 0; use tanh",
            ));
        }
        Ok(())
    }

    fn check_dims<R>(&self, x: &[R], a: &[R]) -> Result<()> {
        if x.len() != self.d1 {
            return Err(Error::Dimension(format!(
                "feature has length {}, field expects d1 = {}",
                x.len(),
                self.d1
            )));
        }
        if a.len() != self.dprime() {
            return Err(Error::Dimension(format!(
                "parameter has length {}, field expects d' = {}",
                a.len(),
                self.dprime()
            )));
        }
        Ok(())
    }

    /// Checked evaluation of `b(x, a)`.
    pub fn eval_field<R: Real>(&self, x: &[R], a: &[R]) -> Result<Vec<R>> {
        self.check_dims(x, a)?;
        let mut out = vec![R::zero(); self.d1];
        self.eval_into(x, a, &mut out);
        Ok(out)
    }

    /// Checked Jacobians `(∇_x b, ∇_a b)`, shapes `d1×d1` and `d1×d'`.
    pub fn grad_field<R: Real>(&self, x: &[R], a: &[R]) -> Result<(Vec<R>, Vec<R>)> {
        self.check_dims(x, a)?;
        let d1 = self.d1;
        let mut jx = vec![R::zero(); d1 * d1];
        let mut ja = vec![R::zero(); d1 * self.dprime()];
        self.jac_x_into(x, a, &mut jx);
        self.jac_a_into(x, a, &mut ja);
        Ok((jx, ja))
    }

    #[inline]
    fn dot<R: Real>(u: &[R], v: &[R]) -> R {
        u.iter().zip(v).fold(R::zero(), |acc, (&p, &q)| acc + p * q)
    }

    pub fn eval_into<R: Real>(&self, x: &[R], a: &[R], out: &mut [R]) {
        let d1 = self.d1;
        match self.family {
            FieldFamily::RidgeWithOuterWeight => {
                let (a0, rest) = a.split_at(d1);
                let (a1, a2) = rest.split_at(d1);
                let s = self.sigma.value(Self::dot(a1, x) + a2[0]);
                for j in 0..d1 {
                    out[j] = s * a0[j];
                }
            }
            FieldFamily::ComponentwiseRidge => {
                let (m, c) = a.split_at(d1 * d1);
                for j in 0..d1 {
                    out[j] = self.sigma.value(Self::dot(&m[j * d1..(j + 1) * d1], x) + c[j]);
                }
            }
        }
    }

    /// `out[j*d1 + l] = ∂b_j/∂x_l`.
    pub fn jac_x_into<R: Real>(&self, x: &[R], a: &[R], out: &mut [R]) {
        let d1 = self.d1;
        match self.family {
            FieldFamily::RidgeWithOuterWeight => {
                let (a0, rest) = a.split_at(d1);
                let (a1, a2) = rest.split_at(d1);
                let (_, ds, _) = self.sigma.jet(Self::dot(a1, x) + a2[0]);
                for j in 0..d1 {
                    for l in 0..d1 {
                        out[j * d1 + l] = ds * a0[j] * a1[l];
                    }
                }
            }
            FieldFamily::ComponentwiseRidge => {
                let (m, c) = a.split_at(d1 * d1);
                for j in 0..d1 {
                    let row = &m[j * d1..(j + 1) * d1];
                    let (_, ds, _) = self.sigma.jet(Self::dot(row, x) + c[j]);
                    for l in 0..d1 {
                        out[j * d1 + l] = ds * row[l];
                    }
                }
            }
        }
    }

    /// `out[(j*d1 + l)*d1 + m] = ∂²b_j/∂x_l∂x_m`.
    pub fn hess_x_into<R: Real>(&self, x: &[R], a: &[R], out: &mut [R]) {
        let d1 = self.d1;
        match self.family {
            FieldFamily::RidgeWithOuterWeight => {
                let (a0, rest) = a.split_at(d1);
                let (a1, a2) = rest.split_at(d1);
                let (_, _, dds) = self.sigma.jet(Self::dot(a1, x) + a2[0]);
                for j in 0..d1 {
                    for l in 0..d1 {
                        for m in 0..d1 {
                            out[(j * d1 + l) * d1 + m] = dds * a0[j] * a1[l] * a1[m];
                        }
                    }
                }
            }
            FieldFamily::ComponentwiseRidge => {
                let (mat, c) = a.split_at(d1 * d1);
                for j in 0..d1 {
                    let row = &mat[j * d1..(j + 1) * d1];
                    let (_, _, dds) = self.sigma.jet(Self::dot(row, x) + c[j]);
                    for l in 0..d1 {
                        for m in 0..d1 {
                            out[(j * d1 + l) * d1 + m] = dds * row[l] * row[m];
                        }
                    }
                }
            }
        }
    }

    /// `out[j*d' + m] = ∂b_j/∂a_m`.
    pub fn jac_a_into<R: Real>(&self, x: &[R], a: &[R], out: &mut [R]) {
        let d1 = self.d1;
        let dp = self.dprime();
        out.iter_mut().for_each(|v| *v = R::zero());
        match self.family {
            FieldFamily::RidgeWithOuterWeight => {
                let (a0, rest) = a.split_at(d1);
                let (a1, a2) = rest.split_at(d1);
                let (s, ds, _) = self.sigma.jet(Self::dot(a1, x) + a2[0]);
                for j in 0..d1 {
                    out[j * dp + j] = s;
                    for m in 0..d1 {
                        out[j * dp + d1 + m] = ds * a0[j] * x[m];
                    }
                    out[j * dp + 2 * d1] = ds * a0[j];
                }
            }
            FieldFamily::ComponentwiseRidge => {
                let (mat, c) = a.split_at(d1 * d1);
                for j in 0..d1 {
                    let row = &mat[j * d1..(j + 1) * d1];
                    let (_, ds, _) = self.sigma.jet(Self::dot(row, x) + c[j]);
                    for m in 0..d1 {
                        out[j * dp + j * d1 + m] = ds * x[m];
                    }
                    out[j * dp + d1 * d1 + j] = ds;
                }
            }
        }
    }

    /// Growth constant `C` in `|b(x,a)| ≤ C(1+|a|)` and `|∇_x b| ≤ C(1+|a|²)`.
    pub fn growth_constant(&self) -> f64 {
        let s = self.sigma.sup_abs();
        let ds = self.sigma.sup_abs_derivative();
        let d = self.d1 as f64;
        match self.family {
            FieldFamily::RidgeWithOuterWeight => s.max(ds),
            FieldFamily::ComponentwiseRidge => (s * d.sqrt()).max(ds * d),
        }
    }
}
