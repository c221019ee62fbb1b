use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, Real};

use super::grid::GridMeasure;
use super::particle::ParticleMeasure;

/// Divergence value; `support_violation` marks the `+∞` sentinel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Divergence<R> {
    pub value: R,
    pub support_violation: bool,
}

impl<R: Real> Divergence<R> {
    fn finite(value: R) -> Self {
        Self {
            value,
            support_violation: false,
        }
    }

    fn infinite() -> Self {
        Self {
            value: R::infinity(),
            support_violation: true,
        }
    }
}

fn check_pair<R: Real>(mu: &GridMeasure<R>, nu: &GridMeasure<R>) -> Result<()> {
    if !mu.spec.same_layout(&nu.spec) {
        return Err(Error::Backend("measures live on different grids".into()));
    }
    Ok(())
}

fn violates_support<R: Real>(mu: &GridMeasure<R>, nu: &GridMeasure<R>) -> bool {
    mu.values
        .iter()
        .zip(&nu.values)
        .any(|(&m, &n)| m > R::zero() && n <= R::zero())
}

pub(crate) fn log_floor<R: Real>() -> R {
    R::min_positive_value().max(R::lit(1e-300))
}

/// `E(μ ‖ ν) = Σ μ log(μ/ν) · vol`.
pub fn relative_entropy<R: Real>(mu: &GridMeasure<R>, nu: &GridMeasure<R>) -> Result<Divergence<R>> {
    check_pair(mu, nu)?;
    if violates_support(mu, nu) {
        return Ok(Divergence::infinite());
    }
    let floor = log_floor::<R>();
    let terms: Vec<R> = mu
        .values
        .iter()
        .zip(&nu.values)
        .map(|(&m, &n)| {
            if m <= R::zero() {
                R::zero()
            } else {
                m * (m.max(floor).ln() - n.max(floor).ln())
            }
        })
        .collect();
    Ok(Divergence::finite(mu.spec.integrate(&terms)))
}

/// Relative Fisher information `∫ |∇ log(μ/ν)|² dμ`, gradients by central
/// differences (one-sided at the box faces).
pub fn fisher_divergence<R: Real>(mu: &GridMeasure<R>, nu: &GridMeasure<R>) -> Result<Divergence<R>> {
    check_pair(mu, nu)?;
    if violates_support(mu, nu) {
        return Ok(Divergence::infinite());
    }
    let floor = log_floor::<R>();
    let g: Vec<R> = mu
        .values
        .iter()
        .zip(&nu.values)
        .map(|(&m, &n)| m.max(floor).ln() - n.max(floor).ln())
        .collect();
    Ok(Divergence::finite(weighted_gradient_energy(mu, &g)))
}

/// `∫ |∇g|² dμ` for tabulated `g`.
pub(crate) fn weighted_gradient_energy<R: Real>(mu: &GridMeasure<R>, g: &[R]) -> R {
    let d = mu.spec.dim;
    let grad = mu.spec.gradient(g);
    let terms: Vec<R> = mu
        .values
        .iter()
        .enumerate()
        .map(|(c, &m)| {
            let sq = grad[c * d..(c + 1) * d].iter().fold(R::zero(), |s, &v| s + v * v);
            m * sq
        })
        .collect();
    mu.spec.integrate(&terms)
}

/// Absolute moment `∫ |a|^k dm`, `k ∈ {1, 2, 3, 4}`.
pub fn moment_grid<R: Real>(m: &GridMeasure<R>, k: u32) -> Result<R> {
    check_order(k)?;
    let f = m.spec.tabulate(|a| norm(a).powi(k as i32));
    Ok(m.expect(&f))
}

pub fn moment_particles<R: Real>(m: &ParticleMeasure<R>, k: u32) -> Result<R> {
    check_order(k)?;
    let terms: Vec<R> = (0..m.len()).map(|i| norm(m.particle(i)).powi(k as i32)).collect();
    Ok(pairwise_sum(&terms) * m.weight())
}

fn check_order(k: u32) -> Result<()> {
    if !(1..=4).contains(&k) {
        return Err(Error::config("moment.k", "moment order must be in 1..=4"));
    }
    Ok(())
}

#[inline]
pub(crate) fn norm<R: Real>(a: &[R]) -> R {
    a.iter().fold(R::zero(), |s, &v| s + v * v).sqrt()
}
