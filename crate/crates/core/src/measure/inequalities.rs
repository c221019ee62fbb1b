use crate::error::{Error, Result};
use crate::model::ConfinementPotential;
use crate::scalar::Real;

use super::divergence::{norm, relative_entropy, weighted_gradient_energy};
use super::grid::{GridMeasure, GridSpec};

/// Both sides of the weighted Pinsker bound
/// `‖φ(μ−ν)‖_TV ≤ (3/2 + log ∫e^{2φ}dν)(√E + E/2)`, `φ = scale·(1+|a|^k)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PinskerCheck<R> {
    pub lhs: R,
    pub rhs: R,
    pub holds: bool,
    /// The exponential integral overflowed; the bound carries no information.
    pub vacuous: bool,
}

pub fn pinsker_check<R: Real>(
    mu: &GridMeasure<R>,
    nu: &GridMeasure<R>,
    k: u32,
    scale: R,
) -> Result<PinskerCheck<R>> {
    if k > 2 {
        return Err(Error::config("pinsker.k", "weight exponent must be 0, 1 or 2"));
    }
    let e = relative_entropy(mu, nu)?;
    let phi = mu.spec.tabulate(|a| scale * (R::one() + norm(a).powi(k as i32)));
    let tv: Vec<R> = mu
        .values
        .iter()
        .zip(&nu.values)
        .zip(&phi)
        .map(|((&m, &n), &p)| p * (m - n).abs())
        .collect();
    let lhs = mu.spec.integrate(&tv);
    let expo: Vec<R> = phi.iter().map(|&p| (R::lit(2.0) * p).exp()).collect();
    let log_int = nu.expect(&expo).ln();
    if !log_int.is_finite() || e.support_violation {
        return Ok(PinskerCheck {
            lhs,
            rhs: R::infinity(),
            holds: true,
            vacuous: true,
        });
    }
    let ent = e.value.max(R::zero());
    let rhs = (R::lit(1.5) + log_int) * (ent.sqrt() + R::lit(0.5) * ent);
    Ok(PinskerCheck {
        lhs,
        rhs,
        holds: lhs <= rhs * (R::one() + R::lit(1e-9)),
        vacuous: false,
    })
}

/// Empirical lower bound on the log-Sobolev constant of `ν`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LsiEstimate<R> {
    /// `max_f Ent_ν(f) / ∫|∇ log f|² f dν` over the evaluated trials.
    pub ratio: Option<R>,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Each trial `f` is rescaled so that `∫ f dν = 1` before use; trials whose
/// Fisher energy vanishes are skipped.
pub fn lsi_ratio<R: Real>(nu: &GridMeasure<R>, trials: &[Vec<R>]) -> Result<LsiEstimate<R>> {
    let mut best: Option<R> = None;
    let (mut evaluated, mut skipped) = (0, 0);
    for f in trials {
        if f.len() != nu.values.len() || f.iter().any(|&v| !(v > R::zero() && v.is_finite())) {
            return Err(Error::Dimension("LSI trial must be a positive grid function".into()));
        }
        let mass = nu.expect(f);
        let fnorm: Vec<R> = f.iter().map(|&v| v / mass).collect();
        let logf: Vec<R> = fnorm.iter().map(|v| v.ln()).collect();
        let flogf: Vec<R> = fnorm.iter().zip(&logf).map(|(&a, &b)| a * b).collect();
        let ent = nu.expect(&flogf);
        let tilted = GridMeasure {
            spec: nu.spec.clone(),
            values: nu.values.iter().zip(&fnorm).map(|(&n, &g)| n * g).collect(),
        };
        let fisher = weighted_gradient_energy(&tilted, &logf);
        if fisher <= R::lit(1e-14) * (R::one() + ent.abs()) {
            skipped += 1;
            continue;
        }
        evaluated += 1;
        let r = ent / fisher;
        best = Some(best.map_or(r, |b| if r > b { r } else { b }));
    }
    Ok(LsiEstimate {
        ratio: best,
        evaluated,
        skipped,
    })
}

/// Exponential tilts `exp(±β a_i)` and localized bumps at three scales; 20 trials.
pub fn default_lsi_trials<R: Real>(spec: &GridSpec<R>) -> Vec<Vec<R>> {
    let mut trials = Vec::new();
    let d = spec.dim;
    let half = spec.half_width.to_f64_lossy();
    let tilts = [0.25, -0.25, 1.0, -1.0];
    'outer: for &beta in &tilts {
        for ax in 0..d {
            if trials.len() >= 8 {
                break 'outer;
            }
            trials.push(spec.tabulate(|a| (R::lit(beta) * a[ax]).exp()));
        }
    }
    let scales = [0.25, 0.5, 1.0];
    let mut i = 0usize;
    while trials.len() < 20 {
        let s = scales[i % 3] * half / 3.0;
        let shift = [0.0, 0.5, -0.5, 1.0][(i / 3) % 4] * half / 3.0;
        let centre: Vec<f64> = (0..d).map(|ax| if ax % 2 == 0 { shift } else { -shift }).collect();
        trials.push(spec.tabulate(|a| {
            let r2 = a
                .iter()
                .zip(&centre)
                .fold(0.0, |acc, (&x, &c)| acc + (x.to_f64_lossy() - c).powi(2));
            R::lit(1.0 + 2.0 * (-r2 / (2.0 * s * s)).exp())
        }));
        i += 1;
    }
    trials
}

/// Constant `C` with `Σ_k Δt ∫|a|⁴dν_k ≤ C (1 + Σ_k Δt E(ν_k‖ν∞))`, following
/// `E(ν‖ν∞) ≥ ∫(ℓ − |a|²/2) dν − (d/2) log 2π + log z∞`.
pub fn fourth_moment_constant(potential: &ConfinementPotential, dim: usize, log_z_prior: f64, horizon: f64) -> f64 {
    let (kappa, delta) = if potential.c2 >= 0.5 {
        (potential.c1, 0.0)
    } else {
        (0.5 * potential.c1, (0.5 - potential.c2).powi(2) / (2.0 * potential.c1))
    };
    let offset = 0.5 * dim as f64 * (2.0 * std::f64::consts::PI).ln() - log_z_prior + delta;
    (offset * horizon).max(1.0) / kappa
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::grid::normalize;

    fn gaussian(spec: &GridSpec<f64>, mean: f64, sd: f64) -> GridMeasure<f64> {
        let v = spec.tabulate(|a| (-(a[0] - mean).powi(2) / (2.0 * sd * sd)).exp());
        normalize(&GridMeasure::from_values(spec.clone(), v).unwrap()).unwrap().0
    }

    #[test]
    fn pinsker_trivial_and_classical() {
        let s = GridSpec::new(1, 300, 6.0).unwrap();
        let a = gaussian(&s, 0.0, 1.0);
        let same = pinsker_check(&a, &a, 0, 0.25).unwrap();
        assert_eq!(same.lhs, 0.0);
        assert!(same.holds);
        let b = gaussian(&s, 0.7, 1.2);
        let p = pinsker_check(&b, &a, 0, 0.25).unwrap();
        assert!(p.holds && p.lhs > 0.0, "{p:?}");
        assert!(pinsker_check(&b, &a, 3, 0.25).is_err());
    }

    #[test]
    fn flat_trial_is_skipped() {
        let s = GridSpec::new(1, 100, 5.0).unwrap();
        let g = gaussian(&s, 0.0, 1.0);
        let est = lsi_ratio(&g, &[vec![1.0; 100]]).unwrap();
        assert_eq!((est.evaluated, est.skipped), (0, 1));
        assert!(est.ratio.is_none());
    }

    #[test]
    fn default_family_has_twenty_trials() {
        let s = GridSpec::<f64>::new(2, 16, 3.0).unwrap();
        let t = default_lsi_trials(&s);
        assert_eq!(t.len(), 20);
        assert!(t.iter().all(|f| f.iter().all(|&v| v > 0.0)));
    }
}
