//! Random smooth directions on the parameter grid: cubic potentials in `a`
//! with a smooth time profile.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::measure::{ControlPath, GridMeasure, GridSpec, PerturbationPath, SignedGrid};
use crate::rng::Rng;
use crate::scalar::Real;

/// Time profile multiplying a potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeProfile {
    Constant,
    /// `exp(−(t − centre)² / (2 width²))`.
    Bump { centre: f64, width: f64 },
    /// `cos(omega t + phase)`.
    Wave { omega: f64, phase: f64 },
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Bump { centre, width } => (-(t - centre).powi(2) / (2.0 * width * width)).exp(),
            TimeProfile::Wave { omega, phase } => (omega * t + phase).cos(),
        }
    }
}

/// Polynomial of total degree ≤ 3 without constant term, in one or two
/// parameter coordinates, with standard normal coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicPotential {
    pub dim: usize,
    /// Exponent pairs and coefficients.
    pub terms: Vec<([u32; 2], f64)>,
}

impl CubicPotential {
    pub fn random(dim: usize, rng: &mut Rng) -> Self {
        let mut terms = Vec::new();
        for deg in 1..=3u32 {
            for p in 0..=deg {
                let q = deg - p;
                if dim == 1 && q > 0 {
                    continue;
                }
                let c: f64 = StandardNormal.sample(rng);
                terms.push(([p, q], c));
            }
        }
        Self { dim, terms }
    }

    pub fn value(&self, a: &[f64]) -> f64 {
        let a1 = a.get(1).copied().unwrap_or(0.0);
        self.terms
            .iter()
            .map(|&([p, q], c)| c * a[0].powi(p as i32) * a1.powi(q as i32))
            .sum()
    }

    pub fn tabulate<R: Real>(&self, spec: &GridSpec<R>) -> Vec<R> {
        spec.tabulate(|a| {
            let af: Vec<f64> = a.iter().map(|v| v.to_f64_lossy()).collect();
            R::lit(self.value(&af))
        })
    }
}

/// Zero-mass direction `η_k = ν_k (ψ_k − ∫ψ_k dν_k)` with `ψ_k = p(τ_k) ψ`,
/// scaled so that `sup |η_k / ν_k| = 1` over all nodes. Then `ν + λη` stays
/// nonnegative for `|λ| < 1`.
pub fn centred_direction<R: Real>(
    base: &ControlPath<R>,
    psi: &CubicPotential,
    profile: TimeProfile,
) -> Result<PerturbationPath<R>> {
    let ms = base.grid_measures()?;
    let spec = &ms[0].spec;
    let table = psi.tabulate(spec);
    let mut nodes = Vec::with_capacity(ms.len());
    let mut sup = R::zero();
    for (k, m) in ms.iter().enumerate() {
        let p = R::lit(profile.value(base.grid.time(k).to_f64_lossy()));
        let rel = centred_ratio(m, &table);
        for &r in &rel {
            sup = sup.max((p * r).abs());
        }
        let values = m.values.iter().zip(&rel).map(|(&v, &r)| v * p * r).collect();
        nodes.push(SignedGrid { spec: spec.clone(), values });
    }
    let mut eta = PerturbationPath::new(base.grid, nodes)?;
    if sup > R::zero() {
        eta = eta.scaled(R::one() / sup);
    }
    Ok(eta)
}

fn centred_ratio<R: Real>(m: &GridMeasure<R>, table: &[R]) -> Vec<R> {
    let c = m.expect(table) / m.mass();
    table.iter().map(|&t| t - c).collect()
}

/// Random centred direction: cubic potential with a random wave profile.
pub fn random_direction<R: Real>(base: &ControlPath<R>, rng: &mut Rng) -> Result<PerturbationPath<R>> {
    let dim = base.param_dim();
    let psi = CubicPotential::random(dim, rng);
    let horizon = base.grid.horizon().to_f64_lossy();
    let profile = TimeProfile::Wave {
        omega: rng.random_range(0.0..2.0 * std::f64::consts::PI) / horizon,
        phase: rng.random_range(0.0..2.0 * std::f64::consts::PI),
    };
    centred_direction(base, &psi, profile)
}
