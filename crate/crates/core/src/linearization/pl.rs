use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::measure::{path_relative_entropy, ControlPath, GridMeasure};
use crate::model::ProblemConfig;
use crate::optimizer::{evaluate, total_cost};
use crate::rng::{purpose, stream};
use crate::scalar::Real;

use super::directions::{CubicPotential, TimeProfile};
use super::form::SecondOrderReport;

/// Threshold on `J − J*` below which a sample carries no PL information.
pub const PL_GAP_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlOptions {
    /// Entropy-ball radius `r`; samples satisfy `∫E(ν‖ν*) dt = U r²`.
    pub radius: f64,
    pub samples: usize,
}

impl Default for PlOptions {
    fn default() -> Self {
        Self {
            radius: 0.1,
            samples: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlSample<R> {
    pub index: usize,
    pub profile: TimeProfile,
    pub theta: R,
    pub entropy: R,
    pub j: R,
    pub fisher: R,
    /// `I / (J − J*)`, absent when `J − J* ≤ 1e−12`.
    pub ratio: Option<R>,
}

#[derive(Clone, Debug)]
pub struct PlScan<R> {
    pub j_star: R,
    pub samples: Vec<PlSample<R>>,
    pub report: SecondOrderReport<R>,
}

impl<R: Real> PlScan<R> {
    /// `min I/(J − J*)` over the first `count` samples.
    pub fn c_emp(&self, count: usize) -> Option<R> {
        self.samples
            .iter()
            .take(count)
            .filter_map(|s| s.ratio)
            .fold(None, |acc: Option<R>, r| Some(acc.map_or(r, |a| a.min(r))))
    }
}

/// Gibbs tilt `ν_k ∝ ν*_k exp(θ p(τ_k) ψ)`.
pub fn tilt<R: Real>(base: &ControlPath<R>, psi: &CubicPotential, profile: TimeProfile, theta: R) -> Result<ControlPath<R>> {
    let ms = base.grid_measures()?;
    let table = psi.tabulate(&ms[0].spec);
    let measures = ms
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let s = theta * R::lit(profile.value(base.grid.time(k).to_f64_lossy()));
            let lv: Vec<R> = m.log_values().iter().zip(&table).map(|(&l, &p)| l + s * p).collect();
            Ok(GridMeasure::from_log_density(m.spec.clone(), &lv)?.0)
        })
        .collect::<Result<Vec<_>>>()?;
    ControlPath::from_grid(base.grid, measures)
}

/// Tilt strength whose path entropy relative to `base` equals `target`.
///
/// The entropy grows like `θ²` for small tilts, so the root of
/// `√E(θ) − √target` is found by secant steps kept inside a bracket, with
/// bisection whenever a step would leave it.
pub fn calibrate_tilt<R: Real>(base: &ControlPath<R>, psi: &CubicPotential, profile: TimeProfile, target: R) -> Result<R> {
    if !(target > R::zero()) {
        return Ok(R::zero());
    }
    let goal = target.sqrt();
    let g = |theta: R| -> Result<R> { Ok(path_relative_entropy(&tilt(base, psi, profile, theta)?, base)?.max(R::zero()).sqrt() - goal) };
    let (mut lo, mut g_lo) = (R::zero(), -goal);
    let mut hi = R::lit(1e-3);
    let mut g_hi = g(hi)?;
    let mut doublings = 0;
    while g_hi < R::zero() {
        // Linear extrapolation of √E, capped at a fourfold step.
        let slope = (g_hi - g_lo) / (hi - lo);
        let next = if slope > R::zero() { hi - g_hi / slope } else { hi * R::lit(2.0) };
        let next = next.min(hi * R::lit(4.0)).max(hi * R::lit(1.1));
        (lo, g_lo) = (hi, g_hi);
        hi = next;
        g_hi = g(hi)?;
        doublings += 1;
        if doublings > 80 {
            return Ok(hi);
        }
    }
    for _ in 0..100 {
        if hi - lo <= R::lit(1e-12) * hi {
            break;
        }
        let secant = hi - g_hi * (hi - lo) / (g_hi - g_lo);
        let mid = R::lit(0.5) * (lo + hi);
        let width = hi - lo;
        let next = if secant > lo && secant < hi { secant } else { mid };
        let g_next = g(next)?;
        if g_next.abs() <= R::lit(1e-13) * goal {
            return Ok(next);
        }
        if g_next < R::zero() {
            (lo, g_lo) = (next, g_next);
        } else {
            (hi, g_hi) = (next, g_next);
        }
        // A secant step that barely shrank the bracket is followed by a bisection.
        if hi - lo > R::lit(0.5) * width {
            let mid = R::lit(0.5) * (lo + hi);
            let g_mid = g(mid)?;
            if g_mid < R::zero() {
                (lo, g_lo) = (mid, g_mid);
            } else {
                (hi, g_hi) = (mid, g_mid);
            }
        }
    }
    Ok(R::lit(0.5) * (lo + hi))
}

/// Samples `S` Gibbs tilts of `ν*` inside the entropy ball of radius `r`
/// and reports the smallest `I/(J − J*)`. Sample `s` depends only on the
/// seed and `s`, so a larger scan extends a smaller one.
pub fn pl_scan<R: Real>(config: &ProblemConfig<R>, nu_star: &ControlPath<R>, options: &PlOptions) -> Result<PlScan<R>> {
    let j_star = total_cost(config, nu_star)?.j;
    let dim = nu_star.param_dim();
    let horizon = nu_star.grid.horizon().to_f64_lossy();
    let t0 = nu_star.grid.t0.to_f64_lossy();
    let r2 = R::lit(options.radius * options.radius);
    let mut samples = Vec::with_capacity(options.samples);
    for s in 0..options.samples {
        let mut rng = stream(config.seed, purpose::PL_SCAN, s as u32);
        let psi = CubicPotential::random(dim, &mut rng);
        let profile = if rng.random_bool(0.5) {
            TimeProfile::Constant
        } else {
            TimeProfile::Bump {
                centre: t0 + horizon * rng.random_range(0.0..1.0),
                width: horizon * rng.random_range(0.1..0.3),
            }
        };
        let u: f64 = rng.random_range(0.1..1.0);
        let theta = calibrate_tilt(nu_star, &psi, profile, R::lit(u) * r2)?;
        let path = tilt(nu_star, &psi, profile, theta)?;
        let entropy = path_relative_entropy(&path, nu_star)?;
        let report = evaluate(config, &path)?.report;
        let (j, fisher) = (report.j, report.fisher.expect("evaluate fills the Fisher functional"));
        let gap = j - j_star;
        let ratio = (gap > R::lit(PL_GAP_FLOOR)).then(|| fisher / gap);
        samples.push(PlSample {
            index: s,
            profile,
            theta,
            entropy,
            j,
            fisher,
            ratio,
        });
    }
    let mut report = SecondOrderReport::default();
    let scan = PlScan {
        j_star,
        samples,
        report: SecondOrderReport::default(),
    };
    report.pl_ratio = scan.c_emp(usize::MAX);
    let skipped = scan.samples.iter().filter(|s| s.ratio.is_none()).count();
    if skipped > 0 {
        report
            .notes
            .push(format!("{skipped} of {} samples within 1e-12 of J*", scan.samples.len()));
    }
    if report.pl_ratio.is_none() {
        report.notes.push("no informative samples".into());
    }
    Ok(PlScan { report, ..scan })
}
