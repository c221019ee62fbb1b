use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::measure::PerturbationPath;
use crate::rng::{purpose, stream};
use crate::scalar::Real;

use super::directions::random_direction;
use super::eta::linearized_map;
use super::form::SecondOrderReport;
use super::system::LinearizedSystem;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityOptions {
    pub iters: usize,
    /// Minimum distance of every Ritz value from 1 for stable evidence.
    pub margin: f64,
    /// Relative change of the Rayleigh quotient that stops the iteration.
    pub tol: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            iters: 30,
            margin: 0.05,
            tol: 1e-4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StabilityProbe<R> {
    pub report: SecondOrderReport<R>,
    /// Rayleigh quotient `⟨Fv, v⟩` of each power iterate.
    pub history: Vec<R>,
    /// Ritz values of `F` on the span of the power iterates, ascending.
    pub ritz: Vec<f64>,
    /// `min |θ − 1|` over the Ritz values.
    pub margin: f64,
    pub converged: bool,
    /// Every sampled Ritz value stays at least the requested margin from 1.
    /// This is evidence of stability, not a certificate.
    pub stable_evidence: bool,
}

fn total_variation<R: Real>(a: &PerturbationPath<R>, b: &PerturbationPath<R>) -> R {
    a.nodes
        .iter()
        .zip(&b.nodes)
        .map(|(x, y)| {
            let d: Vec<R> = x.values.iter().zip(&y.values).map(|(&p, &q)| (p - q).abs()).collect();
            x.spec.integrate(&d)
        })
        .fold(R::zero(), |m, v| m.max(v))
}

/// Power iteration on the linearized map `F` in the `ν*`-weighted inner
/// product, followed by Rayleigh–Ritz on the span of the iterates.
pub fn stability_probe<R: Real>(sys: &LinearizedSystem<'_, R>, options: &StabilityOptions) -> Result<StabilityProbe<R>> {
    let mut rng = stream(sys.config.seed, purpose::STABILITY, 0);
    let start = random_direction(sys.path, &mut rng)?;
    stability_probe_from(sys, start, options)
}

pub fn stability_probe_from<R: Real>(
    sys: &LinearizedSystem<'_, R>,
    start: PerturbationPath<R>,
    options: &StabilityOptions,
) -> Result<StabilityProbe<R>> {
    let norm0 = sys.inner(&start, &start).sqrt();
    let mut v = start.scaled(R::one() / norm0);
    let mut basis = vec![v.clone()];
    let mut gains: Vec<R> = Vec::new();
    let mut history = Vec::new();
    let mut converged = false;
    let mut image = v.clone();
    let mut report = SecondOrderReport::default();
    for it in 0..options.iters.max(1) {
        image = linearized_map(sys, &v)?;
        let rq = sys.inner(&image, &v);
        history.push(rq);
        let gain = sys.inner(&image, &image).sqrt();
        gains.push(gain);
        if !(gain > R::lit(1e-14)) {
            converged = true;
            report.notes.push(format!("F annihilates iterate {it}"));
            break;
        }
        if it > 0 {
            let prev = history[it - 1];
            if (rq - prev).abs() <= R::lit(options.tol) * rq.abs() {
                converged = true;
                break;
            }
        }
        v = image.scaled(R::one() / gain);
        basis.push(v.clone());
    }
    if !converged {
        report
            .notes
            .push(format!("power iteration not converged after {} steps", history.len()));
    }
    let dominant = *history.last().expect("at least one iteration");
    report.dominant_eig = Some(dominant);
    report.eta_residual = Some(total_variation(&v, &image));

    // Images of the basis: F v_j = gain_j v_{j+1}; the final image is `image`.
    let m = gains.len();
    let mut images = Vec::with_capacity(m);
    for j in 0..m {
        if j + 1 < basis.len() {
            images.push(basis[j + 1].scaled(gains[j]));
        } else {
            images.push(image.clone());
        }
    }
    let ritz = ritz_values(sys, &basis[..m], &images);
    let margin = ritz.iter().map(|t| (t - 1.0).abs()).fold(f64::INFINITY, f64::min);
    Ok(StabilityProbe {
        report,
        history,
        margin,
        stable_evidence: margin >= options.margin,
        ritz,
        converged,
    })
}

fn ritz_values<R: Real>(sys: &LinearizedSystem<'_, R>, basis: &[PerturbationPath<R>], images: &[PerturbationPath<R>]) -> Vec<f64> {
    let m = basis.len();
    let g = DMatrix::from_fn(m, m, |i, j| sys.inner(&basis[i], &basis[j]).to_f64_lossy());
    let b = DMatrix::from_fn(m, m, |i, j| {
        0.5 * (sys.inner(&basis[i], &images[j]) + sys.inner(&images[i], &basis[j])).to_f64_lossy()
    });
    let ge = SymmetricEigen::new(g);
    let top = ge.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..m).filter(|&i| ge.eigenvalues[i] > 1e-10 * top).collect();
    let p = DMatrix::from_fn(m, keep.len(), |r, c| {
        let i = keep[c];
        ge.eigenvectors[(r, i)] / ge.eigenvalues[i].sqrt()
    });
    let proj = p.transpose() * b * &p;
    let proj = 0.5 * (&proj + proj.transpose());
    let mut out: Vec<f64> = SymmetricEigen::new(proj).eigenvalues.iter().copied().collect();
    out.sort_by(f64::total_cmp);
    out
}
