use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::{ControlPath, GridMeasure, ParticleMeasure};
use crate::model::{Activation, FieldFamily, ProblemConfig};
use crate::rng::{purpose, stream, Rng};
use crate::scalar::Real;
use crate::trajectory::{solve_flow, EnsembleFlow};

/// Draws `m` particles from a grid density: inverse CDF over cells, then a
/// uniform position inside the chosen cell.
pub fn sample_grid<R: Real>(g: &GridMeasure<R>, m: usize, rng: &mut Rng) -> Result<ParticleMeasure<R>> {
    let spec = &g.spec;
    let w = g.weights();
    let mut cdf = Vec::with_capacity(w.len());
    let mut acc = 0.0;
    for v in &w {
        acc += v.to_f64_lossy();
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::DegenerateMeasure("cannot sample a zero-mass grid".into()));
    }
    let h = spec.spacing.to_f64_lossy();
    let mut pts = Vec::with_capacity(m * spec.dim);
    let mut p = vec![R::zero(); spec.dim];
    for _ in 0..m {
        let u: f64 = rng.random::<f64>() * acc;
        let c = cdf.partition_point(|&x| x <= u).min(w.len() - 1);
        spec.point_into(c, &mut p);
        for &coord in &p {
            let jitter: f64 = rng.random::<f64>() - 0.5;
            pts.push(coord + R::lit(jitter * h));
        }
    }
    ParticleMeasure::new(spec.dim, pts)
}

/// The same cloud, drawn once from `g`, at every node (stream fixed by the seed).
pub fn particle_path_from_grid<R: Real>(config: &ProblemConfig<R>, g: &GridMeasure<R>, m: usize) -> Result<ControlPath<R>> {
    let mut rng = stream(config.seed, purpose::LANGEVIN_INIT, 0);
    let cloud = sample_grid(g, m, &mut rng)?;
    Ok(ControlPath::constant_particle(config.grid, &cloud))
}

/// Result of one Langevin step.
#[derive(Clone, Debug)]
pub struct LangevinStep<R> {
    pub path: ControlPath<R>,
    /// Particles that became non-finite and were redrawn from the prior.
    pub resampled: usize,
}

/// `∇_a Φ_k(a)` at each particle of node `k`.
fn potential_gradient<R: Real>(config: &ProblemConfig<R>, flow: &EnsembleFlow<R>, k: usize, cloud: &ParticleMeasure<R>) -> Vec<R> {
    let field = &config.field;
    let (d1, dp) = (field.d1, field.dprime());
    let nodes = flow.nodes();
    let (xs, ws): (&[R], &[R]) = if k + 1 < nodes {
        (flow.stage_positions(k), flow.stage_weights(k).expect("adjoint pass has run"))
    } else {
        (flow.positions(k), flow.adjoints(k).expect("adjoint pass has run"))
    };
    let np = xs.len() / d1;
    let inv_n = R::one() / R::from_usize_lossy(flow.n);
    let mut out = vec![R::zero(); cloud.len() * dp];
    if field.family == FieldFamily::ComponentwiseRidge && d1 == 1 && field.sigma == Activation::Tanh {
        // `∇_a tanh(a1 x + a2) = sech²(·) (x, 1)`, with one exponential per pair.
        let two = R::lit(2.0);
        let x_max = xs.iter().fold(R::zero(), |m, x| m.max(x.abs()));
        out.par_chunks_mut(dp).enumerate().for_each(|(m, g)| {
            let a = cloud.particle(m);
            if two * (a[0].abs() * x_max + a[1].abs()) >= R::exp_limit() {
                let mut ja = vec![R::zero(); dp];
                for p in 0..np {
                    field.jac_a_into(&xs[p..p + 1], a, &mut ja);
                    g[0] += ws[p] * ja[0];
                    g[1] += ws[p] * ja[1];
                }
            } else {
                let eb = (two * a[1]).exp();
                for p in 0..np {
                    let (_, ds, _) = Activation::Tanh.jet_from_exp((two * a[0] * xs[p]).exp() * eb);
                    let wd = ws[p] * ds;
                    g[0] += wd * xs[p];
                    g[1] += wd;
                }
            }
            g.iter_mut().for_each(|v| *v *= inv_n);
        });
        return out;
    }
    out.par_chunks_mut(dp).enumerate().for_each(|(m, g)| {
        let a = cloud.particle(m);
        let mut ja = vec![R::zero(); d1 * dp];
        for p in 0..np {
            let x = &xs[p * d1..(p + 1) * d1];
            let w = &ws[p * d1..(p + 1) * d1];
            field.jac_a_into(x, a, &mut ja);
            for j in 0..d1 {
                for q in 0..dp {
                    g[q] += w[j] * ja[j * dp + q];
                }
            }
        }
        g.iter_mut().for_each(|v| *v *= inv_n);
    });
    out
}

/// Euler–Maruyama step of the mean-field Langevin dynamics at every node:
/// `a ← a − h(ε∇ℓ(a) + ∇_aΦ_t(a)) + √(2εh) ξ`.
///
/// Noise for particle `m` at step `step` is shared by all nodes.
pub fn langevin_descent_step<R: Real>(
    config: &ProblemConfig<R>,
    path: &ControlPath<R>,
    h: R,
    step: u32,
) -> Result<LangevinStep<R>> {
    let clouds = path.particle_measures()?;
    if h == R::zero() {
        return Ok(LangevinStep {
            path: path.clone(),
            resampled: 0,
        });
    }
    let dp = config.field.dprime();
    let flow = solve_flow(config, path)?;
    let m_max = clouds.iter().map(|c| c.len()).max().unwrap_or(0);
    let mut rng = stream(config.seed, purpose::LANGEVIN_NOISE, step);
    let noise: Vec<R> = (0..m_max * dp)
        .map(|_| R::lit(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let eps = config.epsilon;
    let amp = (R::lit(2.0) * eps * h).sqrt();
    let updated: Vec<(Vec<R>, Vec<usize>)> = clouds
        .par_iter()
        .enumerate()
        .map(|(k, cloud)| {
            let grad_phi = potential_gradient(config, &flow, k, cloud);
            let mut pts = cloud.points.clone();
            let mut gl = vec![R::zero(); dp];
            let mut bad = Vec::new();
            for m in 0..cloud.len() {
                let a = &mut pts[m * dp..(m + 1) * dp];
                config.potential.grad_into(a, &mut gl);
                for q in 0..dp {
                    a[q] = a[q] - h * (eps * gl[q] + grad_phi[m * dp + q]) + amp * noise[m * dp + q];
                }
                if a.iter().any(|v| !v.is_finite()) {
                    bad.push(m);
                }
            }
            (pts, bad)
        })
        .collect();
    let mut resampled = 0;
    let mut measures = Vec::with_capacity(updated.len());
    for (k, (mut pts, bad)) in updated.into_iter().enumerate() {
        if !bad.is_empty() {
            let mut r = stream(config.seed, purpose::LANGEVIN_INIT, step.wrapping_mul(65_537).wrapping_add(k as u32 + 1));
            let fresh = sample_grid(&config.prior.measure, bad.len(), &mut r)?;
            for (j, &m) in bad.iter().enumerate() {
                pts[m * dp..(m + 1) * dp].copy_from_slice(fresh.particle(j));
            }
            resampled += bad.len();
        }
        measures.push(ParticleMeasure::new(dp, pts)?);
    }
    Ok(LangevinStep {
        path: ControlPath::from_particles(path.grid, measures)?,
        resampled,
    })
}
