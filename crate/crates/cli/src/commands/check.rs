use rand::Rng as _;

use mfoc::linearization::{cross_term, random_direction, second_derivative_check, CubicPotential, LinearizedSystem};
use mfoc::measure::{pinsker_check, relative_entropy, ControlPath, GridMeasure};
use mfoc::model::{Dataset, TimeGrid};
use mfoc::optimizer::{exponential_bounds, fp_descent, picard_solve, PicardOutcome};
use mfoc::rng::{purpose, stream};
use mfoc::trajectory::{duality_residual, propagate_from, solve_flow, PathDrift, TestFunction};
use mfoc::{Config, Path};

use super::prior_path;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::RunOutput;

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Verdict = mfoc::Result<(bool, String)>;

/// `ν ∝ base · exp(β·a)` at every node with `β = 0.8 (1, −½, ¼, …)`.
fn skewed(config: &Config, base: &Path) -> mfoc::Result<Path> {
    let tilt = config
        .param_grid
        .tabulate(|a| a.iter().enumerate().map(|(i, &x)| 0.8 * (-0.5f64).powi(i as i32) * x).sum());
    let ms = base
        .grid_measures()?
        .iter()
        .map(|m| {
            let lv: Vec<f64> = m.log_values().iter().zip(&tilt).map(|(l, t)| l + t).collect();
            Ok(GridMeasure::from_log_density(config.param_grid.clone(), &lv)?.0)
        })
        .collect::<mfoc::Result<Vec<_>>>()?;
    ControlPath::from_grid(base.grid, ms)
}

/// `|a − b| / max(‖a‖∞, 1)`.
fn rel_err(analytic: &[f64], fd: &[f64]) -> f64 {
    let scale = analytic.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    analytic.iter().zip(fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}

fn central(mut f: impl FnMut(&[f64]) -> Vec<f64>, at: &[f64], h: f64) -> Vec<f64> {
    let rows = f(at).len();
    let mut jac = vec![0.0; rows * at.len()];
    let mut p = at.to_vec();
    for c in 0..at.len() {
        p[c] = at[c] + h;
        let up = f(&p);
        p[c] = at[c] - h;
        let dn = f(&p);
        p[c] = at[c];
        for r in 0..rows {
            jac[r * at.len() + c] = (up[r] - dn[r]) / (2.0 * h);
        }
    }
    jac
}

fn field_derivatives(config: &Config) -> Verdict {
    let mut rng = stream(config.seed, purpose::PROPERTY, 0);
    let (d1, dp, d2) = (config.field.d1, config.field.dprime(), config.dataset.d2);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-2.0..2.0)).collect() };
        let (x, a, y) = (draw(d1), draw(dp), draw(d2));
        let (jx, ja) = config.field.grad_field(&x, &a)?;
        let field = &config.field;
        worst = worst.max(rel_err(&jx, &central(|p| field.eval_field(p, &a).unwrap(), &x, h)));
        worst = worst.max(rel_err(&ja, &central(|p| field.eval_field(&x, p).unwrap(), &a, h)));
        let mut gl = vec![0.0; dp];
        config.potential.grad_into(&a, &mut gl);
        worst = worst.max(rel_err(&gl, &central(|p| vec![config.potential.value(p)], &a, h)));
        let grad = |p: &[f64]| {
            let mut g = vec![0.0; p.len()];
            config.potential.grad_into(p, &mut g);
            g
        };
        worst = worst.max(rel_err(&config.potential.hessian(&a), &central(grad, &a, h)));
        let (_, gx) = config.loss.eval_loss(&x, &y)?;
        worst = worst.max(rel_err(&gx, &central(|p| vec![config.loss.value(p, &y)], &x, h)));
    }
    Ok((worst <= 1e-6, format!("max rel err {worst:.2e} over 200 samples")))
}

fn adjoint_gradient(config: &Config) -> Verdict {
    let path = skewed(config, &prior_path(config))?;
    let flow = solve_flow(config, &path)?;
    let drift = PathDrift::new(config, &path)?;
    let d1 = config.field.d1;
    let h = 1e-5;
    let last = flow.nodes() - 1;
    let mut worst = 0.0f64;
    for (k, i) in [(0, 0), (last / 2, flow.n / 2), (last.saturating_sub(1), flow.n - 1)] {
        let x = flow.position(k, i).to_vec();
        let u = |p: &[f64]| vec![config.loss.value(&propagate_from(&drift, &config.grid, k, p), flow.label(i))];
        let fd = central(u, &x, h);
        let z = flow.adjoint(k, i).expect("adjoint pass has run");
        worst = worst.max(rel_err(z, &fd[..d1]));
    }
    Ok((worst <= 1e-6, format!("max rel err {worst:.2e} between Z and transported-loss gradient")))
}

fn zero_problem(run: &RunConfig, config: &Config) -> Verdict {
    if config.dataset.d1 != config.dataset.d2 {
        return Ok((true, "skipped: d1 ≠ d2".into()));
    }
    let data = Dataset::new(config.field.d1, config.field.d1, config.dataset.xs.clone(), config.dataset.xs.clone())?;
    let zero = config.with_dataset(data)?;
    let out = picard_solve(&zero, &prior_path(&zero), &run.solve)?;
    let fisher = out.report.fisher.unwrap_or(f64::INFINITY);
    let ok = out.converged && out.iterations <= 1 && out.report.j.abs() <= 1e-10 && fisher <= 1e-10;
    Ok((ok, format!("{} updates, J = {:.2e}, I = {fisher:.2e}", out.iterations, out.report.j)))
}

fn fixed_point(config: &Config, out: &PicardOutcome<f64>) -> Verdict {
    let eps2 = config.epsilon * config.epsilon;
    let fisher = out.report.fisher.unwrap_or(f64::INFINITY);
    let mut gibbs_gap = 0.0f64;
    for (m, g) in out.path.grid_measures()?.iter().zip(&out.evaluation.snapshot.gibbs) {
        gibbs_gap = gibbs_gap.max(relative_entropy(m, g)?.value);
    }
    let residual = out.report.picard_residual.unwrap_or(f64::INFINITY);
    let ok = out.converged && fisher <= 1e-6 * eps2 && gibbs_gap <= residual.max(1e-300);
    Ok((
        ok,
        format!("{} updates, residual {residual:.2e}, I/ε² = {:.2e}", out.iterations, fisher / eps2),
    ))
}

fn descent_identity(config: &Config, star: &Path) -> Verdict {
    let start = skewed(config, star)?;
    let (end, records) = fp_descent(config, &start, 5, 1e-3)?;
    let mut worst = 0.0f64;
    let mut monotone = true;
    for w in records.windows(2) {
        let i = w[0].report.fisher.unwrap_or(f64::NAN);
        let d = w[0].dj_over_h.unwrap_or(f64::NAN);
        let e = (d + i).abs() / i;
        worst = if e.is_nan() { f64::INFINITY } else { worst.max(e) };
        monotone &= w[1].report.j <= w[0].report.j + 1e-12;
    }
    let mass = end.grid_measures()?.iter().map(|m| (m.mass() - 1.0).abs()).fold(0.0, f64::max);
    let ok = worst <= 0.05 && monotone && mass <= 5e-12;
    Ok((
        ok,
        format!("max |ΔJ/h + I|/I {worst:.2e}, monotone {monotone}, mass drift {mass:.1e}"),
    ))
}

fn duality_order(config: &Config) -> Verdict {
    let d1 = config.field.d1;
    let phi = TestFunction::Sine {
        omega: vec![1.7; d1],
        phase: 0.2,
    };
    let mut res = Vec::new();
    for n in [9usize, 17, 33] {
        let cfg = config.with_grid(TimeGrid::new(config.grid.t0, config.grid.t_end, n)?);
        let path = skewed(&cfg, &prior_path(&cfg))?;
        res.push(duality_residual(&cfg, &path, &phi)?);
    }
    let orders: Vec<f64> = res.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let ok = orders.iter().all(|&o| o >= 1.8);
    Ok((ok, format!("observed orders {orders:.2?}")))
}

fn pinsker(config: &Config) -> Verdict {
    let prior = &config.prior.measure;
    let dim = prior.spec.dim;
    let mut violations = 0;
    let mut vacuous = 0;
    for s in 0..100u32 {
        let mut rng = stream(config.seed, purpose::PROPERTY, 1000 + s);
        let base = CubicPotential::random(dim, &mut rng).tabulate(&prior.spec);
        let pert = CubicPotential::random(dim, &mut rng).tabulate(&prior.spec);
        let (tb, tp): (f64, f64) = (rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
        let lv_nu: Vec<f64> = prior.log_values().iter().zip(&base).map(|(l, b)| l + tb * b).collect();
        let nu = GridMeasure::from_log_density(prior.spec.clone(), &lv_nu)?.0;
        let lv_mu: Vec<f64> = lv_nu.iter().zip(&pert).map(|(l, q)| l + tp * q).collect();
        let mu = GridMeasure::from_log_density(prior.spec.clone(), &lv_mu)?.0;
        let c = pinsker_check(&mu, &nu, s % 3, 0.25)?;
        violations += usize::from(!c.holds);
        vacuous += usize::from(c.vacuous);
    }
    Ok((violations == 0, format!("{violations} violations, {vacuous} vacuous of 100")))
}

fn second_order(config: &Config, star: &Path) -> Verdict {
    let sys = LinearizedSystem::new(config, star)?;
    let mut worst = 0.0f64;
    let mut min_form = f64::INFINITY;
    for s in 0..2u32 {
        let mut rng = stream(config.seed, purpose::PERTURBATION, s);
        let eta = random_direction(star, &mut rng)?;
        let rep = second_derivative_check(&sys, &eta, &[1e-2, 1e-3])?;
        worst = worst.max(rep.fd2_discrepancy(1e-8).unwrap_or(f64::INFINITY));
        min_form = min_form.min(rep.j_form.unwrap_or(f64::NAN));
    }
    let ok = worst <= 0.05 && min_form >= -1e-8;
    Ok((ok, format!("max |fd2 − 𝒥|/|𝒥| {worst:.2e}, min 𝒥 {min_form:.3e}")))
}

fn cross_duality(config: &Config, star: &Path) -> Verdict {
    let sys = LinearizedSystem::new(config, star)?;
    let mut rng = stream(config.seed, purpose::PERTURBATION, 100);
    let e1 = random_direction(star, &mut rng)?;
    let e2 = random_direction(star, &mut rng)?;
    let (a, b) = cross_term(&sys, &e1, &e2);
    let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
    Ok((rel <= 1e-4, format!("relative gap {rel:.2e}")))
}

fn sandwich(config: &Config, star: &Path) -> Verdict {
    let b = exponential_bounds(config, star)?;
    Ok((
        b.is_finite(),
        format!("upper {:.4}, lower {:.4}, Λ = {:.3e}", b.upper, b.lower, b.lambda()),
    ))
}

fn record(name: &'static str, v: Verdict) -> CheckOutcome {
    match v {
        Ok((passed, detail)) => CheckOutcome { name, passed, detail },
        Err(e) => CheckOutcome {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Runs every property check on `config`.
pub fn battery(run: &RunConfig, config: &Config) -> Vec<CheckOutcome> {
    let mut out = vec![
        record("field-derivatives", field_derivatives(config)),
        record("adjoint-gradient", adjoint_gradient(config)),
        record("zero-problem", zero_problem(run, config)),
        record("duality-order", duality_order(config)),
        record("pinsker", pinsker(config)),
    ];
    match picard_solve(config, &prior_path(config), &run.solve) {
        Ok(solved) => {
            out.push(record("fixed-point", fixed_point(config, &solved)));
            let star = &solved.path;
            out.push(record("descent-identity", descent_identity(config, star)));
            out.push(record("second-order", second_order(config, star)));
            out.push(record("cross-term", cross_duality(config, star)));
            out.push(record("exponential-sandwich", sandwich(config, star)));
        }
        Err(e) => out.push(record("fixed-point", Err(e))),
    }
    out
}

pub fn cmd_check(run: &RunConfig, config: &Config, out: &mut RunOutput) -> Result<(), CliError> {
    let results = battery(run, config);
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        println!(
            "{:<width$}  {}  {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    out.csv("check.csv", &["check", "status", "detail"], |w| {
        for r in &results {
            let detail = format!("\"{}\"", r.detail.replace('"', "\"\""));
            w.row(&[r.name.to_string(), if r.passed { "pass" } else { "fail" }.into(), detail])?;
        }
        Ok(())
    })?;
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(format!("failed checks: {}", failed.join(", "))))
    }
}
