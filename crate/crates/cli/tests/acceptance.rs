//! Acceptance battery at desk scale. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::cell::OnceCell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path as FsPath;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng as _;
use serde_json::Value;

use mfoc::linearization::{
    cross_term, pl_scan, random_direction, rho_action, second_derivative_check, solve_v, CubicPotential,
    LinearizedSystem, PlOptions,
};
use mfoc::measure::{pinsker_check, relative_entropy, ControlPath, GridMeasure, GridSpec};
use mfoc::model::{ProblemSpec, SyntheticTarget, DatasetSpec, TimeGrid};
use mfoc::optimizer::{
    exponential_bounds, fp_descent, gibbs_map, langevin_descent_step, particle_path_from_grid, picard_solve,
    PicardOptions,
};
use mfoc::rng::{purpose, stream};
use mfoc::trajectory::{
    backward_solve, duality_residual, forward_solve, propagate_from, EnsembleFlow, PathDrift, TestFunction,
};
use mfoc::{Config, Path};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Desk {
    config: Config,
    star: OnceCell<Path>,
}

impl Desk {
    fn new() -> Self {
        Self {
            config: ProblemSpec::default().build().expect("desk problem builds"),
            star: OnceCell::new(),
        }
    }

    fn prior(&self) -> Path {
        ControlPath::constant_grid(self.config.grid, &self.config.prior.measure)
    }

    /// Converged minimizer, solved once and shared.
    fn star(&self) -> &Path {
        self.star.get_or_init(|| {
            let out = picard_solve(&self.config, &self.prior(), &PicardOptions::default()).unwrap();
            assert!(out.converged, "desk Picard did not converge");
            out.path
        })
    }
}

fn unit_floor_rel(fd: &[f64], an: &[f64]) -> f64 {
    let scale = an.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    fd.iter().zip(an).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}

/// Row-major Jacobian `∂f_r/∂z_c` by central differences.
fn jacobian(f: impl Fn(&[f64]) -> Vec<f64>, at: &[f64], h: f64) -> Vec<f64> {
    let rows = f(at).len();
    let mut out = vec![0.0; rows * at.len()];
    let mut z = at.to_vec();
    for c in 0..at.len() {
        z[c] = at[c] + h;
        let up = f(&z);
        z[c] = at[c] - h;
        let dn = f(&z);
        z[c] = at[c];
        for r in 0..rows {
            out[r * at.len() + c] = (up[r] - dn[r]) / (2.0 * h);
        }
    }
    out
}

fn tilted(config: &Config, base: &Path, log_tilt: impl Fn(&[f64]) -> f64) -> Path {
    let tilt = config.param_grid.tabulate(log_tilt);
    let ms = base
        .grid_measures()
        .unwrap()
        .iter()
        .map(|m| {
            let lv: Vec<f64> = m.log_values().iter().zip(&tilt).map(|(l, t)| l + t).collect();
            GridMeasure::from_log_density(config.param_grid.clone(), &lv).unwrap().0
        })
        .collect();
    ControlPath::from_grid(base.grid, ms).unwrap()
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn orders(errs: &[f64]) -> Vec<f64> {
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn gradients(desk: &Desk) -> Outcome {
    let c = &desk.config;
    let mut rng = stream(c.seed, purpose::PROPERTY, 0);
    let h = 1e-5;
    let mut worst = [0.0f64; 5];
    for _ in 0..1000 {
        let x: Vec<f64> = (0..c.field.d1).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..c.dataset.d2).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a: Vec<f64> = (0..c.field.dprime()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (jx, ja) = c.field.grad_field(&x, &a).unwrap();
        worst[0] = worst[0].max(unit_floor_rel(&jacobian(|z| c.field.eval_field(z, &a).unwrap(), &x, h), &jx));
        worst[1] = worst[1].max(unit_floor_rel(&jacobian(|z| c.field.eval_field(&x, z).unwrap(), &a, h), &ja));
        let mut g = vec![0.0; a.len()];
        c.potential.grad_into(&a, &mut g);
        worst[2] = worst[2].max(unit_floor_rel(&jacobian(|z| vec![c.potential.value(z)], &a, h), &g));
        let grad = |z: &[f64]| {
            let mut g = vec![0.0; z.len()];
            c.potential.grad_into(z, &mut g);
            g
        };
        worst[3] = worst[3].max(unit_floor_rel(&jacobian(grad, &a, h), &c.potential.hessian(&a)));
        let (_, gl) = c.loss.eval_loss(&x, &y).unwrap();
        worst[4] = worst[4].max(unit_floor_rel(&jacobian(|z| vec![c.loss.value(z, &y)], &x, h), &gl));
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    ensure(
        max <= 1e-6,
        format!(
            "1000 samples; max rel err ∇x b {:.1e}, ∇a b {:.1e}, ∇ℓ {:.1e}, ∇²ℓ {:.1e}, ∇L {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

fn zero_problem(_: &Desk) -> Outcome {
    let mut spec = ProblemSpec::default();
    if let DatasetSpec::Synthetic { target, .. } = &mut spec.dataset {
        *target = SyntheticTarget::Identity;
    }
    let config: Config = spec.build().unwrap();
    let prior = ControlPath::constant_grid(config.grid, &config.prior.measure);
    let out = picard_solve(&config, &prior, &PicardOptions::default()).unwrap();
    let fisher = out.report.fisher.unwrap();
    let mut gap = 0.0f64;
    for m in out.path.grid_measures().unwrap() {
        for (a, b) in m.values.iter().zip(&config.prior.measure.values) {
            gap = gap.max((a - b).abs());
        }
    }
    ensure(
        out.converged && out.iterations <= 1 && out.report.j <= 1e-10 && fisher <= 1e-10 && gap <= 1e-10,
        format!("{} updates, J {:.1e}, I {fisher:.1e}, sup |ν* − ν∞| {gap:.1e}", out.iterations, out.report.j),
    )
}

fn fixed_point(desk: &Desk) -> Outcome {
    let c = &desk.config;
    let out = picard_solve(c, &desk.prior(), &PicardOptions::default()).unwrap();
    let residual = out.report.picard_residual.unwrap();
    let fisher = out.report.fisher.unwrap();
    let eps2 = c.epsilon * c.epsilon;
    let (snap, _) = gibbs_map(c, &out.path).unwrap();
    if out.converged {
        let _ = desk.star.set(out.path.clone());
    }
    let mut invariance = 0.0f64;
    for (m, g) in out.path.grid_measures().unwrap().iter().zip(&snap.gibbs) {
        invariance = invariance.max(relative_entropy(m, g).unwrap().value);
    }
    ensure(
        out.converged && out.iterations <= 500 && residual <= 1e-8 && fisher <= 1e-6 * eps2 && invariance <= 1e-8,
        format!(
            "{} updates, residual {residual:.1e}, I/ε² {:.1e}, max E(ν*‖Γ[ν*]) {invariance:.1e}",
            out.iterations,
            fisher / eps2
        ),
    )
}

fn descent_identity(desk: &Desk) -> Outcome {
    let c = &desk.config;
    let start = tilted(c, desk.star(), |a| 0.3 * a[0] - 0.2 * a[1] + 0.3 * a[0] * a[1]);
    let (_, records) = fp_descent(c, &start, 100, 1e-3).unwrap();
    let mut hits = 0;
    let mut worst = 0.0f64;
    for r in &records[..records.len() - 1] {
        let i = r.report.fisher.unwrap();
        let e = (r.dj_over_h.unwrap() + i).abs() / i;
        worst = worst.max(e);
        hits += usize::from(e <= 0.05);
    }
    let monotone = records.windows(2).all(|w| w[1].report.j <= w[0].report.j + 1e-12);
    let steps = records.len() - 1;
    ensure(
        steps == 100 && hits as f64 >= 0.95 * steps as f64 && monotone,
        format!("{hits}/{steps} steps within 5%, worst {worst:.2e}, monotone {monotone}"),
    )
}

fn ode_order(desk: &Desk) -> Outcome {
    let base = &desk.config;
    let spec = &base.param_grid;
    let lv = spec.tabulate(|a| -((a[0] - 1.2).powi(2) + (a[1] - 0.6).powi(2)) / 0.5);
    let m = GridMeasure::from_log_density(spec.clone(), &lv).unwrap().0;
    let solve = |nodes: usize| -> EnsembleFlow<f64> {
        let c = base.with_grid(TimeGrid::new(base.grid.t0, base.grid.t_end, nodes).unwrap());
        let path = ControlPath::constant_grid(c.grid, &m);
        backward_solve(&c, forward_solve(&c, &path).unwrap()).unwrap()
    };
    let (mut fwd, mut bwd) = (Vec::new(), Vec::new());
    for nodes in [9usize, 17, 33] {
        let coarse = solve(nodes);
        let fine = solve(16 * (nodes - 1) + 1);
        let (mut ex, mut ez) = (0.0f64, 0.0f64);
        for k in 0..nodes {
            for i in 0..coarse.n {
                ex = ex.max((coarse.position(k, i)[0] - fine.position(16 * k, i)[0]).abs());
                ez = ez.max((coarse.adjoint(k, i).unwrap()[0] - fine.adjoint(16 * k, i).unwrap()[0]).abs());
            }
        }
        fwd.push(ex);
        bwd.push(ez);
    }
    let (of, ob) = (orders(&fwd), orders(&bwd));
    ensure(
        of.iter().chain(&ob).all(|&o| o >= 3.7),
        format!("forward orders {of:.2?}, backward orders {ob:.2?}"),
    )
}

fn duality(desk: &Desk) -> Outcome {
    let base = &desk.config;
    let phi = TestFunction::Sine {
        omega: vec![1.7; base.field.d1],
        phase: 0.2,
    };
    let mut res = Vec::new();
    for nodes in [9usize, 17, 33] {
        let c = base.with_grid(TimeGrid::new(base.grid.t0, base.grid.t_end, nodes).unwrap());
        let prior = ControlPath::constant_grid(c.grid, &c.prior.measure);
        let path = tilted(&c, &prior, |a| 0.8 * a[0] - 0.4 * a[1]);
        res.push(duality_residual(&c, &path, &phi).unwrap());
    }
    let o = orders(&res);
    ensure(o.iter().all(|&o| o >= 1.8), format!("residuals {}, orders {o:.2?}", sci(&res)))
}

fn linearization(desk: &Desk) -> Outcome {
    let c = &desk.config;
    let star = desk.star();
    let sys = LinearizedSystem::new(c, star).unwrap();
    let eta = random_direction(star, &mut stream(c.seed, purpose::PERTURBATION, 0)).unwrap();
    let lambdas = [1e-2, 1e-3];

    let tangent = sys.tangent(&eta).unwrap();
    let phi = TestFunction::Sine {
        omega: vec![1.3; c.field.d1],
        phase: 0.2,
    };
    let k = c.grid.nodes / 2;
    let mean_phi = |flow: &EnsembleFlow<f64>| {
        (0..flow.n).map(|i| phi.value(flow.position(k, i), flow.label(i))).sum::<f64>() / flow.n as f64
    };
    let exact = rho_action(&sys.flow, &tangent, &phi, k);
    let base = mean_phi(&sys.flow);
    let rho_err: Vec<f64> = lambdas
        .iter()
        .map(|&l| {
            let flow = forward_solve(c, &eta.perturb(star, l).unwrap()).unwrap();
            ((mean_phi(&flow) - base) / l - exact).abs()
        })
        .collect();

    let v = solve_v(&sys, &eta).unwrap();
    let drift0 = PathDrift::new(c, star).unwrap();
    let (kv, iv) = (c.grid.nodes / 4, sys.flow.n / 3);
    let u = |drift: &PathDrift<f64>| {
        let end = propagate_from(drift, &c.grid, kv, sys.flow.position(kv, iv));
        c.loss.value(&end, sys.flow.label(iv))
    };
    let u0 = u(&drift0);
    let v_err: Vec<f64> = lambdas
        .iter()
        .map(|&l| {
            let drift = PathDrift::new(c, &eta.perturb(star, l).unwrap()).unwrap();
            ((u(&drift) - u0) / l - v.value(kv, iv)).abs()
        })
        .collect();

    let (r1, r2) = (rho_err[0] / rho_err[1], v_err[0] / v_err[1]);
    ensure(
        (8.0..=12.0).contains(&r1) && (8.0..=12.0).contains(&r2),
        format!("ρ error ratio {r1:.2} ({}), v error ratio {r2:.2} ({})", sci(&rho_err), sci(&v_err)),
    )
}

fn second_order(desk: &Desk) -> Outcome {
    let c = &desk.config;
    let star = desk.star();
    let sys = LinearizedSystem::new(c, star).unwrap();
    let mut worst = 0.0f64;
    let mut forms = Vec::new();
    for s in 0..20 {
        let eta = random_direction(star, &mut stream(c.seed, purpose::PERTURBATION, 100 + s)).unwrap();
        let rep = second_derivative_check(&sys, &eta, &[1e-2, 1e-3]).unwrap();
        worst = worst.max(rep.fd2_discrepancy(1e-8).unwrap_or(f64::INFINITY));
        forms.push(rep.j_form.unwrap_or(f64::NAN));
    }
    let scale = forms.iter().fold(0.0f64, |m, f| m.max(f.abs()));
    let min = forms.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure(
        worst <= 0.05 && min >= -1e-8 * scale,
        format!("20 directions; max |fd2 − 𝒥|/|𝒥| {worst:.2e}, min 𝒥 {min:.3e} (scale {scale:.3e})"),
    )
}

fn cross(desk: &Desk) -> Outcome {
    let c = &desk.config;
    let star = desk.star();
    let sys = LinearizedSystem::new(c, star).unwrap();
    let mut worst = 0.0f64;
    for s in 0..10 {
        let mut rng = stream(c.seed, purpose::PERTURBATION, 200 + s);
        let e1 = random_direction(star, &mut rng).unwrap();
        let e2 = random_direction(star, &mut rng).unwrap();
        let (a, b) = cross_term(&sys, &e1, &e2);
        worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1e-300));
    }
    ensure(worst <= 1e-4, format!("10 pairs; max relative gap {worst:.2e}"))
}

fn pl_evidence(desk: &Desk) -> Outcome {
    let c = &desk.config;
    let opts = PlOptions {
        radius: 0.1,
        samples: 400,
    };
    let scan = pl_scan(c, desk.star(), &opts).unwrap();
    let (Some(c200), Some(c400)) = (scan.c_emp(200), scan.c_emp(400)) else {
        return Err("no informative samples".into());
    };
    let shift = (c200 - c400).abs() / c200;
    let consistent = scan
        .samples
        .iter()
        .all(|s| s.fisher >= c400 * (s.j - scan.j_star) - 1e-12 * s.fisher.abs());
    let inside = scan.samples.iter().all(|s| s.entropy <= 1.0e-2 * (1.0 + 1e-9));
    ensure(
        c400 > 0.0 && shift <= 0.2 && consistent && inside,
        format!("c_emp(200) {c200:.4}, c_emp(400) {c400:.4}, shift {:.1}%", 100.0 * shift),
    )
}

fn pinsker(desk: &Desk) -> Outcome {
    let prior = &desk.config.prior.measure;
    let spec = &prior.spec;
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    for s in 0..100u32 {
        let mut rng = stream(desk.config.seed, purpose::PROPERTY, 1000 + s);
        let p = CubicPotential::random(spec.dim, &mut rng).tabulate(spec);
        let q = CubicPotential::random(spec.dim, &mut rng).tabulate(spec);
        let (tp, tq): (f64, f64) = (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
        let lv_nu: Vec<f64> = prior.log_values().iter().zip(&p).map(|(l, v)| l + tp * v).collect();
        let nu = GridMeasure::from_log_density(spec.clone(), &lv_nu).unwrap().0;
        let lv_mu: Vec<f64> = lv_nu.iter().zip(&q).map(|(l, v)| l + tq * v).collect();
        let mu = GridMeasure::from_log_density(spec.clone(), &lv_mu).unwrap().0;
        let check = pinsker_check(&mu, &nu, s % 3, 0.25).unwrap();
        violations += usize::from(!check.holds);
        if !check.vacuous {
            tightest = tightest.min(check.rhs - check.lhs);
        }
    }
    ensure(violations == 0, format!("100 pairs, {violations} violations, min slack {tightest:.2e}"))
}

fn sandwich(desk: &Desk) -> Outcome {
    let c = &desk.config;
    let coarse = exponential_bounds(c, desk.star()).unwrap();
    let spec = GridSpec::new(2, 2 * c.param_grid.res, c.param_grid.half_width).unwrap();
    let fine_cfg = c.with_param_grid(spec).unwrap();
    let prior = ControlPath::constant_grid(fine_cfg.grid, &fine_cfg.prior.measure);
    let out = picard_solve(&fine_cfg, &prior, &PicardOptions::default()).unwrap();
    let fine = exponential_bounds(&fine_cfg, &out.path).unwrap();
    let du = (coarse.upper - fine.upper).abs() / fine.upper.abs();
    let dl = (coarse.lower - fine.lower).abs() / fine.lower.abs();
    ensure(
        out.converged && coarse.is_finite() && fine.is_finite() && du < 0.05 && dl < 0.05,
        format!(
            "upper {:.4} → {:.4} ({:.2}%), lower {:.4} → {:.4} ({:.2}%)",
            coarse.upper,
            fine.upper,
            100.0 * du,
            coarse.lower,
            fine.lower,
            100.0 * dl
        ),
    )
}

fn langevin_vs_grid(desk: &Desk) -> Outcome {
    let c = &desk.config;
    let (steps, h, m) = (100usize, 2e-3, 2000usize);
    let (grid_end, _) = fp_descent(c, &desk.prior(), steps, h).unwrap();
    let mut path = particle_path_from_grid(c, &c.prior.measure, m).unwrap();
    for s in 0..steps {
        path = langevin_descent_step(c, &path, h, s as u32).unwrap().path;
    }
    let coords: Vec<Vec<f64>> = (0..2).map(|q| c.param_grid.tabulate(|a| a[q])).collect();
    let mut worst = 0.0f64;
    for (g, cloud) in grid_end.grid_measures().unwrap().iter().zip(path.particle_measures().unwrap()) {
        let w: Vec<f64> = g.values.iter().map(|v| v * g.spec.cell_volume).collect();
        let (pm, pv) = (cloud.mean(), cloud.variance());
        for q in 0..2 {
            let mean: f64 = w.iter().zip(&coords[q]).map(|(w, a)| w * a).sum();
            let var: f64 = w.iter().zip(&coords[q]).map(|(w, a)| w * (a - mean).powi(2)).sum();
            let z_mean = (pm[q] - mean).abs() / (pv[q] / m as f64).sqrt();
            let z_var = (pv[q] - var).abs() / (pv[q] * (2.0 / m as f64).sqrt());
            worst = worst.max(z_mean).max(z_var);
        }
    }
    ensure(
        worst <= 3.0,
        format!("{steps} steps of h = {h}, M = {m}; worst node-wise z-score {worst:.2}"),
    )
}

fn digests(dir: &FsPath) -> Vec<(String, String)> {
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| (f["name"].as_str().unwrap().into(), f["sha256"].as_str().unwrap().into()))
        .collect()
}

fn determinism(_: &Desk) -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = FsPath::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/small.json");
    let commands: [&[&str]; 6] = [
        &["solve"],
        &["descent", "--steps", "20"],
        &["descent", "--backend", "particle", "--steps", "5", "--set", "descent.particles=200"],
        &["stability"],
        &["pl-scan", "--set", "pl.samples=20"],
        &["check"],
    ];
    let mut files = 0;
    for (n, args) in commands.iter().enumerate() {
        let mut runs = Vec::new();
        for (r, threads) in ["1", "1", "4"].iter().enumerate() {
            let out = tmp.path().join(format!("{n}-{r}"));
            let status = Command::new(env!("CARGO_BIN_EXE_mfoc"))
                .args(*args)
                .args(["--config", fixture.to_str().unwrap(), "--threads", threads, "--out"])
                .arg(&out)
                .output()
                .unwrap()
                .status;
            if !status.success() {
                return Err(format!("`{}` exited with {status}", args.join(" ")));
            }
            runs.push(digests(&out));
        }
        if runs[1] != runs[0] || runs[2] != runs[0] {
            return Err(format!("`{}` outputs differ between runs", args.join(" ")));
        }
        files += runs[0].len();
    }
    Ok(format!("6 commands × 3 runs (threads 1, 1, 4), {files} files byte-identical"))
}

type Criterion = (&'static str, Duration, fn(&Desk) -> Outcome);

fn main() -> ExitCode {
    let min = |m: u64| Duration::from_secs(60 * m);
    let criteria: [Criterion; 14] = [
        ("gradient exactness", Duration::from_secs(5), gradients),
        ("zero-problem exactness", Duration::from_secs(10), zero_problem),
        ("first-order fixed point", min(2), fixed_point),
        ("descent identity", min(2), descent_identity),
        ("ODE order", min(1), ode_order),
        ("duality residual", min(1), duality),
        ("linearization consistency", min(2), linearization),
        ("second-order identity", min(3), second_order),
        ("cross-term duality", min(2), cross),
        ("PL evidence", min(5), pl_evidence),
        ("Pinsker property", Duration::from_secs(30), pinsker),
        ("exponential sandwich", min(2), sandwich),
        ("Langevin/grid agreement", min(5), langevin_vs_grid),
        ("determinism", min(1), determinism),
    ];
    let desk = Desk::new();
    let mut failed = 0;
    for (n, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| run(&desk)))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into());
                Err(format!("panicked: {msg}"))
            });
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if elapsed <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {budget:?} budget")),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {:>2} {:<26} {}  [{:.1}s]  {detail}",
            n + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
