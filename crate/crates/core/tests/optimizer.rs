mod common;

use common::{identity_spec, prior_path, small_spec, solved};
use mfoc::measure::{moment_grid, moment_particles, relative_entropy, ControlPath, GridMeasure, ParticleMeasure};
use mfoc::model::Dataset;
use mfoc::optimizer::*;
use mfoc::rng::{purpose, stream};
use mfoc::trajectory::forward_solve;
use mfoc::{Config, Path};

fn sup_log_ratio(a: &GridMeasure<f64>, b: &GridMeasure<f64>) -> f64 {
    a.log_values()
        .iter()
        .zip(b.log_values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Every node tilted by `exp(β·a)`.
fn tilted(config: &Config, base: &Path, beta: [f64; 2]) -> Path {
    let tilt = config.param_grid.tabulate(|a| beta[0] * a[0] + beta[1] * a[1]);
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

#[test]
fn zero_problem_is_solved_by_the_prior() {
    let config = identity_spec().build::<f64>().unwrap();
    let out = picard_solve(&config, &prior_path(&config), &PicardOptions::default()).unwrap();
    assert!(out.converged);
    assert!(out.iterations <= 1);
    assert!(out.report.j.abs() <= 1e-10);
    assert!(out.report.fisher.unwrap() <= 1e-10);
    for m in out.path.grid_measures().unwrap() {
        let diff = m
            .values
            .iter()
            .zip(&config.prior.measure.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff <= 1e-10);
    }
    let (snap, flow) = gibbs_map(&config, &prior_path(&config)).unwrap();
    assert!(flow.z.as_ref().unwrap().iter().all(|z| *z == 0.0));
    assert!(snap.phi.iter().flatten().all(|p| *p == 0.0));
}

#[test]
fn prior_path_cost_is_the_unmoved_loss() {
    let config = small_spec().build::<f64>().unwrap();
    let report = total_cost(&config, &prior_path(&config)).unwrap();
    let n = config.dataset.len();
    let expected: f64 = (0..n)
        .map(|i| 0.5 * (config.dataset.x(i)[0] - config.dataset.y(i)[0]).powi(2))
        .sum::<f64>()
        / n as f64;
    assert!(report.entropy.abs() <= 1e-14);
    assert!((report.terminal - expected).abs() <= 1e-12 * expected);
    assert_eq!(report.j, report.terminal + config.epsilon * report.entropy);
}

#[test]
fn large_epsilon_gibbs_is_the_prior() {
    let config = small_spec().build::<f64>().unwrap().with_epsilon(1e6);
    let skew = tilted(&config, &prior_path(&config), [0.8, -0.4]);
    let (snap, _) = gibbs_map(&config, &skew).unwrap();
    for g in &snap.gibbs {
        assert!(sup_log_ratio(g, &config.prior.measure) <= 1e-4);
        assert!((g.mass() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn gibbs_is_proportional_to_the_exponential_weight() {
    let config = small_spec().build::<f64>().unwrap();
    let skew = tilted(&config, &prior_path(&config), [0.8, -0.4]);
    let (snap, _) = gibbs_map(&config, &skew).unwrap();
    let ell = config.param_grid.tabulate(|a| config.potential.value(a));
    for ((g, phi), lz) in snap.gibbs.iter().zip(&snap.phi).zip(&snap.log_z) {
        for ((lv, l), p) in g.log_values().iter().zip(&ell).zip(phi) {
            assert!((lv - (-l - p / config.epsilon - lz)).abs() <= 1e-10);
        }
    }
}

#[test]
fn gibbs_agrees_with_refined_recomputation() {
    let config = small_spec().build::<f64>().unwrap();
    let skew = tilted(&config, &prior_path(&config), [0.8, -0.4]);
    let (coarse, _) = gibbs_map(&config, &skew).unwrap();

    // Three times finer in a (cell centres of the coarse grid are kept), two
    // times finer in t. The coarse Φ_k averages the interval, so the oracle
    // averages the two fine sub-intervals.
    let fine_spec = mfoc::measure::GridSpec::new(2, 3 * config.param_grid.res, config.param_grid.half_width).unwrap();
    let fine_cfg = config.with_param_grid(fine_spec.clone()).unwrap().with_grid(config.grid.refined(2));
    let fine_path = tilted(&fine_cfg, &prior_path(&fine_cfg), [0.8, -0.4]);
    let (fine, _) = gibbs_map(&fine_cfg, &fine_path).unwrap();

    let res = config.param_grid.res;
    let pick = |c: usize| {
        let (i, j) = (c / res, c % res);
        (3 * i + 1) * fine_spec.res + 3 * j + 1
    };
    let ell = config.param_grid.tabulate(|a| config.potential.value(a));
    for k in 0..config.grid.intervals() {
        let phi: Vec<f64> = (0..config.param_grid.cells())
            .map(|c| 0.5 * (fine.phi[2 * k][pick(c)] + fine.phi[2 * k + 1][pick(c)]))
            .collect();
        let lv: Vec<f64> = ell.iter().zip(&phi).map(|(l, p)| -l - p / config.epsilon).collect();
        let oracle = GridMeasure::from_log_density(config.param_grid.clone(), &lv).unwrap().0;
        let top = oracle.values.iter().cloned().fold(0.0, f64::max);
        let err = coarse.gibbs[k]
            .values
            .iter()
            .zip(&oracle.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-4 * top, "node {k}: {err:e}");
    }
}

#[test]
fn desk_fixed_point_is_gibbs_form_and_init_independent() {
    let config = small_spec().build::<f64>().unwrap();
    let opts = PicardOptions {
        tol: 1e-10,
        ..Default::default()
    };
    let a = picard_solve(&config, &prior_path(&config), &opts).unwrap();
    assert!(a.converged && a.report.picard_residual.unwrap() <= 1e-10);
    let eps2 = config.epsilon * config.epsilon;
    assert!(a.report.fisher.unwrap() <= 1e-8 * eps2);
    for (m, g) in a.path.grid_measures().unwrap().iter().zip(&a.evaluation.snapshot.gibbs) {
        assert!(relative_entropy(m, g).unwrap().value <= 1e-10);
    }
    let other = tilted(&config, &prior_path(&config), [-0.6, 0.9]);
    let b = picard_solve(&config, &other, &opts).unwrap();
    assert!(b.converged);
    assert!((a.report.j - b.report.j).abs() <= 1e-6);
}

#[test]
fn fisher_decreases_with_the_tolerance() {
    let config = small_spec().build::<f64>().unwrap();
    let mut path = prior_path(&config);
    let mut last = f64::INFINITY;
    for tol in [1e-4, 1e-5, 1e-6, 1e-7, 1e-8] {
        let out = picard_solve(&config, &path, &PicardOptions { tol, ..Default::default() }).unwrap();
        assert!(out.converged);
        let i = out.report.fisher.unwrap();
        assert!(i < last, "tol {tol:e}: I = {i:e} after {last:e}");
        last = i;
        path = out.path;
    }
    assert!(last <= 1e-6);
}

#[test]
fn non_convergence_is_reported_with_history() {
    let config = small_spec().build::<f64>().unwrap();
    let opts = PicardOptions {
        max_iters: 3,
        tol: 1e-14,
        ..Default::default()
    };
    let out = picard_solve(&config, &prior_path(&config), &opts).unwrap();
    assert!(!out.converged);
    assert_eq!(out.iterations, 3);
    assert_eq!(out.history.len(), 4);
    let bad = PicardOptions {
        damping: 0.0,
        ..Default::default()
    };
    assert!(picard_solve(&config, &prior_path(&config), &bad).is_err());
}

#[test]
fn restart_from_interior_node_reproduces_the_tail() {
    let config = small_spec().build::<f64>().unwrap();
    let opts = PicardOptions {
        tol: 1e-11,
        ..Default::default()
    };
    let full = picard_solve(&config, &prior_path(&config), &opts).unwrap();
    let flow = forward_solve(&config, &full.path).unwrap();
    let k1 = 6;
    let data = Dataset::new(1, 1, flow.positions(k1).to_vec(), config.dataset.ys.clone()).unwrap();
    let tail = config.with_dataset(data).unwrap().with_grid(config.grid.tail(k1).unwrap());
    let out = picard_solve(&tail, &prior_path(&tail), &opts).unwrap();
    assert!(out.converged);
    let full_ms = full.path.grid_measures().unwrap();
    for (j, m) in out.path.grid_measures().unwrap().iter().enumerate() {
        let e = relative_entropy(m, &full_ms[k1 + j]).unwrap().value;
        assert!(e <= 1e-6, "tail node {j}: {e:e}");
    }
}

#[test]
fn fisher_of_a_frozen_tilt_is_the_tilt_energy() {
    let config = small_spec().build::<f64>().unwrap();
    let star = solved(&config);
    let (snap, _) = gibbs_map(&config, &star).unwrap();
    let beta = [0.03, -0.02];
    let tilt = tilted(&config, &snap_path(&config, &snap), beta);
    let frozen = fisher_from_gibbs(&config, &tilt, &snap).unwrap();
    let eps2 = config.epsilon * config.epsilon;
    let expected = eps2 * (beta[0] * beta[0] + beta[1] * beta[1]) * config.grid.horizon();
    assert!((frozen - expected).abs() <= 1e-9 * expected, "{frozen:e} {expected:e}");
    // Unfrozen, Γ moves with the path; the value stays of the same order.
    let moving = fisher_functional(&config, &tilt).unwrap();
    assert!(moving > 0.0 && moving < 10.0 * expected);
}

fn snap_path(config: &Config, snap: &GibbsSnapshot<f64>) -> Path {
    ControlPath::from_grid(config.grid, snap.gibbs.clone()).unwrap()
}

#[test]
fn fixed_point_has_zero_flux() {
    let config = identity_spec().build::<f64>().unwrap();
    let prior = prior_path(&config);
    let step = fp_descent_step(&config, &prior, 0.01).unwrap();
    assert_eq!(step.halvings, 0);
    assert!(step.fisher <= 1e-20);
    for (a, b) in step.path.grid_measures().unwrap().iter().zip(prior.grid_measures().unwrap()) {
        let top = b.values.iter().cloned().fold(0.0, f64::max);
        let diff = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-12 * top);
    }
}

#[test]
fn descent_step_follows_the_fisher_rate() {
    let config = small_spec().build::<f64>().unwrap();
    let star = solved(&config);
    let start = tilted(&config, &star, [0.3, -0.2]);
    let h = 1e-4;
    let step = fp_descent_step(&config, &start, h).unwrap();
    let j0 = total_cost(&config, &start).unwrap().j;
    let j1 = total_cost(&config, &step.path).unwrap().j;
    let rate = (j1 - j0) / step.step;
    assert!((rate + step.fisher).abs() <= 0.05 * step.fisher, "{rate:e} vs {:e}", -step.fisher);
    assert_eq!(step.dj_estimate, -step.fisher);
}

#[test]
fn descent_is_monotone_and_mass_conserving() {
    let config = small_spec().build::<f64>().unwrap();
    let start = tilted(&config, &prior_path(&config), [0.5, 0.3]);
    let (end, records) = fp_descent(&config, &start, 60, 5e-3).unwrap();
    assert_eq!(records.len(), 61);
    for w in records.windows(2) {
        assert!(w[1].report.j <= w[0].report.j + 1e-12);
    }
    for m in end.grid_measures().unwrap() {
        assert!((m.mass() - 1.0).abs() <= 60.0 * 1e-12);
    }
    let one = fp_descent_step(&config, &start, 5e-3).unwrap();
    for m in one.path.grid_measures().unwrap() {
        assert!((m.mass() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn oversized_step_is_halved_or_rejected() {
    let config = small_spec().build::<f64>().unwrap();
    // Far from Gibbs form, so the quartic confinement drives steep tail fluxes.
    let start = ControlPath::constant_grid(config.grid, &GridMeasure::uniform(config.param_grid.clone()));
    let step = fp_descent_step(&config, &start, 0.2).unwrap();
    assert!(step.halvings > 0);
    assert!(step.path.grid_measures().unwrap().iter().all(|m| m.values.iter().all(|v| *v >= 0.0)));
    assert!(matches!(fp_descent_step(&config, &start, 1e6), Err(mfoc::Error::StepRejected(_))));
}

#[test]
fn langevin_zero_step_is_identity() {
    let config = small_spec().build::<f64>().unwrap();
    let path = particle_path_from_grid(&config, &config.prior.measure, 50).unwrap();
    let out = langevin_descent_step(&config, &path, 0.0, 0).unwrap();
    assert_eq!(out.resampled, 0);
    for (a, b) in out.path.particle_measures().unwrap().iter().zip(path.particle_measures().unwrap()) {
        assert_eq!(a.points, b.points);
    }
}

#[test]
fn langevin_is_seed_deterministic() {
    let config = small_spec().build::<f64>().unwrap();
    let path = particle_path_from_grid(&config, &config.prior.measure, 40).unwrap();
    let a = langevin_descent_step(&config, &path, 1e-2, 3).unwrap();
    let b = langevin_descent_step(&config, &path, 1e-2, 3).unwrap();
    let c = langevin_descent_step(&config, &path, 1e-2, 4).unwrap();
    let pts = |p: &Path| p.particle_measures().unwrap()[0].points.clone();
    assert_eq!(pts(&a.path), pts(&b.path));
    assert_ne!(pts(&a.path), pts(&c.path));
}

#[test]
fn langevin_without_control_samples_the_prior() {
    let mut spec = identity_spec();
    spec.grid.nodes = 2;
    let config = spec.build::<f64>().unwrap();
    let m = 2000;
    let mut path = particle_path_from_grid(&config, &config.prior.measure, m).unwrap();
    let h = 5e-3;
    for s in 0..400 {
        path = langevin_descent_step(&config, &path, h, s).unwrap().path;
    }
    let cloud = &path.particle_measures().unwrap()[0];
    let second = moment_particles(cloud, 2).unwrap();
    let sq: Vec<f64> = (0..m).map(|i| cloud.particle(i).iter().map(|v| v * v).sum()).collect();
    let var = sq.iter().map(|v| (v - second).powi(2)).sum::<f64>() / (m - 1) as f64;
    let se = (var / m as f64).sqrt();
    let target = moment_grid(&config.prior.measure, 2).unwrap();
    assert!((second - target).abs() <= 3.0 * se, "{second} vs {target} (se {se})");
}

#[test]
fn grid_sampler_matches_grid_moments() {
    let config = small_spec().build::<f64>().unwrap();
    let mut rng = stream(11, purpose::PROPERTY, 0);
    let cloud: ParticleMeasure<f64> = sample_grid(&config.prior.measure, 4000, &mut rng).unwrap();
    let mean = cloud.mean();
    let var = cloud.variance();
    for q in 0..2 {
        let se = (var[q] / 4000.0).sqrt();
        assert!(mean[q].abs() <= 4.0 * se);
    }
    let target = moment_grid(&config.prior.measure, 2).unwrap();
    assert!((var[0] + var[1] - target).abs() <= 0.1 * target);
}

#[test]
fn exponential_bounds_are_finite_and_refinement_stable() {
    let config = small_spec().build::<f64>().unwrap();
    let coarse = exponential_bounds(&config, &solved(&config)).unwrap();
    let spec = mfoc::measure::GridSpec::new(2, 2 * config.param_grid.res, config.param_grid.half_width).unwrap();
    let fine_cfg = config.with_param_grid(spec).unwrap();
    let fine = exponential_bounds(&fine_cfg, &solved(&fine_cfg)).unwrap();
    assert!(coarse.is_finite() && fine.is_finite());
    assert!((coarse.upper - fine.upper).abs() <= 0.05 * fine.upper.abs());
    assert!((coarse.lower - fine.lower).abs() <= 0.05 * fine.lower.abs());
    assert!(fine.lambda() >= 1.0);
}
