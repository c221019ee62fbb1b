use mfoc::linearization::{tilt, CubicPotential, TimeProfile};
use mfoc::measure::*;
use mfoc::model::{ConfinementPotential, TimeGrid};
use mfoc::rng::{purpose, stream};
use rand::Rng as _;

fn gaussian(spec: &GridSpec<f64>, mean: f64, sd: f64) -> GridMeasure<f64> {
    let lv = spec.tabulate(|a| -(a[0] - mean).powi(2) / (2.0 * sd * sd));
    GridMeasure::from_log_density(spec.clone(), &lv).unwrap().0
}

fn prior(res: usize) -> PriorMeasure<f64> {
    let spec = GridSpec::new(2, res, 3.0).unwrap();
    PriorMeasure::new(&ConfinementPotential::default(), &spec).unwrap()
}

#[test]
fn normalize_examples() {
    let p = prior(64);
    let (same, log_z) = normalize(&p.measure).unwrap();
    assert!(log_z.abs() <= 1e-15);
    assert!(same.values.iter().zip(&p.measure.values).all(|(a, b)| (a - b).abs() <= 1e-15 * b));
    let spec = GridSpec::<f64>::new(2, 8, 1.0).unwrap();
    let vol: f64 = 4.0;
    let flat = GridMeasure::from_values(spec.clone(), vec![2.0 / vol; 64]).unwrap();
    let (n, _) = normalize(&flat).unwrap();
    assert!(n.values.iter().all(|&v| (v - 1.0 / vol).abs() <= 1e-15));
    let (twice, _) = normalize(&n).unwrap();
    assert_eq!(twice, n);
}

#[test]
fn prior_normalizer_matches_refined_quadrature() {
    let coarse = prior(64);
    let fine = prior(512);
    assert!((coarse.measure.mass() - 1.0).abs() <= 1e-12);
    assert!((coarse.log_z - fine.log_z).abs() <= 1e-8);
}

#[test]
fn fourth_moment_of_prior_matches_refined_quadrature() {
    let m4 = moment_grid(&prior(64).measure, 4).unwrap();
    let r4 = moment_grid(&prior(512).measure, 4).unwrap();
    assert!(m4.is_finite());
    assert!((m4 - r4).abs() <= 1e-6 * r4);
    let m1 = moment_grid(&prior(64).measure, 1).unwrap();
    let r1 = moment_grid(&prior(512).measure, 1).unwrap();
    assert!(m1 > 0.1 && (m1 - r1).abs() <= 1e-3 * r1, "{m1} vs {r1}");
    assert_eq!(moment_particles(&ParticleMeasure::point_mass(&[0.0, 0.0]), 3).unwrap(), 0.0);
}

#[test]
fn fisher_divergence_of_shifted_gaussians() {
    let spec = GridSpec::new(1, 800, 8.0).unwrap();
    let (m, sd) = (0.3, 0.7);
    let f = fisher_divergence(&gaussian(&spec, m, sd), &gaussian(&spec, 0.0, sd)).unwrap();
    assert!((f.value - m * m / sd.powi(4)).abs() <= 1e-9);
    let zero = fisher_divergence(&gaussian(&spec, m, sd), &gaussian(&spec, m, sd)).unwrap();
    assert_eq!(zero.value, 0.0);
}

#[test]
fn fisher_divergence_of_linear_gibbs_tilt() {
    let p = prior(64);
    let beta = [0.4, -0.25];
    let lv: Vec<f64> = p
        .measure
        .log_values()
        .iter()
        .zip(p.measure.spec.tabulate(|a| beta[0] * a[0] + beta[1] * a[1]))
        .map(|(l, t)| l - t)
        .collect();
    let tilted = GridMeasure::from_log_density(p.measure.spec.clone(), &lv).unwrap().0;
    let f = fisher_divergence(&p.measure, &tilted).unwrap();
    assert!((f.value - (beta[0] * beta[0] + beta[1] * beta[1])).abs() <= 1e-9);
}

#[test]
fn relative_entropy_is_nonnegative_on_random_pairs() {
    let p = prior(32);
    for s in 0..50 {
        let mut rng = stream(0, purpose::PROPERTY, 100 + s);
        let psi = CubicPotential::random(2, &mut rng);
        let table = psi.tabulate(&p.measure.spec);
        let theta: f64 = rng.random_range(-0.2..0.2);
        let lv: Vec<f64> = p.measure.log_values().iter().zip(&table).map(|(l, t)| l + theta * t).collect();
        let m = GridMeasure::from_log_density(p.measure.spec.clone(), &lv).unwrap().0;
        assert!(relative_entropy(&m, &p.measure).unwrap().value >= 0.0);
        assert!(relative_entropy(&p.measure, &m).unwrap().value >= 0.0);
        assert!(fisher_divergence(&m, &p.measure).unwrap().value >= 0.0);
    }
}

#[test]
fn path_entropy_examples() {
    let p = prior(32);
    let grid = TimeGrid { t0: 0.0, t_end: 2.0, nodes: 9 };
    let constant = ControlPath::constant_grid(grid, &p.measure);
    assert_eq!(path_entropy(&constant, &p).unwrap(), 0.0);
    let mu = GridMeasure::from_log_density(
        p.measure.spec.clone(),
        &p.measure.spec.tabulate(|a| -ConfinementPotential::default().value(a) + 0.5 * a[0]),
    )
    .unwrap()
    .0;
    let e = relative_entropy(&mu, &p.measure).unwrap().value;
    let path = ControlPath::constant_grid(grid, &mu);
    assert!((path_entropy(&path, &p).unwrap() - 2.0 * e).abs() <= 1e-14);
}

#[test]
fn path_entropy_converges_at_first_order() {
    let p = prior(32);
    let mut rng = stream(0, purpose::PROPERTY, 7);
    let psi = CubicPotential::random(2, &mut rng);
    let profile = TimeProfile::Wave { omega: 3.0, phase: 0.4 };
    let value = |nodes: usize| {
        let grid = TimeGrid { t0: 0.0, t_end: 1.0, nodes };
        let base = ControlPath::constant_grid(grid, &p.measure);
        path_entropy(&tilt(&base, &psi, profile, 0.05).unwrap(), &p).unwrap()
    };
    let reference = value(4097);
    let errs: Vec<f64> = [17, 33, 65].iter().map(|&n| (value(n) - reference).abs()).collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.7..=2.3).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn pinsker_holds_on_random_pairs() {
    let p = prior(32);
    let mut violations = 0;
    for s in 0..100u32 {
        let mut rng = stream(0, purpose::PROPERTY, 1000 + s);
        let base = CubicPotential::random(2, &mut rng).tabulate(&p.measure.spec);
        let pert = CubicPotential::random(2, &mut rng).tabulate(&p.measure.spec);
        let (tb, tp): (f64, f64) = (rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
        let lv_nu: Vec<f64> = p.measure.log_values().iter().zip(&base).map(|(l, b)| l + tb * b).collect();
        let nu = GridMeasure::from_log_density(p.measure.spec.clone(), &lv_nu).unwrap().0;
        let lv_mu: Vec<f64> = lv_nu.iter().zip(&pert).map(|(l, q)| l + tp * q).collect();
        let mu = GridMeasure::from_log_density(p.measure.spec.clone(), &lv_mu).unwrap().0;
        let k = s % 3;
        let check = pinsker_check(&mu, &nu, k, 0.25).unwrap();
        assert!(!check.vacuous);
        if !check.holds {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn lsi_ratio_of_gaussian_tilt_is_half_variance() {
    let spec = GridSpec::new(1, 1200, 6.0).unwrap();
    let sd = 0.5;
    let nu = gaussian(&spec, 0.0, sd);
    for beta in [0.5, 0.05] {
        let f = spec.tabulate(|a| (beta * a[0]).exp());
        let est = lsi_ratio(&nu, &[f]).unwrap();
        assert!((est.ratio.unwrap() - sd * sd / 2.0).abs() <= 1e-4);
    }
    let flat = lsi_ratio(&nu, &[vec![1.0; spec.cells()]]).unwrap();
    assert_eq!((flat.ratio, flat.skipped), (None, 1));
}

#[test]
fn fourth_moment_bound_over_random_paths() {
    let p = prior(32);
    let potential = ConfinementPotential::default();
    let grid = TimeGrid { t0: 0.0, t_end: 1.0, nodes: 9 };
    let c = fourth_moment_constant(&potential, 2, p.log_z, 1.0);
    let base = ControlPath::constant_grid(grid, &p.measure);
    let mut worst = 0.0f64;
    for s in 0..20u32 {
        let mut rng = stream(0, purpose::PROPERTY, 2000 + s);
        let psi = CubicPotential::random(2, &mut rng);
        let theta: f64 = rng.random_range(-0.3..0.3);
        let path = tilt(&base, &psi, TimeProfile::Bump { centre: 0.5, width: 0.3 }, theta).unwrap();
        let ms = path.grid_measures().unwrap();
        let m4: f64 = ms[..grid.intervals()].iter().map(|m| moment_grid(m, 4).unwrap() * grid.dt()).sum();
        let ratio = m4 / (c * (1.0 + path_entropy(&path, &p).unwrap()));
        worst = worst.max(ratio);
    }
    assert!(worst.is_finite());
    assert!(worst <= 1.0, "bound exceeded: {worst}");
}

#[test]
fn particle_measure_csv_and_moments() {
    let m = ParticleMeasure::new(2, vec![1.0, 0.0, -1.0, 0.0]).unwrap();
    assert_eq!(moment_particles(&m, 2).unwrap(), 1.0);
    let mut buf = Vec::new();
    m.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(ParticleMeasure::new(2, vec![f64::NAN, 0.0]).is_err());
}
