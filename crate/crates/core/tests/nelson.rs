use bec_core::nelson::rng::NOISE_DOMAIN;
use bec_core::{
    default_floor, drift_from_density, empirical_density, sample_density, simulate, simulate_coupled, tv_density,
    CounterRng, Error, FnDrift, Grid, GridFunction, Points, ProductDrift, SdeParams,
};
use bec_oracles::{euler_ou_variance, expected_histogram_tv, ks_critical_95, ks_statistic};

fn gaussian_density(grid: Grid) -> GridFunction {
    GridFunction::from_fn(grid, 1, |x| (-x[0] * x[0]).exp() / std::f64::consts::PI.sqrt())
}

fn cell_probabilities(rho: &GridFunction) -> Vec<f64> {
    let w = rho.grid().weights();
    rho.values().iter().zip(&w).map(|(r, w)| r * w).collect()
}

fn variance(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / m;
    xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)
}

#[test]
fn uniform_samples_pass_kolmogorov_smirnov() {
    let grid = Grid::line(1.0, 33).unwrap();
    let rho = GridFunction::from_fn(grid, 1, |_| 0.5);
    let m = 10_000;
    let pts = sample_density(&rho, m, 1).unwrap();
    let d = ks_statistic(pts.coords(), |x| (x + 1.0) / 2.0);
    assert!(d < ks_critical_95(m), "KS statistic {d}");
    // A 95% test rejects one seed in twenty; over 40 seeds more than six
    // rejections has probability below 0.5%.
    let rejected = (100..140)
        .filter(|&seed| {
            let pts = sample_density(&rho, m, seed).unwrap();
            ks_statistic(pts.coords(), |x| (x + 1.0) / 2.0) >= ks_critical_95(m)
        })
        .count();
    assert!(rejected <= 6, "{rejected} of 40 seeds rejected");
}

#[test]
fn narrow_bumps_confine_samples() {
    let grid = Grid::line(1.0, 201).unwrap();
    let bump = |x: f64| (1.0 - (x / 0.1).powi(2)).max(0.0);
    let rho = GridFunction::from_fn(grid, 1, |x| bump(x[0]));
    let pts = sample_density(&rho, 5000, 3).unwrap();
    assert!(pts.coords().iter().all(|x| x.abs() <= 0.1 + 1e-12));
    let plane = Grid::new(1, 1.0, 41).unwrap();
    let rho2 = GridFunction::from_fn(plane, 2, |x| bump(x[0] * 0.5) * bump(x[1] * 0.5));
    let pts = sample_density(&rho2, 500, 3).unwrap();
    assert!(pts.coords().iter().all(|x| x.abs() <= 0.2 + 1e-12));
}

#[test]
fn degenerate_density_is_refused() {
    let grid = Grid::line(1.0, 11).unwrap();
    let zero = GridFunction::zeros(grid, 1);
    assert!(matches!(sample_density(&zero, 10, 0), Err(Error::DegenerateEnvelope)));
}

#[test]
fn gaussian_samples_have_the_right_variance() {
    let grid = Grid::line(6.0, 241).unwrap();
    let m = 100_000;
    let pts = sample_density(&gaussian_density(grid), m, 5).unwrap();
    let var = variance(pts.coords().iter().copied());
    let sigma = (0.5 / m as f64).sqrt();
    assert!((var - 0.5).abs() < 3.0 * sigma, "variance {var}");

    let plane = Grid::line(5.0, 61).unwrap();
    let rho = GridFunction::from_fn(plane, 2, |x| (-x[0] * x[0] - x[1] * x[1]).exp() / std::f64::consts::PI);
    let m = 20_000;
    let pts = sample_density(&rho, m, 5).unwrap();
    let sigma = (0.5 / m as f64).sqrt();
    for axis in 0..2 {
        let var = variance((0..m).map(|j| pts.point(j)[axis]));
        assert!((var - 0.5).abs() < 3.0 * sigma + 2e-3, "axis {axis}: {var}");
    }
}

#[test]
fn sampling_is_a_function_of_the_index() {
    let grid = Grid::line(4.0, 41).unwrap();
    let rho = gaussian_density(grid);
    let long = sample_density(&rho, 100, 9).unwrap();
    let short = sample_density(&rho, 50, 9).unwrap();
    assert_eq!(&long.coords()[..50], short.coords());
    assert_ne!(sample_density(&rho, 50, 10).unwrap().coords(), short.coords());
}

#[test]
fn one_free_step_is_one_gaussian_increment() {
    let free = FnDrift::new(3, 100.0, |_: &[f64], out: &mut [f64]| out.fill(0.0)).unwrap();
    let init = Points::new(3, vec![0.1, -0.2, 0.3, 1.0, 2.0, 3.0]).unwrap();
    let dt = 0.01;
    let params = SdeParams::new(dt, dt, 2, 77).unwrap();
    let ens = simulate(&free, &init, &params).unwrap();
    assert_eq!(ens.records(), 2);
    let rng = CounterRng::new(77);
    for j in 0..2 {
        assert_eq!(ens.state(j, 0), init.point(j));
        for k in 0..3 {
            let expected = init.point(j)[k] + dt.sqrt() * rng.normal(NOISE_DOMAIN, j as u64, 0, k as u64);
            assert_eq!(ens.state(j, 1)[k], expected);
        }
        assert_eq!(ens.provenance(j), (77, j as u64));
    }
}

fn ou_run(m: usize, horizon: f64, seed: u64) -> (bec_core::PathEnsemble, Grid) {
    let grid = Grid::line(6.0, 121).unwrap();
    let ou = FnDrift::new(1, 6.0, |x: &[f64], out: &mut [f64]| out[0] = -x[0]).unwrap();
    let init = sample_density(&gaussian_density(grid), m, seed).unwrap();
    let params = SdeParams {
        record_every: Some(100),
        ..SdeParams::new(1e-3, horizon, m, seed).unwrap()
    };
    (simulate(&ou, &init, &params).unwrap(), grid)
}

#[test]
fn ornstein_uhlenbeck_is_stationary() {
    let m = 10_000;
    let (ens, grid) = ou_run(m, 10.0, 21);
    let last = ens.records() - 1;
    let var = variance((0..m).map(|j| ens.state(j, last)[0]));
    let sigma = 0.5 * (2.0 / m as f64).sqrt();
    assert!((var - 0.5).abs() < 3.0 * sigma, "variance {var}");
    assert!((euler_ou_variance(1.0, 1e-3) - 0.5).abs() < 3e-4);

    // At least 10⁶ samples in the second half of the run.
    let hist = empirical_density(&ens, 0, (5.0, 10.0), &grid).unwrap();
    assert!((hist.integrate() - 1.0).abs() < 1e-12);
    let tv = tv_density(&hist, &gaussian_density(grid)).unwrap();
    assert!(tv < 0.03, "TV {tv}");
}

#[test]
fn single_path_time_average_matches_the_ensemble() {
    let grid = Grid::line(6.0, 61).unwrap();
    let ou = FnDrift::new(1, 6.0, |x: &[f64], out: &mut [f64]| out[0] = -x[0]).unwrap();
    let one = SdeParams {
        record_every: Some(1000),
        ..SdeParams::new(1e-3, 5000.0, 1, 4).unwrap()
    };
    let path = simulate(&ou, &Points::new(1, vec![0.0]).unwrap(), &one).unwrap();
    let time_avg = empirical_density(&path, 0, (2500.0, 5000.0), &grid).unwrap();

    let m = 10_000;
    let init = sample_density(&gaussian_density(grid), m, 8).unwrap();
    let many = SdeParams::new(1e-3, 2.0, m, 8).unwrap();
    let ens = simulate(&ou, &init, &many).unwrap();
    let ensemble = empirical_density(&ens, 0, (2.0, 2.0), &grid).unwrap();

    let p = cell_probabilities(&gaussian_density(grid));
    // Unit record spacing leaves lag-one correlation e⁻¹, so the effective
    // count is (1 − e⁻¹)/(1 + e⁻¹) of the 2501 recorded samples.
    let r = (-1f64).exp();
    let n_eff = 2501.0 * (1.0 - r) / (1.0 + r);
    let statistical = expected_histogram_tv(&p, n_eff) + expected_histogram_tv(&p, m as f64);
    let tv = tv_density(&time_avg, &ensemble).unwrap();
    assert!(tv < 2.0 * statistical, "TV {tv} vs {statistical}");
}

#[test]
fn osmotic_drift_preserves_its_density() {
    let grid = Grid::line(5.0, 81).unwrap();
    let gauss = gaussian_density(grid);
    let mut double = GridFunction::from_fn(grid, 1, |x| {
        (-(x[0] - 1.5).powi(2) * 2.0).exp() + (-(x[0] + 1.5).powi(2) * 2.0).exp()
    });
    let mass = double.integrate();
    double.values_mut().iter_mut().for_each(|v| *v /= mass);
    for rho in [gauss, double] {
        let drift = drift_from_density(&rho, default_floor(&rho)).unwrap();
        let m = 10_000;
        let init = sample_density(&rho, m, 12).unwrap();
        let params = SdeParams {
            record_every: Some(100),
            ..SdeParams::new(1e-3, 1.0, m, 12).unwrap()
        };
        let ens = simulate(&drift, &init, &params).unwrap();
        let threshold = 3.0 * expected_histogram_tv(&cell_probabilities(&rho), m as f64);
        for t in ens.times() {
            let hist = empirical_density(&ens, 0, (t, t), &grid).unwrap();
            let tv = tv_density(&hist, &rho).unwrap();
            assert!(tv < threshold, "TV {tv} at t = {t} exceeds {threshold}");
        }
    }
}

#[test]
fn uniform_draw_on_nodes_gives_a_flat_histogram() {
    let grid = Grid::line(1.0, 21).unwrap();
    let w = grid.weights();
    let cum: Vec<f64> = w
        .iter()
        .scan(0.0, |acc, x| {
            *acc += x / 2.0;
            Some(*acc)
        })
        .collect();
    let rng = CounterRng::new(5);
    let m = 40_000;
    let nodes = grid.nodes();
    let coords: Vec<f64> = (0..m)
        .map(|j| {
            let u = rng.uniform(1, j, 0, 0);
            nodes[cum.partition_point(|c| *c < u).min(20)]
        })
        .collect();
    let free = FnDrift::new(1, 1.0, |_: &[f64], out: &mut [f64]| out[0] = 0.0).unwrap();
    let params = SdeParams::new(1e-3, 1e-3, m as usize, 5).unwrap();
    let ens = simulate(&free, &Points::new(1, coords).unwrap(), &params).unwrap();
    let hist = empirical_density(&ens, 0, (0.0, 0.0), &grid).unwrap();
    for (v, wi) in hist.values().iter().zip(&w) {
        let p = wi / 2.0;
        let sd = (p * (1.0 - p) / m as f64).sqrt() / wi;
        assert!((v - 0.5).abs() < 4.0 * sd, "{v}");
    }
    assert!(matches!(
        empirical_density(&ens, 0, (0.5, 0.6), &grid),
        Err(Error::EmptyWindow)
    ));
    assert!(empirical_density(&ens, 1, (0.0, 0.0), &grid).is_err());
}

#[test]
fn ensembles_do_not_depend_on_thread_count() {
    let grid = Grid::line(4.0, 41).unwrap();
    let rho = GridFunction::from_fn(grid, 2, |x| (-x[0] * x[0] - x[1] * x[1] - x[0] * x[1]).exp());
    let drift = drift_from_density(&rho, default_floor(&rho)).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let init = sample_density(&rho, 300, 1).unwrap();
            let params = SdeParams::new(1e-2, 1.0, 300, 1).unwrap();
            simulate(&drift, &init, &params).unwrap()
        })
    };
    let a = run(1);
    assert_eq!(a, run(3));
    assert_eq!(a, run(1));
}

#[test]
fn nan_states_are_reported() {
    let bad = FnDrift::new(1, 2.0, |x: &[f64], out: &mut [f64]| {
        out[0] = if x[0] > 0.5 { f64::NAN } else { 1.0 }
    })
    .unwrap();
    let params = SdeParams::new(0.01, 5.0, 3, 0).unwrap();
    let init = Points::new(1, vec![0.0, -1.0, 0.2]).unwrap();
    match simulate(&bad, &init, &params) {
        Err(Error::NonFiniteState { trajectory, step }) => {
            assert!(trajectory < 3);
            assert!(step >= 1);
        }
        other => panic!("expected a non-finite state error, got {other:?}"),
    }
    let outside = Points::new(1, vec![0.0, 3.0, 0.0]).unwrap();
    assert!(simulate(&bad, &outside, &params).is_err());
}

#[test]
fn coupled_runs_with_equal_drifts_coincide() {
    let grid = Grid::line(5.0, 41).unwrap();
    let rho = gaussian_density(grid);
    let single = drift_from_density(&rho, default_floor(&rho)).unwrap();
    let product = ProductDrift::new(&single, 2).unwrap();
    let pair = GridFunction::from_fn(grid, 2, |x| (-x[0] * x[0] - x[1] * x[1]).exp());
    let init = sample_density(&pair, 500, 2).unwrap();
    let params = SdeParams::new(1e-3, 1.0, 500, 2).unwrap();
    let run = simulate_coupled(&product, &single, &init, &params).unwrap();
    assert!(run.sup_distance_sq.iter().all(|d| *d == 0.0));
    assert_eq!(run.interacting, run.independent);

    // A distinct drift separates the paths, more so over longer horizons.
    let skewed = FnDrift::new(2, 5.0, |x: &[f64], out: &mut [f64]| {
        out[0] = -x[0] + 0.3;
        out[1] = -x[1];
    })
    .unwrap();
    let mean = |horizon: f64| {
        let p = SdeParams::new(1e-3, horizon, 500, 2).unwrap();
        simulate_coupled(&skewed, &single, &init, &p).unwrap().mean_sup_distance_sq()
    };
    let (short, long) = (mean(0.01), mean(1.0));
    assert!(short < 1e-4 && short < long, "{short} {long}");
}
