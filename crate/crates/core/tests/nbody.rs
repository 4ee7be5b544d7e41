use bec_core::{
    marginal_density, marginal_of_density, minimize_hartree, minimize_nbody, minimize_nls, nbody_drift,
    nbody_drift_component, nbody_energy_components, nbody_hellmann_feynman_check, pair_coupling,
    perturbed_nbody_energy, Error, FlowParams, Grid, GridFunction, NBodyProblem, NBodyState, PairPotential,
    PairProfile, Perturbation, TrapPotential,
};
use bec_oracles::two_body::{ground_state, TwoBodyProblem};

fn oscillator() -> TrapPotential {
    TrapPotential::harmonic(1.0).unwrap()
}

fn params() -> FlowParams {
    FlowParams::default()
}

fn bump(g: f64) -> PairPotential {
    PairPotential::bump_with_coupling(g, 1.0, 1).unwrap()
}

fn product(phi: &GridFunction, particles: usize) -> GridFunction {
    let n = phi.grid().points();
    let values = (0..n.pow(particles as u32))
        .map(|idx| {
            let mut rem = idx;
            (0..particles)
                .map(|_| {
                    let v = phi.values()[rem % n];
                    rem /= n;
                    v
                })
                .product()
        })
        .collect();
    GridFunction::new(*phi.grid(), particles, values).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn check_bookkeeping(state: &NBodyState) {
    let c = state.components;
    assert!((c.total() - state.energy_per_particle()).abs() <= 1e-10);
    let first = nbody_energy_components(state);
    assert!((first.kinetic - c.kinetic).abs() <= 1e-10, "{first:?} vs {c:?}");
    assert!((first.trap - c.trap).abs() <= 1e-10);
    assert!((first.interaction - c.interaction).abs() <= 1e-10);
    assert!(state.asymmetry() <= 1e-10);
    assert!(state.psi.is_normalized());
    assert!(state.max_energy_rise <= 1e-12);
}

#[test]
fn non_interacting_particles_factorize() {
    let grid = Grid::line(6.0, 65).unwrap();
    let one = minimize_nls(&oscillator(), 0.0, grid, &params()).unwrap();
    for particles in [2, 3] {
        let state = minimize_nbody(&oscillator(), &PairPotential::zero(1), particles, 0.5, grid, &params()).unwrap();
        assert!(state.energy_per_particle() - one.energy <= 1e-8);
        assert!((state.energy_per_particle() - one.energy).abs() <= 1e-8);
        assert!((state.energy - particles as f64).abs() < 1e-3);
        let diff = state
            .psi
            .values()
            .iter()
            .zip(product(&one.phi, particles).values())
            .map(|(a, b)| a - b)
            .collect();
        let diff = GridFunction::new(grid, particles, diff).unwrap();
        assert!(diff.norm_sq().sqrt() <= 1e-6);
        assert_eq!(state.components.interaction, 0.0);
        assert_eq!(nbody_energy_components(&state).interaction, 0.0);
        assert!((state.components.kinetic - 0.5).abs() < 1e-3);
        assert!((state.components.trap - 0.5).abs() < 1e-3);
        check_bookkeeping(&state);
    }
}

#[test]
fn interacting_pair_matches_inverse_iteration() {
    let grid = Grid::line(6.0, 129).unwrap();
    let v0 = bump(2.0);
    let state = minimize_nbody(&oscillator(), &v0, 2, 0.0, grid, &params()).unwrap();
    let trap = |x: f64| x * x;
    let pair = |r: f64| state.pair.eval(r);
    let oracle = ground_state(
        &TwoBodyProblem {
            points: 129,
            half_width: 6.0,
            trap: &trap,
            pair: &pair,
        },
        60,
    );
    assert!((state.energy - oracle.energy).abs() < 1e-6, "{} vs {}", state.energy, oracle.energy);
    check_bookkeeping(&state);
    assert!(state.psi.values().iter().all(|v| *v >= 0.0));

    let n = 129;
    // Trapezoid weights along one axis from the oracle's own tensor weights.
    let w1: Vec<f64> = (0..n).map(|j| oracle.weights[n * j] / oracle.weights[0] * oracle.weights[0].sqrt()).collect();
    let oracle_marginal: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| w1[j] * oracle.state[i + n * j].powi(2)).sum())
        .collect();
    let marginal = marginal_density(&state, 1).unwrap();
    assert!(max_abs_diff(marginal.values(), &oracle_marginal) < 1e-8);

    // Drift against centered differences of ln ψ from the oracle state.
    let b1 = nbody_drift_component(&state).unwrap();
    let h = grid.spacing();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 1..n - 1 {
            if oracle.nodes[i].abs() > 3.0 || oracle.nodes[j].abs() > 3.0 {
                continue;
            }
            let psi = |k: usize| oracle.state[k + n * j];
            let reference = (psi(i + 1).ln() - psi(i - 1).ln()) / (2.0 * h);
            worst = worst.max((b1[i + n * j] - reference).abs());
        }
    }
    assert!(worst < h * h, "drift gap {worst}");
}

#[test]
fn three_interacting_particles_are_consistent() {
    let grid = Grid::line(5.0, 41).unwrap();
    let state = minimize_nbody(&oscillator(), &bump(1.0), 3, 0.5, grid, &params()).unwrap();
    check_bookkeeping(&state);
    assert!(state.components.interaction > 0.0);
    let two = marginal_density(&state, 2).unwrap();
    assert!((two.integrate() - 1.0).abs() < 1e-12);
    let n = grid.points();
    for i in 0..n {
        for j in 0..n {
            assert!((two.values()[i + n * j] - two.values()[j + n * i]).abs() <= 1e-14);
        }
    }
}

#[test]
fn budget_is_enforced() {
    let grid = Grid::line(5.0, 60).unwrap();
    let problem = NBodyProblem::new(&oscillator(), &bump(1.0), 4, 0.5, grid).unwrap();
    assert_eq!(problem.required_points(), 60usize.pow(4));
    match problem.solve(&params()) {
        Err(Error::BudgetExceeded { required, budget }) => {
            assert_eq!(required, 12_960_000);
            assert_eq!(budget, 10_000_000);
        }
        other => panic!("expected a refusal, got {other:?}"),
    }
    let small = NBodyProblem::new(&oscillator(), &bump(1.0), 2, 0.5, grid)
        .unwrap()
        .with_budget(100);
    assert!(matches!(small.solve(&params()), Err(Error::BudgetExceeded { required: 3600, .. })));
}

#[test]
fn invalid_problems_are_rejected() {
    let line = Grid::line(5.0, 21).unwrap();
    assert!(NBodyProblem::new(&oscillator(), &bump(1.0), 1, 0.5, line).is_err());
    assert!(NBodyProblem::new(&oscillator(), &bump(1.0), 5, 0.5, line).is_err());
    assert!(NBodyProblem::new(&oscillator(), &bump(1.0), 2, 1.0, line).is_err());
    let plane = Grid::new(2, 5.0, 21).unwrap();
    assert!(NBodyProblem::new(&oscillator(), &bump(1.0), 2, 0.5, plane).is_err());
}

#[test]
fn trap_scaling_rescales_both_oscillators() {
    let grid = Grid::line(6.0, 257).unwrap();
    let zero = PairPotential::zero(1);
    let four = perturbed_nbody_energy(Perturbation::Trap, 4.0, &oscillator(), &zero, 2, 0.5, grid, &params()).unwrap();
    assert!((four.energy - 4.0).abs() < 1e-5, "{}", four.energy);
    let unit = perturbed_nbody_energy(Perturbation::Trap, 1.0, &oscillator(), &bump(1.0), 2, 0.5, grid, &params())
        .unwrap();
    let plain = minimize_nbody(&oscillator(), &bump(1.0), 2, 0.5, grid, &params()).unwrap();
    assert_eq!(unit.energy, plain.energy);
}

#[test]
fn hellmann_feynman_for_pairs() {
    let grid = Grid::line(6.0, 65).unwrap();
    let v0 = bump(2.0);
    for which in [Perturbation::Trap, Perturbation::Interaction] {
        let hf = nbody_hellmann_feynman_check(which, 1.0, 1e-2, &oscillator(), &v0, 2, 0.5, grid, &params()).unwrap();
        assert!(hf.gap < 1e-3, "{which:?}: {hf:?}");
        assert!(hf.rhs > 0.0);
    }
}

#[test]
fn product_drift_is_the_oscillator_drift() {
    let grid = Grid::line(6.0, 65).unwrap();
    let state = minimize_nbody(&oscillator(), &PairPotential::zero(1), 2, 0.5, grid, &params()).unwrap();
    let b1 = nbody_drift_component(&state).unwrap();
    let nodes = grid.nodes();
    let n = grid.points();
    for j in 0..n {
        for i in 0..n {
            if nodes[i].abs() <= 3.0 && nodes[j].abs() <= 4.0 {
                assert!((b1[i + n * j] + nodes[i]).abs() < 1e-3, "at ({}, {})", nodes[i], nodes[j]);
            }
        }
    }
}

#[test]
fn drift_respects_particle_exchange() {
    let grid = Grid::line(5.0, 49).unwrap();
    let state = minimize_nbody(&oscillator(), &bump(2.0), 2, 0.0, grid, &params()).unwrap();
    let field = nbody_drift(&state).unwrap();
    let (b1, b2) = (field.component(0), field.component(1));
    let n = grid.points();
    for i in 0..n {
        for j in 0..n {
            assert!((b1[i + n * j] - b2[j + n * i]).abs() <= 1e-12);
        }
    }
}

#[test]
fn marginals_of_products_and_fubini() {
    let grid = Grid::line(5.0, 33).unwrap();
    let mut phi = GridFunction::from_fn(grid, 1, |x| (-(x[0] - 0.3).powi(2)).exp() * (1.0 + 0.2 * x[0]));
    phi.normalize().unwrap();
    let rho = product(&phi, 3).density();
    let one = marginal_of_density(&rho, 1).unwrap();
    assert!(max_abs_diff(one.values(), phi.density().values()) < 1e-13);
    let two = marginal_of_density(&rho, 2).unwrap();
    assert!(max_abs_diff(two.values(), product(&phi, 2).density().values()) < 1e-13);
    let nested = marginal_of_density(&two, 1).unwrap();
    assert!(max_abs_diff(nested.values(), one.values()) < 1e-15);
    assert!((one.integrate() - 1.0).abs() < 1e-12 && (two.integrate() - 1.0).abs() < 1e-12);
    assert!(marginal_of_density(&rho, 0).is_err());
    assert!(marginal_of_density(&rho, 3).is_err());
}

#[test]
fn ground_state_lies_below_the_mean_field_product() {
    let grid = Grid::line(5.0, 41).unwrap();
    let v0 = bump(1.0);
    let nls = minimize_nls(&oscillator(), pair_coupling(&v0) / 2.0, grid, &params()).unwrap();
    for (particles, beta) in [(2, 0.0), (2, 0.5), (3, 0.25)] {
        let problem = NBodyProblem::new(&oscillator(), &v0, particles, beta, grid).unwrap();
        let state = problem.solve(&params()).unwrap();
        let trial = problem.energy_of(&product(&nls.phi, particles)).unwrap();
        assert!(state.energy <= trial + 1e-12, "{} > {trial}", state.energy);
        assert!((problem.energy_of(&state.psi).unwrap() - state.energy).abs() < 1e-10);
    }
}

/// E_N/N approaches the mean-field energy as N grows.
#[test]
fn energy_per_particle_trends_toward_mean_field() {
    let grid = Grid::line(5.0, 49).unwrap();
    let v0 = PairPotential::new(PairProfile::QuarticBump { height: 0.625 }, 1.5, 1).unwrap();
    let g = pair_coupling(&v0);
    assert!((g - 1.0).abs() < 1e-9);
    let local = minimize_nls(&oscillator(), g / 2.0, grid, &params()).unwrap().energy;
    let hartree = minimize_hartree(&oscillator(), &v0.scaled(0.5).unwrap(), grid, &params())
        .unwrap()
        .energy;
    for beta in [0.0, 0.25, 0.5] {
        let energies: Vec<f64> = [2, 3, 4]
            .iter()
            .map(|&n| {
                minimize_nbody(&oscillator(), &v0, n, beta, grid, &params())
                    .unwrap()
                    .energy_per_particle()
            })
            .collect();
        let mut references = vec![local];
        if beta == 0.0 {
            references.push(hartree);
        }
        for reference in references {
            let gaps: Vec<f64> = energies.iter().map(|e| (e - reference).abs()).collect();
            assert!(gaps.windows(2).all(|w| w[1] <= w[0]), "β = {beta}: {gaps:?}");
        }
    }
}

#[test]
fn stored_states_rebuild_bit_exactly() {
    let grid = Grid::line(5.0, 33).unwrap();
    let problem = NBodyProblem::new(&oscillator(), &bump(1.0), 3, 0.5, grid).unwrap();
    let state = problem.solve(&params()).unwrap();
    let rebuilt = problem.state_from(state.psi.clone()).unwrap();
    assert_eq!(rebuilt.energy.to_bits(), state.energy.to_bits());
    assert_eq!(rebuilt.components, state.components);
    assert_eq!(rebuilt.residual_norm.to_bits(), state.residual_norm.to_bits());
    assert_eq!(rebuilt.iterations, 0);
    let other = GridFunction::zeros(grid, 2);
    assert!(matches!(problem.state_from(other), Err(Error::GridMismatch(_))));
}
