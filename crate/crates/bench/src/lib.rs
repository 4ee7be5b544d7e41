//! Fixtures shared by the solver benchmarks.

use bec_core::{mean_field_limit, minimize_nbody, FlowParams, Grid, NBodyState, NlsSolution, PairPotential, TrapPotential};

pub fn oscillator() -> TrapPotential {
    TrapPotential::harmonic(1.0).expect("unit oscillator")
}

/// Repulsive bump with `∫v₀ = g` and unit range.
pub fn bump(g: f64) -> PairPotential {
    PairPotential::bump_with_coupling(g, 1.0, 1).expect("valid bump")
}

pub fn line(points: usize) -> Grid {
    Grid::line(6.0, points).expect("valid grid")
}

/// An interacting ground state and its mean-field limit at `β = 0.5`.
pub fn interacting(particles: usize, points: usize) -> (NBodyState, NlsSolution) {
    let grid = line(points);
    let v0 = bump(2.0);
    let flow = FlowParams::default();
    let state = minimize_nbody(&oscillator(), &v0, particles, 0.5, grid, &flow).expect("n-body solve");
    let nls = mean_field_limit(&oscillator(), &v0, 0.5, grid, &flow).expect("mean-field solve");
    (state, nls)
}

/// Three-dimensional bump used for scattering lengths.
pub fn bump_3d(g: f64) -> PairPotential {
    PairPotential::bump_with_coupling(g, 1.0, 3).expect("valid bump")
}
