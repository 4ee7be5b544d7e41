//! Mean-field Bose gas laboratory: ground-state solvers, Nelson diffusions
//! and chaos diagnostics on uniform tensor grids.
//!
//! Units follow `ℏ = 2m = 1`: the kinetic energy is `∫|∇φ|²` and the
//! stochastic dynamics use drift `∇ρ / (2ρ)` with a standard Brownian
//! motion, which leaves `ρ` invariant.

pub mod chaos;
pub mod drift;
mod error;
pub mod gp;
pub mod grid;
pub mod nbody;
pub mod nelson;
pub mod potential;
mod stencil;

pub use chaos::{
    chain_rule_gap, chaos_report, drift_mismatch, entropy_identity_check, fisher_convexity_check, fisher_information,
    fisher_superadditivity_gap, k_marginal_entropy, kac_chaos_metric, kl_density, kl_discrete, one_particle_entropy,
    pinsker_check, tensor_power, tv_density, tv_discrete, ChaosReport, Divergence, FisherInformation, IdentityCheck,
    KineticReading, MarginalEntropy, PinskerCheck,
};
pub use drift::{default_floor, drift_axis, drift_from_density, Drift, DriftField, FnDrift, ProductDrift};
pub use error::{Error, Result};
pub use gp::{
    ball_energy_check, hartree_solution_from, hellmann_feynman_check, minimize_hartree, minimize_nls, nls_energy, nls_residual, nls_solution_from,
    perturbed_nls_energy, scattering_length, scattering_limit_sweep, EnergyComponents, FlowParams, FlowScheme,
    BallEnergyCheck, HellmannFeynman, NlsSolution, Perturbation, ScatteringResult, SweepRow,
};
pub use grid::{grid_inner, grid_integrate, Grid, GridFunction};
pub use nbody::{
    marginal_density, marginal_of_density, mean_field_limit, mean_field_limit_from, minimize_nbody, nbody_drift, nbody_drift_component, nbody_energy_components,
    nbody_hellmann_feynman_check, perturbed_nbody_energy, NBodyProblem, NBodyState,
};
pub use nelson::rng::CounterRng;
pub use nelson::{empirical_density, sample_density, simulate, simulate_coupled, CoupledRun, PathEnsemble, Points, SdeParams};
pub use potential::{
    pair_coupling, scale_pair_potential, PairPotential, PairProfile, ScaledPairPotential, TrapPotential,
};
pub use stencil::DiffOrder;

/// The fixed unit convention shared by every solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhysicalConvention;

impl PhysicalConvention {
    /// Coefficient of `|∇φ|²` in the energy.
    pub const KINETIC_COEFFICIENT: f64 = 1.0;
    /// Diffusion coefficient of the SDE, `dX = b dt + dW`.
    pub const DIFFUSION_COEFFICIENT: f64 = 0.5;
}
