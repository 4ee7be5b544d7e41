//! One-particle ground states of the nonlinear Schrödinger (local) and
//! Hartree (nonlocal) energy functionals, plus the zero-energy scattering
//! machinery.
//!
//! Both functionals share the form
//! `E[φ] = ∫|∇φ|² + ∫Vφ² + ∫U[φ]φ²` with `U = gφ²` or `U = v * φ²`, so the
//! Euler–Lagrange operator is `H_φ = -Δ + V + 2U` and `μ = E + ∫Uφ²`.

mod scattering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::{interior_quadrature, quadrature, Grid, GridFunction, Shape};
use crate::potential::{PairPotential, TrapPotential};
use crate::stencil::{kinetic_symbol_max, neg_laplacian};

pub use scattering::{
    ball_energy_check, scattering_length, scattering_limit_sweep, BallEnergyCheck, ScatteringResult, SweepRow,
    SCATTERING_CONSTANT,
};

/// Boundary layers excluded from residual norms, matching the stencil width.
pub(crate) const RESIDUAL_MARGIN: usize = 2;

/// Largest `n^{2d}` accepted for direct Hartree convolution.
const HARTREE_BUDGET: usize = 2_000_000_000;

/// Update rule used by the tensor-grid solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowScheme {
    /// `φ ← normalize(φ − τ(Hφ − μφ))`.
    FixedStep,
    /// Rayleigh–Ritz on `{φ, Hφ − μφ, previous step}`; linear problems only.
    LocallyOptimal,
}

/// Settings for the normalized gradient flow.
///
/// One-particle solvers always run the fixed-step flow; `scheme` is read by
/// the N-body solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    /// Step size; `None` picks one from the largest stencil eigenvalue.
    pub time_step: Option<f64>,
    pub max_iterations: usize,
    pub energy_tolerance: f64,
    pub residual_tolerance: f64,
    pub scheme: FlowScheme,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            time_step: None,
            max_iterations: 500_000,
            energy_tolerance: 1e-12,
            residual_tolerance: 1e-8,
            scheme: FlowScheme::LocallyOptimal,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if let Some(tau) = self.time_step {
            if !(tau > 0.0 && tau.is_finite()) {
                return domain(format!("time step must be positive, got {tau}"));
            }
        }
        if !(self.energy_tolerance > 0.0 && self.residual_tolerance > 0.0) {
            return domain("tolerances must be positive");
        }
        if self.max_iterations == 0 {
            return domain("max_iterations must be positive");
        }
        Ok(())
    }
}

/// Kinetic, trap and interaction parts of an energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyComponents {
    pub kinetic: f64,
    pub trap: f64,
    pub interaction: f64,
}

impl EnergyComponents {
    pub fn total(&self) -> f64 {
        self.kinetic + self.trap + self.interaction
    }
}

/// A converged one-particle ground state.
#[derive(Debug, Clone)]
pub struct NlsSolution {
    pub phi: GridFunction,
    pub energy: f64,
    pub components: EnergyComponents,
    pub chemical_potential: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub time_step: f64,
    /// Largest energy increase seen between consecutive iterates.
    pub max_energy_rise: f64,
    /// Set when `|φ|` on the box faces exceeds `1e-6`.
    pub boundary_warning: bool,
    /// Self-consistent potential `U` at `φ` (`gφ²` or `v₀ * φ²`), so that
    /// `−Δφ + Vφ + 2Uφ = μφ`.
    pub mean_field: Vec<f64>,
}

/// Which term a λ-perturbation multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Perturbation {
    Trap,
    Interaction,
}

/// The mean-field self-interaction.
#[derive(Debug, Clone)]
pub(crate) enum MeanField {
    Local(f64),
    /// Pair potential tabulated on every per-axis index offset.
    Hartree(Vec<f64>),
}

impl MeanField {
    pub(crate) fn hartree(grid: &Grid, pair: impl Fn(f64) -> f64) -> Result<Self> {
        let n = grid.points();
        let d = grid.dim();
        let cost = n.checked_pow(2 * d as u32).unwrap_or(usize::MAX);
        if cost > HARTREE_BUDGET {
            return Err(Error::BudgetExceeded {
                required: cost,
                budget: HARTREE_BUDGET,
            });
        }
        let h = grid.spacing();
        let shape = Shape::new(n, d);
        let table = (0..shape.len())
            .map(|k| {
                let r2: f64 = (0..d).map(|a| (shape.digit(k, a) as f64 * h).powi(2)).sum();
                pair(r2.sqrt())
            })
            .collect();
        Ok(Self::Hartree(table))
    }

    /// The self-consistent potential `U[ρ]`.
    fn field(&self, grid: &Grid, rho: &[f64]) -> Vec<f64> {
        match self {
            Self::Local(g) => rho.iter().map(|r| g * r).collect(),
            Self::Hartree(table) => {
                let n = grid.points();
                let d = grid.dim();
                let shape = Shape::new(n, d);
                let w = grid.weights();
                let wrho: Vec<f64> = (0..rho.len())
                    .map(|j| crate::grid::point_weight(&w, shape, j) * rho[j])
                    .collect();
                (0..rho.len())
                    .into_par_iter()
                    .with_min_len(16)
                    .map(|i| {
                        let mut acc = 0.0;
                        for (j, wr) in wrho.iter().enumerate() {
                            let mut off = 0;
                            let mut stride = 1;
                            for a in 0..d {
                                off += shape.digit(i, a).abs_diff(shape.digit(j, a)) * stride;
                                stride *= n;
                            }
                            acc += table[off] * wr;
                        }
                        acc
                    })
                    .collect()
            }
        }
    }

    fn scaled(&self, lambda: f64) -> Self {
        match self {
            Self::Local(g) => Self::Local(lambda * g),
            Self::Hartree(t) => Self::Hartree(t.iter().map(|v| lambda * v).collect()),
        }
    }

    /// Bound on the interaction part of the energy Hessian.
    fn stiffness(&self, rho_max: f64) -> f64 {
        match self {
            Self::Local(g) => 12.0 * g * rho_max,
            Self::Hartree(t) => 6.0 * t.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// A one-particle problem `(grid, sampled V, mean field)`.
#[derive(Debug, Clone)]
pub(crate) struct OneBody {
    pub grid: Grid,
    pub trap: Vec<f64>,
    pub model: MeanField,
    pub width_hint: f64,
}

pub(crate) struct Evaluation {
    pub h_phi: Vec<f64>,
    pub components: EnergyComponents,
    pub mu: f64,
}

impl OneBody {
    pub fn new(grid: Grid, trap: &TrapPotential, model: MeanField) -> Self {
        let v = GridFunction::from_fn(grid, 1, |x| trap.eval_point(x)).into_values();
        Self {
            grid,
            trap: v,
            model,
            width_hint: trap.matched_width(),
        }
    }

    fn shape(&self) -> Shape {
        Shape::new(self.grid.points(), self.grid.dim())
    }

    pub fn evaluate(&self, phi: &[f64]) -> Evaluation {
        let grid = &self.grid;
        let axes = grid.dim();
        let kin = neg_laplacian(phi, self.shape(), grid.spacing());
        let rho: Vec<f64> = phi.iter().map(|p| p * p).collect();
        let u = self.model.field(grid, &rho);
        let h_phi: Vec<f64> = (0..phi.len())
            .map(|i| kin[i] + (self.trap[i] + 2.0 * u[i]) * phi[i])
            .collect();
        let components = EnergyComponents {
            kinetic: quadrature(grid, axes, |i| phi[i] * kin[i]),
            trap: quadrature(grid, axes, |i| self.trap[i] * rho[i]),
            interaction: quadrature(grid, axes, |i| u[i] * rho[i]),
        };
        let mu = quadrature(grid, axes, |i| phi[i] * h_phi[i]);
        Evaluation {
            h_phi,
            components,
            mu,
        }
    }

    pub fn residual(&self, phi: &[f64], ev: &Evaluation) -> f64 {
        interior_quadrature(&self.grid, self.grid.dim(), RESIDUAL_MARGIN, |i| {
            let r = ev.h_phi[i] - ev.mu * phi[i];
            r * r
        })
        .sqrt()
    }

    fn gaussian(&self, width: f64) -> Vec<f64> {
        let mut g = GridFunction::from_fn(self.grid, 1, |x| {
            (-x.iter().map(|c| c * c).sum::<f64>() / (2.0 * width * width)).exp()
        });
        g.normalize().expect("Gaussian on a valid grid has positive norm");
        g.into_values()
    }

    /// Gaussian whose width minimizes the energy over a coarse scan around
    /// the trap's natural width.
    pub fn initial_state(&self) -> Vec<f64> {
        let h = self.grid.spacing();
        let l = self.grid.half_width();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for k in -4..=6 {
            let width = (self.width_hint * 2f64.powf(k as f64 / 2.0)).clamp(2.0 * h, 0.5 * l);
            let phi = self.gaussian(width);
            let e = self.evaluate(&phi).components.total();
            if best.as_ref().is_none_or(|(b, _)| e < *b) {
                best = Some((e, phi));
            }
        }
        best.unwrap().1
    }

    pub fn auto_time_step(&self, phi: &[f64]) -> f64 {
        let kin = self.grid.dim() as f64 * kinetic_symbol_max(self.grid.spacing());
        let vmax = self.trap.iter().copied().fold(0.0, f64::max);
        let rho_max = phi.iter().map(|p| p * p).fold(0.0, f64::max);
        0.95 / (kin + vmax + self.model.stiffness(rho_max))
    }

    pub fn solve(&self, params: &FlowParams) -> Result<NlsSolution> {
        params.validate()?;
        let grid = self.grid;
        let axes = grid.dim();
        let mut phi = self.initial_state();
        let tau = params.time_step.unwrap_or_else(|| self.auto_time_step(&phi));
        let mut ev = self.evaluate(&phi);
        let mut energy = ev.components.total();
        let mut delta = f64::INFINITY;
        let mut rise: f64 = 0.0;
        let mut iterations = 0;
        loop {
            let res = self.residual(&phi, &ev);
            if delta.abs() < params.energy_tolerance && res < params.residual_tolerance {
                break;
            }
            if iterations == params.max_iterations {
                return Err(Error::NotConverged {
                    iterations,
                    energy,
                    residual: res,
                    last: Box::new(GridFunction::new(grid, 1, phi)?),
                });
            }
            for (p, hp) in phi.iter_mut().zip(&ev.h_phi) {
                *p -= tau * (hp - ev.mu * *p);
            }
            let norm = quadrature(&grid, axes, |i| phi[i] * phi[i]).sqrt();
            phi.iter_mut().for_each(|p| *p /= norm);
            ev = self.evaluate(&phi);
            let e = ev.components.total();
            delta = e - energy;
            rise = rise.max(delta);
            energy = e;
            iterations += 1;
        }
        if phi.iter().sum::<f64>() < 0.0 {
            phi.iter_mut().for_each(|p| *p = -*p);
        }
        let mut sol = self.finish(GridFunction::new(grid, 1, phi)?);
        sol.iterations = iterations;
        sol.time_step = tau;
        sol.max_energy_rise = rise;
        Ok(sol)
    }

    /// Energies, residual and mean field of a final iterate.
    pub fn finish(&self, phi: GridFunction) -> NlsSolution {
        let ev = self.evaluate(phi.values());
        let residual_norm = self.residual(phi.values(), &ev);
        let rho: Vec<f64> = phi.values().iter().map(|p| p * p).collect();
        let mean_field = self.model.field(&self.grid, &rho);
        NlsSolution {
            boundary_warning: phi.boundary_max_abs() > 1e-6,
            phi,
            energy: ev.components.total(),
            components: ev.components,
            chemical_potential: ev.mu,
            residual_norm,
            iterations: 0,
            time_step: 0.0,
            max_energy_rise: 0.0,
            mean_field,
        }
    }
}

fn check_coupling(g: f64) -> Result<()> {
    if !(g >= 0.0 && g.is_finite()) {
        return domain(format!("coupling must be finite and nonnegative, got {g}"));
    }
    Ok(())
}

/// Minimizes `∫|∇φ|² + Vφ² + gφ⁴` over normalized `φ`.
pub fn minimize_nls(trap: &TrapPotential, g: f64, grid: Grid, params: &FlowParams) -> Result<NlsSolution> {
    check_coupling(g)?;
    OneBody::new(grid, trap, MeanField::Local(g)).solve(params)
}

/// Minimizes `∫|∇φ|² + Vφ² + ∫∫φ²(x) v₀(x − y) φ²(y)` over normalized `φ`.
pub fn minimize_hartree(trap: &TrapPotential, v0: &PairPotential, grid: Grid, params: &FlowParams) -> Result<NlsSolution> {
    if v0.dim() != grid.dim() {
        return Err(Error::GridMismatch(format!(
            "pair potential is {}-dimensional, grid is {}-dimensional",
            v0.dim(),
            grid.dim()
        )));
    }
    OneBody::new(grid, trap, MeanField::hartree(&grid, |r| v0.eval(r))?).solve(params)
}

/// Rebuilds the solution record of the local functional from a stored
/// minimizer; iteration statistics are zero.
pub fn nls_solution_from(phi: GridFunction, trap: &TrapPotential, g: f64) -> Result<NlsSolution> {
    check_coupling(g)?;
    check_one_particle(&phi)?;
    Ok(OneBody::new(*phi.grid(), trap, MeanField::Local(g)).finish(phi))
}

/// As [`nls_solution_from`] for the Hartree functional.
pub fn hartree_solution_from(phi: GridFunction, trap: &TrapPotential, v0: &PairPotential) -> Result<NlsSolution> {
    check_one_particle(&phi)?;
    let grid = *phi.grid();
    if v0.dim() != grid.dim() {
        return Err(Error::GridMismatch("pair potential and grid dimensions differ".into()));
    }
    Ok(OneBody::new(grid, trap, MeanField::hartree(&grid, |r| v0.eval(r))?).finish(phi))
}

/// Energy breakdown of an arbitrary normalized trial state for the local
/// functional.
pub fn nls_energy(phi: &GridFunction, trap: &TrapPotential, g: f64) -> Result<EnergyComponents> {
    check_one_particle(phi)?;
    let problem = OneBody::new(*phi.grid(), trap, MeanField::Local(g));
    Ok(problem.evaluate(phi.values()).components)
}

fn check_one_particle(phi: &GridFunction) -> Result<()> {
    if phi.particles() != 1 {
        return Err(Error::GridMismatch(format!(
            "expected a one-particle field, got {} particles",
            phi.particles()
        )));
    }
    Ok(())
}

/// Interior L² norm of `-Δφ + Vφ + 2gφ³ − μφ`.
pub fn nls_residual(phi: &GridFunction, mu: f64, trap: &TrapPotential, g: f64) -> Result<f64> {
    check_one_particle(phi)?;
    let problem = OneBody::new(*phi.grid(), trap, MeanField::Local(g));
    let mut ev = problem.evaluate(phi.values());
    ev.mu = mu;
    Ok(problem.residual(phi.values(), &ev))
}

fn perturbed_problem(which: Perturbation, lambda: f64, base: OneBody) -> Result<OneBody> {
    if !(lambda.is_finite()) {
        return domain("λ must be finite");
    }
    match which {
        Perturbation::Trap => {
            if lambda <= 0.0 {
                return domain(format!("trap scaling λ must be positive, got {lambda}"));
            }
            Ok(OneBody {
                trap: base.trap.iter().map(|v| lambda * v).collect(),
                width_hint: base.width_hint * lambda.powf(-0.25),
                ..base
            })
        }
        Perturbation::Interaction => {
            if lambda < 0.0 {
                return domain(format!("interaction scaling λ must be nonnegative, got {lambda}"));
            }
            Ok(OneBody {
                model: base.model.scaled(lambda),
                ..base
            })
        }
    }
}

/// Ground state of the local functional with `λV` or `λg`.
pub fn perturbed_nls_energy(
    which: Perturbation,
    lambda: f64,
    trap: &TrapPotential,
    g: f64,
    grid: Grid,
    params: &FlowParams,
) -> Result<NlsSolution> {
    check_coupling(g)?;
    perturbed_problem(which, lambda, OneBody::new(grid, trap, MeanField::Local(g)))?.solve(params)
}

/// Centered difference of `E(λ)` against the matching component integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HellmannFeynman {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

impl HellmannFeynman {
    pub(crate) fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            gap: (lhs - rhs).abs(),
        }
    }
}

/// `(E(λ+δ) − E(λ−δ)) / 2δ` against `∫Vφ_λ²` (trap) or `g∫φ_λ⁴` (interaction).
#[allow(clippy::too_many_arguments)]
pub fn hellmann_feynman_check(
    which: Perturbation,
    lambda: f64,
    delta: f64,
    trap: &TrapPotential,
    g: f64,
    grid: Grid,
    params: &FlowParams,
) -> Result<HellmannFeynman> {
    if !(delta > 0.0) || (which == Perturbation::Trap && delta >= lambda) {
        return domain("δ must be positive and keep λ − δ admissible");
    }
    let solve = |l: f64| perturbed_nls_energy(which, l, trap, g, grid, params);
    let plus = solve(lambda + delta)?;
    let minus = solve(lambda - delta)?;
    let at = solve(lambda)?;
    let rhs = match which {
        Perturbation::Trap => at.components.trap / lambda,
        Perturbation::Interaction => {
            let rho4 = at.phi.values().iter().map(|p| p.powi(4)).collect::<Vec<_>>();
            g * quadrature(&grid, grid.dim(), |i| rho4[i])
        }
    };
    Ok(HellmannFeynman::new((plus.energy - minus.energy) / (2.0 * delta), rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator() -> TrapPotential {
        TrapPotential::harmonic(1.0).unwrap()
    }

    #[test]
    fn free_oscillator_ground_state() {
        let grid = Grid::line(8.0, 257).unwrap();
        let sol = minimize_nls(&oscillator(), 0.0, grid, &FlowParams::default()).unwrap();
        assert!((sol.energy - 1.0).abs() < 1e-6, "{}", sol.energy);
        assert!((sol.chemical_potential - 1.0).abs() < 1e-6);
        assert!(sol.max_energy_rise <= 1e-12);
        assert!(sol.phi.is_normalized());
        assert!(sol.phi.values().iter().all(|v| *v > 0.0));
        assert!(!sol.boundary_warning);
    }

    #[test]
    fn residual_of_exact_eigenfunction_is_small() {
        let grid = Grid::line(8.0, 257).unwrap();
        let mut phi = GridFunction::from_fn(grid, 1, |x| (-x[0] * x[0] / 2.0).exp());
        phi.normalize().unwrap();
        let r = nls_residual(&phi, 1.0, &oscillator(), 0.0).unwrap();
        assert!(r < 1e-4, "{r}");
        let mut bad = GridFunction::from_fn(grid, 1, |x| (-x[0].abs()).exp() * (1.0 + x[0].sin()));
        bad.normalize().unwrap();
        let r = nls_residual(&bad, 1.0, &oscillator(), 0.0).unwrap();
        assert!(r > 0.1, "{r}");
    }

    #[test]
    fn non_convergence_carries_last_iterate() {
        let grid = Grid::line(8.0, 65).unwrap();
        let params = FlowParams {
            max_iterations: 3,
            ..FlowParams::default()
        };
        match minimize_nls(&oscillator(), 1.0, grid, &params) {
            Err(Error::NotConverged { iterations, last, .. }) => {
                assert_eq!(iterations, 3);
                assert!(last.is_normalized());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let grid = Grid::line(8.0, 65).unwrap();
        assert!(minimize_nls(&oscillator(), -1.0, grid, &FlowParams::default()).is_err());
        let p = FlowParams {
            time_step: Some(0.0),
            ..FlowParams::default()
        };
        assert!(minimize_nls(&oscillator(), 0.0, grid, &p).is_err());
        assert!(perturbed_nls_energy(Perturbation::Trap, 0.0, &oscillator(), 0.0, grid, &FlowParams::default()).is_err());
    }
}
