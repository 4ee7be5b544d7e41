//! Bosonic ground states of
//! `H_N = Σᵢ(−Δᵢ + V(xᵢ)) + Σ_{i<j} v_N(xᵢ − xⱼ)` on one-dimensional tensor
//! grids, with marginals, per-particle energies and drifts.

mod flow;
mod symmetry;

use rayon::prelude::*;

use self::flow::{descend, TensorOperator};
use self::symmetry::Symmetrizer;
use crate::drift::{default_floor, drift_axis, drift_from_density, DriftField};
use crate::error::{domain, Error, Result};
use crate::gp::{
    hartree_solution_from, minimize_hartree, minimize_nls, nls_solution_from, EnergyComponents, FlowParams, FlowScheme, HellmannFeynman, MeanField, NlsSolution,
    OneBody, Perturbation,
};
use crate::grid::{quadrature, Grid, GridFunction, Shape};
use crate::potential::{pair_coupling, scale_pair_potential, PairPotential, ScaledPairPotential, TrapPotential};

/// Default cap on `n^N`.
pub const DEFAULT_BUDGET: usize = 10_000_000;

/// A converged N-body ground state.
#[derive(Debug, Clone)]
pub struct NBodyState {
    /// Normalized, symmetric, nonnegative wave function on `grid^N`.
    pub psi: GridFunction,
    /// Total energy `E_N`.
    pub energy: f64,
    /// `E_N / N` split into kinetic, trap and interaction parts.
    pub components: EnergyComponents,
    pub particles: usize,
    pub beta: f64,
    pub trap: TrapPotential,
    pub pair: ScaledPairPotential,
    pub trap_scale: f64,
    pub pair_scale: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Step size of the fixed-step scheme, `None` for the Ritz scheme.
    pub time_step: Option<f64>,
    pub max_energy_rise: f64,
    pub boundary_warning: bool,
}

impl NBodyState {
    pub fn grid(&self) -> &Grid {
        self.psi.grid()
    }

    pub fn energy_per_particle(&self) -> f64 {
        self.energy / self.particles as f64
    }

    /// `ρ_N = Ψ²`.
    pub fn density(&self) -> GridFunction {
        self.psi.density()
    }

    /// Largest `|Ψ − Ψ∘σ|` over coordinate transpositions.
    pub fn asymmetry(&self) -> f64 {
        Symmetrizer::new(self.psi.shape()).asymmetry(self.psi.values())
    }
}

/// The N-body problem with optional λ-scalings of the trap and pair terms.
#[derive(Debug, Clone)]
pub struct NBodyProblem {
    trap: TrapPotential,
    pair: ScaledPairPotential,
    grid: Grid,
    particles: usize,
    trap_scale: f64,
    pair_scale: f64,
    budget: usize,
}

impl NBodyProblem {
    pub fn new(trap: &TrapPotential, v0: &PairPotential, particles: usize, beta: f64, grid: Grid) -> Result<Self> {
        if grid.dim() != 1 {
            return domain("the N-body solver works on one-dimensional grids only");
        }
        if v0.dim() != 1 {
            return domain("the pair potential must be one-dimensional");
        }
        if !(2..=4).contains(&particles) {
            return domain(format!("N must be 2, 3 or 4, got {particles}"));
        }
        Ok(Self {
            trap: trap.clone(),
            pair: scale_pair_potential(v0, particles, beta)?,
            grid,
            particles,
            trap_scale: 1.0,
            pair_scale: 1.0,
            budget: DEFAULT_BUDGET,
        })
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    /// Multiplies the trap (`which = Trap`) or pair term by `λ`.
    pub fn perturbed(mut self, which: Perturbation, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return domain("λ must be finite");
        }
        match which {
            Perturbation::Trap if lambda > 0.0 => self.trap_scale = lambda,
            Perturbation::Interaction if lambda >= 0.0 => self.pair_scale = lambda,
            _ => return domain(format!("λ = {lambda} is outside the admissible range")),
        }
        Ok(self)
    }

    pub fn required_points(&self) -> usize {
        self.grid.points().checked_pow(self.particles as u32).unwrap_or(usize::MAX)
    }

    fn check_budget(&self) -> Result<()> {
        let required = self.required_points();
        if required > self.budget {
            return Err(Error::BudgetExceeded {
                required,
                budget: self.budget,
            });
        }
        Ok(())
    }

    fn operator(&self) -> TensorOperator {
        let n = self.grid.points();
        let shape = Shape::new(n, self.particles);
        let h = self.grid.spacing();
        let v: Vec<f64> = self
            .grid
            .nodes()
            .iter()
            .map(|x| self.trap_scale * self.trap.eval(*x))
            .collect();
        let vn: Vec<f64> = (0..n).map(|k| self.pair_scale * self.pair.eval(k as f64 * h)).collect();
        let particles = self.particles;
        let (trap, pair): (Vec<f64>, Vec<f64>) = (0..shape.len())
            .into_par_iter()
            .with_min_len(4096)
            .map(|idx| {
                let mut d = [0usize; 4];
                let mut rem = idx;
                for slot in d.iter_mut().take(particles) {
                    *slot = rem % n;
                    rem /= n;
                }
                let t: f64 = d[..particles].iter().map(|&i| v[i]).sum();
                let mut p = 0.0;
                for i in 0..particles {
                    for j in i + 1..particles {
                        p += vn[d[i].abs_diff(d[j])];
                    }
                }
                (t, p)
            })
            .unzip();
        TensorOperator {
            grid: self.grid,
            particles,
            trap,
            pair,
        }
    }

    /// Ground state of the product ansatz: the Hartree minimizer for the
    /// pair potential `(N − 1)/2 · v_N`, which is exact when `v₀ = 0`.
    fn product_start(&self, params: &FlowParams) -> Result<Vec<f64>> {
        let model = if self.pair.base().is_zero() || self.pair_scale == 0.0 {
            MeanField::Local(0.0)
        } else {
            let c = self.pair_scale * (self.particles as f64 - 1.0) / 2.0;
            MeanField::hartree(&self.grid, |r| c * self.pair.eval(r))?
        };
        let mut one = OneBody::new(self.grid, &self.trap, model);
        one.trap.iter_mut().for_each(|v| *v *= self.trap_scale);
        one.width_hint *= self.trap_scale.powf(-0.25);
        let one_params = FlowParams {
            scheme: FlowScheme::FixedStep,
            time_step: None,
            ..*params
        };
        let phi = one.solve(&one_params)?.phi;
        let phi = phi.values();
        let n = self.grid.points();
        Ok((0..self.required_points())
            .into_par_iter()
            .with_min_len(4096)
            .map(|idx| {
                let mut rem = idx;
                let mut prod = 1.0;
                for _ in 0..self.particles {
                    prod *= phi[rem % n];
                    rem /= n;
                }
                prod
            })
            .collect())
    }

    /// `⟨Ψ, H_N Ψ⟩ / ⟨Ψ, Ψ⟩` for any trial state on the problem's tensor grid.
    pub fn energy_of(&self, psi: &GridFunction) -> Result<f64> {
        if *psi.grid() != self.grid || psi.particles() != self.particles {
            return Err(Error::GridMismatch("trial state and problem use different tensor grids".into()));
        }
        self.check_budget()?;
        let op = self.operator();
        let x = psi.values();
        let norm = op.inner(x, x);
        if !(norm > 0.0) {
            return domain("trial state vanishes");
        }
        Ok(op.inner(x, &op.apply(x)) / norm)
    }

    pub fn solve(&self, params: &FlowParams) -> Result<NBodyState> {
        params.validate()?;
        self.check_budget()?;
        let op = self.operator();
        let sym = Symmetrizer::new(op.shape());
        let start = sym.apply(&self.product_start(params)?);
        let outcome = descend(&op, &sym, start, params)?;
        let mut x = outcome.x;
        if x.iter().sum::<f64>() < 0.0 {
            x.par_iter_mut().for_each(|v| *v = -*v);
        }
        // The exact ground state is positive; negative entries at the
        // level of the iteration error sit in the far tails.
        let cut = -1e-8 * x.iter().copied().fold(0.0, f64::max);
        x.par_iter_mut().for_each(|v| {
            if *v < 0.0 && *v >= cut {
                *v = 0.0;
            }
        });
        let mut state = self.finish(&op, GridFunction::new(self.grid, self.particles, x)?);
        state.iterations = outcome.iterations;
        state.time_step = outcome.time_step;
        state.max_energy_rise = outcome.max_rise;
        Ok(state)
    }

    /// Rebuilds the state record from a stored ground state; iteration
    /// statistics are zero.
    pub fn state_from(&self, psi: GridFunction) -> Result<NBodyState> {
        if *psi.grid() != self.grid || psi.particles() != self.particles {
            return Err(Error::GridMismatch("stored state and problem use different tensor grids".into()));
        }
        self.check_budget()?;
        Ok(self.finish(&self.operator(), psi))
    }

    fn finish(&self, op: &TensorOperator, psi: GridFunction) -> NBodyState {
        let x = psi.values();
        let n = self.particles as f64;
        let kin = op.kinetic(x);
        let components = EnergyComponents {
            kinetic: op.inner(x, &kin) / n,
            trap: quadrature(&self.grid, self.particles, |i| op.trap[i] * x[i] * x[i]) / n,
            interaction: quadrature(&self.grid, self.particles, |i| op.pair[i] * x[i] * x[i]) / n,
        };
        let energy = components.total() * n;
        let residual_norm = op.residual_norm(x, &op.apply(x), energy);
        NBodyState {
            boundary_warning: psi.boundary_max_abs() > 1e-6,
            psi,
            energy,
            components,
            particles: self.particles,
            beta: self.pair.beta(),
            trap: self.trap.clone(),
            pair: self.pair.clone(),
            trap_scale: self.trap_scale,
            pair_scale: self.pair_scale,
            residual_norm,
            iterations: 0,
            time_step: None,
            max_energy_rise: 0.0,
        }
    }
}

/// Ground state of `H_N` with `v_N` built from `v₀`, `N` and `β`.
pub fn minimize_nbody(
    trap: &TrapPotential,
    v0: &PairPotential,
    particles: usize,
    beta: f64,
    grid: Grid,
    params: &FlowParams,
) -> Result<NBodyState> {
    NBodyProblem::new(trap, v0, particles, beta, grid)?.solve(params)
}

/// Ground state with `λV` or `λv_N`.
#[allow(clippy::too_many_arguments)]
pub fn perturbed_nbody_energy(
    which: Perturbation,
    lambda: f64,
    trap: &TrapPotential,
    v0: &PairPotential,
    particles: usize,
    beta: f64,
    grid: Grid,
    params: &FlowParams,
) -> Result<NBodyState> {
    NBodyProblem::new(trap, v0, particles, beta, grid)?
        .perturbed(which, lambda)?
        .solve(params)
}

/// `d(E_N/N)/dλ` by centered differences against the per-particle
/// component at `λ`.
#[allow(clippy::too_many_arguments)]
pub fn nbody_hellmann_feynman_check(
    which: Perturbation,
    lambda: f64,
    delta: f64,
    trap: &TrapPotential,
    v0: &PairPotential,
    particles: usize,
    beta: f64,
    grid: Grid,
    params: &FlowParams,
) -> Result<HellmannFeynman> {
    if !(delta > 0.0 && lambda - delta > 0.0) {
        return domain("δ must be positive and smaller than λ");
    }
    let solve = |l: f64| perturbed_nbody_energy(which, l, trap, v0, particles, beta, grid, params);
    let plus = solve(lambda + delta)?.energy_per_particle();
    let minus = solve(lambda - delta)?.energy_per_particle();
    let at = solve(lambda)?;
    let rhs = match which {
        Perturbation::Trap => at.components.trap / lambda,
        Perturbation::Interaction => at.components.interaction / lambda,
    };
    Ok(HellmannFeynman::new((plus - minus) / (2.0 * delta), rhs))
}

/// The one-particle limit that `E_N / N` approaches: with `g = ∫v₀`, the
/// local functional at coupling `g/2` for `β > 0`, and the Hartree
/// functional with `v₀/2` for `β = 0`. The halves count each pair once.
pub fn mean_field_limit(
    trap: &TrapPotential,
    v0: &PairPotential,
    beta: f64,
    grid: Grid,
    params: &FlowParams,
) -> Result<NlsSolution> {
    if !(0.0..1.0).contains(&beta) {
        return domain(format!("β must lie in [0, 1), got {beta}"));
    }
    if beta == 0.0 {
        minimize_hartree(trap, &v0.scaled(0.5)?, grid, params)
    } else {
        minimize_nls(trap, 0.5 * pair_coupling(v0), grid, params)
    }
}

/// Rebuilds the [`mean_field_limit`] record from a stored minimizer.
pub fn mean_field_limit_from(phi: GridFunction, trap: &TrapPotential, v0: &PairPotential, beta: f64) -> Result<NlsSolution> {
    if !(0.0..1.0).contains(&beta) {
        return domain(format!("β must lie in [0, 1), got {beta}"));
    }
    if beta == 0.0 {
        hartree_solution_from(phi, trap, &v0.scaled(0.5)?)
    } else {
        nls_solution_from(phi, trap, 0.5 * pair_coupling(v0))
    }
}

/// Integrates the last `N − k` coordinates out of an `N`-particle density.
pub fn marginal_of_density(rho: &GridFunction, k: usize) -> Result<GridFunction> {
    let particles = rho.particles();
    if k == 0 || k >= particles {
        return domain(format!("marginal order must satisfy 1 <= k < {particles}, got {k}"));
    }
    let grid = *rho.grid();
    let inner_len = grid.tensor_len(k);
    let outer = Shape::new(grid.points(), rho.axes() - k * grid.dim());
    let w = grid.weights();
    let outer_weights: Vec<f64> = (0..outer.len())
        .map(|j| crate::grid::point_weight(&w, outer, j))
        .collect();
    let values = rho.values();
    let out: Vec<f64> = (0..inner_len)
        .into_par_iter()
        .with_min_len(256)
        .map(|i| {
            outer_weights
                .iter()
                .enumerate()
                .map(|(j, wj)| wj * values[i + j * inner_len])
                .sum()
        })
        .collect();
    GridFunction::new(grid, k, out)
}

/// `ρ^(k)_N`, the `k`-particle marginal of `Ψ_N²`.
pub fn marginal_density(state: &NBodyState, k: usize) -> Result<GridFunction> {
    marginal_of_density(&state.density(), k)
}

/// Kinetic, trap and interaction energy of the first particle:
/// `∫|∂₁Ψ|²`, `∫V(x₁)Ψ²` and `½Σ_{j≥2}∫v_N(x₁ − x_j)Ψ²`.
pub fn nbody_energy_components(state: &NBodyState) -> EnergyComponents {
    let grid = *state.grid();
    let n = grid.points();
    let h = grid.spacing();
    let particles = state.particles;
    let shape = Shape::new(n, particles);
    let psi = state.psi.values();
    let mut kin = vec![0.0; psi.len()];
    crate::stencil::add_neg_laplacian(psi, &mut kin, shape, 0, h, 1.0);
    let nodes = grid.nodes();
    let v: Vec<f64> = nodes.iter().map(|x| state.trap_scale * state.trap.eval(*x)).collect();
    let vn: Vec<f64> = (0..n)
        .map(|k| state.pair_scale * state.pair.eval(k as f64 * h))
        .collect();
    EnergyComponents {
        kinetic: quadrature(&grid, particles, |i| psi[i] * kin[i]),
        trap: quadrature(&grid, particles, |i| v[i % n] * psi[i] * psi[i]),
        interaction: quadrature(&grid, particles, |i| {
            let first = i % n;
            let mut rem = i / n;
            let mut acc = 0.0;
            for _ in 1..particles {
                acc += vn[first.abs_diff(rem % n)];
                rem /= n;
            }
            0.5 * acc * psi[i] * psi[i]
        }),
    }
}

/// The full drift `∇ρ_N / (2ρ_N)` on the tensor grid.
pub fn nbody_drift(state: &NBodyState) -> Result<DriftField> {
    let rho = state.density();
    drift_from_density(&rho, default_floor(&rho))
}

/// The first-particle block `b₁^N` of the N-body drift.
pub fn nbody_drift_component(state: &NBodyState) -> Result<Vec<f64>> {
    let rho = state.density();
    drift_axis(&rho, default_floor(&rho), 0)
}
