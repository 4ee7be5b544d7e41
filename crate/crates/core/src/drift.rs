//! Osmotic drift fields `∇ρ / (2ρ)` and their evaluation off the grid.

use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::grid::{for_each_corner, Grid, GridFunction, Shape};
use crate::stencil::{derivative, DiffOrder};

/// Relative density floor used by [`default_floor`].
pub const RELATIVE_FLOOR: f64 = 1e-30;

/// `1e-30 · max ρ`.
pub fn default_floor(rho: &GridFunction) -> f64 {
    let max = rho.values().iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        RELATIVE_FLOOR * max
    } else {
        f64::MIN_POSITIVE
    }
}

/// A vector field on the box `[-L, L]^dims` used as an SDE drift.
pub trait Drift: Sync {
    fn dims(&self) -> usize;
    fn half_width(&self) -> f64;
    /// Writes the drift at `x` into `out` (both of length `dims`).
    fn eval(&self, x: &[f64], out: &mut [f64]);
}

/// Drift sampled on a tensor grid, one array per coordinate axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftField {
    grid: Grid,
    particles: usize,
    components: Vec<Vec<f64>>,
}

fn floored_log(rho: &GridFunction, floor: f64) -> Result<Vec<f64>> {
    if !(floor > 0.0 && floor.is_finite()) {
        return domain(format!("density floor must be positive, got {floor}"));
    }
    if rho.values().iter().any(|v| *v < 0.0) {
        return domain("density must be nonnegative");
    }
    Ok(rho.values().par_iter().map(|&r| r.max(floor).ln()).collect())
}

fn half_derivative(log: &[f64], rho: &GridFunction, axis: usize) -> Vec<f64> {
    let shape = Shape::new(rho.grid().points(), rho.axes());
    let mut d = derivative(log, shape, axis, rho.grid().spacing(), DiffOrder::Second);
    d.par_iter_mut().for_each(|v| *v *= 0.5);
    d
}

/// Half the central-difference gradient of `ln max(ρ, floor)`.
pub fn drift_from_density(rho: &GridFunction, floor: f64) -> Result<DriftField> {
    let log = floored_log(rho, floor)?;
    let components = (0..rho.axes()).map(|axis| half_derivative(&log, rho, axis)).collect();
    Ok(DriftField {
        grid: *rho.grid(),
        particles: rho.particles(),
        components,
    })
}

/// A single coordinate component of [`drift_from_density`].
pub fn drift_axis(rho: &GridFunction, floor: f64, axis: usize) -> Result<Vec<f64>> {
    if axis >= rho.axes() {
        return domain(format!("axis {axis} out of range"));
    }
    let log = floored_log(rho, floor)?;
    Ok(half_derivative(&log, rho, axis))
}

impl DriftField {
    pub fn new(grid: Grid, particles: usize, components: Vec<Vec<f64>>) -> Result<Self> {
        let axes = grid.dim() * particles;
        let len = grid.tensor_len(particles);
        if components.len() != axes || components.iter().any(|c| c.len() != len) {
            return domain("drift components do not match the grid");
        }
        Ok(Self {
            grid,
            particles,
            components,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    /// Values of one coordinate component at every node.
    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    /// The `d` components belonging to particle `p`.
    pub fn particle_block(&self, p: usize) -> &[Vec<f64>] {
        let d = self.grid.dim();
        &self.components[p * d..(p + 1) * d]
    }
}

impl Drift for DriftField {
    fn dims(&self) -> usize {
        self.components.len()
    }

    fn half_width(&self) -> f64 {
        self.grid.half_width()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let dims = self.components.len();
        out[..dims].iter_mut().for_each(|o| *o = 0.0);
        for_each_corner(&self.grid, dims, x, |idx, w| {
            for (o, c) in out.iter_mut().zip(&self.components) {
                *o += w * c[idx];
            }
        });
    }
}

/// The same one-particle drift applied independently to each of
/// `particles` particles.
#[derive(Debug, Clone)]
pub struct ProductDrift<'a> {
    single: &'a DriftField,
    particles: usize,
}

impl<'a> ProductDrift<'a> {
    pub fn new(single: &'a DriftField, particles: usize) -> Result<Self> {
        if single.particles() != 1 {
            return domain("product drift needs a one-particle field");
        }
        Ok(Self { single, particles })
    }
}

impl Drift for ProductDrift<'_> {
    fn dims(&self) -> usize {
        self.single.dims() * self.particles
    }

    fn half_width(&self) -> f64 {
        self.single.half_width()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let d = self.single.dims();
        for p in 0..self.particles {
            self.single.eval(&x[p * d..(p + 1) * d], &mut out[p * d..(p + 1) * d]);
        }
    }
}

/// A drift given by a closure, for analytic test cases.
pub struct FnDrift<F> {
    dims: usize,
    half_width: f64,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> FnDrift<F> {
    pub fn new(dims: usize, half_width: f64, f: F) -> Result<Self> {
        if dims == 0 || dims > 12 || !(half_width > 0.0) {
            return domain("drift needs 1..=12 dimensions and a positive box");
        }
        Ok(Self { dims, half_width, f })
    }
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> Drift for FnDrift<F> {
    fn dims(&self) -> usize {
        self.dims
    }

    fn half_width(&self) -> f64 {
        self.half_width
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn density(n: usize, l: f64, f: impl Fn(f64) -> f64 + Sync) -> GridFunction {
        GridFunction::from_fn(Grid::line(l, n).unwrap(), 1, |x| f(x[0]))
    }

    fn max_error(n: usize, rho: impl Fn(f64) -> f64 + Sync, exact: impl Fn(f64) -> f64) -> f64 {
        let r = density(n, 1.5, rho);
        let b = drift_from_density(&r, default_floor(&r)).unwrap();
        r.grid()
            .nodes()
            .iter()
            .zip(b.component(0))
            .map(|(x, v)| (v - exact(*x)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn gaussian_drift_is_linear() {
        let err = max_error(101, |x| (-x * x).exp(), |x| -x);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn constant_density_has_zero_drift() {
        let r = density(33, 1.0, |_| 0.5);
        let b = drift_from_density(&r, 1e-30).unwrap();
        assert!(b.component(0).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn quartic_drift_converges_at_second_order() {
        let exact = |x: f64| -2.0 * x * x * x;
        let ratio = max_error(81, |x| (-x.powi(4)).exp(), exact) / max_error(161, |x| (-x.powi(4)).exp(), exact);
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn floor_must_be_positive() {
        let r = density(33, 1.0, |_| 0.5);
        assert!(drift_from_density(&r, 0.0).is_err());
    }

    #[test]
    fn interpolation_reproduces_nodes_and_linear_fields() {
        let g = Grid::line(1.0, 11).unwrap();
        let f = GridFunction::from_fn(g, 2, |x| 0.0 * x[0]);
        let comps = vec![
            GridFunction::from_fn(g, 2, |x| 2.0 * x[0] - x[1] + 0.5).into_values(),
            GridFunction::from_fn(g, 2, |x| x[1]).into_values(),
        ];
        let field = DriftField::new(*f.grid(), 2, comps).unwrap();
        let mut out = [0.0; 2];
        field.eval(&[0.13, -0.71], &mut out);
        assert!((out[0] - (0.26 + 0.71 + 0.5)).abs() < 1e-12);
        assert!((out[1] + 0.71).abs() < 1e-12);
        field.eval(&[1.0, 1.0], &mut out);
        assert!((out[0] - 1.5).abs() < 1e-12);
    }
}
