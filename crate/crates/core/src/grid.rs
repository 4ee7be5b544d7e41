//! Uniform tensor meshes, sampled fields and trapezoid quadrature.
//!
//! A [`GridFunction`] lives on the `particles`-fold tensor power of a
//! per-particle [`Grid`]. Values are stored with the first axis fastest;
//! particle `p` owns axes `p * dim .. (p + 1) * dim`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Rows summed per parallel task. Fixed so that reductions do not depend
/// on the number of worker threads.
const ROWS_PER_TASK: usize = 64;

/// Isotropic box `[-L, L]^d` sampled with `n` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    points: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return domain(format!("grid dimension must be 1, 2 or 3, got {dim}"));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return domain(format!("grid half-width must be positive, got {half_width}"));
        }
        if points < 8 {
            return domain(format!("need at least 8 points per axis, got {points}"));
        }
        Ok(Self {
            dim,
            half_width,
            points,
        })
    }

    /// One-dimensional grid, the common case for the few-body solvers.
    pub fn line(half_width: f64, points: usize) -> Result<Self> {
        Self::new(1, half_width, points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points as f64 - 1.0)
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.node(i)).collect()
    }

    /// Trapezoid weights along one axis.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points)
            .map(|i| if i == 0 || i + 1 == self.points { 0.5 * h } else { h })
            .collect()
    }

    /// The same grid in `dim` dimensions.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        Self::new(dim, self.half_width, self.points)
    }

    /// Number of values on the `particles`-fold tensor power.
    pub fn tensor_len(&self, particles: usize) -> usize {
        self.points.pow((self.dim * particles) as u32)
    }
}

/// A real field sampled on the tensor power of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    particles: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, particles: usize, values: Vec<f64>) -> Result<Self> {
        if particles == 0 {
            return domain("a grid function needs at least one particle");
        }
        let expected = grid.tensor_len(particles);
        if values.len() != expected {
            return Err(Error::GridMismatch(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return domain(format!("non-finite value at index {pos}"));
        }
        Ok(Self {
            grid,
            particles,
            values,
        })
    }

    pub fn zeros(grid: Grid, particles: usize) -> Self {
        Self {
            grid,
            particles,
            values: vec![0.0; grid.tensor_len(particles)],
        }
    }

    /// Samples `f` at every node. The closure receives all `dim * particles`
    /// coordinates, first axis first.
    pub fn from_fn(grid: Grid, particles: usize, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let axes = grid.dim() * particles;
        let n = grid.points();
        let nodes = grid.nodes();
        let values = (0..grid.tensor_len(particles))
            .into_par_iter()
            .with_min_len(1024)
            .map_init(
                || vec![0.0; axes],
                |coords, idx| {
                    let mut rem = idx;
                    for c in coords.iter_mut() {
                        *c = nodes[rem % n];
                        rem /= n;
                    }
                    f(coords)
                },
            )
            .collect();
        Self {
            grid,
            particles,
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn axes(&self) -> usize {
        self.grid.dim() * self.particles
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn shape(&self) -> Shape {
        Shape::new(self.grid.points(), self.axes())
    }

    pub fn check_layout(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid || self.particles != other.particles {
            return Err(Error::GridMismatch(format!(
                "{:?} x{} vs {:?} x{}",
                self.grid, self.particles, other.grid, other.particles
            )));
        }
        Ok(())
    }

    pub fn integrate(&self) -> f64 {
        quadrature(&self.grid, self.axes(), |i| self.values[i])
    }

    pub fn inner(&self, other: &GridFunction) -> Result<f64> {
        self.check_layout(other)?;
        Ok(quadrature(&self.grid, self.axes(), |i| {
            self.values[i] * other.values[i]
        }))
    }

    pub fn norm_sq(&self) -> f64 {
        quadrature(&self.grid, self.axes(), |i| self.values[i] * self.values[i])
    }

    /// Rescales to unit L² norm and returns the previous norm.
    pub fn normalize(&mut self) -> Result<f64> {
        let norm = self.norm_sq().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return domain("cannot normalize a zero or non-finite field");
        }
        self.values.par_iter_mut().for_each(|v| *v /= norm);
        Ok(norm)
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sq() - 1.0).abs() <= 1e-10
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> GridFunction {
        GridFunction {
            grid: self.grid,
            particles: self.particles,
            values: self.values.par_iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise square, the density of a real wave function.
    pub fn density(&self) -> GridFunction {
        self.map(|v| v * v)
    }

    /// Largest value sitting on the outer faces of the box.
    pub fn boundary_max_abs(&self) -> f64 {
        let shape = self.shape();
        let n = shape.n;
        self.values
            .iter()
            .enumerate()
            .filter(|(idx, _)| {
                let mut rem = *idx;
                (0..shape.axes).any(|_| {
                    let d = rem % n;
                    rem /= n;
                    d == 0 || d + 1 == n
                })
            })
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    }
}

/// Trapezoid integral of a field.
pub fn grid_integrate(f: &GridFunction) -> f64 {
    f.integrate()
}

/// Trapezoid inner product of two fields on the same mesh.
pub fn grid_inner(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    f.inner(g)
}

/// Layout of an `axes`-dimensional cube with `n` points per side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Shape {
    pub n: usize,
    pub axes: usize,
}

impl Shape {
    pub fn new(n: usize, axes: usize) -> Self {
        Self { n, axes }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.axes as u32)
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow(axis as u32)
    }

    pub fn digit(&self, idx: usize, axis: usize) -> usize {
        (idx / self.stride(axis)) % self.n
    }
}

/// Trapezoid sum of `f(index)` over the `axes`-fold tensor grid.
///
/// Rows along the first axis are grouped into fixed blocks, each block is
/// summed sequentially, and the block partials are folded in index order,
/// so the result is bit-identical for any thread count.
pub(crate) fn quadrature(grid: &Grid, axes: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    weighted_sum(&grid.weights(), 0, axes, f)
}

/// Several trapezoid sums in one sweep, with the same block order as
/// [`quadrature`] for every entry.
pub(crate) fn quadrature_many<const K: usize>(grid: &Grid, axes: usize, f: impl Fn(usize) -> [f64; K] + Sync) -> [f64; K] {
    let w = grid.weights();
    let n = w.len();
    let rows = n.pow(axes as u32 - 1);
    let blocks = rows.div_ceil(ROWS_PER_TASK);
    let partials: Vec<[f64; K]> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = [0.0; K];
            for row in b * ROWS_PER_TASK..((b + 1) * ROWS_PER_TASK).min(rows) {
                let mut rw = 1.0;
                let mut rem = row;
                for _ in 1..axes {
                    rw *= w[rem % n];
                    rem /= n;
                }
                let base = row * n;
                let mut inner = [0.0; K];
                for (i, wi) in w.iter().enumerate() {
                    let v = f(base + i);
                    for k in 0..K {
                        inner[k] += wi * v[k];
                    }
                }
                for k in 0..K {
                    acc[k] += rw * inner[k];
                }
            }
            acc
        })
        .collect();
    partials.into_iter().fold([0.0; K], |mut a, b| {
        for k in 0..K {
            a[k] += b[k];
        }
        a
    })
}

/// Trapezoid sum restricted to nodes at least `margin` points away from
/// every face.
pub(crate) fn interior_quadrature(grid: &Grid, axes: usize, margin: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let mut w = grid.weights();
    let n = w.len();
    for (i, wi) in w.iter_mut().enumerate() {
        if i < margin || i + margin >= n {
            *wi = 0.0;
        }
    }
    weighted_sum(&w, margin, axes, f)
}

/// Block-ordered sum of `w(idx) f(idx)`; first-axis nodes closer than
/// `skip` to a face and rows of zero weight are never evaluated.
fn weighted_sum(w: &[f64], skip: usize, axes: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let n = w.len();
    if 2 * skip >= n {
        return 0.0;
    }
    let rows = n.pow(axes as u32 - 1);
    let blocks = rows.div_ceil(ROWS_PER_TASK);
    let partials: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = 0.0;
            for row in b * ROWS_PER_TASK..((b + 1) * ROWS_PER_TASK).min(rows) {
                let mut rw = 1.0;
                let mut rem = row;
                for _ in 1..axes {
                    rw *= w[rem % n];
                    rem /= n;
                }
                if rw == 0.0 {
                    continue;
                }
                let base = row * n;
                let mut inner = 0.0;
                for (i, wi) in w.iter().enumerate().take(n - skip).skip(skip) {
                    inner += wi * f(base + i);
                }
                acc += rw * inner;
            }
            acc
        })
        .collect();
    partials.into_iter().fold(0.0, |a, b| a + b)
}

/// Calls `f(index, weight)` for the `2^axes` corners of the multilinear
/// interpolation stencil at `x`, skipping zero weights. Points outside the
/// box are clamped onto it.
pub(crate) fn for_each_corner(grid: &Grid, axes: usize, x: &[f64], mut f: impl FnMut(usize, f64)) {
    assert!(axes <= 12, "interpolation supports at most 12 axes");
    let n = grid.points();
    let l = grid.half_width();
    let h = grid.spacing();
    let mut base = 0usize;
    let mut frac = [0.0f64; 12];
    let mut strides = [0usize; 12];
    let mut stride = 1usize;
    for k in 0..axes {
        let s = ((x[k] + l) / h).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        frac[k] = s - i as f64;
        base += i * stride;
        strides[k] = stride;
        stride *= n;
    }
    for corner in 0..1usize << axes {
        let mut w = 1.0;
        let mut idx = base;
        for k in 0..axes {
            if corner >> k & 1 == 1 {
                w *= frac[k];
                idx += strides[k];
            } else {
                w *= 1.0 - frac[k];
            }
        }
        if w != 0.0 {
            f(idx, w);
        }
    }
}

/// Trapezoid weight of a single flat index.
pub(crate) fn point_weight(w: &[f64], shape: Shape, idx: usize) -> f64 {
    let mut rem = idx;
    let mut acc = 1.0;
    for _ in 0..shape.axes {
        acc *= w[rem % shape.n];
        rem /= shape.n;
    }
    acc
}
