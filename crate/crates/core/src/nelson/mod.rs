//! Euler–Maruyama simulation of Nelson diffusions `dX = b(X) dt + dW` in a
//! reflecting box, synchronous coupling, and empirical densities.

pub mod rng;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use self::rng::{CounterRng, NOISE_DOMAIN, SAMPLING_DOMAIN};
use crate::drift::{Drift, DriftField, ProductDrift};
use crate::error::{domain, Error, Result};
use crate::grid::{for_each_corner, Grid, GridFunction};

/// Time stepping and ensemble size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeParams {
    pub time_step: f64,
    pub horizon: f64,
    pub trajectories: usize,
    pub seed: u64,
    /// Steps between recorded states; `None` records about 100 times.
    pub record_every: Option<usize>,
}

impl SdeParams {
    pub fn new(time_step: f64, horizon: f64, trajectories: usize, seed: u64) -> Result<Self> {
        let p = Self {
            time_step,
            horizon,
            trajectories,
            seed,
            record_every: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.time_step > 0.0 && self.time_step.is_finite()) {
            return domain(format!("time step must be positive, got {}", self.time_step));
        }
        if !(self.horizon >= self.time_step && self.horizon.is_finite()) {
            return domain(format!("horizon {} is shorter than one step", self.horizon));
        }
        if self.trajectories == 0 {
            return domain("at least one trajectory is required");
        }
        if self.record_every == Some(0) {
            return domain("record interval must be at least one step");
        }
        Ok(())
    }

    /// Number of Euler steps, `round(T / dt)`.
    pub fn steps(&self) -> usize {
        ((self.horizon / self.time_step).round() as usize).max(1)
    }

    pub fn record_interval(&self) -> usize {
        self.record_every.unwrap_or_else(|| (self.steps() / 100).max(1))
    }

    /// Step indices at which states are stored, always including 0 and the last step.
    pub fn recorded_steps(&self) -> Vec<usize> {
        let steps = self.steps();
        let mut out: Vec<usize> = (0..=steps).step_by(self.record_interval()).collect();
        if *out.last().unwrap() != steps {
            out.push(steps);
        }
        out
    }
}

/// A set of points in `[-L, L]^dims`, stored point after point.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dims: usize,
    coords: Vec<f64>,
}

impl Points {
    pub fn new(dims: usize, coords: Vec<f64>) -> Result<Self> {
        if dims == 0 || coords.len() % dims != 0 {
            return domain("coordinate count is not a multiple of the dimension");
        }
        Ok(Self { dims, coords })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.coords[j * self.dims..(j + 1) * self.dims]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Recorded trajectories of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub params: SdeParams,
    dims: usize,
    half_width: f64,
    steps: Vec<usize>,
    /// `[trajectory][record][coordinate]`, flattened.
    states: Vec<f64>,
}

impl PathEnsemble {
    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn trajectories(&self) -> usize {
        self.params.trajectories
    }

    pub fn records(&self) -> usize {
        self.steps.len()
    }

    pub fn recorded_steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn times(&self) -> Vec<f64> {
        self.steps.iter().map(|&s| s as f64 * self.params.time_step).collect()
    }

    pub fn state(&self, trajectory: usize, record: usize) -> &[f64] {
        let start = (trajectory * self.steps.len() + record) * self.dims;
        &self.states[start..start + self.dims]
    }

    /// `(seed, stream index)` that regenerates trajectory `j`.
    pub fn provenance(&self, trajectory: usize) -> (u64, u64) {
        (self.params.seed, trajectory as u64)
    }
}

fn reflect_into(x: f64, l: f64) -> f64 {
    if x.abs() <= l {
        return x;
    }
    let period = 4.0 * l;
    let mut y = (x + l).rem_euclid(period);
    if y > 2.0 * l {
        y = period - y;
    }
    y - l
}

fn trapezoid_mass(rho: &[f64], h: f64) -> Vec<f64> {
    let mut cum = Vec::with_capacity(rho.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for w in rho.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        cum.push(acc);
    }
    cum
}

/// Draws `m` points from the density `ρ` on its tensor grid.
///
/// One axis: exact inversion of the CDF of the piecewise-linear
/// interpolant. More axes: rejection from the uniform box proposal under
/// the envelope `max ρ`, with multilinear interpolation. Point `j` depends
/// only on `(seed, j)`.
pub fn sample_density(rho: &GridFunction, m: usize, seed: u64) -> Result<Points> {
    if rho.values().iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return domain("density must be finite and nonnegative");
    }
    let envelope = rho.values().iter().copied().fold(0.0, f64::max);
    if !(envelope > 0.0) {
        return Err(Error::DegenerateEnvelope);
    }
    let grid = *rho.grid();
    let dims = rho.axes();
    let l = grid.half_width();
    let h = grid.spacing();
    let rng = CounterRng::new(seed);
    let values = rho.values();
    let coords: Vec<f64> = if dims == 1 {
        let cum = trapezoid_mass(values, h);
        let total = *cum.last().unwrap();
        (0..m)
            .into_par_iter()
            .with_min_len(1024)
            .map(|j| {
                let target = rng.uniform(SAMPLING_DOMAIN, j as u64, 0, 0) * total;
                let cell = cum.partition_point(|c| *c <= target).clamp(1, values.len() - 1) - 1;
                let mass = target - cum[cell];
                let a = values[cell];
                let slope = (values[cell + 1] - a) / h;
                // Root of a·s + slope·s²/2 = mass in the stable form.
                let disc = (a * a + 2.0 * slope * mass).max(0.0);
                let s = if a + disc.sqrt() > 0.0 {
                    2.0 * mass / (a + disc.sqrt())
                } else {
                    0.0
                };
                (grid.node(cell) + s.clamp(0.0, h)).min(l)
            })
            .collect()
    } else {
        (0..m)
            .into_par_iter()
            .with_min_len(64)
            .flat_map_iter(|j| {
                let mut x = vec![0.0; dims];
                for attempt in 0u64.. {
                    let step = attempt * (dims as u64 + 1);
                    for (k, xk) in x.iter_mut().enumerate() {
                        *xk = -l + 2.0 * l * rng.uniform(SAMPLING_DOMAIN, j as u64, step + k as u64, 0);
                    }
                    let u = rng.uniform(SAMPLING_DOMAIN, j as u64, step + dims as u64, 0);
                    let mut value = 0.0;
                    for_each_corner(&grid, dims, &x, |idx, w| value += w * values[idx]);
                    if u * envelope < value {
                        break;
                    }
                }
                x
            })
            .collect()
    };
    Points::new(dims, coords)
}

fn check_start(drift: &dyn Drift, init: &Points, params: &SdeParams) -> Result<()> {
    params.validate()?;
    if init.dims() != drift.dims() {
        return domain(format!(
            "initial points have {} coordinates, the drift has {}",
            init.dims(),
            drift.dims()
        ));
    }
    if init.len() != params.trajectories {
        return domain(format!(
            "{} initial points for {} trajectories",
            init.len(),
            params.trajectories
        ));
    }
    let l = drift.half_width();
    if init.coords().iter().any(|x| !(x.abs() <= l)) {
        return domain("initial points must lie inside the box");
    }
    Ok(())
}

/// One Euler–Maruyama step with noise slots `0..dims` of `(trajectory, step)`.
fn euler_step(drift: &dyn Drift, rng: &CounterRng, x: &mut [f64], b: &mut [f64], dt: f64, trajectory: usize, step: usize) {
    let l = drift.half_width();
    let sq = dt.sqrt();
    drift.eval(x, b);
    for (k, (xk, bk)) in x.iter_mut().zip(b.iter()).enumerate() {
        let z = rng.normal(NOISE_DOMAIN, trajectory as u64, step as u64, k as u64);
        *xk = reflect_into(*xk + bk * dt + sq * z, l);
    }
}

/// Simulates `dX = b(X) dt + dW` from the given initial points.
pub fn simulate(drift: &dyn Drift, init: &Points, params: &SdeParams) -> Result<PathEnsemble> {
    check_start(drift, init, params)?;
    let dims = drift.dims();
    let steps = params.recorded_steps();
    let rng = CounterRng::new(params.seed);
    let per: Vec<Result<Vec<f64>>> = (0..params.trajectories)
        .into_par_iter()
        .map(|j| {
            let mut x = init.point(j).to_vec();
            let mut b = vec![0.0; dims];
            let mut out = Vec::with_capacity(steps.len() * dims);
            out.extend_from_slice(&x);
            let mut next = 1;
            for step in 0..params.steps() {
                euler_step(drift, &rng, &mut x, &mut b, params.time_step, j, step);
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState {
                        trajectory: j,
                        step: step + 1,
                    });
                }
                if next < steps.len() && steps[next] == step + 1 {
                    out.extend_from_slice(&x);
                    next += 1;
                }
            }
            Ok(out)
        })
        .collect();
    let mut states = Vec::with_capacity(params.trajectories * steps.len() * dims);
    for p in per {
        states.extend(p?);
    }
    Ok(PathEnsemble {
        params: *params,
        dims,
        half_width: drift.half_width(),
        steps,
        states,
    })
}

/// Two synchronously coupled ensembles and their first-particle distance.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    /// Driven by the N-body drift.
    pub interacting: PathEnsemble,
    /// Each particle driven independently by the one-particle drift.
    pub independent: PathEnsemble,
    /// `sup_t |Y¹_t − X¹_t|²` per trajectory over every Euler step, not
    /// only the recorded ones.
    pub sup_distance_sq: Vec<f64>,
}

impl CoupledRun {
    pub fn mean_sup_distance_sq(&self) -> f64 {
        self.sup_distance_sq.iter().sum::<f64>() / self.sup_distance_sq.len() as f64
    }

    /// Standard error of [`Self::mean_sup_distance_sq`].
    pub fn standard_error(&self) -> f64 {
        let m = self.sup_distance_sq.len() as f64;
        let mean = self.mean_sup_distance_sq();
        let var = self.sup_distance_sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
        (var / m).sqrt()
    }
}

/// Runs the N-body diffusion and the product of one-particle diffusions
/// with the same initial points and the same Brownian increments.
pub fn simulate_coupled(
    interacting: &dyn Drift,
    single: &DriftField,
    init: &Points,
    params: &SdeParams,
) -> Result<CoupledRun> {
    let d = single.grid().dim();
    if interacting.dims() % d != 0 || interacting.dims() < d {
        return domain("drift dimensions are incompatible");
    }
    if (interacting.half_width() - single.half_width()).abs() > 0.0 {
        return Err(Error::GridMismatch("the two drifts live on different boxes".into()));
    }
    let independent = ProductDrift::new(single, interacting.dims() / d)?;
    check_start(interacting, init, params)?;
    let dims = interacting.dims();
    let steps = params.recorded_steps();
    let rng = CounterRng::new(params.seed);
    let per: Vec<Result<(Vec<f64>, Vec<f64>, f64)>> = (0..params.trajectories)
        .into_par_iter()
        .map(|j| {
            let mut x = init.point(j).to_vec();
            let mut y = x.clone();
            let mut bx = vec![0.0; dims];
            let mut by = vec![0.0; dims];
            let mut rx = Vec::with_capacity(steps.len() * dims);
            let mut ry = Vec::with_capacity(steps.len() * dims);
            rx.extend_from_slice(&x);
            ry.extend_from_slice(&y);
            let mut worst: f64 = 0.0;
            let mut next = 1;
            for step in 0..params.steps() {
                euler_step(interacting, &rng, &mut x, &mut bx, params.time_step, j, step);
                euler_step(&independent, &rng, &mut y, &mut by, params.time_step, j, step);
                if x.iter().chain(&y).any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState {
                        trajectory: j,
                        step: step + 1,
                    });
                }
                let dist: f64 = x[..d].iter().zip(&y[..d]).map(|(p, q)| (p - q).powi(2)).sum();
                worst = worst.max(dist);
                if next < steps.len() && steps[next] == step + 1 {
                    rx.extend_from_slice(&x);
                    ry.extend_from_slice(&y);
                    next += 1;
                }
            }
            Ok((rx, ry, worst))
        })
        .collect();
    let mut a = Vec::with_capacity(params.trajectories * steps.len() * dims);
    let mut b = Vec::with_capacity(a.capacity());
    let mut sup = Vec::with_capacity(params.trajectories);
    for p in per {
        let (rx, ry, w) = p?;
        a.extend(rx);
        b.extend(ry);
        sup.push(w);
    }
    let ensemble = |states| PathEnsemble {
        params: *params,
        dims,
        half_width: interacting.half_width(),
        steps: steps.clone(),
        states,
    };
    Ok(CoupledRun {
        interacting: ensemble(a),
        independent: ensemble(b),
        sup_distance_sq: sup,
    })
}

/// Normalized histogram of one particle's coordinates over the recorded
/// times in `[t0, t1]`, binned to the nearest node of `grid`.
///
/// End cells are half as wide as interior ones, so the trapezoid integral
/// of the result is exactly one.
pub fn empirical_density(ensemble: &PathEnsemble, particle: usize, window: (f64, f64), grid: &Grid) -> Result<GridFunction> {
    let d = grid.dim();
    if ensemble.dims() % d != 0 || particle >= ensemble.dims() / d {
        return domain(format!("particle {particle} is out of range"));
    }
    if (grid.half_width() - ensemble.half_width()).abs() > 0.0 {
        return Err(Error::GridMismatch("histogram grid and simulation box differ".into()));
    }
    let (t0, t1) = window;
    let times = ensemble.times();
    let records: Vec<usize> = (0..times.len())
        .filter(|&r| times[r] >= t0 - 1e-12 && times[r] <= t1 + 1e-12)
        .collect();
    if records.is_empty() || !(t0 <= t1) {
        return Err(Error::EmptyWindow);
    }
    let n = grid.points();
    let l = grid.half_width();
    let h = grid.spacing();
    let mut counts = vec![0u64; grid.tensor_len(1)];
    for j in 0..ensemble.trajectories() {
        for &r in &records {
            let x = &ensemble.state(j, r)[particle * d..(particle + 1) * d];
            let mut idx = 0;
            let mut stride = 1;
            for xk in x {
                let i = (((xk + l) / h).round().max(0.0) as usize).min(n - 1);
                idx += i * stride;
                stride *= n;
            }
            counts[idx] += 1;
        }
    }
    let total = (ensemble.trajectories() * records.len()) as f64;
    let values = counts
        .iter()
        .enumerate()
        .map(|(idx, &c)| {
            let mut volume = 1.0;
            let mut rem = idx;
            for _ in 0..d {
                let i = rem % n;
                rem /= n;
                volume *= if i == 0 || i == n - 1 { 0.5 * h } else { h };
            }
            c as f64 / (total * volume)
        })
        .collect();
    GridFunction::new(*grid, 1, values)
}
