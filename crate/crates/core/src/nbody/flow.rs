//! Normalized descent for the linear tensor-grid eigenproblem.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use super::symmetry::Symmetrizer;
use crate::error::{domain, Error, Result};
use crate::gp::{FlowParams, FlowScheme, RESIDUAL_MARGIN};
use crate::grid::{interior_quadrature, quadrature, quadrature_many, Grid, GridFunction, Shape};
use crate::stencil::{kinetic_symbol_max, neg_laplacian};

/// `H = −Δ + T + P` on the `N`-fold tensor grid, with `T` and `P` diagonal.
pub(crate) struct TensorOperator {
    pub grid: Grid,
    pub particles: usize,
    pub trap: Vec<f64>,
    pub pair: Vec<f64>,
}

impl TensorOperator {
    pub fn shape(&self) -> Shape {
        Shape::new(self.grid.points(), self.particles)
    }

    pub fn kinetic(&self, x: &[f64]) -> Vec<f64> {
        neg_laplacian(x, self.shape(), self.grid.spacing())
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.kinetic(x);
        out.par_iter_mut()
            .with_min_len(4096)
            .enumerate()
            .for_each(|(i, o)| *o += (self.trap[i] + self.pair[i]) * x[i]);
        out
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        quadrature(&self.grid, self.particles, |i| a[i] * b[i])
    }

    pub fn residual_norm(&self, x: &[f64], hx: &[f64], mu: f64) -> f64 {
        interior_quadrature(&self.grid, self.particles, RESIDUAL_MARGIN, |i| {
            let r = hx[i] - mu * x[i];
            r * r
        })
        .sqrt()
    }

    fn step_bound(&self) -> f64 {
        let kin = self.particles as f64 * kinetic_symbol_max(self.grid.spacing());
        let diag = (0..self.trap.len())
            .map(|i| self.trap[i] + self.pair[i])
            .fold(0.0, f64::max);
        0.95 / (kin + diag)
    }
}

pub(crate) struct FlowOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub time_step: Option<f64>,
    pub max_rise: f64,
}

fn scale(v: &mut [f64], s: f64) {
    v.par_iter_mut().with_min_len(4096).for_each(|x| *x *= s);
}

fn combine<'a>(out: &mut [f64], terms: &[(f64, &'a [f64])]) {
    const CHUNK: usize = 4096;
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(b, o)| {
        let len = o.len();
        let at = |v: &'a [f64]| &v[b * CHUNK..b * CHUNK + len];
        match terms {
            [(a, u)] => o.iter_mut().zip(at(u)).for_each(|(o, u)| *o = a * u),
            [(a, u), (c, v)] => o
                .iter_mut()
                .zip(at(u).iter().zip(at(v)))
                .for_each(|(o, (u, v))| *o = a * u + c * v),
            [(a, u), (c, v), (e, w)] => o
                .iter_mut()
                .zip(at(u).iter().zip(at(v)).zip(at(w)))
                .for_each(|(o, ((u, v), w))| *o = a * u + c * v + e * w),
            _ => o.iter_mut().enumerate().for_each(|(i, o)| {
                *o = terms.iter().map(|(c, v)| c * v[b * CHUNK + i]).sum();
            }),
        }
    });
}

/// Smallest generalized eigenpair of `(A, G)` restricted to the leading
/// `k × k` block, or `None` if the Gram block is numerically singular.
fn ritz(a: &Matrix3<f64>, g: &Matrix3<f64>, k: usize) -> Option<(f64, Vector3<f64>)> {
    let a = a.view((0, 0), (k, k)).into_owned();
    let g = g.view((0, 0), (k, k)).into_owned();
    let geig = SymmetricEigen::new(g.clone());
    if geig.eigenvalues.min() < 1e-10 {
        return None;
    }
    let chol = g.cholesky()?;
    let l = chol.l();
    let linv = l.clone().try_inverse()?;
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let (j, theta) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(j, t)| (j, *t))?;
    let y = eig.eigenvectors.column(j).into_owned();
    let coef = linv.transpose() * y;
    let mut out = Vector3::zeros();
    for i in 0..k {
        out[i] = coef[i];
    }
    if out[0] < 0.0 {
        out = -out;
    }
    Some((theta, out))
}

fn not_converged(op: &TensorOperator, x: Vec<f64>, iterations: usize, energy: f64, residual: f64) -> Error {
    match GridFunction::new(op.grid, op.particles, x) {
        Ok(last) => Error::NotConverged {
            iterations,
            energy,
            residual,
            last: Box::new(last),
        },
        Err(e) => e,
    }
}

/// Minimizes the Rayleigh quotient from a symmetric, normalized start.
pub(crate) fn descend(op: &TensorOperator, sym: &Symmetrizer, x0: Vec<f64>, params: &FlowParams) -> Result<FlowOutcome> {
    params.validate()?;
    let mut x = x0;
    let norm = op.inner(&x, &x).sqrt();
    if !(norm > 0.0) {
        return domain("initial state vanishes");
    }
    scale(&mut x, 1.0 / norm);
    let mut hx = op.apply(&x);
    let mut mu = op.inner(&x, &hx);
    let mut delta = f64::INFINITY;
    let mut rise: f64 = 0.0;
    let mut iterations = 0;
    let tau = match params.scheme {
        FlowScheme::FixedStep => Some(params.time_step.unwrap_or_else(|| op.step_bound())),
        FlowScheme::LocallyOptimal => None,
    };
    let len = x.len();
    let mut p: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut r = vec![0.0; len];
    // Whether `hx` was computed directly rather than by recombination.
    let mut fresh = true;
    loop {
        if !fresh && (iterations % 32 == 0 || delta.abs() < params.energy_tolerance) {
            hx = op.apply(&x);
            mu = op.inner(&x, &hx);
            fresh = true;
        }
        let res = op.residual_norm(&x, &hx, mu);
        if !res.is_finite() {
            return Err(not_converged(op, x, iterations, mu, res));
        }
        if delta.abs() < params.energy_tolerance && res < params.residual_tolerance {
            return Ok(FlowOutcome {
                x,
                iterations,
                time_step: tau,
                max_rise: rise,
            });
        }
        if iterations == params.max_iterations {
            return Err(not_converged(op, x, iterations, mu, res));
        }
        combine(&mut r, &[(1.0, &hx), (-mu, &x)]);
        r = sym.apply(&r);
        match tau {
            Some(tau) => {
                let step = r.clone();
                combine(&mut r, &[(1.0, &x), (-tau, &step)]);
                std::mem::swap(&mut x, &mut r);
            }
            None => {
                let rn = op.inner(&r, &r).sqrt();
                if rn == 0.0 {
                    return Ok(FlowOutcome {
                        x,
                        iterations,
                        time_step: tau,
                        max_rise: rise,
                    });
                }
                scale(&mut r, 1.0 / rn);
                let hr = op.apply(&r);
                let vecs: Vec<&[f64]> = match &p {
                    Some((pv, _)) => vec![&x, &r, pv],
                    None => vec![&x, &r],
                };
                let hvecs: Vec<&[f64]> = match &p {
                    Some((_, hp)) => vec![&hx, &hr, hp],
                    None => vec![&hx, &hr],
                };
                let k = vecs.len();
                let mut g = Matrix3::zeros();
                let mut a = Matrix3::zeros();
                let pairs = [(0, 0), (0, 1), (1, 1), (0, 2), (1, 2), (2, 2)];
                let m = if k == 3 { 6 } else { 3 };
                let sums = quadrature_many::<12>(&op.grid, op.particles, |i| {
                    let mut out = [0.0; 12];
                    for (s, &(u, v)) in pairs[..m].iter().enumerate() {
                        out[2 * s] = vecs[u][i] * vecs[v][i];
                        out[2 * s + 1] = vecs[u][i] * hvecs[v][i];
                    }
                    out
                });
                for (s, &(u, v)) in pairs[..m].iter().enumerate() {
                    g[(u, v)] = sums[2 * s];
                    g[(v, u)] = sums[2 * s];
                    a[(u, v)] = sums[2 * s + 1];
                    a[(v, u)] = sums[2 * s + 1];
                }
                let (coef, k) = match ritz(&a, &g, k) {
                    Some((_, c)) => (c, k),
                    None => match ritz(&a, &g, 2) {
                        Some((_, c)) => (c, 2),
                        None => {
                            p = None;
                            iterations += 1;
                            continue;
                        }
                    },
                };
                let mut new_p = vec![0.0; len];
                let mut new_hp = vec![0.0; len];
                let dir: Vec<(f64, &[f64])> = (1..k).map(|i| (coef[i], vecs[i])).collect();
                let hdir: Vec<(f64, &[f64])> = (1..k).map(|i| (coef[i], hvecs[i])).collect();
                combine(&mut new_p, &dir);
                combine(&mut new_hp, &hdir);
                let mut new_x = vec![0.0; len];
                let mut new_hx = vec![0.0; len];
                combine(&mut new_x, &[(coef[0], &x), (1.0, &new_p)]);
                combine(&mut new_hx, &[(coef[0], &hx), (1.0, &new_hp)]);
                let pn = op.inner(&new_p, &new_p).sqrt();
                p = if pn > 0.0 {
                    scale(&mut new_p, 1.0 / pn);
                    scale(&mut new_hp, 1.0 / pn);
                    Some((new_p, new_hp))
                } else {
                    None
                };
                x = new_x;
                hx = new_hx;
            }
        }
        let norm = op.inner(&x, &x).sqrt();
        scale(&mut x, 1.0 / norm);
        debug_assert!(sym.is_symmetric(&x), "iterate left the symmetric sector");
        match tau {
            Some(_) => hx = op.apply(&x),
            None => {
                scale(&mut hx, 1.0 / norm);
                fresh = false;
            }
        }
        let e = op.inner(&x, &hx);
        delta = e - mu;
        rise = rise.max(delta);
        mu = e;
        iterations += 1;
    }
}
