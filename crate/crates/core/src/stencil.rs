//! Finite-difference operators along one axis of a tensor grid.
//!
//! The kinetic operator is the five-point fourth-order second difference
//! with even reflection at both faces. Even reflection makes it
//! self-adjoint and nonnegative in the trapezoid inner product, which is
//! what the variational solvers rely on.

use rayon::prelude::*;

use crate::grid::Shape;

#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let last = n as isize - 1;
    if i < 0 {
        (-i) as usize
    } else if i > last {
        (2 * last - i) as usize
    } else {
        i as usize
    }
}

/// Value of `-d²/dx²` along `axis` at flat index `idx`.
#[cfg(test)]
pub(crate) fn neg_laplacian_at(x: &[f64], shape: Shape, axis: usize, idx: usize, inv_12h2: f64) -> f64 {
    let s = shape.stride(axis);
    let n = shape.n;
    let i = (idx / s) % n;
    let base = idx - i * s;
    let at = |k: isize| x[base + reflect(i as isize + k, n) * s];
    (at(-2) + at(2) - 16.0 * (at(-1) + at(1)) + 30.0 * at(0)) * inv_12h2
}

/// `out += scale * (-d²/dx²)_axis x`.
pub(crate) fn add_neg_laplacian(x: &[f64], out: &mut [f64], shape: Shape, axis: usize, h: f64, scale: f64) {
    let n = shape.n;
    let c = scale / (12.0 * h * h);
    if axis == 0 {
        out.par_chunks_mut(n)
            .with_min_len(16)
            .enumerate()
            .for_each(|(row, o)| {
                let xr = &x[row * n..(row + 1) * n];
                let edge = |i: usize| {
                    let at = |k: isize| xr[reflect(i as isize + k, n)];
                    c * (at(-2) + at(2) - 16.0 * (at(-1) + at(1)) + 30.0 * at(0))
                };
                if n < 5 {
                    for (i, oi) in o.iter_mut().enumerate() {
                        *oi += edge(i);
                    }
                    return;
                }
                for i in [0, 1, n - 2, n - 1] {
                    o[i] += edge(i);
                }
                for i in 2..n - 2 {
                    o[i] += c * (xr[i - 2] + xr[i + 2] - 16.0 * (xr[i - 1] + xr[i + 1]) + 30.0 * xr[i]);
                }
            });
        return;
    }
    let s = shape.stride(axis);
    out.par_chunks_mut(s)
        .with_min_len((4096 / s).max(1))
        .enumerate()
        .for_each(|(chunk, o)| {
            let i = chunk % n;
            let base = (chunk - i) * s;
            let row = |k: isize| {
                let j = reflect(i as isize + k, n);
                &x[base + j * s..base + (j + 1) * s]
            };
            let (m2, m1, z, p1, p2) = (row(-2), row(-1), row(0), row(1), row(2));
            for j in 0..s {
                o[j] += c * (m2[j] + p2[j] - 16.0 * (m1[j] + p1[j]) + 30.0 * z[j]);
            }
        });
}

/// `-Δ x` summed over every axis of the shape.
pub(crate) fn neg_laplacian(x: &[f64], shape: Shape, h: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for axis in 0..shape.axes {
        add_neg_laplacian(x, &mut out, shape, axis, h, 1.0);
    }
    out
}

/// Upper bound on the spectrum of the one-axis kinetic stencil.
pub(crate) fn kinetic_symbol_max(h: f64) -> f64 {
    16.0 / (3.0 * h * h)
}

/// Accuracy of a first-derivative stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffOrder {
    /// Three-point central differences, one-sided three-point at the faces.
    Second,
    /// Five-point central differences, one-sided five-point near the faces.
    Fourth,
}

#[inline]
fn derivative_1d(f: impl Fn(usize) -> f64, i: usize, n: usize, h: f64, order: DiffOrder) -> f64 {
    match order {
        DiffOrder::Second => {
            if i == 0 {
                (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h)
            } else if i + 1 == n {
                (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) / (2.0 * h)
            } else {
                (f(i + 1) - f(i - 1)) / (2.0 * h)
            }
        }
        DiffOrder::Fourth => {
            let d = 12.0 * h;
            match i {
                0 => (-25.0 * f(0) + 48.0 * f(1) - 36.0 * f(2) + 16.0 * f(3) - 3.0 * f(4)) / d,
                1 => (-3.0 * f(0) - 10.0 * f(1) + 18.0 * f(2) - 6.0 * f(3) + f(4)) / d,
                _ if i + 2 == n => {
                    (3.0 * f(n - 1) + 10.0 * f(n - 2) - 18.0 * f(n - 3) + 6.0 * f(n - 4) - f(n - 5)) / d
                }
                _ if i + 1 == n => {
                    (25.0 * f(n - 1) - 48.0 * f(n - 2) + 36.0 * f(n - 3) - 16.0 * f(n - 4)
                        + 3.0 * f(n - 5))
                        / d
                }
                _ => (f(i - 2) - 8.0 * f(i - 1) + 8.0 * f(i + 1) - f(i + 2)) / d,
            }
        }
    }
}

/// First derivative along `axis` at flat index `idx`.
#[inline]
pub(crate) fn derivative_at(x: &[f64], shape: Shape, axis: usize, idx: usize, h: f64, order: DiffOrder) -> f64 {
    let s = shape.stride(axis);
    let n = shape.n;
    let i = (idx / s) % n;
    let base = idx - i * s;
    derivative_1d(|k| x[base + k * s], i, n, h, order)
}

/// First derivative of the whole field along `axis`.
pub(crate) fn derivative(x: &[f64], shape: Shape, axis: usize, h: f64, order: DiffOrder) -> Vec<f64> {
    (0..x.len())
        .into_par_iter()
        .with_min_len(4096)
        .map(|idx| derivative_at(x, shape, axis, idx, h, order))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{quadrature, Grid};

    fn sample(n: usize, l: f64, f: impl Fn(f64) -> f64) -> (Grid, Vec<f64>) {
        let g = Grid::line(l, n).unwrap();
        let v = g.nodes().into_iter().map(f).collect();
        (g, v)
    }

    #[test]
    fn laplacian_is_fourth_order() {
        let err = |n: usize| {
            let (g, v) = sample(n, 9.0, |x| (-x * x / 2.0).exp());
            let mut out = vec![0.0; n];
            add_neg_laplacian(&v, &mut out, Shape::new(n, 1), 0, g.spacing(), 1.0);
            g.nodes()
                .iter()
                .zip(&out)
                .map(|(x, o)| (o - (1.0 - x * x) * (-x * x / 2.0).exp()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(97) / err(193);
        assert!((13.0..19.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn laplacian_is_symmetric_in_trapezoid_product() {
        let n = 12;
        let g = Grid::line(1.0, n).unwrap();
        let shape = Shape::new(n, 1);
        let a: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 5) as f64 - 1.3).collect();
        let b: Vec<f64> = (0..n).map(|i| ((i * 3 + 1) % 7) as f64 * 0.4).collect();
        let mut la = vec![0.0; n];
        let mut lb = vec![0.0; n];
        add_neg_laplacian(&a, &mut la, shape, 0, g.spacing(), 1.0);
        add_neg_laplacian(&b, &mut lb, shape, 0, g.spacing(), 1.0);
        let ab = quadrature(&g, 1, |i| a[i] * lb[i]);
        let ba = quadrature(&g, 1, |i| b[i] * la[i]);
        assert!((ab - ba).abs() < 1e-10 * ab.abs().max(1.0));
        assert!(quadrature(&g, 1, |i| a[i] * la[i]) >= 0.0);
    }

    #[test]
    fn axis_application_matches_per_row_loop() {
        let n = 9;
        let shape = Shape::new(n, 3);
        let x: Vec<f64> = (0..shape.len()).map(|i| ((i * 37) % 11) as f64).collect();
        for axis in 0..3 {
            let mut out = vec![0.0; shape.len()];
            add_neg_laplacian(&x, &mut out, shape, axis, 0.5, 1.0);
            for idx in 0..shape.len() {
                let direct = neg_laplacian_at(&x, shape, axis, idx, 1.0 / (12.0 * 0.25));
                assert!((out[idx] - direct).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn derivative_orders() {
        for (order, expected) in [(DiffOrder::Second, 4.0), (DiffOrder::Fourth, 16.0)] {
            let err = |n: usize| {
                let (g, v) = sample(n, 2.0, |x| x.sin() * x);
                let d = derivative(&v, Shape::new(n, 1), 0, g.spacing(), order);
                g.nodes()
                    .iter()
                    .zip(&d)
                    .map(|(x, o)| (o - (x.cos() * x + x.sin())).abs())
                    .fold(0.0, f64::max)
            };
            let ratio = err(81) / err(161);
            assert!((ratio / expected - 1.0).abs() < 0.15, "{order:?}: {ratio}");
        }
    }
}
