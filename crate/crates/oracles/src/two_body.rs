//! Inverse power iteration for the two-particle Hamiltonian on a 1D tensor
//! grid.
//!
//! The discretization is stated here from scratch: uniform nodes on
//! `[-L, L]`, trapezoid weights, the five-point fourth-order second
//! difference with even reflection at both ends, and pointwise potentials.
//! Linear solves use conjugate gradients in the trapezoid-weighted inner
//! product, in which the operator is self-adjoint and positive.

pub struct TwoBodyProblem<'a> {
    pub points: usize,
    pub half_width: f64,
    pub trap: &'a dyn Fn(f64) -> f64,
    pub pair: &'a dyn Fn(f64) -> f64,
}

pub struct TwoBodyGroundState {
    pub energy: f64,
    /// Row-major with the first coordinate fastest, normalized in the
    /// trapezoid inner product.
    pub state: Vec<f64>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn reflect(i: isize, n: usize) -> usize {
    let last = n as isize - 1;
    let j = if i < 0 {
        -i
    } else if i > last {
        2 * last - i
    } else {
        i
    };
    j as usize
}

struct Operator {
    n: usize,
    inv_h2: f64,
    diag: Vec<f64>,
}

impl Operator {
    fn second_difference(&self, f: impl Fn(usize) -> f64, i: usize) -> f64 {
        let n = self.n;
        let at = |k: isize| f(reflect(i as isize + k, n));
        (at(-2) - 16.0 * at(-1) + 30.0 * at(0) - 16.0 * at(1) + at(2)) * self.inv_h2 / 12.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        for j in 0..n {
            for i in 0..n {
                let along_first = self.second_difference(|k| x[k + n * j], i);
                let along_second = self.second_difference(|k| x[i + n * k], j);
                let idx = i + n * j;
                y[idx] = along_first + along_second + self.diag[idx] * x[idx];
            }
        }
    }
}

fn dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += w[k] * a[k] * b[k];
    }
    s
}

fn conjugate_gradient(op: &Operator, w: &[f64], b: &[f64], x: &mut [f64], tol: f64) {
    let len = b.len();
    let mut ax = vec![0.0; len];
    op.apply(x, &mut ax);
    let mut r: Vec<f64> = (0..len).map(|k| b[k] - ax[k]).collect();
    let mut p = r.clone();
    let mut rr = dot(w, &r, &r);
    let bb = dot(w, b, b);
    let mut ap = vec![0.0; len];
    for _ in 0..20 * len {
        if rr <= tol * tol * bb {
            break;
        }
        op.apply(&p, &mut ap);
        let alpha = rr / dot(w, &p, &ap);
        for k in 0..len {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new = dot(w, &r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..len {
            p[k] = r[k] + beta * p[k];
        }
    }
}

pub fn ground_state(problem: &TwoBodyProblem<'_>, iterations: usize) -> TwoBodyGroundState {
    let n = problem.points;
    let l = problem.half_width;
    let h = 2.0 * l / (n as f64 - 1.0);
    let nodes: Vec<f64> = (0..n).map(|i| -l + i as f64 * h).collect();
    let w1: Vec<f64> = (0..n)
        .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
        .collect();
    let mut weights = vec![0.0; n * n];
    let mut diag = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            weights[i + n * j] = w1[i] * w1[j];
            diag[i + n * j] = (problem.trap)(nodes[i].abs())
                + (problem.trap)(nodes[j].abs())
                + (problem.pair)((nodes[i] - nodes[j]).abs());
        }
    }
    let op = Operator {
        n,
        inv_h2: 1.0 / (h * h),
        diag,
    };

    let mut x: Vec<f64> = (0..n * n)
        .map(|k| {
            let (a, b) = (nodes[k % n], nodes[k / n]);
            (-(a * a + b * b) / 2.0).exp()
        })
        .collect();
    let norm = dot(&weights, &x, &x).sqrt();
    x.iter_mut().for_each(|v| *v /= norm);

    let mut y = x.clone();
    for _ in 0..iterations {
        conjugate_gradient(&op, &weights, &x, &mut y, 1e-13);
        let norm = dot(&weights, &y, &y).sqrt();
        for k in 0..y.len() {
            x[k] = y[k] / norm;
        }
        y.copy_from_slice(&x);
    }
    let mut hx = vec![0.0; n * n];
    op.apply(&x, &mut hx);
    TwoBodyGroundState {
        energy: dot(&weights, &x, &hx),
        state: x,
        nodes,
        weights,
    }
}
