//! Reference computations for the test suites.
//!
//! Nothing here calls into `bec-core`. Each routine reaches its answer by a
//! route that shares no code with the library: shooting on the continuous
//! ODE, inverse iteration with conjugate gradients on an independently
//! assembled Hamiltonian, and closed forms.

pub mod shooting;
pub mod two_body;

/// Scattering length of the hard-core potential `K` on `r < r0` for the
/// zero-energy problem `u'' = K u`.
pub fn square_barrier_scattering_length(height: f64, r0: f64) -> f64 {
    let k = height.sqrt();
    r0 - (k * r0).tanh() / k
}

/// Asymptotic 95% two-sided Kolmogorov–Smirnov critical value.
pub fn ks_critical_95(samples: usize) -> f64 {
    1.36 / (samples as f64).sqrt()
}

/// Empirical Kolmogorov–Smirnov statistic of `samples` against the CDF `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let lo = (f - i as f64 / m).abs();
            let hi = ((i + 1) as f64 / m - f).abs();
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Mean total variation between a histogram of `m` independent draws and
/// its cell probabilities `p`, from the half-normal mean of each cell's
/// binomial fluctuation.
pub fn expected_histogram_tv(p: &[f64], m: f64) -> f64 {
    let c = (2.0 / (std::f64::consts::PI * m)).sqrt();
    0.5 * p.iter().map(|&q| c * (q * (1.0 - q)).max(0.0).sqrt()).sum::<f64>()
}

/// Stationary variance of `dX = −θX dt + dW` discretized by Euler–Maruyama
/// with step `dt`: `1 / (2θ − θ²dt)`.
pub fn euler_ou_variance(theta: f64, dt: f64) -> f64 {
    1.0 / (2.0 * theta - theta * theta * dt)
}
