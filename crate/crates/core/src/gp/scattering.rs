//! Zero-energy radial scattering in three dimensions.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::potential::{refined_trapezoid, PairPotential};

/// Coefficient `c` in `u'' = c v u`. Fixed to 1 by the weak-coupling limit
/// `4πa → ∫v`; see the Born sweep in the tests.
pub const SCATTERING_CONSTANT: f64 = 1.0;

const RK4_STEPS: usize = 40_000;
const PROFILE_SAMPLES: usize = 201;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringResult {
    /// Scattering length.
    pub a: f64,
    /// Matching radius.
    pub r_max: f64,
    /// First-order value `∫v / (4π) = ∫r² v dr`.
    pub born_value: f64,
    /// `(r, u(r))` samples of the radial solution.
    pub profile: Vec<(f64, f64)>,
}

/// Integrates `u'' = c v(r) u`, `u(0) = 0`, `u'(0) = 1` to `r_max` with RK4
/// and matches `u` to the free solution `r − a`.
pub fn scattering_length(v: impl Fn(f64) -> f64, r_max: f64) -> Result<ScatteringResult> {
    if !(r_max > 0.0 && r_max.is_finite()) {
        return domain(format!("matching radius must be positive, got {r_max}"));
    }
    // Integrate the deviation from the free solution, w = u − r and
    // q = u' − 1, so that weak potentials lose no digits to cancellation.
    let h = r_max / RK4_STEPS as f64;
    let f = |r: f64, w: f64, q: f64| (q, SCATTERING_CONSTANT * v(r) * (r + w));
    let (mut w, mut q) = (0.0f64, 0.0f64);
    let every = RK4_STEPS / (PROFILE_SAMPLES - 1);
    let mut profile = vec![(0.0, 0.0)];
    for i in 0..RK4_STEPS {
        let r = i as f64 * h;
        let (k1w, k1q) = f(r, w, q);
        let (k2w, k2q) = f(r + 0.5 * h, w + 0.5 * h * k1w, q + 0.5 * h * k1q);
        let (k3w, k3q) = f(r + 0.5 * h, w + 0.5 * h * k2w, q + 0.5 * h * k2q);
        let (k4w, k4q) = f(r + h, w + h * k3w, q + h * k3q);
        w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        if (i + 1) % every == 0 {
            let r = (i + 1) as f64 * h;
            profile.push((r, r + w));
        }
    }
    if q == -1.0 || !q.is_finite() || !w.is_finite() {
        return Err(Error::SingularMatching { radius: r_max });
    }
    Ok(ScatteringResult {
        a: (r_max * q - w) / (1.0 + q),
        r_max,
        born_value: refined_trapezoid(|r| r * r * v(r), r_max),
        profile,
    })
}

/// One row of the scattering-length limit table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub a: f64,
    pub four_pi_a: f64,
    pub g: f64,
    /// `g − 4πa`.
    pub gap: f64,
}

/// Scattering lengths of `u₀^N(r) = N^{3β−3} v₀(N^{β−1} r)` for each `N`.
pub fn scattering_limit_sweep(v0: &PairPotential, beta: f64, ns: &[usize]) -> Result<Vec<SweepRow>> {
    if v0.dim() != 3 {
        return domain("the scattering sweep needs a three-dimensional pair potential");
    }
    if !(beta > 0.0 && beta < 1.0) {
        return domain(format!("β must lie in (0, 1), got {beta}"));
    }
    if ns.is_empty() || ns[0] < 1 || ns.windows(2).any(|w| w[1] <= w[0]) {
        return domain("particle numbers must be positive and increasing");
    }
    let g = crate::potential::pair_coupling(v0);
    ns.iter()
        .map(|&n| {
            let nf = n as f64;
            let amp = nf.powf(3.0 * beta - 3.0);
            let stretch = nf.powf(beta - 1.0);
            let support = v0.support_radius() / stretch;
            let a = if v0.is_zero() {
                0.0
            } else {
                scattering_length(|r| amp * v0.eval(stretch * r), support)?.a
            };
            let four_pi_a = 4.0 * std::f64::consts::PI * a;
            Ok(SweepRow {
                n,
                a,
                four_pi_a,
                g,
                gap: g - four_pi_a,
            })
        })
        .collect()
}

/// Discrete radial minimum against the closed form `4πaR / (R − a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallEnergyCheck {
    pub numeric_min: f64,
    pub formula: f64,
    pub scattering_length: f64,
    /// `|numeric − formula| / max(formula, tiny)`, or the absolute gap when
    /// the formula vanishes.
    pub gap: f64,
}

const BALL_NODES: usize = 20_000;

/// Minimizes `4π∫₀^R (f'² + c v f²) r² dr` over radial `f` with `f(R) = 1`.
///
/// The closed form is the energy of the exact minimizer `R(1 − a/r)/(R − a)`
/// outside the support, which fixes the boundary value rather than the L²
/// norm. The discrete energy is quadratic, so its minimizer is one
/// tridiagonal solve.
pub fn ball_energy_check(v: impl Fn(f64) -> f64, support: f64, radius: f64) -> Result<BallEnergyCheck> {
    if !(radius >= support && support > 0.0) {
        return domain("ball radius must be at least the support radius");
    }
    let a = scattering_length(&v, radius)?.a;
    let m = BALL_NODES;
    let dr = radius / m as f64;
    let four_pi = 4.0 * std::f64::consts::PI;
    // Edge stiffness k_i between nodes i and i+1, and on-site mass c v r² w.
    let k: Vec<f64> = (0..m).map(|i| ((i as f64 + 0.5) * dr).powi(2) / dr).collect();
    let q: Vec<f64> = (0..=m)
        .map(|i| {
            let r = i as f64 * dr;
            let w = if i == 0 || i == m { 0.5 * dr } else { dr };
            SCATTERING_CONSTANT * v(r) * r * r * w
        })
        .collect();
    // Unknowns f_0..f_{m-1}; f_m = 1.
    let mut diag: Vec<f64> = (0..m)
        .map(|i| q[i] + k[i] + if i > 0 { k[i - 1] } else { 0.0 })
        .collect();
    let off: Vec<f64> = (0..m - 1).map(|i| -k[i]).collect();
    let mut rhs = vec![0.0; m];
    rhs[m - 1] = k[m - 1];
    // Thomas algorithm for the symmetric tridiagonal system.
    for i in 1..m {
        let factor = off[i - 1] / diag[i - 1];
        diag[i] -= factor * off[i - 1];
        rhs[i] -= factor * rhs[i - 1];
    }
    let mut f = vec![0.0; m + 1];
    f[m] = 1.0;
    f[m - 1] = rhs[m - 1] / diag[m - 1];
    for i in (0..m - 1).rev() {
        f[i] = (rhs[i] - off[i] * f[i + 1]) / diag[i];
    }
    let energy = four_pi
        * ((0..m).map(|i| k[i] * (f[i + 1] - f[i]).powi(2)).sum::<f64>()
            + (0..=m).map(|i| q[i] * f[i] * f[i]).sum::<f64>());
    let formula = four_pi * a * radius / (radius - a);
    let gap = if formula.abs() > 1e-300 {
        (energy - formula).abs() / formula.abs()
    } else {
        (energy - formula).abs()
    };
    Ok(BallEnergyCheck {
        numeric_min: energy,
        formula,
        scattering_length: a,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PairProfile;

    #[test]
    fn free_solution_has_zero_length() {
        let s = scattering_length(|_| 0.0, 2.0).unwrap();
        assert!(s.a.abs() < 1e-12);
        assert_eq!(s.born_value, 0.0);
    }

    #[test]
    fn hard_core_limit() {
        let s = scattering_length(|r| if r <= 1.0 { 1e4 } else { 0.0 }, 1.0).unwrap();
        assert!((s.a - 1.0).abs() < 0.02, "{}", s.a);
    }

    #[test]
    fn zero_potential_sweep_and_ball() {
        let v0 = PairPotential::zero(3);
        let rows = scattering_limit_sweep(&v0, 0.5, &[2, 8]).unwrap();
        assert!(rows.iter().all(|r| r.a == 0.0));
        let b = ball_energy_check(|_| 0.0, 1.0, 3.0).unwrap();
        assert!(b.numeric_min.abs() < 1e-12 && b.formula == 0.0);
    }

    #[test]
    fn sweep_rejects_bad_input() {
        let v0 = PairPotential::new(PairProfile::Bump { height: 0.1 }, 1.0, 3).unwrap();
        assert!(scattering_limit_sweep(&v0, 0.0, &[2]).is_err());
        assert!(scattering_limit_sweep(&v0, 0.5, &[8, 2]).is_err());
        let v1 = PairPotential::new(PairProfile::Bump { height: 0.1 }, 1.0, 1).unwrap();
        assert!(scattering_limit_sweep(&v1, 0.5, &[2]).is_err());
    }
}
