//! External traps, radial pair interactions and the N-dependent scaling
//! `v_N(r) = N^{dβ} / (N - 1) · v₀(N^β r)`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Confining potential `V(|r|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrapPotential {
    /// `c r²`
    Harmonic { coefficient: f64 },
    /// `a r² + b r⁴`
    Quartic { quadratic: f64, quartic: f64 },
    /// Piecewise-linear table in `r`, extended linearly past the last node.
    Tabulated { radii: Vec<f64>, values: Vec<f64> },
}

impl TrapPotential {
    pub fn harmonic(coefficient: f64) -> Result<Self> {
        if !(coefficient > 0.0 && coefficient.is_finite()) {
            return domain(format!("harmonic coefficient must be positive, got {coefficient}"));
        }
        Ok(Self::Harmonic { coefficient })
    }

    pub fn quartic(quadratic: f64, quartic: f64) -> Result<Self> {
        if quadratic < 0.0 || !(quartic > 0.0) {
            return domain("quartic trap needs a >= 0 and b > 0");
        }
        Ok(Self::Quartic { quadratic, quartic })
    }

    pub fn tabulated(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() < 2 || radii.len() != values.len() {
            return domain("tabulated trap needs at least two (r, V) pairs");
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] != 0.0 {
            return domain("tabulated trap radii must start at 0 and increase");
        }
        if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return domain("tabulated trap values must be finite and nonnegative");
        }
        let k = radii.len();
        if values[k - 1] <= values[k - 2] {
            return domain("tabulated trap must increase at its outer end");
        }
        Ok(Self::Tabulated { radii, values })
    }

    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        match self {
            Self::Harmonic { coefficient } => coefficient * r * r,
            Self::Quartic { quadratic, quartic } => {
                let r2 = r * r;
                quadratic * r2 + quartic * r2 * r2
            }
            Self::Tabulated { radii, values } => {
                let k = radii.partition_point(|&x| x <= r).clamp(1, radii.len() - 1);
                let (r0, r1) = (radii[k - 1], radii[k]);
                let t = (r - r0) / (r1 - r0);
                values[k - 1] + t * (values[k] - values[k - 1])
            }
        }
    }

    /// Evaluates at a point given by its Cartesian coordinates.
    pub fn eval_point(&self, coords: &[f64]) -> f64 {
        self.eval(coords.iter().map(|c| c * c).sum::<f64>().sqrt())
    }

    /// Width of the Gaussian that best matches the trap near its minimum.
    pub(crate) fn matched_width(&self) -> f64 {
        match self {
            Self::Harmonic { coefficient } => coefficient.powf(-0.25),
            Self::Quartic { quadratic, quartic } => {
                if *quadratic > 0.0 {
                    quadratic.powf(-0.25).min(quartic.powf(-1.0 / 6.0))
                } else {
                    quartic.powf(-1.0 / 6.0)
                }
            }
            Self::Tabulated { .. } => 1.0,
        }
    }
}

/// Radial shape of a pair interaction, supported on `r <= radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PairProfile {
    Zero,
    /// `height` on the closed ball.
    Indicator { height: f64 },
    /// `height (1 - (r/R)²)`
    Parabolic { height: f64 },
    /// `height (1 - (r/R)²)²`
    QuarticBump { height: f64 },
    /// `height exp(1 - 1/(1 - (r/R)²))`, smooth at the edge.
    Bump { height: f64 },
    /// Piecewise-linear in `r / R` on nodes in `[0, 1]`.
    Tabulated { nodes: Vec<f64>, values: Vec<f64> },
}

/// A nonnegative, radial, compactly supported pair potential `v₀` in `d`
/// dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPotential {
    profile: PairProfile,
    radius: f64,
    dim: usize,
}

impl PairPotential {
    pub fn new(profile: PairProfile, radius: f64, dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return domain(format!("pair potential dimension must be 1..=3, got {dim}"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return domain("pair potential must have a finite, positive support radius");
        }
        let height_ok = |h: f64| h.is_finite() && h >= 0.0;
        let ok = match &profile {
            PairProfile::Zero => true,
            PairProfile::Indicator { height }
            | PairProfile::Parabolic { height }
            | PairProfile::QuarticBump { height }
            | PairProfile::Bump { height } => height_ok(*height),
            PairProfile::Tabulated { nodes, values } => {
                nodes.len() >= 2
                    && nodes.len() == values.len()
                    && nodes[0] == 0.0
                    && *nodes.last().unwrap() == 1.0
                    && nodes.windows(2).all(|w| w[1] > w[0])
                    && values.iter().all(|v| height_ok(*v))
            }
        };
        if !ok {
            return domain(format!("invalid pair profile {profile:?}"));
        }
        Ok(Self {
            profile,
            radius,
            dim,
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            profile: PairProfile::Zero,
            radius: 1.0,
            dim,
        }
    }

    /// Smooth bump of support `radius` rescaled so that `∫ v₀ = coupling`.
    pub fn bump_with_coupling(coupling: f64, radius: f64, dim: usize) -> Result<Self> {
        let unit = Self::new(PairProfile::Bump { height: 1.0 }, radius, dim)?;
        let g = pair_coupling(&unit);
        Self::new(PairProfile::Bump { height: coupling / g }, radius, dim)
    }

    pub fn profile(&self) -> &PairProfile {
        &self.profile
    }

    pub fn support_radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        match &self.profile {
            PairProfile::Zero => true,
            PairProfile::Indicator { height }
            | PairProfile::Parabolic { height }
            | PairProfile::QuarticBump { height }
            | PairProfile::Bump { height } => *height == 0.0,
            PairProfile::Tabulated { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    /// `v₀(r)` for a radial distance `r`.
    pub fn eval(&self, r: f64) -> f64 {
        let s = r.abs() / self.radius;
        if s > 1.0 {
            return 0.0;
        }
        match &self.profile {
            PairProfile::Zero => 0.0,
            PairProfile::Indicator { height } => *height,
            PairProfile::Parabolic { height } => height * (1.0 - s * s),
            PairProfile::QuarticBump { height } => height * (1.0 - s * s).powi(2),
            PairProfile::Bump { height } => {
                if s >= 1.0 {
                    0.0
                } else {
                    height * (1.0 - 1.0 / (1.0 - s * s)).exp()
                }
            }
            PairProfile::Tabulated { nodes, values } => {
                let k = nodes.partition_point(|&x| x <= s).clamp(1, nodes.len() - 1);
                let t = (s - nodes[k - 1]) / (nodes[k] - nodes[k - 1]);
                values[k - 1] + t * (values[k] - values[k - 1])
            }
        }
    }

    /// Same shape with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let profile = match &self.profile {
            PairProfile::Zero => PairProfile::Zero,
            PairProfile::Indicator { height } => PairProfile::Indicator { height: height * factor },
            PairProfile::Parabolic { height } => PairProfile::Parabolic { height: height * factor },
            PairProfile::QuarticBump { height } => PairProfile::QuarticBump { height: height * factor },
            PairProfile::Bump { height } => PairProfile::Bump { height: height * factor },
            PairProfile::Tabulated { nodes, values } => PairProfile::Tabulated {
                nodes: nodes.clone(),
                values: values.iter().map(|v| v * factor).collect(),
            },
        };
        Self::new(profile, self.radius, self.dim)
    }
}

/// Surface factor turning a radial integral into a `d`-dimensional one.
fn shell(dim: usize, r: f64) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI * r,
        _ => 4.0 * std::f64::consts::PI * r * r,
    }
}

/// Trapezoid integral of `f` on `[0, b]`, doubled until the relative change
/// drops below `1e-10`.
pub(crate) fn refined_trapezoid(f: impl Fn(f64) -> f64, b: f64) -> f64 {
    let mut m = 16usize;
    let mut h = b / m as f64;
    let mut sum = 0.5 * (f(0.0) + f(b)) + (1..m).map(|i| f(i as f64 * h)).sum::<f64>();
    let mut prev = sum * h;
    loop {
        let odd: f64 = (0..m).map(|i| f((2 * i + 1) as f64 * h * 0.5)).sum();
        sum += odd;
        m *= 2;
        h *= 0.5;
        let cur = sum * h;
        if (cur - prev).abs() <= 1e-10 * cur.abs() || m >= 1 << 24 {
            return cur;
        }
        prev = cur;
    }
}

/// `g = ∫ v₀` over `ℝ^d`.
pub fn pair_coupling(v0: &PairPotential) -> f64 {
    if v0.is_zero() {
        return 0.0;
    }
    refined_trapezoid(|r| shell(v0.dim, r) * v0.eval(r), v0.radius)
}

/// `v_N` for a given particle number and range exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledPairPotential {
    base: PairPotential,
    particles: usize,
    beta: f64,
}

pub fn scale_pair_potential(v0: &PairPotential, particles: usize, beta: f64) -> Result<ScaledPairPotential> {
    if particles < 2 {
        return domain(format!("pair scaling needs N >= 2, got {particles}"));
    }
    if !(0.0..1.0).contains(&beta) {
        return domain(format!("beta must lie in [0, 1), got {beta}"));
    }
    Ok(ScaledPairPotential {
        base: v0.clone(),
        particles,
        beta,
    })
}

impl ScaledPairPotential {
    pub fn base(&self) -> &PairPotential {
        &self.base
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn contraction(&self) -> f64 {
        (self.particles as f64).powf(self.beta)
    }

    pub fn prefactor(&self) -> f64 {
        let n = self.particles as f64;
        n.powf(self.base.dim as f64 * self.beta) / (n - 1.0)
    }

    pub fn support_radius(&self) -> f64 {
        self.base.radius / self.contraction()
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.prefactor() * self.base.eval(self.contraction() * r)
    }

    /// `∫ v_N` by direct quadrature of the scaled profile.
    pub fn integral(&self) -> f64 {
        if self.base.is_zero() {
            return 0.0;
        }
        let dim = self.base.dim;
        refined_trapezoid(|r| shell(dim, r) * self.eval(r), self.support_radius())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn indicator(h: f64, r: f64) -> PairPotential {
        PairPotential::new(PairProfile::Indicator { height: h }, r, 1).unwrap()
    }

    #[test]
    fn coupling_examples() {
        assert_eq!(pair_coupling(&PairPotential::zero(1)), 0.0);
        assert!((pair_coupling(&indicator(1.0, 1.0)) - 2.0).abs() < 1e-12);
        let parabola = PairPotential::new(PairProfile::Parabolic { height: 1.0 }, 1.0, 1).unwrap();
        assert!((pair_coupling(&parabola) / (4.0 / 3.0) - 1.0).abs() < 1e-8);
        // 3D ball of radius 1: 4π/3.
        let ball = PairPotential::new(PairProfile::Indicator { height: 1.0 }, 1.0, 3).unwrap();
        assert!((pair_coupling(&ball) / (4.0 * std::f64::consts::PI / 3.0) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn bump_can_be_calibrated() {
        let v = PairPotential::bump_with_coupling(1.0, 1.5, 1).unwrap();
        assert!((pair_coupling(&v) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_potentials_are_rejected() {
        assert!(PairPotential::new(PairProfile::Indicator { height: -1.0 }, 1.0, 1).is_err());
        assert!(PairPotential::new(PairProfile::Bump { height: 1.0 }, f64::INFINITY, 1).is_err());
        assert!(TrapPotential::harmonic(0.0).is_err());
        assert!(TrapPotential::tabulated(vec![0.0, 1.0], vec![1.0, 0.5]).is_err());
    }

    #[test]
    fn scaling_examples() {
        let v0 = indicator(1.0, 1.0);
        let v2 = scale_pair_potential(&v0, 2, 0.0).unwrap();
        assert_eq!(v2.eval(0.3), v0.eval(0.3));
        let v4 = scale_pair_potential(&v0, 4, 0.0).unwrap();
        assert!((v4.eval(0.3) - 1.0 / 3.0).abs() < 1e-15);
        let v4h = scale_pair_potential(&v0, 4, 0.5).unwrap();
        assert!((v4h.eval(0.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(v4h.support_radius(), 0.5);
        assert_eq!(v4h.eval(0.51), 0.0);
        assert!((v4h.integral() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_domain_errors() {
        let v0 = indicator(1.0, 1.0);
        assert!(scale_pair_potential(&v0, 1, 0.0).is_err());
        assert!(scale_pair_potential(&v0, 3, 1.0).is_err());
        assert!(scale_pair_potential(&v0, 3, -0.1).is_err());
    }

    #[test]
    fn tabulated_trap_interpolates_and_extends() {
        let t = TrapPotential::tabulated(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 4.0]).unwrap();
        assert_eq!(t.eval(0.5), 0.5);
        assert_eq!(t.eval(3.0), 7.0);
        assert_eq!(t.eval(-1.5), 2.5);
    }
}
