//! Relative entropies, total variation, Fisher information and the chaos
//! diagnostics comparing an N-body ground state with its mean-field limit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::{default_floor, drift_axis, drift_from_density};
use crate::error::{domain, Error, Result};
use crate::gp::NlsSolution;
use crate::grid::{point_weight, quadrature, GridFunction, Shape};
use crate::nbody::{marginal_density, marginal_of_density, nbody_drift, nbody_energy_components, NBodyState};
use crate::nelson::{sample_density, simulate_coupled, CoupledRun, SdeParams};
use crate::stencil::{derivative, DiffOrder};

/// Probability entries below this contribute nothing (`0 · ln 0 = 0`).
pub const KL_FLOOR: f64 = 1e-30;

/// A divergence value; `value` is `+∞` when absolute continuity fails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub value: f64,
    pub absolutely_continuous: bool,
}

impl Divergence {
    fn finite(value: f64) -> Self {
        Self {
            value,
            absolutely_continuous: true,
        }
    }

    fn singular() -> Self {
        Self {
            value: f64::INFINITY,
            absolutely_continuous: false,
        }
    }
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return domain("empty distribution");
    }
    if p.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return domain("probabilities must be finite and nonnegative");
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return domain(format!("probabilities sum to {total}, not 1"));
    }
    Ok(())
}

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    check_distribution(p)?;
    check_distribution(q)?;
    if p.len() != q.len() {
        return domain("distributions have different lengths");
    }
    Ok(())
}

fn kl_terms(p: &[f64], q: &[f64]) -> Divergence {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a < KL_FLOOR {
            continue;
        }
        if b <= 0.0 {
            return Divergence::singular();
        }
        acc += a * (a / b).ln();
    }
    Divergence::finite(acc)
}

/// `Σ P ln(P / Q)`.
pub fn kl_discrete(p: &[f64], q: &[f64]) -> Result<Divergence> {
    check_pair(p, q)?;
    Ok(kl_terms(p, q))
}

/// `½ Σ |P − Q|`.
pub fn tv_discrete(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `½ ∫|ρa − ρb|` by trapezoid quadrature.
pub fn tv_density(a: &GridFunction, b: &GridFunction) -> Result<f64> {
    a.check_layout(b)?;
    let (x, y) = (a.values(), b.values());
    Ok(0.5 * quadrature(a.grid(), a.axes(), |i| (x[i] - y[i]).abs()))
}

/// `∫ ρa ln(ρa / ρb)` by trapezoid quadrature. With trapezoid weights
/// folded into the densities this is exactly a discrete relative entropy.
pub fn kl_density(a: &GridFunction, b: &GridFunction) -> Result<Divergence> {
    a.check_layout(b)?;
    let (x, y) = (a.values(), b.values());
    if x.iter().zip(y).any(|(p, q)| *p >= KL_FLOOR && *q <= 0.0) {
        return Ok(Divergence::singular());
    }
    Ok(Divergence::finite(quadrature(a.grid(), a.axes(), |i| {
        if x[i] < KL_FLOOR {
            0.0
        } else {
            x[i] * (x[i] / y[i]).ln()
        }
    })))
}

/// Total variation against the two square-root bounds on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinskerCheck {
    pub tv: f64,
    pub kl: f64,
    /// `√(2 KL)`.
    pub bound: f64,
    /// `√(KL / 2)`.
    pub stronger_bound: f64,
    pub violated: bool,
    pub stronger_violated: bool,
}

const ROUNDING: f64 = 1e-12;

fn pinsker_from(tv: f64, kl: f64) -> PinskerCheck {
    let kl_pos = kl.max(0.0);
    let bound = (2.0 * kl_pos).sqrt();
    let stronger_bound = (kl_pos / 2.0).sqrt();
    PinskerCheck {
        tv,
        kl,
        bound,
        stronger_bound,
        violated: tv > bound + ROUNDING,
        stronger_violated: tv > stronger_bound + ROUNDING,
    }
}

pub fn pinsker_check(p: &[f64], q: &[f64]) -> Result<PinskerCheck> {
    let tv = tv_discrete(p, q)?;
    Ok(pinsker_from(tv, kl_terms(p, q).value))
}

/// `H(P | Q₁⊗Q₂) − H(P₁ | Q₁) − H(P₂ | Q₂)` for `P` on an `nx × ny`
/// alphabet stored with the first index fastest.
///
/// The `Q` terms cancel, leaving the mutual information
/// `Σ P ln(P / (P₁ P₂))`, which is what gets summed: it is exactly zero
/// when either alphabet has a single letter instead of a difference of
/// rounded divergences.
pub fn chain_rule_gap(p: &[f64], q1: &[f64], q2: &[f64]) -> Result<Divergence> {
    check_distribution(p)?;
    check_distribution(q1)?;
    check_distribution(q2)?;
    let (nx, ny) = (q1.len(), q2.len());
    if p.len() != nx * ny {
        return domain("joint distribution does not match the marginal alphabets");
    }
    let mut p1 = vec![0.0; nx];
    let mut p2 = vec![0.0; ny];
    let mut q = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            p1[i] += p[i + nx * j];
            p2[j] += p[i + nx * j];
            q[i + nx * j] = q1[i] * q2[j];
        }
    }
    let joint = kl_terms(p, &q);
    if !joint.absolutely_continuous {
        return Ok(joint);
    }
    // Same summation order as the marginals, so single-letter alphabets
    // give ratios of exactly one.
    let total: f64 = p.iter().sum();
    let mut mi = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let pij = p[i + nx * j];
            if pij > 0.0 {
                mi += pij * ((pij * total) / (p1[i] * p2[j])).ln();
            }
        }
    }
    Ok(Divergence::finite(mi / total))
}

/// Fisher information `I_n = ∫|∇ρ|² / ρ` of an `n`-particle density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherInformation {
    pub total: f64,
    /// `I_n / n`.
    pub normalized: f64,
    /// `I_n / (4n)`, i.e. `(1/n)∫|∇√ρ|²`, the value obtained when the factor
    /// four of `ρ = Ψ²` is dropped.
    pub without_factor_four: f64,
}

fn fisher_total(rho: &GridFunction) -> f64 {
    let grid = rho.grid();
    let axes = rho.axes();
    let shape = Shape::new(grid.points(), axes);
    let floor = default_floor(rho);
    let values = rho.values();
    (0..axes)
        .map(|axis| {
            let d = derivative(values, shape, axis, grid.spacing(), DiffOrder::Fourth);
            quadrature(grid, axes, |i| d[i] * d[i] / values[i].max(floor))
        })
        .sum()
}

pub fn fisher_information(rho: &GridFunction) -> Result<FisherInformation> {
    if rho.values().iter().any(|v| *v < 0.0) {
        return domain("density must be nonnegative");
    }
    let total = fisher_total(rho);
    let n = rho.particles() as f64;
    Ok(FisherInformation {
        total,
        normalized: total / n,
        without_factor_four: total / (4.0 * n),
    })
}

/// Keeps the last `k` particles and integrates the others out.
fn trailing_marginal(rho: &GridFunction, k: usize) -> Result<GridFunction> {
    let particles = rho.particles();
    if k == 0 || k >= particles {
        return domain(format!("marginal order must satisfy 1 <= k < {particles}, got {k}"));
    }
    let grid = *rho.grid();
    let inner = Shape::new(grid.points(), (particles - k) * grid.dim());
    let w = grid.weights();
    let inner_weights: Vec<f64> = (0..inner.len()).map(|i| point_weight(&w, inner, i)).collect();
    let values = rho.values();
    let out = (0..grid.tensor_len(k))
        .into_par_iter()
        .map(|j| {
            let row = &values[j * inner.len()..(j + 1) * inner.len()];
            row.iter().zip(&inner_weights).map(|(v, w)| v * w).sum()
        })
        .collect();
    GridFunction::new(grid, k, out)
}

/// `I_n(G) − I_l(G_l) − I_{n−l}(G_{n−l})` where `G_l` keeps the first `l`
/// particles and `G_{n−l}` the rest.
pub fn fisher_superadditivity_gap(g: &GridFunction, l: usize) -> Result<f64> {
    let n = g.particles();
    if l == 0 || l >= n {
        return domain(format!("split must satisfy 1 <= l < {n}, got {l}"));
    }
    let head = marginal_of_density(g, l)?;
    let tail = trailing_marginal(g, n - l)?;
    Ok(fisher_information(g)?.total - fisher_information(&head)?.total - fisher_information(&tail)?.total)
}

/// `α I(G₁) + (1 − α) I(G₂) − I(α G₁ + (1 − α) G₂)`.
pub fn fisher_convexity_check(g1: &GridFunction, g2: &GridFunction, alpha: f64) -> Result<f64> {
    g1.check_layout(g2)?;
    if !(0.0..=1.0).contains(&alpha) {
        return domain(format!("α must lie in [0, 1], got {alpha}"));
    }
    let mix = GridFunction::new(
        *g1.grid(),
        g1.particles(),
        g1.values()
            .iter()
            .zip(g2.values())
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect(),
    )?;
    let i1 = fisher_information(g1)?.total;
    let i2 = fisher_information(g2)?.total;
    Ok(alpha * i1 + (1.0 - alpha) * i2 - fisher_information(&mix)?.total)
}

fn check_compatible(state: &NBodyState, nls: &NlsSolution) -> Result<()> {
    if state.grid() != nls.phi.grid() {
        return Err(Error::GridMismatch("N-body and one-particle grids differ".into()));
    }
    Ok(())
}

/// `E_{ρ_N}|b₁^N − u(r₁)|²` with `u` the drift of `φ²`, by quadrature over
/// the tensor grid.
pub fn drift_mismatch(state: &NBodyState, nls: &NlsSolution) -> Result<f64> {
    check_compatible(state, nls)?;
    let rho = state.density();
    let b1 = drift_axis(&rho, default_floor(&rho), 0)?;
    let one = nls.phi.density();
    let u = drift_axis(&one, default_floor(&one), 0)?;
    let n = state.grid().points();
    let r = rho.values();
    Ok(quadrature(state.grid(), state.particles, |i| {
        let diff = b1[i] - u[i % n];
        diff * diff * r[i]
    }))
}

/// How the kinetic term of the mismatch identity is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KineticReading {
    /// `∫|∇₁Ψ|²`.
    FirstCoordinate,
    /// `½∫|∇₁Ψ|²`.
    HalfFirstCoordinate,
    /// `½∫|∇Ψ|²` over all coordinates.
    HalfFullGradient,
}

/// The mismatch against `K + ∫V(r₁)Ψ² + 2∫U(r₁)Ψ² − μ` under each kinetic
/// reading `K`, with `U` the mean-field potential of `φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub mismatch: f64,
    pub readings: Vec<(KineticReading, f64)>,
    /// The reading with the smallest gap.
    pub selected: KineticReading,
    pub gap: f64,
}

pub fn entropy_identity_check(state: &NBodyState, nls: &NlsSolution) -> Result<IdentityCheck> {
    let mismatch = drift_mismatch(state, nls)?;
    let first = nbody_energy_components(state);
    let n = state.grid().points();
    let rho = state.density();
    let r = rho.values();
    let coupling = quadrature(state.grid(), state.particles, |i| 2.0 * nls.mean_field[i % n] * r[i]);
    let rest = first.trap + coupling - nls.chemical_potential;
    let readings = vec![
        (KineticReading::FirstCoordinate, first.kinetic + rest),
        (KineticReading::HalfFirstCoordinate, 0.5 * first.kinetic + rest),
        (
            KineticReading::HalfFullGradient,
            0.5 * state.particles as f64 * first.kinetic + rest,
        ),
    ];
    let (selected, gap) = readings
        .iter()
        .map(|(k, v)| (*k, (v - mismatch).abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("three readings");
    Ok(IdentityCheck {
        mismatch,
        readings,
        selected,
        gap,
    })
}

/// The normalized path-space entropy `H̄(t) = (t/2) · mismatch`.
pub fn one_particle_entropy(t: f64, mismatch: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return domain(format!("time must be nonnegative, got {t}"));
    }
    if !(mismatch >= 0.0) {
        return domain(format!("mismatch must be nonnegative, got {mismatch}"));
    }
    Ok(0.5 * t * mismatch)
}

/// `ρ^⊗k` on the `k`-fold tensor grid.
pub fn tensor_power(rho: &GridFunction, k: usize) -> Result<GridFunction> {
    if rho.particles() != 1 || k == 0 {
        return domain("tensor power needs a one-particle density and k >= 1");
    }
    let grid = *rho.grid();
    let len = rho.values().len();
    let values = rho.values();
    let out = (0..grid.tensor_len(k))
        .into_par_iter()
        .with_min_len(4096)
        .map(|idx| {
            let mut rem = idx;
            let mut prod = 1.0;
            for _ in 0..k {
                prod *= values[rem % len];
                rem /= len;
            }
            prod
        })
        .collect();
    GridFunction::new(grid, k, out)
}

/// Fixed-time entropy of the `k`-marginal against the mean-field product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalEntropy {
    pub k: usize,
    /// `KL(ρ^(k)_N | ρ^⊗k)` on the grid.
    pub kl: f64,
    /// `KL(ρ_N | ρ^⊗N) / ⌊N/k⌋`, which bounds `kl` by the chain rule.
    pub chain_bound: f64,
    /// `TV(ρ^(k)_N, ρ^⊗k)`.
    pub tv: f64,
    /// `k · H̄(t)`, the path-space statement.
    pub path_bound: f64,
}

pub fn k_marginal_entropy(state: &NBodyState, nls: &NlsSolution, k: usize, t: f64) -> Result<MarginalEntropy> {
    check_compatible(state, nls)?;
    let n = state.particles;
    if k == 0 || k >= n {
        return domain(format!("marginal order must satisfy 1 <= k < {n}, got {k}"));
    }
    let one = nls.phi.density();
    let marginal = marginal_density(state, k)?;
    let reference = tensor_power(&one, k)?;
    let kl = kl_density(&marginal, &reference)?.value;
    let full = kl_density(&state.density(), &tensor_power(&one, n)?)?.value;
    let mismatch = drift_mismatch(state, nls)?;
    Ok(MarginalEntropy {
        k,
        kl,
        chain_bound: full / (n / k) as f64,
        tv: tv_density(&marginal, &reference)?,
        path_bound: k as f64 * one_particle_entropy(t, mismatch)?,
    })
}

/// Ensemble mean of `sup_t |Y¹_t − X¹_t|²`.
pub fn kac_chaos_metric(run: &CoupledRun) -> f64 {
    run.mean_sup_distance_sq()
}

/// Every chaos diagnostic for one `(N, β, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosReport {
    #[serde(rename = "N")]
    pub particles: usize,
    pub beta: f64,
    pub t: f64,
    #[serde(rename = "driftMismatch")]
    pub drift_mismatch: f64,
    #[serde(rename = "normalizedEntropy")]
    pub normalized_entropy: f64,
    #[serde(rename = "kMarginalEntropy")]
    pub k_marginal_entropy: Vec<f64>,
    #[serde(rename = "kMarginalTV")]
    pub k_marginal_tv: Vec<f64>,
    #[serde(rename = "fisherNormalized")]
    pub fisher_normalized: f64,
    #[serde(rename = "kacMetric")]
    pub kac_metric: f64,
    #[serde(rename = "identityGap")]
    pub identity_gap: f64,
}

/// Builds the report; the coupled simulation runs to horizon `t` from
/// points sampled from `ρ_N`, with the step, ensemble size and seed of
/// `sde`.
pub fn chaos_report(state: &NBodyState, nls: &NlsSolution, t: f64, sde: &SdeParams) -> Result<ChaosReport> {
    check_compatible(state, nls)?;
    let mismatch = drift_mismatch(state, nls)?;
    let identity = entropy_identity_check(state, nls)?;
    let marginals = (1..state.particles)
        .map(|k| k_marginal_entropy(state, nls, k, t))
        .collect::<Result<Vec<_>>>()?;
    let rho = state.density();
    let params = SdeParams { horizon: t, ..*sde };
    params.validate()?;
    let init = sample_density(&rho, params.trajectories, params.seed)?;
    let interacting = nbody_drift(state)?;
    let one = nls.phi.density();
    let single = drift_from_density(&one, default_floor(&one))?;
    let run = simulate_coupled(&interacting, &single, &init, &params)?;
    Ok(ChaosReport {
        particles: state.particles,
        beta: state.beta,
        t,
        drift_mismatch: mismatch,
        normalized_entropy: one_particle_entropy(t, mismatch)?,
        k_marginal_entropy: marginals.iter().map(|m| m.kl).collect(),
        k_marginal_tv: marginals.iter().map(|m| m.tv).collect(),
        fisher_normalized: fisher_information(&rho)?.normalized,
        kac_metric: kac_chaos_metric(&run),
        identity_gap: identity.gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_pair() {
        let (p, q) = ([1.0, 0.0], [0.5, 0.5]);
        let kl = kl_discrete(&p, &q).unwrap();
        assert!((kl.value - 2f64.ln()).abs() < 1e-15);
        assert_eq!(tv_discrete(&p, &q).unwrap(), 0.5);
        let back = kl_discrete(&q, &p).unwrap();
        assert!(!back.absolutely_continuous && back.value.is_infinite());
        let c = pinsker_check(&p, &q).unwrap();
        assert!((c.bound - (2.0 * 2f64.ln()).sqrt()).abs() < 1e-15);
        assert!((c.stronger_bound - (2f64.ln() / 2.0).sqrt()).abs() < 1e-15);
        assert!(!c.violated && !c.stronger_violated);
    }

    #[test]
    fn identical_distributions() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(kl_discrete(&p, &p).unwrap().value, 0.0);
        assert_eq!(tv_discrete(&p, &p).unwrap(), 0.0);
        let c = pinsker_check(&p, &p).unwrap();
        assert_eq!((c.tv, c.bound), (0.0, 0.0));
    }

    #[test]
    fn rejects_invalid_vectors() {
        assert!(kl_discrete(&[0.5, 0.6], &[0.5, 0.5]).is_err());
        assert!(kl_discrete(&[0.5, 0.5], &[1.0]).is_err());
        assert!(tv_discrete(&[-0.1, 1.1], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn chain_rule_cases() {
        let diag = [0.5, 0.0, 0.0, 0.5];
        let u = [0.5, 0.5];
        let gap = chain_rule_gap(&diag, &u, &u).unwrap();
        assert!((gap.value - 2f64.ln()).abs() < 1e-15);
        let (a, b) = ([0.3, 0.7], [0.1, 0.6, 0.3]);
        let prod: Vec<f64> = (0..6).map(|i| a[i % 2] * b[i / 2]).collect();
        assert!(chain_rule_gap(&prod, &u, &[0.2, 0.2, 0.6]).unwrap().value.abs() < 1e-15);
    }

    #[test]
    fn entropy_closed_form() {
        assert_eq!(one_particle_entropy(0.0, 0.7).unwrap(), 0.0);
        assert_eq!(one_particle_entropy(3.0, 0.0).unwrap(), 0.0);
        assert!((one_particle_entropy(2.0, 0.3).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(
            one_particle_entropy(4.0, 0.3).unwrap(),
            2.0 * one_particle_entropy(2.0, 0.3).unwrap()
        );
        assert!(one_particle_entropy(-1.0, 0.3).is_err());
    }
}
