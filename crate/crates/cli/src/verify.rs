//! The property suite behind `bec-lab verify`.

use bec_core::{
    chain_rule_gap, drift_mismatch, empirical_density, entropy_identity_check, fisher_convexity_check,
    fisher_superadditivity_gap, hellmann_feynman_check, k_marginal_entropy, minimize_nbody, minimize_nls,
    nbody_hellmann_feynman_check, one_particle_entropy, pinsker_check, sample_density, simulate, tv_density,
    CounterRng, FnDrift, Grid, GridFunction, NBodyProblem, PairPotential, Perturbation, SdeParams, TrapPotential,
};
use serde::Serialize;

use crate::cache::{CacheError, CacheKey, GroundStateCache, VERSION};
use crate::commands::{self, Selection, SweepCell};
use crate::error::{CliError, Result};
use crate::Lab;

/// Randomized instances per inequality.
pub const INSTANCES: usize = 10_000;

#[derive(Debug, Clone, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub properties: Vec<PropertyResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> usize {
        self.properties.iter().filter(|p| p.passed).count()
    }

    pub fn failed(&self) -> usize {
        self.properties.len() - self.passed()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for p in &self.properties {
            s += &format!("{} {}: {}\n", if p.passed { "PASS" } else { "FAIL" }, p.name, p.detail);
        }
        s += &format!("verify: {} passed, {} failed\n", self.passed(), self.failed());
        s
    }
}

struct Suite {
    results: Vec<PropertyResult>,
}

impl Suite {
    /// Records a property; solver errors inside a check count as failures.
    fn check(&mut self, name: &str, f: impl FnOnce() -> Result<(bool, String)>) {
        let (passed, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        self.results.push(PropertyResult {
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

fn oscillator() -> TrapPotential {
    TrapPotential::harmonic(1.0).expect("unit oscillator")
}

/// Runs every property on the lab's configuration.
pub fn run(lab: &Lab) -> Result<VerifyReport> {
    lab.install(|| run_inner(lab))
}

fn run_inner(lab: &Lab) -> Result<VerifyReport> {
    let cfg = &lab.config;
    let flow = cfg.solver.flow;
    let line = cfg.line()?;
    let trap = cfg.trap()?;
    let mut s = Suite { results: Vec::new() };

    s.check("oscillator ground state", || {
        let sol = minimize_nls(&oscillator(), 0.0, Grid::line(8.0, 513)?, &flow)?;
        let (de, dmu) = ((sol.energy - 1.0).abs(), (sol.chemical_potential - 1.0).abs());
        Ok((de < 1e-6 && dmu < 1e-5, format!("|E − 1| = {de:.2e}, |μ − 1| = {dmu:.2e}")))
    });

    s.check("one-particle flow descends and converges", || {
        let g = bec_core::pair_coupling(&cfg.pair(1.0)?) / 2.0;
        let sol = minimize_nls(&trap, g, line, &flow)?;
        let norm = (sol.phi.norm_sq() - 1.0).abs();
        let ok = sol.max_energy_rise <= 1e-12 && sol.residual_norm <= flow.residual_tolerance && norm < 1e-12;
        Ok((
            ok,
            format!(
                "max rise {:.1e}, residual {:.1e}, |‖φ‖² − 1| = {norm:.1e}",
                sol.max_energy_rise, sol.residual_norm
            ),
        ))
    });

    s.check("non-interacting states factorize", || {
        let free = minimize_nls(&trap, 0.0, line, &flow)?;
        let state = minimize_nbody(&trap, &PairPotential::zero(1), 3, 0.5, line, &flow)?;
        let de = state.energy_per_particle() - free.energy;
        let m = drift_mismatch(&state, &free)?;
        let h = one_particle_entropy(1.0, m.max(0.0))?;
        Ok((
            de.abs() <= 1e-8 && m.abs() <= 1e-8 && h <= 1e-8,
            format!("E_N/N − E₁ = {de:.1e}, mismatch {m:.1e}, H̄(1) = {h:.1e}"),
        ))
    });

    s.check("n-body states are symmetric, normalized and nonnegative", || {
        let mut worst: (f64, f64, f64) = (0.0, 0.0, 0.0);
        for (n, beta, lambda) in commands::sweep_cells(lab) {
            let (state, _) = lab.nbody_state(n, beta, lambda)?;
            let min = state.psi.values().iter().copied().fold(f64::INFINITY, f64::min);
            worst.0 = worst.0.max(state.asymmetry());
            worst.1 = worst.1.max((state.density().integrate() - 1.0).abs());
            worst.2 = worst.2.min(min);
        }
        Ok((
            worst.0 <= 1e-12 && worst.1 <= 1e-12 && worst.2 >= 0.0,
            format!("asymmetry {:.1e}, mass error {:.1e}, min Ψ {:.1e}", worst.0, worst.1, worst.2),
        ))
    });

    s.check("product states bound the n-body energy from above", || {
        let mut worst = f64::INFINITY;
        for (n, beta, lambda) in commands::sweep_cells(lab) {
            let (state, _) = lab.nbody_state(n, beta, lambda)?;
            let (nls, _) = lab.mean_field(beta, lambda)?;
            let phi = nls.phi.values();
            let p = line.points();
            let product = GridFunction::new(
                line,
                n,
                (0..p.pow(n as u32))
                    .map(|idx| (0..n).map(|k| phi[idx / p.pow(k as u32) % p]).product())
                    .collect(),
            )?;
            let problem = NBodyProblem::new(&trap, &cfg.pair(lambda)?, n, beta, line)?.with_budget(cfg.solver.budget);
            worst = worst.min(problem.energy_of(&product)? - state.energy);
        }
        Ok((worst >= -1e-10, format!("min ⟨φ^⊗N, H φ^⊗N⟩ − E_N = {worst:.3e}")))
    });

    s.check("hellmann-feynman, one particle", || {
        let g = bec_core::pair_coupling(&cfg.pair(1.0)?) / 2.0;
        let mut worst: f64 = 0.0;
        for which in [Perturbation::Trap, Perturbation::Interaction] {
            worst = worst.max(hellmann_feynman_check(which, 1.0, 1e-2, &trap, g, line, &flow)?.gap);
        }
        Ok((worst < 1e-3, format!("largest gap {worst:.2e}")))
    });

    s.check("hellmann-feynman, two particles", || {
        let beta = *cfg.sweep.beta.last().expect("validated");
        let v0 = cfg.pair(1.0)?;
        let mut worst: f64 = 0.0;
        for which in [Perturbation::Trap, Perturbation::Interaction] {
            worst = worst.max(nbody_hellmann_feynman_check(which, 1.0, 1e-2, &trap, &v0, 2, beta, line, &flow)?.gap);
        }
        Ok((worst < 1e-3, format!("largest gap {worst:.2e}")))
    });

    s.check("scaled scattering lengths approach the coupling", || {
        let v0 = cfg.pair_in(3, 1.0)?;
        let mut ok = true;
        let mut last_gap = f64::NAN;
        let mut betas: Vec<f64> = cfg.sweep.beta.iter().copied().filter(|b| *b > 0.0).collect();
        if betas.is_empty() {
            betas.push(0.5);
        }
        for beta in betas {
            let rows = bec_core::scattering_limit_sweep(&v0, beta, &cfg.sweep.scattering_particles)?;
            ok &= rows.iter().all(|r| r.four_pi_a <= r.g);
            ok &= rows.windows(2).all(|w| w[1].gap < w[0].gap);
            last_gap = rows.last().map_or(f64::NAN, |r| r.gap);
        }
        Ok((ok, format!("final gap g − 4πa = {last_gap:.3e}")))
    });

    let rng = CounterRng::new(cfg.sde.seed);
    let dirichlet = |instance: usize, slot: u64, len: usize, zeros: bool| -> Vec<f64> {
        let mut w: Vec<f64> = (0..len)
            .map(|k| {
                let u = rng.uniform(3, instance as u64, slot, k as u64);
                let z = rng.uniform(4, instance as u64, slot, k as u64);
                if zeros && z < 0.125 {
                    0.0
                } else {
                    -u.ln()
                }
            })
            .collect();
        if w.iter().all(|v| *v == 0.0) {
            w[0] = 1.0;
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        w
    };
    let size = |instance: usize, slot: u64, max: usize| 1 + (rng.bits(5, instance as u64, slot, 0) % max as u64) as usize;

    s.check("pinsker inequality", || {
        let mut violations = 0;
        for i in 0..INSTANCES {
            let len = size(i, 0, 16);
            let c = pinsker_check(&dirichlet(i, 1, len, true), &dirichlet(i, 2, len, false))?;
            violations += c.violated as usize;
        }
        Ok((violations == 0, format!("{violations} violations in {INSTANCES} instances")))
    });

    s.check("chain-rule gap is nonnegative", || {
        let (mut violations, mut min) = (0, f64::INFINITY);
        for i in 0..INSTANCES {
            let (nx, ny) = (size(i, 0, 8), size(i, 1, 8));
            let gap = chain_rule_gap(&dirichlet(i, 2, nx * ny, true), &dirichlet(i, 3, nx, false), &dirichlet(i, 4, ny, false))?;
            violations += (gap.value < -1e-12) as usize;
            min = min.min(gap.value);
        }
        Ok((violations == 0, format!("{violations} violations, smallest gap {min:.2e}")))
    });

    let fisher_grid = Grid::line(4.0, 17)?;
    let random_density = |i: usize, slot: u64| -> GridFunction {
        let c: Vec<f64> = (0..5).map(|k| rng.uniform(6, i as u64, slot, k)).collect();
        let mut rho = GridFunction::from_fn(fisher_grid, 2, |x| {
            let s = x[0] * x[0] + x[1] * x[1];
            (-(0.5 + c[0]) * s - 0.9 * c[1] * x[0] * x[1] + (c[2] - 0.5) * x[0]).exp()
                + c[4] * (-3.0 * (x[0] - 2.0 * c[3] + 1.0).powi(2)).exp()
        });
        let mass = rho.integrate();
        rho.values_mut().iter_mut().for_each(|v| *v /= mass);
        rho
    };

    s.check("fisher superadditivity", || {
        let mut min = f64::INFINITY;
        for i in 0..INSTANCES {
            min = min.min(fisher_superadditivity_gap(&random_density(i, 0), 1)?);
        }
        Ok((min >= -1e-8, format!("smallest gap {min:.2e} over {INSTANCES} densities")))
    });

    s.check("fisher convexity", || {
        let mut min = f64::INFINITY;
        for i in 0..INSTANCES {
            let alpha = rng.uniform(7, i as u64, 0, 0);
            min = min.min(fisher_convexity_check(&random_density(i, 1), &random_density(i, 2), alpha)?);
        }
        Ok((min >= -1e-8, format!("smallest gap {min:.2e} over {INSTANCES} pairs")))
    });

    s.check("ornstein-uhlenbeck stationarity", || {
        let m = 10_000;
        let grid = Grid::line(6.0, 121)?;
        let rho = GridFunction::from_fn(grid, 1, |x| (-x[0] * x[0]).exp() / std::f64::consts::PI.sqrt());
        let ou = FnDrift::new(1, 6.0, |x: &[f64], out: &mut [f64]| out[0] = -x[0])?;
        let init = sample_density(&rho, m, cfg.sde.seed)?;
        let params = SdeParams {
            record_every: Some(1000),
            ..SdeParams::new(1e-3, 10.0, m, cfg.sde.seed)?
        };
        let ens = simulate(&ou, &init, &params)?;
        let last = ens.records() - 1;
        let xs: Vec<f64> = (0..m).map(|j| ens.state(j, last)[0]).collect();
        let mean = xs.iter().sum::<f64>() / m as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let sigma = 0.5 * (2.0 / m as f64).sqrt();
        Ok(((var - 0.5).abs() < 3.0 * sigma, format!("variance {var:.5} (3σ = {:.5})", 3.0 * sigma)))
    });

    s.check("n-body nelson dynamics stay stationary", || {
        let sel = Selection {
            particles: cfg.sweep.particles.first().copied(),
            beta: cfg.sweep.beta.last().copied(),
            lambda: None,
        };
        let (n, beta, lambda) = sel.resolve(lab);
        let (state, _) = lab.nbody_state(n, beta, lambda)?;
        let params = cfg.sde_params(cfg.sde.horizon)?;
        let drift = bec_core::nbody_drift(&state)?;
        let init = sample_density(&state.density(), params.trajectories, params.seed)?;
        let ens = simulate(&drift, &init, &params)?;
        let one = bec_core::marginal_density(&state, 1)?;
        let mut max: f64 = 0.0;
        for t in ens.times() {
            max = max.max(tv_density(&empirical_density(&ens, 0, (t, t), &line)?, &one)?);
        }
        Ok((max < 0.05, format!("max TV {max:.4} over {} recorded times", ens.records())))
    });

    s.check("simulation output is independent of the worker count", || {
        let grid = Grid::line(3.0, 33)?;
        let rho = GridFunction::from_fn(grid, 2, |x| (-(x[0] * x[0] + x[1] * x[1] + x[0] * x[1])).exp());
        let drift = bec_core::drift_from_density(&rho, bec_core::default_floor(&rho))?;
        let init = sample_density(&rho, 500, 11)?;
        let params = SdeParams::new(1e-3, 0.2, 500, 11)?;
        let run = |threads| -> Result<bec_core::PathEnsemble> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| CliError::config(e.to_string()))?;
            Ok(pool.install(|| simulate(&drift, &init, &params))?)
        };
        let same = run(1)? == run(3)?;
        Ok((same, format!("1 and 3 workers {}", if same { "agree bitwise" } else { "differ" })))
    });

    s.check("ground-state cache round trip", || {
        let dir = std::env::temp_dir().join(format!("bec-lab-verify-{}", std::process::id()));
        let cache = GroundStateCache::new(&dir);
        let key = CacheKey {
            dim: 1,
            particles: 2,
            points: line.points() as u32,
            half_width: line.half_width(),
            beta: 0.5,
            potentials: "verify".into(),
            solver: "verify".into(),
        };
        let f = GridFunction::from_fn(line, 2, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp() / 3.0);
        let path = cache.store(&key, &f)?;
        let back = cache.load(&key)?.ok_or_else(|| CliError::config("stored entry missing"))?;
        let exact = back.values().iter().zip(f.values()).all(|(a, b)| a.to_bits() == b.to_bits());
        let bytes = std::fs::read(&path).map_err(|e| CliError::output(&path, e))?;
        std::fs::write(&path, &bytes[..bytes.len() / 2]).map_err(|e| CliError::output(&path, e))?;
        let truncated = matches!(cache.load(&key), Err(CacheError::Corrupt { .. }));
        let mut bumped = bytes.clone();
        bumped[4..8].copy_from_slice(&(VERSION + 1).to_le_bytes());
        std::fs::write(&path, &bumped).map_err(|e| CliError::output(&path, e))?;
        let versioned = matches!(cache.load(&key), Err(CacheError::IncompatibleVersion { .. }));
        let _ = std::fs::remove_dir_all(&dir);
        Ok((
            exact && truncated && versioned,
            format!("bit-exact {exact}, truncation detected {truncated}, version checked {versioned}"),
        ))
    });

    let cells = commands::sweep(lab);
    let cells: Vec<SweepCell> = match cells {
        Ok(c) => c,
        Err(e) => {
            s.check("chaos sweep", || Err(e));
            Vec::new()
        }
    };
    if !cells.is_empty() {
        s.check("chaos diagnostics decrease with N", || {
            let bad: Vec<String> = cells
                .iter()
                .filter(|c| !c.monotone_trend)
                .map(|c| format!("N={} β={} λ={}", c.report.particles, c.report.beta, c.lambda))
                .collect();
            Ok((bad.is_empty(), format!("{} cells, trend broken at [{}]", cells.len(), bad.join(", "))))
        });
        s.check("coupled kac bound", || {
            let worst = cells
                .iter()
                .map(|c| c.report.kac_metric / c.kac_bound.max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            let ok = cells.iter().all(|c| c.kac_bound_holds);
            Ok((ok, format!("largest kacMetric / bound = {worst:.3}")))
        });
        s.check("marginal pinsker on sweep cells", || {
            let ok = cells.iter().all(|c| {
                c.report
                    .k_marginal_entropy
                    .iter()
                    .zip(&c.report.k_marginal_tv)
                    .all(|(kl, tv)| *tv <= (2.0 * kl).sqrt() + 1e-12)
            });
            Ok((ok, "TV ≤ √(2 KL) for every k-marginal".into()))
        });
        s.check("entropy identity", || {
            let worst = cells.iter().map(|c| c.report.identity_gap).fold(0.0, f64::max);
            Ok((worst < 1e-3, format!("largest gap {worst:.2e}")))
        });
    }

    s.check("k-marginal entropy obeys the chain-rule bound", || {
        let mut ok = true;
        for (n, beta, lambda) in commands::sweep_cells(lab) {
            let (state, _) = lab.nbody_state(n, beta, lambda)?;
            let (nls, _) = lab.mean_field(beta, lambda)?;
            for k in 1..n {
                let m = k_marginal_entropy(&state, &nls, k, cfg.sde.horizon)?;
                ok &= m.kl >= -1e-12 && m.kl <= m.chain_bound * (1.0 + 1e-12) + 1e-15;
            }
            let id = entropy_identity_check(&state, &nls)?;
            ok &= id.mismatch >= 0.0;
        }
        Ok((ok, "KL(ρ^(k)) ≤ KL(ρ_N)/⌊N/k⌋ on every cell".into()))
    });

    Ok(VerifyReport { properties: s.results })
}
