//! The subcommands. Each returns its results and writes its output files;
//! printing is left to the binary.

use std::path::PathBuf;

use bec_core::{
    chaos_report, empirical_density, marginal_density, nbody_drift, sample_density, scattering_limit_sweep,
    simulate, tv_density, ChaosReport, NBodyState, NlsSolution, PathEnsemble, SweepRow,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::NlsCoupling;
use crate::error::{CliError, Result};
use crate::output::{num, to_json, write_file, Table};
use crate::{CacheStatus, Lab};

/// Picks one `(N, β, λ)` out of the sweep lists; unset entries take the
/// first list value.
#[derive(Debug, Clone, Copy, Default)]
pub struct Selection {
    pub particles: Option<usize>,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
}

impl Selection {
    pub fn resolve(&self, lab: &Lab) -> (usize, f64, f64) {
        let s = &lab.config.sweep;
        (
            self.particles.unwrap_or(s.particles[0]),
            self.beta.unwrap_or(s.beta[0]),
            self.lambda.unwrap_or(s.lambda[0]),
        )
    }

    fn is_empty(&self) -> bool {
        self.particles.is_none() && self.beta.is_none() && self.lambda.is_none()
    }
}

fn write_outputs(lab: &Lab, stem: &str, table: Option<&Table>, json: Option<Vec<u8>>) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if let (true, Some(t)) = (lab.config.output.csv, table) {
        written.push(write_file(&lab.out, &format!("{stem}.csv"), &t.to_csv())?);
    }
    if let (true, Some(j)) = (lab.config.output.json, json) {
        written.push(write_file(&lab.out, &format!("{stem}.json"), &j)?);
    }
    Ok(written)
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyRecord {
    pub model: String,
    pub energy: f64,
    pub kinetic: f64,
    pub trap: f64,
    pub interaction: f64,
    #[serde(rename = "chemicalPotential")]
    pub chemical_potential: f64,
    pub residual: f64,
}

pub struct NlsRow {
    pub record: EnergyRecord,
    pub solution: NlsSolution,
    pub cache: CacheStatus,
}

impl NlsRow {
    fn new(model: String, solution: NlsSolution, cache: CacheStatus) -> Self {
        let c = solution.components;
        Self {
            record: EnergyRecord {
                model,
                energy: solution.energy,
                kinetic: c.kinetic,
                trap: c.trap,
                interaction: c.interaction,
                chemical_potential: solution.chemical_potential,
                residual: solution.residual_norm,
            },
            solution,
            cache,
        }
    }
}

/// One-particle minimizers: at the configured coupling, or at the
/// mean-field limit for every configured β.
pub fn solve_nls(lab: &Lab) -> Result<Vec<NlsRow>> {
    lab.install(|| {
        let rows = match lab.config.potentials.nls_coupling {
            NlsCoupling::Value(g) => {
                let (sol, cache) = lab.nls(g)?;
                vec![NlsRow::new(format!("local g={g}"), sol, cache)]
            }
            NlsCoupling::Limit => lab
                .config
                .sweep
                .beta
                .iter()
                .map(|&beta| {
                    let (sol, cache) = lab.nls_limit(beta)?;
                    let model = if beta == 0.0 { "hartree beta=0".to_string() } else { format!("local beta={beta}") };
                    Ok(NlsRow::new(model, sol, cache))
                })
                .collect::<Result<_>>()?,
        };
        let mut table = Table::new([
            "model",
            "energy",
            "kinetic",
            "trap",
            "interaction",
            "chemicalPotential",
            "residual",
        ]);
        for r in &rows {
            let e = &r.record;
            table.push(vec![
                e.model.clone(),
                num(e.energy),
                num(e.kinetic),
                num(e.trap),
                num(e.interaction),
                num(e.chemical_potential),
                num(e.residual),
            ]);
        }
        let records: Vec<&EnergyRecord> = rows.iter().map(|r| &r.record).collect();
        write_outputs(lab, "solve-nls", Some(&table), Some(to_json(&records)))?;
        Ok(rows)
    })
}

pub fn render_nls(rows: &[NlsRow]) -> String {
    let mut s = format!(
        "{:<20} {:>18} {:>18} {:>18} {:>18} {:>18} {:>11} {:>6} {:>8}\n",
        "model", "E", "kinetic", "trap", "interaction", "mu", "residual", "iters", "cache"
    );
    for r in rows {
        let e = &r.record;
        s += &format!(
            "{:<20} {:>18.12} {:>18.12} {:>18.12} {:>18.12} {:>18.12} {:>11.3e} {:>6} {:>8}\n",
            e.model,
            e.energy,
            e.kinetic,
            e.trap,
            e.interaction,
            e.chemical_potential,
            e.residual,
            r.solution.iterations,
            r.cache.label()
        );
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct NBodyRecord {
    #[serde(rename = "N")]
    pub particles: usize,
    pub beta: f64,
    pub lambda: f64,
    pub energy: f64,
    #[serde(rename = "energyPerParticle")]
    pub energy_per_particle: f64,
    pub kinetic: f64,
    pub trap: f64,
    pub interaction: f64,
    pub residual: f64,
    pub asymmetry: f64,
}

pub struct NBodyRow {
    pub record: NBodyRecord,
    pub state: NBodyState,
    pub cache: CacheStatus,
}

/// N-body ground states for the selected cell, or for every sweep cell.
pub fn solve_nbody(lab: &Lab, sel: Selection) -> Result<Vec<NBodyRow>> {
    let cells: Vec<(usize, f64, f64)> = if sel.is_empty() {
        sweep_cells(lab)
    } else {
        vec![sel.resolve(lab)]
    };
    lab.install(|| {
        let rows = cells
            .iter()
            .map(|&(n, beta, lambda)| {
                let (state, cache) = lab.nbody_state(n, beta, lambda)?;
                let c = state.components;
                Ok(NBodyRow {
                    record: NBodyRecord {
                        particles: n,
                        beta,
                        lambda,
                        energy: state.energy,
                        energy_per_particle: state.energy_per_particle(),
                        kinetic: c.kinetic,
                        trap: c.trap,
                        interaction: c.interaction,
                        residual: state.residual_norm,
                        asymmetry: state.asymmetry(),
                    },
                    state,
                    cache,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut table = Table::new([
            "N",
            "beta",
            "lambda",
            "energy",
            "energyPerParticle",
            "kinetic",
            "trap",
            "interaction",
            "residual",
            "asymmetry",
        ]);
        for r in &rows {
            let e = &r.record;
            table.push(vec![
                e.particles.to_string(),
                num(e.beta),
                num(e.lambda),
                num(e.energy),
                num(e.energy_per_particle),
                num(e.kinetic),
                num(e.trap),
                num(e.interaction),
                num(e.residual),
                num(e.asymmetry),
            ]);
        }
        let records: Vec<&NBodyRecord> = rows.iter().map(|r| &r.record).collect();
        write_outputs(lab, "solve-nbody", Some(&table), Some(to_json(&records)))?;
        Ok(rows)
    })
}

pub fn render_nbody(rows: &[NBodyRow]) -> String {
    let mut s = format!(
        "{:>3} {:>6} {:>6} {:>18} {:>18} {:>18} {:>18} {:>18} {:>11} {:>6} {:>8}\n",
        "N", "beta", "lambda", "E_N", "E_N/N", "kinetic/N", "trap/N", "interaction/N", "residual", "iters", "cache"
    );
    for r in rows {
        let e = &r.record;
        s += &format!(
            "{:>3} {:>6} {:>6} {:>18.12} {:>18.12} {:>18.12} {:>18.12} {:>18.12} {:>11.3e} {:>6} {:>8}\n",
            e.particles,
            e.beta,
            e.lambda,
            e.energy,
            e.energy_per_particle,
            e.kinetic,
            e.trap,
            e.interaction,
            e.residual,
            r.state.iterations,
            r.cache.label()
        );
    }
    s
}

/// Scattering-length table in three dimensions for every positive β.
pub fn scattering(lab: &Lab) -> Result<Vec<(f64, SweepRow)>> {
    let cfg = &lab.config;
    let v0 = cfg.pair_in(3, 1.0)?;
    let betas: Vec<f64> = cfg.sweep.beta.iter().copied().filter(|b| *b > 0.0).collect();
    if betas.is_empty() {
        return Err(CliError::config("scattering needs a positive β in [sweep] beta"));
    }
    let mut rows = Vec::new();
    for beta in betas {
        for row in scattering_limit_sweep(&v0, beta, &cfg.sweep.scattering_particles)? {
            rows.push((beta, row));
        }
    }
    let mut table = Table::new(["beta", "N", "a_N", "4pi_a_N", "g", "gap"]);
    for (beta, r) in &rows {
        table.push(vec![num(*beta), r.n.to_string(), num(r.a), num(r.four_pi_a), num(r.g), num(r.gap)]);
    }
    write_file(&lab.out, "scattering.csv", &table.to_csv())?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaritySummary {
    #[serde(rename = "N")]
    pub particles: usize,
    pub beta: f64,
    pub lambda: f64,
    pub trajectories: usize,
    #[serde(rename = "timeStep")]
    pub time_step: f64,
    pub horizon: f64,
    pub seed: u64,
    /// TV between the first particle's histogram and `ρ^(1)_N` at each
    /// recorded time.
    pub tv: Vec<f64>,
    #[serde(rename = "maxTV")]
    pub max_tv: f64,
}

pub struct Simulation {
    pub ensemble: PathEnsemble,
    pub summary: StationaritySummary,
}

/// Nelson dynamics of the selected N-body ground state started from
/// `ρ_N`.
pub fn simulate_nbody(lab: &Lab, sel: Selection) -> Result<Simulation> {
    let (n, beta, lambda) = sel.resolve(lab);
    lab.install(|| {
        let (state, _) = lab.nbody_state(n, beta, lambda)?;
        let params = lab.config.sde_params(lab.config.sde.horizon)?;
        let drift = nbody_drift(&state)?;
        let init = sample_density(&state.density(), params.trajectories, params.seed)?;
        let ensemble = simulate(&drift, &init, &params)?;
        let one = marginal_density(&state, 1)?;
        let grid = *state.grid();
        let tv = ensemble
            .times()
            .iter()
            .map(|&t| Ok(tv_density(&empirical_density(&ensemble, 0, (t, t), &grid)?, &one)?))
            .collect::<Result<Vec<f64>>>()?;
        let summary = StationaritySummary {
            particles: n,
            beta,
            lambda,
            trajectories: params.trajectories,
            time_step: params.time_step,
            horizon: params.horizon,
            seed: params.seed,
            max_tv: tv.iter().copied().fold(0.0, f64::max),
            tv,
        };

        let mut header = vec!["trajectory".to_string(), "step".into(), "time".into()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        let mut paths = Table::new(header);
        let steps = ensemble.recorded_steps().to_vec();
        let times = ensemble.times();
        for j in 0..ensemble.trajectories().min(lab.config.sde.export_trajectories) {
            for (r, (&step, &t)) in steps.iter().zip(&times).enumerate() {
                let mut row = vec![j.to_string(), step.to_string(), num(t)];
                row.extend(ensemble.state(j, r).iter().map(|x| num(*x)));
                paths.push(row);
            }
        }
        write_file(&lab.out, "ensemble.csv", &paths.to_csv())?;
        let mut stat = Table::new(["step", "time", "tv"]);
        for ((&step, &t), tv) in steps.iter().zip(&times).zip(&summary.tv) {
            stat.push(vec![step.to_string(), num(t), num(*tv)]);
        }
        write_outputs(lab, "stationarity", Some(&stat), Some(to_json(&summary)))?;
        Ok(Simulation { ensemble, summary })
    })
}

/// One chaos report at `t`.
pub fn chaos(lab: &Lab, sel: Selection, t: f64) -> Result<ChaosReport> {
    let (n, beta, lambda) = sel.resolve(lab);
    lab.install(|| {
        let report = cell_report(lab, n, beta, lambda, t, None)?;
        write_file(&lab.out, "chaos-report.json", &to_json(&report))?;
        Ok(report)
    })
}

fn cell_report(lab: &Lab, n: usize, beta: f64, lambda: f64, t: f64, nls: Option<&NlsSolution>) -> Result<ChaosReport> {
    let (state, _) = lab.nbody_state(n, beta, lambda)?;
    let owned;
    let nls = match nls {
        Some(s) => s,
        None => {
            owned = lab.mean_field(beta, lambda)?.0;
            &owned
        }
    };
    let sde = lab.config.sde_params(t)?;
    Ok(chaos_report(&state, nls, t, &sde)?)
}

/// Cells in output order: β outermost, then λ, then N.
pub fn sweep_cells(lab: &Lab) -> Vec<(usize, f64, f64)> {
    let s = &lab.config.sweep;
    let mut cells = Vec::new();
    for &beta in &s.beta {
        for &lambda in &s.lambda {
            for &n in &s.particles {
                cells.push((n, beta, lambda));
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    #[serde(flatten)]
    pub report: ChaosReport,
    pub lambda: f64,
    /// `t² · driftMismatch · 1.25`.
    #[serde(rename = "kacBound")]
    pub kac_bound: f64,
    #[serde(rename = "kacBoundHolds")]
    pub kac_bound_holds: bool,
    /// Whether driftMismatch, normalizedEntropy, the one-particle TV and
    /// kacMetric are each no larger than at the previous N of the same
    /// `(β, λ)`; true for the first N.
    #[serde(rename = "monotoneTrend")]
    pub monotone_trend: bool,
}

/// A chaos report for every cell of the sweep lists at `t = horizon`.
pub fn sweep(lab: &Lab) -> Result<Vec<SweepCell>> {
    let t = lab.config.sde.horizon;
    let cells = sweep_cells(lab);
    let cells = lab.install(|| -> Result<Vec<SweepCell>> {
        let mut limits = Vec::new();
        for &beta in &lab.config.sweep.beta {
            for &lambda in &lab.config.sweep.lambda {
                limits.push(((beta, lambda), lab.mean_field(beta, lambda)?.0));
            }
        }
        let reports = cells
            .par_iter()
            .map(|&(n, beta, lambda)| {
                let nls = &limits.iter().find(|(k, _)| *k == (beta, lambda)).expect("limit for every cell").1;
                cell_report(lab, n, beta, lambda, t, Some(nls))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out: Vec<SweepCell> = Vec::with_capacity(reports.len());
        for (&(_, _, lambda), report) in cells.iter().zip(reports) {
            let kac_bound = t * t * report.drift_mismatch * 1.25;
            let monotone_trend = match out.last() {
                Some(prev) if prev.report.beta == report.beta && prev.lambda == lambda => trend_holds(&prev.report, &report),
                _ => true,
            };
            out.push(SweepCell {
                kac_bound_holds: report.kac_metric <= kac_bound,
                kac_bound,
                monotone_trend,
                lambda,
                report,
            });
        }
        Ok(out)
    })?;
    let mut table = Table::new([
        "N",
        "beta",
        "lambda",
        "t",
        "driftMismatch",
        "normalizedEntropy",
        "kMarginalEntropy1",
        "kMarginalTV1",
        "fisherNormalized",
        "kacMetric",
        "identityGap",
        "kacBound",
        "kacBoundHolds",
        "monotoneTrend",
    ]);
    for c in &cells {
        let r = &c.report;
        table.push(vec![
            r.particles.to_string(),
            num(r.beta),
            num(c.lambda),
            num(r.t),
            num(r.drift_mismatch),
            num(r.normalized_entropy),
            num(r.k_marginal_entropy[0]),
            num(r.k_marginal_tv[0]),
            num(r.fisher_normalized),
            num(r.kac_metric),
            num(r.identity_gap),
            num(c.kac_bound),
            c.kac_bound_holds.to_string(),
            c.monotone_trend.to_string(),
        ]);
    }
    write_file(&lab.out, "sweep.csv", &table.to_csv())?;
    write_file(&lab.out, "sweep.json", &to_json(&cells))?;
    Ok(cells)
}

fn trend_holds(prev: &ChaosReport, next: &ChaosReport) -> bool {
    next.drift_mismatch <= prev.drift_mismatch
        && next.normalized_entropy <= prev.normalized_entropy
        && next.k_marginal_tv[0] <= prev.k_marginal_tv[0]
        && next.kac_metric <= prev.kac_metric
}
