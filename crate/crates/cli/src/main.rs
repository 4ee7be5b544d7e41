use std::path::PathBuf;
use std::process::ExitCode;

use bec_lab::commands::{self, Selection};
use bec_lab::{output, verify, CliError, Lab, LabOptions, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bec-lab", version, about = "Mean-field condensate ground states, Nelson diffusions and chaos diagnostics")]
struct Cli {
    /// Run configuration (INI); missing keys take the shipped defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides [output] directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for sampling and Brownian increments; overrides [sde] seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads. Affects wall time only.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Ground-state cache directory (default: $BECLAB_CACHE, else OUT/cache).
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Neither read nor write the ground-state cache.
    #[arg(long, global = true)]
    no_cache: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Cell {
    /// Particle number; defaults to the first [sweep] particles entry.
    #[arg(long)]
    particles: Option<usize>,
    /// Scaling exponent; defaults to the first [sweep] beta entry.
    #[arg(long)]
    beta: Option<f64>,
    /// Interaction strength factor; defaults to the first [sweep] lambda entry.
    #[arg(long)]
    lambda: Option<f64>,
}

impl From<Cell> for Selection {
    fn from(c: Cell) -> Self {
        Self {
            particles: c.particles,
            beta: c.beta,
            lambda: c.lambda,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// One-particle ground state and energy breakdown.
    SolveNls,
    /// N-body ground states (every sweep cell unless one is selected).
    SolveNbody(Cell),
    /// Scattering lengths of the scaled pair potential.
    Scattering,
    /// Nelson dynamics of an N-body ground state with a stationarity summary.
    Simulate(Cell),
    /// All chaos diagnostics for one (N, β, t).
    ChaosReport {
        #[command(flatten)]
        cell: Cell,
        /// Time; defaults to [sde] horizon.
        #[arg(long)]
        t: Option<f64>,
    },
    /// A chaos report for every (N, β, λ) with trend flags.
    Sweep,
    /// The full property suite; exits 3 on any violation.
    Verify,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default_config(),
    };
    let lab = Lab::new(
        config,
        LabOptions {
            out: cli.out,
            seed: cli.seed,
            workers: cli.workers,
            cache: cli.cache,
            no_cache: cli.no_cache,
        },
    )?;
    match cli.command {
        Command::SolveNls => print!("{}", commands::render_nls(&commands::solve_nls(&lab)?)),
        Command::SolveNbody(cell) => print!("{}", commands::render_nbody(&commands::solve_nbody(&lab, cell.into())?)),
        Command::Scattering => {
            println!("{:>6} {:>6} {:>22} {:>22} {:>22} {:>12}", "beta", "N", "a_N", "4πa_N", "g", "gap");
            for (beta, r) in commands::scattering(&lab)? {
                println!(
                    "{beta:>6} {:>6} {:>22.15e} {:>22.15e} {:>22.15e} {:>12.4e}",
                    r.n, r.a, r.four_pi_a, r.g, r.gap
                );
            }
        }
        Command::Simulate(cell) => {
            let sim = commands::simulate_nbody(&lab, cell.into())?;
            let s = &sim.summary;
            println!(
                "N={} beta={} lambda={}: {} trajectories, {} records, max TV(empirical, ρ^(1)) = {:.5}",
                s.particles,
                s.beta,
                s.lambda,
                s.trajectories,
                sim.ensemble.records(),
                s.max_tv
            );
        }
        Command::ChaosReport { cell, t } => {
            let t = t.unwrap_or(lab.config.sde.horizon);
            let report = commands::chaos(&lab, cell.into(), t)?;
            print!("{}", String::from_utf8_lossy(&output::to_json(&report)));
        }
        Command::Sweep => {
            let cells = commands::sweep(&lab)?;
            println!("{:>3} {:>6} {:>6} {:>14} {:>14} {:>14} {:>10} {:>9}", "N", "beta", "lambda", "driftMismatch", "kMarginalTV1", "kacMetric", "kacBound", "trend");
            for c in &cells {
                let r = &c.report;
                println!(
                    "{:>3} {:>6} {:>6} {:>14.6e} {:>14.6e} {:>14.6e} {:>10} {:>9}",
                    r.particles, r.beta, c.lambda, r.drift_mismatch, r.k_marginal_tv[0], r.kac_metric, c.kac_bound_holds, c.monotone_trend
                );
            }
        }
        Command::Verify => {
            let report = verify::run(&lab)?;
            print!("{}", report.render());
            if report.failed() > 0 {
                return Err(CliError::Property {
                    failed: report.failed(),
                    total: report.properties.len(),
                });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let err = CliError::config(e.kind().to_string());
            eprintln!("{}", serde_json::to_string(&err.record()).expect("error records serialize"));
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.record()).expect("error records serialize"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
