//! Orchestration behind the `bec-lab` binary: configuration, the
//! ground-state cache, the subcommands and their serialized outputs.

pub mod cache;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod verify;

use std::path::PathBuf;

use bec_core::{
    mean_field_limit, mean_field_limit_from, minimize_nls, nls_solution_from, NBodyProblem, NBodyState, NlsSolution,
};

pub use cache::{CacheError, CacheKey, GroundStateCache};
pub use config::RunConfig;
pub use error::{CliError, ErrorRecord, Result};

/// Environment variable naming the cache directory.
pub const CACHE_ENV: &str = "BECLAB_CACHE";

/// Command-line overrides applied on top of a [`RunConfig`].
#[derive(Debug, Clone, Default)]
pub struct LabOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub cache: Option<PathBuf>,
    pub no_cache: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Disabled,
    Hit,
    Miss,
    /// A damaged entry was deleted and the state recomputed.
    Repaired,
}

impl CacheStatus {
    pub fn label(self) -> &'static str {
        match self {
            Self::Disabled => "off",
            Self::Hit => "hit",
            Self::Miss => "miss",
            Self::Repaired => "repaired",
        }
    }
}

pub struct Lab {
    pub config: RunConfig,
    pub out: PathBuf,
    pub cache: Option<GroundStateCache>,
    pool: rayon::ThreadPool,
}

impl Lab {
    pub fn new(mut config: RunConfig, opts: LabOptions) -> Result<Self> {
        if let Some(seed) = opts.seed {
            config.sde.seed = seed;
        }
        let out = opts.out.unwrap_or_else(|| config.output.directory.clone());
        let cache = if opts.no_cache {
            None
        } else {
            let dir = opts
                .cache
                .or_else(|| std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
                .unwrap_or_else(|| out.join("cache"));
            Some(GroundStateCache::new(dir))
        };
        let workers = match opts.workers {
            Some(0) => return Err(CliError::config("--workers must be positive")),
            Some(k) => k,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::config(format!("cannot start {workers} workers: {e}")))?;
        Ok(Self {
            config,
            out,
            cache,
            pool,
        })
    }

    /// Runs `f` on the lab's worker pool.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    fn potentials_key(&self, pair_dim: usize, lambda: f64) -> Result<String> {
        Ok(format!("{:?}|{:?}", self.config.trap()?, self.config.pair_in(pair_dim, lambda)?))
    }

    fn solver_key(&self, kind: &str) -> String {
        format!("{kind}|{:?}|budget={}", self.config.solver.flow, self.config.solver.budget)
    }

    /// Looks `key` up, or computes and stores it. `rebuild` turns a stored
    /// field back into the full record; `solve` must produce the same
    /// record a rebuild of its field would.
    fn cached<T>(
        &self,
        key: &CacheKey,
        field: impl Fn(&T) -> &bec_core::GridFunction,
        rebuild: impl FnOnce(bec_core::GridFunction) -> Result<T>,
        solve: impl FnOnce() -> Result<T>,
    ) -> Result<(T, CacheStatus)> {
        let Some(cache) = &self.cache else {
            return Ok((solve()?, CacheStatus::Disabled));
        };
        let status = match cache.load(key) {
            Ok(Some(f)) => return Ok((rebuild(f)?, CacheStatus::Hit)),
            Ok(None) => CacheStatus::Miss,
            Err(e @ CacheError::Corrupt { .. }) => {
                eprintln!("warning: {e}; recomputing");
                CacheStatus::Repaired
            }
            Err(e) => return Err(e.into()),
        };
        let value = solve()?;
        cache.store(key, field(&value))?;
        Ok((value, status))
    }

    /// N-body ground state for `λv₀`.
    pub fn nbody_state(&self, particles: usize, beta: f64, lambda: f64) -> Result<(NBodyState, CacheStatus)> {
        let cfg = &self.config;
        let grid = cfg.line()?;
        let problem =
            NBodyProblem::new(&cfg.trap()?, &cfg.pair(lambda)?, particles, beta, grid)?.with_budget(cfg.solver.budget);
        let key = CacheKey {
            dim: 1,
            particles: particles as u32,
            points: grid.points() as u32,
            half_width: grid.half_width(),
            beta,
            potentials: self.potentials_key(1, lambda)?,
            solver: self.solver_key("nbody"),
        };
        let flow = cfg.solver.flow;
        self.cached(
            &key,
            |s: &NBodyState| &s.psi,
            |psi| Ok(problem.state_from(psi)?),
            || Ok(problem.solve(&flow)?),
        )
    }

    /// The one-particle limit of the `(β, λv₀)` family on the N-body line.
    pub fn mean_field(&self, beta: f64, lambda: f64) -> Result<(NlsSolution, CacheStatus)> {
        let cfg = &self.config;
        let grid = cfg.line()?;
        self.mean_field_on(grid, beta, lambda)
    }

    fn mean_field_on(&self, grid: bec_core::Grid, beta: f64, lambda: f64) -> Result<(NlsSolution, CacheStatus)> {
        let cfg = &self.config;
        let (trap, v0) = (cfg.trap()?, cfg.pair_in(grid.dim(), lambda)?);
        let key = CacheKey {
            dim: grid.dim() as u32,
            particles: 1,
            points: grid.points() as u32,
            half_width: grid.half_width(),
            beta,
            potentials: self.potentials_key(grid.dim(), lambda)?,
            solver: self.solver_key("mean-field-limit"),
        };
        self.cached(
            &key,
            |s: &NlsSolution| &s.phi,
            |phi| Ok(mean_field_limit_from(phi, &trap, &v0, beta)?),
            || Ok(mean_field_limit(&trap, &v0, beta, grid, &cfg.solver.flow)?),
        )
    }

    /// Minimizer of the local functional at coupling `g` on the model grid.
    pub fn nls(&self, g: f64) -> Result<(NlsSolution, CacheStatus)> {
        let cfg = &self.config;
        let grid = cfg.grid()?;
        let trap = cfg.trap()?;
        let key = CacheKey {
            dim: grid.dim() as u32,
            particles: 1,
            points: grid.points() as u32,
            half_width: grid.half_width(),
            beta: 0.0,
            potentials: format!("{trap:?}|local g={g:?}"),
            solver: self.solver_key("nls"),
        };
        self.cached(
            &key,
            |s: &NlsSolution| &s.phi,
            |phi| Ok(nls_solution_from(phi, &trap, g)?),
            || Ok(minimize_nls(&trap, g, grid, &cfg.solver.flow)?),
        )
    }

    /// Mean-field limit on the model grid (any dimension).
    pub fn nls_limit(&self, beta: f64) -> Result<(NlsSolution, CacheStatus)> {
        self.mean_field_on(self.config.grid()?, beta, 1.0)
    }
}
