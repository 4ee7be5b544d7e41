//! Sectioned `key = value` run configuration layered over the shipped
//! defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use bec_core::{FlowParams, FlowScheme, Grid, PairPotential, PairProfile, SdeParams, TrapPotential};
use ini::Ini;

use crate::error::{CliError, Result};

pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.ini");

#[derive(Debug, Clone, PartialEq)]
pub enum TrapKind {
    Harmonic,
    Quartic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NlsCoupling {
    Limit,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialConfig {
    pub trap: TrapKind,
    pub trap_quadratic: f64,
    pub trap_quartic: f64,
    pub pair: String,
    pub pair_height: f64,
    pub pair_radius: f64,
    pub nls_coupling: NlsCoupling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub particles: Vec<usize>,
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub scattering_particles: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdeConfig {
    pub time_step: f64,
    pub horizon: f64,
    pub trajectories: usize,
    pub seed: u64,
    pub record_every: Option<usize>,
    pub export_trajectories: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub flow: FlowParams,
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub csv: bool,
    pub json: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub potentials: PotentialConfig,
    pub sweep: SweepConfig,
    pub sde: SdeConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

struct Layered {
    ini: Ini,
}

impl Layered {
    fn raw(&self, section: &str, key: &str) -> Result<&str> {
        self.ini
            .get_from(Some(section), key)
            .map(str::trim)
            .ok_or_else(|| CliError::config(format!("missing [{section}] {key}")))
    }

    fn parse<T: FromStr>(&self, section: &str, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(section, key)?;
        raw.parse()
            .map_err(|e| CliError::config(format!("[{section}] {key} = {raw:?}: {e}")))
    }

    fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(section, key)?;
        raw.split(',')
            .map(|item| {
                let item = item.trim();
                item.parse()
                    .map_err(|e| CliError::config(format!("[{section}] {key}: entry {item:?}: {e}")))
            })
            .collect()
    }

    fn auto<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if self.raw(section, key)?.eq_ignore_ascii_case("auto") {
            Ok(None)
        } else {
            self.parse(section, key).map(Some)
        }
    }
}

fn load_ini(text: &str, origin: &str) -> Result<Ini> {
    Ini::load_from_str(text).map_err(|e| CliError::config(format!("{origin}: {e}")))
}

impl RunConfig {
    /// The shipped defaults.
    pub fn default_config() -> Self {
        Self::from_str_layered("").expect("shipped default config is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str_layered(&text)
            .map_err(|e| CliError::config(format!("{}: {}", path.display(), e.to_string().trim_start_matches("config error: "))))
    }

    /// Parses `text` on top of the defaults. Unknown sections or keys are
    /// rejected so that typos do not silently fall back.
    pub fn from_str_layered(text: &str) -> Result<Self> {
        let mut base = load_ini(DEFAULT_CONFIG, "default config")?;
        let user = load_ini(text, "config")?;
        for (section, props) in user.iter() {
            let Some(name) = section else {
                if let Some((key, _)) = props.iter().next() {
                    return Err(CliError::config(format!("key {key:?} outside any section")));
                }
                continue;
            };
            if base.section(Some(name)).is_none() {
                return Err(CliError::config(format!("unknown section [{name}]")));
            }
            for (key, value) in props.iter() {
                if base.get_from(Some(name), key).is_none() {
                    return Err(CliError::config(format!("unknown key {key:?} in [{name}]")));
                }
                base.with_section(Some(name)).set(key, value);
            }
        }
        Self::from_layers(Layered { ini: base })
    }

    fn from_layers(c: Layered) -> Result<Self> {
        let trap = match c.raw("potentials", "trap")? {
            "harmonic" => TrapKind::Harmonic,
            "quartic" => TrapKind::Quartic,
            other => return Err(CliError::config(format!("unknown trap {other:?}"))),
        };
        let nls_coupling = match c.raw("potentials", "nls_coupling")? {
            "limit" => NlsCoupling::Limit,
            _ => NlsCoupling::Value(c.parse("potentials", "nls_coupling")?),
        };
        let scheme = match c.raw("solver", "scheme")? {
            "locg" => FlowScheme::LocallyOptimal,
            "fixed" => FlowScheme::FixedStep,
            other => return Err(CliError::config(format!("unknown solver scheme {other:?}"))),
        };
        let formats: Vec<String> = c.list("output", "formats")?;
        for f in &formats {
            if f != "csv" && f != "json" {
                return Err(CliError::config(format!("unknown output format {f:?}")));
            }
        }
        let cfg = Self {
            model: ModelConfig {
                dim: c.parse("model", "dim")?,
                half_width: c.parse("model", "half_width")?,
                points: c.parse("model", "points")?,
            },
            potentials: PotentialConfig {
                trap,
                trap_quadratic: c.parse("potentials", "trap_quadratic")?,
                trap_quartic: c.parse("potentials", "trap_quartic")?,
                pair: c.raw("potentials", "pair")?.to_string(),
                pair_height: c.parse("potentials", "pair_height")?,
                pair_radius: c.parse("potentials", "pair_radius")?,
                nls_coupling,
            },
            sweep: SweepConfig {
                particles: c.list("sweep", "particles")?,
                beta: c.list("sweep", "beta")?,
                lambda: c.list("sweep", "lambda")?,
                scattering_particles: c.list("sweep", "scattering_particles")?,
            },
            sde: SdeConfig {
                time_step: c.parse("sde", "time_step")?,
                horizon: c.parse("sde", "horizon")?,
                trajectories: c.parse("sde", "trajectories")?,
                seed: c.parse("sde", "seed")?,
                record_every: c.auto("sde", "record_every")?,
                export_trajectories: c.parse("sde", "export_trajectories")?,
            },
            solver: SolverConfig {
                flow: FlowParams {
                    time_step: c.auto("solver", "tau")?,
                    max_iterations: c.parse("solver", "max_iterations")?,
                    energy_tolerance: c.parse("solver", "energy_tolerance")?,
                    residual_tolerance: c.parse("solver", "residual_tolerance")?,
                    scheme,
                },
                budget: c.parse("solver", "budget")?,
            },
            output: OutputConfig {
                directory: PathBuf::from(c.raw("output", "directory")?),
                csv: formats.iter().any(|f| f == "csv"),
                json: formats.iter().any(|f| f == "json"),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.model.points < 5 || self.model.points % 2 == 0 {
            return bad(format!("[model] points must be odd and at least 5, got {}", self.model.points));
        }
        if self.sweep.particles.is_empty() || self.sweep.particles.iter().any(|&n| n < 2) {
            return bad("[sweep] particles must list numbers ≥ 2".into());
        }
        if self.sweep.particles.windows(2).any(|w| w[1] <= w[0]) {
            return bad("[sweep] particles must be strictly increasing".into());
        }
        if self.sweep.beta.is_empty() || self.sweep.beta.iter().any(|b| !(0.0..1.0).contains(b)) {
            return bad("[sweep] beta values must lie in [0, 1)".into());
        }
        if self.sweep.lambda.is_empty() || self.sweep.lambda.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return bad("[sweep] lambda values must be finite and nonnegative".into());
        }
        self.grid()?;
        self.trap()?;
        self.pair(1.0)?;
        self.solver.flow.validate()?;
        self.sde_params(self.sde.horizon)?;
        if self.solver.budget == 0 {
            return bad("[solver] budget must be positive".into());
        }
        if let NlsCoupling::Value(g) = self.potentials.nls_coupling {
            if !(g >= 0.0 && g.is_finite()) {
                return bad(format!("[potentials] nls_coupling must be nonnegative, got {g}"));
            }
        }
        Ok(())
    }

    /// The model grid; `dim` only affects the one-particle solver.
    pub fn grid(&self) -> Result<Grid> {
        Ok(Grid::new(self.model.dim, self.model.half_width, self.model.points)?)
    }

    /// The one-dimensional grid every N-body problem lives on.
    pub fn line(&self) -> Result<Grid> {
        Ok(Grid::line(self.model.half_width, self.model.points)?)
    }

    pub fn trap(&self) -> Result<TrapPotential> {
        let p = &self.potentials;
        Ok(match p.trap {
            TrapKind::Harmonic => TrapPotential::harmonic(p.trap_quadratic)?,
            TrapKind::Quartic => TrapPotential::quartic(p.trap_quadratic, p.trap_quartic)?,
        })
    }

    /// `λ v₀` in one dimension.
    pub fn pair(&self, lambda: f64) -> Result<PairPotential> {
        self.pair_in(1, lambda)
    }

    pub fn pair_in(&self, dim: usize, lambda: f64) -> Result<PairPotential> {
        let p = &self.potentials;
        let height = lambda * p.pair_height;
        let profile = match p.pair.as_str() {
            "zero" => return Ok(PairPotential::zero(dim)),
            "indicator" => PairProfile::Indicator { height },
            "parabolic" => PairProfile::Parabolic { height },
            "quartic_bump" => PairProfile::QuarticBump { height },
            "bump" => PairProfile::Bump { height },
            other => return Err(CliError::config(format!("unknown pair profile {other:?}"))),
        };
        Ok(PairPotential::new(profile, p.pair_radius, dim)?)
    }

    pub fn sde_params(&self, horizon: f64) -> Result<SdeParams> {
        let s = &self.sde;
        let mut params = SdeParams::new(s.time_step, horizon, s.trajectories, s.seed)?;
        params.record_every = s.record_every;
        params.validate()?;
        Ok(params)
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::default_config()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let cfg = RunConfig::default_config();
        assert_eq!(cfg.sweep.particles, vec![2, 3, 4]);
        assert_eq!(cfg.sweep.beta, vec![0.0, 0.5]);
        assert_eq!(cfg.model.points, 49);
        assert_eq!(cfg.sde.record_every, None);
        assert_eq!(cfg.solver.flow.time_step, None);
        assert!(cfg.output.csv && cfg.output.json);
    }

    #[test]
    fn user_values_override_defaults() {
        let cfg = RunConfig::from_str_layered("[model]\npoints = 33\n[sweep]\nparticles = 2,3\n").unwrap();
        assert_eq!(cfg.model.points, 33);
        assert_eq!(cfg.sweep.particles, vec![2, 3]);
        assert_eq!(cfg.model.half_width, 5.0);
    }

    #[test]
    fn typos_and_bad_values_are_rejected() {
        for text in [
            "[model]\npionts = 33\n",
            "[modle]\npoints = 33\n",
            "[model]\npoints = 32\n",
            "[sweep]\nbeta = 1.0\n",
            "[sweep]\nparticles = 3, 2\n",
            "[potentials]\npair = spike\n",
            "[solver]\ntau = -1\n",
            "[sde]\ntrajectories = lots\n",
            "[output]\nformats = xml\n",
        ] {
            let err = RunConfig::from_str_layered(text).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{text}: {err}");
        }
    }
}
