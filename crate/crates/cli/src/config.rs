//! INI-style run configuration: five flat TOML sections, every key optional,
//! unknown keys rejected.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

use topoflock::domain::{DEFAULT_LENS_HALF_ANGLE, DEFAULT_VACUUM_FLOOR, MIN_QUAD_POINTS};
use topoflock::evolution::{InitialData, SimConfig};
use topoflock::kernel::KernelParams;

const SECTIONS: [&str; 5] = ["grid", "kernel", "domain", "evolution", "output"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("bad override {0:?}: expected section.key=value")]
    Override(String),

    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    kernel: RawKernel,
    #[serde(default)]
    domain: RawDomain,
    #[serde(default)]
    evolution: RawEvolution,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dim: Option<usize>,
    points: Option<usize>,
    period: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    alpha: Option<f64>,
    tau: Option<f64>,
    r0: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    lens_half_angle: Option<f64>,
    quad_points: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvolution {
    epsilon: Option<f64>,
    cfl: Option<f64>,
    t_final: Option<f64>,
    dt: Option<f64>,
    rho_floor: Option<f64>,
    rho_amp: Option<f64>,
    rho_amp2: Option<f64>,
    u_amp: Option<f64>,
    u_amp2: Option<f64>,
    study_epsilons: Option<Vec<f64>>,
    study_horizon: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    output_interval: Option<f64>,
    snapshot_every: Option<usize>,
    m_list: Option<Vec<u32>>,
    e_residual: Option<bool>,
}

/// Output cadence and diagnostics selection.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    /// Snapshot every k-th output sample; `0` disables snapshots.
    pub snapshot_every: usize,
    pub m_list: Vec<u32>,
    pub e_residual: bool,
}

/// Fully resolved configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub output: OutputConfig,
    pub study_epsilons: Vec<f64>,
    pub study_horizon: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::resolve(RawConfig::default()).expect("defaults are valid")
    }
}

impl RunConfig {
    /// Parses `text`, applies `overrides` (`section.key=value`, later wins)
    /// and resolves defaults.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
        if overrides.is_empty() {
            return Self::resolve(raw);
        }
        let mut table: Table = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let raw = RawConfig::deserialize(Value::Table(table)).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Self::resolve(raw)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, overrides)
    }

    fn resolve(raw: RawConfig) -> Result<Self, ConfigError> {
        let invalid = |m: String| ConfigError::Invalid(m);
        let dim = raw.grid.dim.unwrap_or(1);
        if !(1..=2).contains(&dim) {
            return Err(invalid(format!("grid.dim must be 1 or 2, got {dim}")));
        }
        let ev = &raw.evolution;
        let out = &raw.output;
        let sim = SimConfig {
            dim,
            points_per_axis: raw.grid.points.unwrap_or(256),
            period: raw.grid.period.unwrap_or(2.0 * PI),
            kernel: KernelParams {
                alpha: raw.kernel.alpha.unwrap_or(1.0),
                tau: raw.kernel.tau.unwrap_or(dim as f64),
                r0: raw.kernel.r0.unwrap_or(PI / 4.0),
                bump: Default::default(),
            },
            lens_half_angle: raw.domain.lens_half_angle.unwrap_or(DEFAULT_LENS_HALF_ANGLE),
            quad_points: raw.domain.quad_points.unwrap_or(MIN_QUAD_POINTS),
            epsilon: ev.epsilon.unwrap_or(0.0),
            cfl: ev.cfl.unwrap_or(0.5),
            t_final: ev.t_final.unwrap_or(1.0),
            dt: ev.dt,
            output_interval: out.output_interval.unwrap_or(0.1),
            rho_floor: ev.rho_floor.unwrap_or(DEFAULT_VACUUM_FLOOR),
            initial: InitialData {
                rho_amp: ev.rho_amp.unwrap_or(0.5),
                rho_amp2: ev.rho_amp2.unwrap_or(0.0),
                u_amp: ev.u_amp.unwrap_or(0.2),
                u_amp2: ev.u_amp2.unwrap_or(0.0),
            },
        };
        sim.validate().map_err(|e| invalid(e.to_string()))?;
        if !(sim.lens_half_angle > 0.0 && sim.lens_half_angle < PI / 2.0) {
            return Err(invalid(format!(
                "domain.lens_half_angle must lie in (0, pi/2), got {}",
                sim.lens_half_angle
            )));
        }
        if dim == 1 && (sim.initial.rho_amp2 != 0.0 || sim.initial.u_amp2 != 0.0) {
            return Err(invalid("evolution.rho_amp2 and evolution.u_amp2 need grid.dim = 2".into()));
        }
        let e_residual = out.e_residual.unwrap_or(dim == 1);
        if e_residual && dim != 1 {
            return Err(invalid("output.e_residual is only available for grid.dim = 1".into()));
        }
        let study_epsilons = ev.study_epsilons.clone().unwrap_or_else(|| vec![1e-2, 5e-3, 2.5e-3, 0.0]);
        if let Some(e) = study_epsilons.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
            return Err(invalid(format!("evolution.study_epsilons must be finite and >= 0, got {e}")));
        }
        let study_horizon = ev.study_horizon.unwrap_or(0.5);
        if !(study_horizon > 0.0 && study_horizon.is_finite()) {
            return Err(invalid(format!("evolution.study_horizon must be positive, got {study_horizon}")));
        }
        Ok(RunConfig {
            sim,
            output: OutputConfig {
                snapshot_every: out.snapshot_every.unwrap_or(0),
                m_list: out.m_list.clone().unwrap_or_else(|| vec![1, 2]),
                e_residual,
            },
            study_epsilons,
            study_horizon,
        })
    }

    /// Every resolved key, in a form that parses back to `self`.
    pub fn echo(&self) -> String {
        let s = &self.sim;
        let raw = RawConfig {
            grid: RawGrid {
                dim: Some(s.dim),
                points: Some(s.points_per_axis),
                period: Some(s.period),
            },
            kernel: RawKernel {
                alpha: Some(s.kernel.alpha),
                tau: Some(s.kernel.tau),
                r0: Some(s.kernel.r0),
            },
            domain: RawDomain {
                lens_half_angle: Some(s.lens_half_angle),
                quad_points: Some(s.quad_points),
            },
            evolution: RawEvolution {
                epsilon: Some(s.epsilon),
                cfl: Some(s.cfl),
                t_final: Some(s.t_final),
                dt: s.dt,
                rho_floor: Some(s.rho_floor),
                rho_amp: Some(s.initial.rho_amp),
                rho_amp2: Some(s.initial.rho_amp2),
                u_amp: Some(s.initial.u_amp),
                u_amp2: Some(s.initial.u_amp2),
                study_epsilons: Some(self.study_epsilons.clone()),
                study_horizon: Some(self.study_horizon),
            },
            output: RawOutput {
                output_interval: Some(s.output_interval),
                snapshot_every: Some(self.output.snapshot_every),
                m_list: Some(self.output.m_list.clone()),
                e_residual: Some(self.output.e_residual),
            },
        };
        toml::to_string(&raw).expect("configuration serialises")
    }
}

fn parse_error(text: &str, e: &toml::de::Error) -> ConfigError {
    let line = e
        .span()
        .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(1);
    ConfigError::Parse {
        line,
        message: e.message().to_string(),
    }
}

fn apply_override(table: &mut Table, item: &str) -> Result<(), ConfigError> {
    let bad = || ConfigError::Override(item.to_string());
    let (path, value) = item.split_once('=').ok_or_else(bad)?;
    let (section, key) = path.trim().split_once('.').ok_or_else(bad)?;
    if !SECTIONS.contains(&section) {
        return Err(ConfigError::Invalid(format!("unknown section `{section}` in override {item:?}")));
    }
    let value = value.trim();
    let parsed = toml::from_str::<Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    let Value::Table(sec) = entry else {
        return Err(ConfigError::Invalid(format!("`{section}` is not a section")));
    };
    sec.insert(key.to_string(), parsed);
    Ok(())
}
