//! JSON experiment configuration for the `minimize`, `stability` and
//! `theorem-check` subcommands.
//!
//! Every document carries `"version": 1`; unknown fields are rejected and
//! numeric ranges are validated before anything runs. A minimal document:
//!
//! ```json
//! {
//!   "version": 1,
//!   "grid": {"n": 2, "sizes": [32, 32], "period": [6.283185307179586, 6.283185307179586]},
//!   "model": {"type": "shallow", "C": 2.0},
//!   "target_m": 2,
//!   "init": {"type": "random_perturbation", "seed": 42, "amplitude": 0.5}
//! }
//! ```

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::density::DensityModel;
use crate::domain::TorusGrid;
use crate::error::{Error, Result};
use crate::solver::SolveOptions;
use crate::sphere::SphereMap;
use crate::stability::{ProbeOptions, TheoremSetup};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub sizes: Vec<usize>,
    pub period: Vec<f64>,
}

impl GridSpec {
    pub fn build(&self) -> Result<TorusGrid> {
        if self.sizes.len() != self.n {
            return Err(Error::invalid("grid.sizes", format!("needs {} entries, got {}", self.n, self.sizes.len())));
        }
        if self.period.len() != self.n {
            return Err(Error::invalid("grid.period", format!("needs {} entries, got {}", self.n, self.period.len())));
        }
        TorusGrid::new(&self.sizes, &self.period)
    }
}

fn default_amplitude() -> f64 {
    0.5
}

/// Initial map for a descent run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// Constant map; defaults to the last ambient basis vector.
    Constant {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        point: Option<Vec<f64>>,
    },
    /// Geodesic wrap of the first domain axis onto the great circle in the
    /// first two ambient coordinates.
    Wrap,
    /// Smooth seeded perturbation of a random constant map.
    RandomPerturbation {
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    /// Map loaded from a CSV file of (cell, components) rows.
    Csv { path: PathBuf },
}

impl InitSpec {
    /// The same spec with its seed replaced (only random inits have one).
    pub fn with_seed(&self, seed: u64) -> InitSpec {
        match self {
            InitSpec::RandomPerturbation { amplitude, .. } => InitSpec::RandomPerturbation {
                seed,
                amplitude: *amplitude,
            },
            other => other.clone(),
        }
    }

    /// Builds the map into the unit sphere of ℝ^k.
    pub fn build(&self, grid: &TorusGrid, k: usize) -> Result<SphereMap> {
        match self {
            InitSpec::Constant { point } => {
                let p = match point {
                    Some(p) if p.len() != k => {
                        return Err(Error::invalid("init.point", format!("needs {k} components, got {}", p.len())))
                    }
                    Some(p) => p.clone(),
                    None => {
                        let mut p = vec![0.0; k];
                        p[k - 1] = 1.0;
                        p
                    }
                };
                SphereMap::constant(grid, &p)
            }
            InitSpec::Wrap => SphereMap::wrap(grid, k),
            InitSpec::RandomPerturbation { seed, amplitude } => SphereMap::random_perturbation(grid, k, *seed, *amplitude),
            InitSpec::Csv { path } => {
                let map = SphereMap::read_csv(grid, BufReader::new(File::open(path)?))?;
                if map.target_dim() + 1 != k {
                    return Err(Error::invalid(
                        "init.path",
                        format!("map has {} components, target_m needs {k}", map.target_dim() + 1),
                    ));
                }
                Ok(map)
            }
        }
    }
}

fn check_version(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::invalid("version", format!("must be {SCHEMA_VERSION}, got {version}")));
    }
    Ok(())
}

fn check_target(target_m: usize) -> Result<()> {
    if target_m < 1 {
        return Err(Error::invalid("target_m", "must be >= 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizeConfig {
    pub version: u32,
    pub grid: GridSpec,
    pub model: DensityModel,
    pub target_m: usize,
    pub init: InitSpec,
    #[serde(default)]
    pub options: SolveOptions,
}

impl MinimizeConfig {
    pub fn validate(&self) -> Result<()> {
        check_version(self.version)?;
        self.grid.build()?;
        self.model.validate()?;
        check_target(self.target_m)?;
        self.options.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub version: u32,
    pub grid: GridSpec,
    pub model: DensityModel,
    pub target_m: usize,
    pub init: InitSpec,
    /// Descend from the initial map before probing.
    #[serde(default)]
    pub minimize_first: bool,
    #[serde(default)]
    pub options: SolveOptions,
    #[serde(default)]
    pub probe: ProbeOptions,
}

impl StabilityConfig {
    pub fn validate(&self) -> Result<()> {
        check_version(self.version)?;
        self.grid.build()?;
        self.model.validate()?;
        check_target(self.target_m)?;
        self.options.validate()?;
        self.probe.validate()
    }
}

fn default_constant_threshold() -> f64 {
    1e-6
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremConfig {
    pub version: u32,
    pub grid: GridSpec,
    pub model: DensityModel,
    pub target_m: usize,
    pub init: InitSpec,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub options: SolveOptions,
    #[serde(default)]
    pub probe: ProbeOptions,
    #[serde(default = "default_constant_threshold")]
    pub constant_q_threshold: f64,
}

impl TheoremConfig {
    pub fn resolve(&self) -> Result<TheoremSetup> {
        check_version(self.version)?;
        let grid = self.grid.build()?;
        self.model.validate()?;
        if self.target_m < 2 {
            return Err(Error::invalid("target_m", "theorem checks need m >= 2"));
        }
        self.options.validate()?;
        self.probe.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "must not be empty"));
        }
        if !(self.constant_q_threshold.is_finite() && self.constant_q_threshold > 0.0) {
            return Err(Error::invalid("constant_q_threshold", "must be > 0"));
        }
        Ok(TheoremSetup {
            grid,
            model: self.model.clone(),
            target_m: self.target_m,
            init: self.init.clone(),
            seeds: self.seeds.clone(),
            options: self.options.clone(),
            probe: self.probe.clone(),
            constant_q_threshold: self.constant_q_threshold,
        })
    }
}

/// Parses a JSON document, turning serde errors (which name the offending
/// field) into [`Error::Parse`].
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    from_json(&text)
}
