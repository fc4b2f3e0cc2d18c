//! Run configuration: a sectioned TOML file.
//!
//! ```toml
//! [grid]
//! dimension = 2
//! nodes_per_axis = 65
//! half_extent = 4.0
//!
//! [potential]
//! well_radius = 1.55
//! scale = 65536.0
//! tilde_radius = 2.5
//!
//! [obstacle]
//! center = [0.0, 0.0]
//! radius = 0.6
//! height = 0.05
//! outside_depth = 0.0
//!
//! [nonlinearity]
//! variant = "exp_critical"
//! nu = 4.0
//! p = 3.0
//! alpha0 = 1.0
//! theta = 4.0
//!
//! [solver]
//! lam = 16.0
//! eps = 0.01
//!
//! [sweep]
//! eps0 = 0.1
//! eps_steps = 9
//! lambda_base = 4.0
//! lambda_steps = 8
//! level_scan_iterations = 40
//!
//! [output]
//! dir = "out"
//! dump_fields = true
//! formats = ["csv", "json", "raw"]
//! ```
//!
//! Every key of `[solver]` other than `lam` and `eps` is optional and falls
//! back to [`SolverConfig::default`]. Unknown keys are errors.

use std::path::{Path, PathBuf};

use obstacle_well_core::energy::ProblemError;
use obstacle_well_core::{GridSpec, NonlinearitySpec, ObstacleSpec, PotentialSpec, ProblemSpec, SolverConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: Box<toml::de::Error> },
    #[error("invalid grid: {0}")]
    Grid(#[from] obstacle_well_core::domain::DomainError),
    #[error("invalid problem: {0}")]
    Problem(#[from] ProblemError),
    #[error("invalid solver settings: {0}")]
    Solver(#[from] obstacle_well_core::solver::SolverError),
    #[error("invalid [{section}] entry: {message}")]
    Invalid { section: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dimension: usize,
    pub nodes_per_axis: usize,
    pub half_extent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    pub well_radius: f64,
    pub scale: f64,
    /// Radius of `Ω̃`, the region where the nonlinearity is not truncated.
    pub tilde_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub lam: f64,
    pub eps: f64,
    pub path_points: Option<usize>,
    pub grad_tol: Option<f64>,
    pub max_outer: Option<usize>,
    pub armijo_c: Option<f64>,
    pub armijo_backtrack: Option<f64>,
    pub newton_tol: Option<f64>,
    pub newton_max: Option<usize>,
    pub rng_seed: Option<u64>,
    pub newton_gate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub eps0: f64,
    pub eps_steps: usize,
    pub lambda_base: f64,
    pub lambda_steps: usize,
    /// Path iterations per `μ` in the level-threshold scan (`N = 3`).
    #[serde(default = "default_scan_iterations")]
    pub level_scan_iterations: usize,
}

fn default_scan_iterations() -> usize {
    40
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            eps0: 0.1,
            eps_steps: 9,
            lambda_base: 4.0,
            lambda_steps: 8,
            level_scan_iterations: default_scan_iterations(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    #[serde(default)]
    pub dump_fields: bool,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), dump_fields: false, formats: default_formats() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub potential: PotentialSection,
    pub obstacle: ObstacleSpec,
    pub nonlinearity: NonlinearitySpec,
    pub solver: SolverSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), source: Box::new(e) })
    }

    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.to_path_buf(), source: e })?;
        let cfg = Self::from_toml(&text, path)?;
        cfg.validate()?;
        Ok((cfg, text))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs contain only TOML-representable values")
    }

    pub fn grid_spec(&self) -> Result<GridSpec, ConfigError> {
        Ok(GridSpec::new(self.grid.dimension, self.grid.nodes_per_axis, self.grid.half_extent)?)
    }

    pub fn potential_spec(&self) -> PotentialSpec {
        PotentialSpec { well_radius: self.potential.well_radius, scale: self.potential.scale }
    }

    pub fn problem(&self) -> Result<ProblemSpec, ConfigError> {
        Ok(ProblemSpec::new(
            self.grid_spec()?,
            self.potential_spec(),
            self.obstacle.clone(),
            self.nonlinearity,
            self.potential.tilde_radius,
            self.solver.lam,
            self.solver.eps,
        )?)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let d = SolverConfig::default();
        let s = &self.solver;
        SolverConfig {
            path_points: s.path_points.unwrap_or(d.path_points),
            grad_tol: s.grad_tol.unwrap_or(d.grad_tol),
            max_outer: s.max_outer.unwrap_or(d.max_outer),
            armijo_c: s.armijo_c.unwrap_or(d.armijo_c),
            armijo_backtrack: s.armijo_backtrack.unwrap_or(d.armijo_backtrack),
            newton_tol: s.newton_tol.unwrap_or(d.newton_tol),
            newton_max: s.newton_max.unwrap_or(d.newton_max),
            rng_seed: s.rng_seed.unwrap_or(d.rng_seed),
            newton_gate: s.newton_gate.unwrap_or(d.newton_gate),
        }
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.problem()?;
        self.solver_config().validate()?;
        let sw = &self.sweep;
        if !(sw.eps0.is_finite() && sw.eps0 > 0.0) {
            return Err(invalid("sweep", "eps0 must be positive"));
        }
        if sw.eps_steps < 3 {
            return Err(invalid("sweep", "eps_steps must be at least 3"));
        }
        if !(sw.lambda_base.is_finite() && sw.lambda_base > 1.0) {
            return Err(invalid("sweep", "lambda_base must exceed 1"));
        }
        if sw.lambda_steps < 3 {
            return Err(invalid("sweep", "lambda_steps must be at least 3"));
        }
        if sw.level_scan_iterations == 0 {
            return Err(invalid("sweep", "level_scan_iterations must be positive"));
        }
        if self.output.formats.is_empty() {
            return Err(invalid("output", "formats must name at least one of csv, json, raw"));
        }
        Ok(())
    }

    /// Desk-scale defaults for `N = 2` (exponential nonlinearity).
    pub fn default_2d() -> Self {
        Self {
            grid: GridSection { dimension: 2, nodes_per_axis: 65, half_extent: 4.0 },
            potential: PotentialSection { well_radius: 1.55, scale: 65536.0, tilde_radius: 2.5 },
            obstacle: ObstacleSpec { center: vec![0.0, 0.0], radius: 0.6, height: 0.05, outside_depth: 0.0 },
            nonlinearity: NonlinearitySpec::ExpCritical { nu: 4.0, p: 3.0, alpha0: 1.0, theta: 4.0 },
            solver: SolverSection::with_parameters(16.0, 1e-2),
            sweep: SweepSection::default(),
            output: OutputSection::default(),
        }
    }

    /// Desk-scale defaults for `N = 3` (power nonlinearity, `q = 4`).
    pub fn default_3d() -> Self {
        Self {
            grid: GridSection { dimension: 3, nodes_per_axis: 33, half_extent: 3.0 },
            potential: PotentialSection { well_radius: 1.55, scale: 65536.0, tilde_radius: 2.2 },
            obstacle: ObstacleSpec { center: vec![0.0, 0.0, 0.0], radius: 0.6, height: 0.05, outside_depth: 0.0 },
            nonlinearity: NonlinearitySpec::PowerCritical { mu: 16.0, q: 4.0 },
            solver: SolverSection::with_parameters(16.0, 1e-2),
            sweep: SweepSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl SolverSection {
    pub fn with_parameters(lam: f64, eps: f64) -> Self {
        Self {
            lam,
            eps,
            path_points: None,
            grad_tol: None,
            max_outer: None,
            armijo_c: None,
            armijo_backtrack: None,
            newton_tol: None,
            newton_max: None,
            rng_seed: None,
            newton_gate: None,
        }
    }
}

fn invalid(section: &'static str, message: &str) -> ConfigError {
    ConfigError::Invalid { section, message: message.to_string() }
}
