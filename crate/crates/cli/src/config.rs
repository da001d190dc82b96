//! Run configuration (TOML). Every table rejects unknown keys.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use moyal_core::{EvolutionSchedule, Grid, Hamiltonian, Quantization, Route, TimeMode};

use crate::expr;
use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "one")]
    pub hbar: f64,
    pub route: Option<RouteName>,
    #[serde(default)]
    pub verify: bool,
    pub hamiltonian: HamiltonianConfig,
    pub grid: GridConfig,
    pub schedule: Option<ScheduleConfig>,
    pub fit: Option<FitConfig>,
    pub spectrum: Option<SpectrumConfig>,
    pub star_prod: Option<StarProdConfig>,
    pub star_exp: Option<StarExpConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RouteName {
    Kernel,
    Squaring,
    Ode,
    Series,
    ClosedForm,
}

impl From<RouteName> for Route {
    fn from(r: RouteName) -> Self {
        match r {
            RouteName::Kernel => Route::Kernel,
            RouteName::Squaring => Route::Squaring,
            RouteName::Ode => Route::Ode,
            RouteName::Series => Route::Series,
            RouteName::ClosedForm => Route::ClosedForm,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "family", rename_all = "lowercase")]
pub enum HamiltonianConfig {
    Free { mass: f64 },
    Harmonic { mass: f64, omega: f64 },
    Linear,
    Quadratic { a: f64, b: f64, c: f64 },
    Damped { mass: f64, omega: f64, gamma: f64 },
    /// Monomial sum in `x` and `p`.
    Polynomial { expr: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    /// Omit all three p keys for the matched momentum band.
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
    pub n_p: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Imaginary,
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Geometric,
    Uniform,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub mode: ModeName,
    pub spacing: Option<Spacing>,
    pub start: Option<f64>,
    pub end: Option<f64>,
    pub points: Option<usize>,
    /// Explicit sample times; excludes `spacing`, `start`, `end`, `points`.
    pub times: Option<Vec<f64>>,
    #[serde(default = "one_usize")]
    pub substeps: usize,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub energy_min: f64,
    pub energy_max: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarProdConfig {
    pub f: Option<String>,
    pub g: Option<String>,
    #[serde(default = "eight")]
    pub order: usize,
}

fn eight() -> usize {
    8
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarExpConfig {
    pub tau: f64,
    /// RK4 steps for the ode route.
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

fn default_substeps() -> usize {
    64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), format: Format::default() }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn cfg(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn quantization(&self) -> Result<Quantization, CliError> {
        Quantization::new(self.hbar).map_err(cfg)
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        let g = &self.grid;
        match (g.p_min, g.p_max, g.n_p) {
            (None, None, None) => Grid::matched(g.x_min, g.x_max, g.n_x, self.quantization()?).map_err(cfg),
            (Some(lo), Some(hi), Some(n)) => Grid::new(g.x_min, g.x_max, g.n_x, lo, hi, n).map_err(cfg),
            _ => Err(CliError::Config("grid: give all of p_min, p_max, n_p or none of them".into())),
        }
    }

    pub fn hamiltonian(&self) -> Result<Hamiltonian, CliError> {
        match &self.hamiltonian {
            HamiltonianConfig::Free { mass } => Hamiltonian::free(*mass).map_err(cfg),
            HamiltonianConfig::Harmonic { mass, omega } => Hamiltonian::harmonic(*mass, *omega).map_err(cfg),
            HamiltonianConfig::Linear => Ok(Hamiltonian::linear()),
            HamiltonianConfig::Quadratic { a, b, c } => Hamiltonian::quadratic(*a, *b, *c).map_err(cfg),
            HamiltonianConfig::Damped { mass, omega, gamma } => {
                Hamiltonian::damped(*mass, *omega, *gamma).map_err(cfg)
            }
            HamiltonianConfig::Polynomial { expr } => {
                let e = expr::parse(expr).map_err(|e| CliError::Config(format!("hamiltonian.expr: {e}")))?;
                if e.polynomial_degree().is_none() {
                    return Err(CliError::Config("hamiltonian.expr must be a polynomial in x and p".into()));
                }
                Ok(Hamiltonian::custom(expr.clone(), move |x, p| e.eval(x, p)))
            }
        }
    }

    pub fn route(&self) -> Option<Route> {
        self.route.map(Route::from)
    }

    /// Schedule from the `[schedule]` table; errors when it is missing or
    /// its mode differs from `mode`.
    pub fn schedule(&self, mode: TimeMode) -> Result<EvolutionSchedule<f64>, CliError> {
        let s = self
            .schedule
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [schedule] table".into()))?;
        let want = match mode {
            TimeMode::Imaginary => ModeName::Imaginary,
            TimeMode::Real => ModeName::Real,
        };
        if s.mode != want {
            let name = if want == ModeName::Real { "real" } else { "imaginary" };
            return Err(CliError::Config(format!("schedule.mode must be \"{name}\" for this command")));
        }
        if let Some(times) = &s.times {
            if s.spacing.is_some() || s.start.is_some() || s.end.is_some() || s.points.is_some() {
                return Err(CliError::Config("schedule: 'times' excludes spacing/start/end/points".into()));
            }
            return EvolutionSchedule::new(mode, times.clone(), s.substeps).map_err(cfg);
        }
        let missing = |k: &str| CliError::Config(format!("schedule: missing key '{k}'"));
        let start = s.start.ok_or_else(|| missing("start"))?;
        let end = s.end.ok_or_else(|| missing("end"))?;
        let points = s.points.ok_or_else(|| missing("points"))?;
        match s.spacing.unwrap_or(Spacing::Uniform) {
            Spacing::Geometric => EvolutionSchedule::geometric(mode, start, end, points, s.substeps),
            Spacing::Uniform => EvolutionSchedule::uniform(mode, start, end, points, s.substeps),
        }
        .map_err(cfg)
    }

    pub fn fit_window(&self) -> Option<(f64, f64)> {
        self.fit.as_ref().and_then(|f| f.window).map(|[a, b]| (a, b))
    }
}
