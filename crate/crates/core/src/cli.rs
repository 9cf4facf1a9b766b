//! Command-line front end.
//!
//! Every invocation is first resolved into a [`RunConfig`] — either from flags or
//! from a JSON file given with `--config` — and then executed. The config is the
//! single source of truth for a run: it serializes losslessly, rejects unknown
//! keys, and `--dump-config` prints it instead of running.
//!
//! Sweeps (grid points, chain sizes, evolution times) fan out over a worker pool
//! sized by `--workers` (or `ADIAGEO_WORKERS`); output rows are always assembled
//! in input order, so identical configs give byte-identical files.

use std::path::{Path as FsPath, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, PropagationOptions};
use crate::error::{Error, Result};
use crate::geodesic::{self, GeodesicMethod, GeodesicOptions, HamiltonianMetric, IsingPlaneMetric, QuadratureGeodesicOptions};
use crate::ham::{HamiltonianModel, SpectralOptions};
use crate::io::{self, CsvTable};
use crate::metric::{self, MetricSample, PathQuadrature};
use crate::models::{
    ising_geodesic_closed_form, CustomModelDoc, DeutschJozsa, IsingCase, IsingChain, IsingLine, IsingMatrix, ModeSet,
    Oracle, Projective, ProjectiveLine, MAX_FULL_MATRIX_M, REGISTRY,
};
use crate::scaling::{self, FitReport, FitWindow};
use crate::schedule::{LinearSchedule, Path, Schedule};
use crate::sweep::{self, Execution};

// ---------------------------------------------------------------------------
// Run configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Metric,
    Geodesic,
    Propagate,
    Fit,
    Models,
}

/// Model selector with structural parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    #[serde(alias = "dj")]
    DeutschJozsa {
        n: usize,
        /// `constant:<0|1>` or `balanced:<seed>`.
        oracle: String,
        #[serde(default = "one")]
        h0: f64,
    },
    /// `x1 P_a^perp + x2 P_b^perp`; `grover` is the same family with overlap `1/sqrt(dim)`.
    #[serde(alias = "grover")]
    Projective {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        overlap: Option<f64>,
        #[serde(default)]
        phase: f64,
        /// Restrict to the line `(1 - x, x)`.
        #[serde(default = "yes")]
        line: bool,
    },
    Ising {
        m: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        case: Option<IsingCase>,
        #[serde(default)]
        modes: ModeSet,
    },
    Custom {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        doc: Option<CustomModelDoc>,
    },
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl ModelSpec {
    /// Dense Hamiltonian family.
    pub fn hamiltonian(&self) -> Result<Box<dyn HamiltonianModel>> {
        Ok(match self {
            ModelSpec::DeutschJozsa { n, oracle, h0 } => Box::new(DeutschJozsa::new(Oracle::parse(*n, oracle)?, *h0)?),
            ModelSpec::Projective { dim, overlap, phase, line } => {
                let p = Projective::new(*dim, overlap.unwrap_or(1.0 / (*dim as f64).sqrt()), *phase)?;
                if *line {
                    Box::new(ProjectiveLine(p))
                } else {
                    Box::new(p)
                }
            }
            ModelSpec::Ising { m, case, .. } => {
                if *m > MAX_FULL_MATRIX_M {
                    return Err(Error::InvalidModel(format!(
                        "the dense Ising chain needs m <= {MAX_FULL_MATRIX_M}; m = {m} is only available analytically"
                    )));
                }
                let chain = IsingMatrix::new(*m)?;
                match case {
                    Some(case) => Box::new(IsingLine { chain, case: *case }),
                    None => Box::new(chain),
                }
            }
            ModelSpec::Custom { file, doc } => {
                let doc = match (file, doc) {
                    (_, Some(doc)) => doc.clone(),
                    (Some(file), None) => serde_json::from_str(&std::fs::read_to_string(file)?)?,
                    (None, None) => return Err(Error::InvalidModel("custom model needs 'file' or 'doc'".into())),
                };
                Box::new(doc.build()?)
            }
        })
    }

    fn param_dim(&self) -> Result<usize> {
        Ok(match self {
            ModelSpec::Ising { case, .. } => {
                if case.is_some() {
                    1
                } else {
                    2
                }
            }
            _ => self.hamiltonian()?.param_dim(),
        })
    }

    /// Endpoints used when none are given.
    fn default_endpoints(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok(match self {
            ModelSpec::Projective { line: false, .. } => (vec![1.0, 0.0], vec![0.0, 1.0]),
            ModelSpec::Ising { case: None, .. } => (vec![1.0, 0.0], vec![0.0, 1.0]),
            _ => {
                let m = self.param_dim()?;
                (vec![0.0; m], vec![1.0; m])
            }
        })
    }

    fn describe(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

/// One grid axis, `points` values from `lo` to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridAxis {
    /// Parse `lo:hi:points`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || Error::InvalidInput(format!("grid axis '{text}' must look like lo:hi:points"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo = parts[0].trim().parse().map_err(|_| bad())?;
        let hi = parts[1].trim().parse().map_err(|_| bad())?;
        let points = parts[2].trim().parse().map_err(|_| bad())?;
        if points == 0 {
            return Err(bad());
        }
        Ok(GridAxis { lo, hi, points })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        (0..self.points)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / (self.points - 1) as f64)
            .collect()
    }
}

/// Schedule used by `propagate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PathSpec {
    Linear {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        from: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        to: Option<Vec<f64>>,
    },
    Geodesic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        from: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        to: Option<Vec<f64>>,
    },
    /// A path CSV as written by `geodesic`.
    File { file: PathBuf },
}

impl Default for PathSpec {
    fn default() -> Self {
        PathSpec::Linear { from: None, to: None }
    }
}

impl PathSpec {
    fn endpoints(&self) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
        match self {
            PathSpec::Linear { from, to } | PathSpec::Geodesic { from, to } => (from.clone(), to.clone()),
            PathSpec::File { .. } => (None, None),
        }
    }
}

/// Solver settings; every tolerance in the crate is reachable from here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub spectral: SpectralOptions,
    pub geodesic: GeodesicOptions,
    /// Solve one-parameter geodesics by arc-length inversion instead of as a boundary-value problem.
    pub quadrature_1d: bool,
    pub quadrature: QuadratureGeodesicOptions,
    pub path_quadrature: PathQuadrature,
    pub propagation: PropagationOptions,
    pub dyson_depth: usize,
    /// Recording mesh for the Dyson iterates; `0` picks `max(512, 16 T)`.
    pub dyson_mesh: usize,
    pub holonomy_mesh: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            spectral: SpectralOptions::default(),
            geodesic: GeodesicOptions::default(),
            quadrature_1d: false,
            quadrature: QuadratureGeodesicOptions::default(),
            path_quadrature: PathQuadrature::default(),
            propagation: PropagationOptions::default(),
            dyson_depth: 2,
            dyson_mesh: 0,
            holonomy_mesh: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitQuantity {
    /// `|x(s) - 1/2|` against `|s - 1/2|` on the thermodynamic case (i) geodesic.
    IsingGeodesic,
    /// `p(x)` against `|x - 1/2|` in the thermodynamic limit.
    IsingMetric,
    /// `prefactor * t^exponent` with multiplicative uniform noise.
    Synthetic,
    /// Two columns of a CSV file.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub quantity: FitQuantity,
    /// Defaults to `[1e-3, 1e-1]`, except `[1e-4, 1e-2]` for `ising_metric`, whose
    /// regular factor `(1 - x)^-2` tilts the slope by about 6% over the wider window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<FitWindow>,
    #[serde(default = "default_fit_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theoretical: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default = "default_t_column")]
    pub t_column: String,
    #[serde(default = "default_y_column")]
    pub y_column: String,
    #[serde(default = "default_planted")]
    pub planted: f64,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_fit_samples() -> usize {
    41
}
fn default_t_column() -> String {
    "t".into()
}
fn default_y_column() -> String {
    "y".into()
}
fn default_planted() -> f64 {
    1.5
}
fn default_noise() -> f64 {
    0.01
}

impl FitSpec {
    pub fn new(quantity: FitQuantity) -> Self {
        FitSpec {
            quantity,
            window: None,
            samples: default_fit_samples(),
            theoretical: None,
            input: None,
            t_column: default_t_column(),
            y_column: default_y_column(),
            planted: default_planted(),
            noise: default_noise(),
        }
    }

    pub fn effective_window(&self) -> FitWindow {
        self.window.unwrap_or(match self.quantity {
            FitQuantity::IsingMetric => FitWindow { lo: 1e-4, hi: 1e-2 },
            _ => FitWindow::default(),
        })
    }
}

/// A complete, serializable description of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<GridAxis>,
    #[serde(default)]
    pub path: PathSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep_m: Vec<usize>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSpec>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn new(command: CommandKind) -> Self {
        RunConfig {
            command,
            model: None,
            grid: Vec::new(),
            path: PathSpec::default(),
            sweep_m: Vec::new(),
            solver: SolverConfig::default(),
            times: Vec::new(),
            fit: None,
            out: default_out(),
            seed: 0,
            workers: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn model(&self) -> Result<&ModelSpec> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("{:?} needs a model (--model)", self.command).to_lowercase()))
    }

    fn execution(&self) -> Execution {
        match self.workers {
            Some(1) => Execution::Sequential,
            _ => Execution::Parallel.effective(),
        }
    }
}

// ---------------------------------------------------------------------------
// Flags

#[derive(Debug, Parser)]
#[command(name = "adiageo", version, about = "Geometry of adiabatic quantum evolution: metrics, geodesic schedules, propagation and critical scaling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<CliCommand>,
    /// Run configuration (JSON); replaces the subcommand and its flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, env = "ADIAGEO_WORKERS")]
    pub workers: Option<usize>,
    /// Seed for randomized inputs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Metric tensor, gap and ground degeneracy over a grid.
    Metric(MetricArgs),
    /// Geodesic schedule between two endpoints.
    Geodesic(GeodesicArgs),
    /// Exact propagation over a list of total times.
    Propagate(PropagateArgs),
    /// Power-law fit of a critical scaling series.
    Fit(FitArgs),
    /// List the built-in models.
    Models,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// deutsch_jozsa (dj), projective (grover), ising, custom.
    #[arg(long)]
    pub model: Option<String>,
    /// Ising half-length (2m + 1 sites).
    #[arg(long)]
    pub m: Option<usize>,
    /// Ising slice: i, ii or iii.
    #[arg(long)]
    pub case: Option<String>,
    /// Ising momentum set: even or odd.
    #[arg(long)]
    pub modes: Option<String>,
    /// Projective Hilbert-space dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Projective overlap |<a|b>| (default 1/sqrt(dim)).
    #[arg(long)]
    pub overlap: Option<f64>,
    /// Projective relative phase.
    #[arg(long)]
    pub phase: Option<f64>,
    /// Use both projective parameters instead of the line (1 - x, x).
    #[arg(long)]
    pub plane: bool,
    /// Deutsch-Jozsa qubit count.
    #[arg(long)]
    pub n: Option<usize>,
    /// Deutsch-Jozsa oracle: constant:<0|1> or balanced:<seed>.
    #[arg(long)]
    pub oracle: Option<String>,
    /// Deutsch-Jozsa energy scale.
    #[arg(long)]
    pub h0: Option<f64>,
    /// JSON document of a custom model.
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    /// Smallest admissible gap.
    #[arg(long)]
    pub gap_floor: Option<f64>,
}

impl ModelArgs {
    fn spec(&self) -> Result<Option<ModelSpec>> {
        let Some(name) = self.model.as_deref() else { return Ok(None) };
        let need = |v: Option<usize>, flag: &str| {
            v.ok_or_else(|| Error::InvalidInput(format!("--model {name} needs --{flag}")))
        };
        Ok(Some(match name {
            "deutsch_jozsa" | "dj" => ModelSpec::DeutschJozsa {
                n: need(self.n, "n")?,
                oracle: self.oracle.clone().unwrap_or_else(|| "balanced:0".into()),
                h0: self.h0.unwrap_or(1.0),
            },
            "projective" | "grover" => ModelSpec::Projective {
                dim: need(self.dim, "dim")?,
                overlap: self.overlap,
                phase: self.phase.unwrap_or(0.0),
                line: !self.plane,
            },
            "ising" => ModelSpec::Ising {
                m: need(self.m, "m")?,
                case: self.case.as_deref().map(IsingCase::parse).transpose()?,
                modes: match self.modes.as_deref() {
                    None | Some("even") | Some("even_parity") => ModeSet::EvenParity,
                    Some("odd") | Some("odd_parity") => ModeSet::OddParity,
                    Some(other) => return Err(Error::InvalidInput(format!("unknown mode set '{other}'"))),
                },
            },
            "custom" => ModelSpec::Custom {
                file: Some(
                    self.model_file
                        .clone()
                        .ok_or_else(|| Error::InvalidInput("--model custom needs --model-file".into()))?,
                ),
                doc: None,
            },
            other => {
                let names: Vec<&str> = REGISTRY.iter().map(|(n, _)| *n).collect();
                return Err(Error::InvalidModel(format!("unknown model '{other}' (known: {})", names.join(", "))));
            }
        }))
    }
}

#[derive(Debug, Clone, Args)]
pub struct MetricArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Grid axis lo:hi:points, one per control parameter.
    #[arg(long)]
    pub grid: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct GeodesicArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub from: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub to: Option<Vec<f64>>,
    /// Ising half-lengths to solve side by side (with the thermodynamic limit).
    #[arg(long, value_delimiter = ',')]
    pub sweep_m: Vec<usize>,
    /// auto, shooting, relaxation or quadrature (one-parameter models).
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub mesh: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Euler-Lagrange residual bound.
    #[arg(long)]
    pub tol_shooting: Option<f64>,
    /// Relative tolerance of arc-length integrals.
    #[arg(long)]
    pub tol_quad: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PropagateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// linear, geodesic, or a path CSV written by `geodesic`.
    #[arg(long, default_value = "linear")]
    pub path: String,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub from: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub to: Option<Vec<f64>>,
    /// Total evolution times.
    #[arg(long, value_delimiter = ',', default_value = "25,50,100,200")]
    pub times: Vec<f64>,
    /// Step-doubling tolerance of the propagators.
    #[arg(long)]
    pub tol_step: Option<f64>,
    /// Relative tolerance of the error-functional quadrature.
    #[arg(long)]
    pub tol_eps: Option<f64>,
    #[arg(long)]
    pub dyson_depth: Option<usize>,
    #[arg(long)]
    pub dyson_mesh: Option<usize>,
    #[arg(long)]
    pub holonomy_mesh: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// ising-geodesic, ising-metric, synthetic or csv.
    #[arg(long)]
    pub quantity: String,
    /// Fit window lo,hi on the independent variable.
    #[arg(long, value_delimiter = ',')]
    pub window: Option<Vec<f64>>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Theoretical exponent to compare against.
    #[arg(long, allow_hyphen_values = true)]
    pub theory: Option<f64>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub t_column: Option<String>,
    #[arg(long)]
    pub y_column: Option<String>,
    /// Planted exponent for synthetic data.
    #[arg(long, allow_hyphen_values = true)]
    pub planted: Option<f64>,
    /// Relative noise amplitude for synthetic data.
    #[arg(long)]
    pub noise: Option<f64>,
}

impl Cli {
    /// Resolve flags (or `--config`) into a run configuration.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = match (&self.config, &self.command) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidInput("give either --config or a subcommand, not both".into()));
            }
            (Some(path), None) => RunConfig::from_json(&std::fs::read_to_string(path)?)?,
            (None, Some(cmd)) => from_command(cmd)?,
            (None, None) => return Err(Error::InvalidInput("missing subcommand (try --help)".into())),
        };
        if let Some(out) = &self.out {
            config.out = out.clone();
        }
        if let Some(w) = self.workers {
            config.workers = Some(w);
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }
}

fn apply_model_args(config: &mut RunConfig, args: &ModelArgs) -> Result<()> {
    config.model = args.spec()?;
    if let Some(floor) = args.gap_floor {
        config.solver.spectral.gap_floor = floor;
    }
    Ok(())
}

fn from_command(cmd: &CliCommand) -> Result<RunConfig> {
    Ok(match cmd {
        CliCommand::Models => RunConfig::new(CommandKind::Models),
        CliCommand::Metric(a) => {
            let mut c = RunConfig::new(CommandKind::Metric);
            apply_model_args(&mut c, &a.model)?;
            c.grid = a.grid.iter().map(|g| GridAxis::parse(g)).collect::<Result<_>>()?;
            c
        }
        CliCommand::Geodesic(a) => {
            let mut c = RunConfig::new(CommandKind::Geodesic);
            apply_model_args(&mut c, &a.model)?;
            c.path = PathSpec::Geodesic { from: a.from.clone(), to: a.to.clone() };
            c.sweep_m = a.sweep_m.clone();
            match a.method.as_deref() {
                None | Some("auto") => {}
                Some("shooting") => c.solver.geodesic.method = GeodesicMethod::Shooting,
                Some("relaxation") => c.solver.geodesic.method = GeodesicMethod::Relaxation,
                Some("quadrature") => c.solver.quadrature_1d = true,
                Some(other) => return Err(Error::InvalidInput(format!("unknown geodesic method '{other}'"))),
            }
            if let Some(v) = a.mesh {
                c.solver.geodesic.mesh = v;
            }
            if let Some(v) = a.samples {
                c.solver.quadrature.samples = v;
            }
            if let Some(v) = a.max_iter {
                c.solver.geodesic.max_iter = v;
            }
            if let Some(v) = a.tol_shooting {
                c.solver.geodesic.shooting_tol = v;
            }
            if let Some(v) = a.tol_quad {
                c.solver.quadrature.rel_tol = v;
            }
            c
        }
        CliCommand::Propagate(a) => {
            let mut c = RunConfig::new(CommandKind::Propagate);
            apply_model_args(&mut c, &a.model)?;
            c.path = match a.path.as_str() {
                "linear" => PathSpec::Linear { from: a.from.clone(), to: a.to.clone() },
                "geodesic" => PathSpec::Geodesic { from: a.from.clone(), to: a.to.clone() },
                file => PathSpec::File { file: PathBuf::from(file) },
            };
            c.times = a.times.clone();
            if let Some(v) = a.tol_step {
                c.solver.propagation.tol = v;
            }
            if let Some(v) = a.tol_eps {
                c.solver.path_quadrature.rel_tol = v;
            }
            if let Some(v) = a.dyson_depth {
                c.solver.dyson_depth = v;
            }
            if let Some(v) = a.dyson_mesh {
                c.solver.dyson_mesh = v;
            }
            if let Some(v) = a.holonomy_mesh {
                c.solver.holonomy_mesh = v;
            }
            c
        }
        CliCommand::Fit(a) => {
            let mut c = RunConfig::new(CommandKind::Fit);
            let quantity = match a.quantity.replace('-', "_").as_str() {
                "ising_geodesic" => FitQuantity::IsingGeodesic,
                "ising_metric" => FitQuantity::IsingMetric,
                "synthetic" => FitQuantity::Synthetic,
                "csv" => FitQuantity::Csv,
                other => return Err(Error::InvalidInput(format!("unknown fit quantity '{other}'"))),
            };
            let mut spec = FitSpec::new(quantity);
            if let Some(w) = &a.window {
                if w.len() != 2 {
                    return Err(Error::InvalidInput("--window takes lo,hi".into()));
                }
                spec.window = Some(FitWindow::new(w[0], w[1])?);
            }
            if let Some(v) = a.samples {
                spec.samples = v;
            }
            spec.theoretical = a.theory;
            spec.input = a.input.clone();
            if let Some(v) = &a.t_column {
                spec.t_column = v.clone();
            }
            if let Some(v) = &a.y_column {
                spec.y_column = v.clone();
            }
            if let Some(v) = a.planted {
                spec.planted = v;
            }
            if let Some(v) = a.noise {
                spec.noise = v;
            }
            c.fit = Some(spec);
            c
        }
    })
}

// ---------------------------------------------------------------------------
// Execution

/// A computation that did not converge; reported as JSON on stderr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub context: String,
    pub error: String,
    pub message: String,
}

impl Failure {
    pub fn new(context: impl Into<String>, err: &Error) -> Self {
        Failure { context: context.into(), error: err.kind().to_string(), message: err.to_string() }
    }
}

/// Files written by a run and any failures among its independent jobs.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub failures: Vec<Failure>,
    /// Short human-readable summary lines.
    pub summary: Vec<String>,
}

impl Outcome {
    fn write_csv(&mut self, dir: &FsPath, name: &str, table: &CsvTable) -> Result<()> {
        let path = dir.join(name);
        table.write(&path)?;
        self.files.push(path);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, dir: &FsPath, name: &str, value: &T) -> Result<()> {
        let path = dir.join(name);
        io::write_json(&path, value)?;
        self.files.push(path);
        Ok(())
    }
}

/// Execute a configuration inside a worker pool of the configured size.
pub fn execute(config: &RunConfig) -> Result<Outcome> {
    sweep::with_workers(config.workers, || match config.command {
        CommandKind::Models => Ok(cmd_models()),
        CommandKind::Metric => cmd_metric(config),
        CommandKind::Geodesic => cmd_geodesic(config),
        CommandKind::Propagate => cmd_propagate(config),
        CommandKind::Fit => cmd_fit(config),
    })
}

fn cmd_models() -> Outcome {
    Outcome { summary: REGISTRY.iter().map(|(n, d)| format!("{n:<14} {d}")).collect(), ..Default::default() }
}

fn grid_points(config: &RunConfig, dim: usize) -> Result<Vec<Vec<f64>>> {
    let axes = if config.grid.is_empty() && dim == 1 {
        vec![GridAxis { lo: 0.0, hi: 1.0, points: 11 }]
    } else {
        config.grid.clone()
    };
    if axes.len() != dim {
        return Err(Error::InvalidInput(format!("model has {dim} parameters but {} grid axes were given", axes.len())));
    }
    let mut points = vec![Vec::new()];
    for axis in &axes {
        let vals = axis.values();
        points = points
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

/// `g_ij`, gap and ground degeneracy at one point.
fn metric_row(spec: &ModelSpec, dense: Option<&dyn HamiltonianModel>, x: &[f64], opts: &SpectralOptions) -> Result<Vec<f64>> {
    let (g, gap, g0) = match (spec, dense) {
        (ModelSpec::Ising { m, case, modes }, _) => {
            let chain = IsingChain::new(*m, *modes)?;
            match case {
                Some(case) => {
                    let p = case.point(x[0]);
                    (vec![chain.line_metric(*case, x[0])?], chain.spectral_gap(&p), 1.0)
                }
                None => {
                    let g = chain.metric(x)?;
                    (g.iter().cloned().collect::<Vec<f64>>(), chain.spectral_gap(x), 1.0)
                }
            }
        }
        (_, Some(model)) => {
            let sample = MetricSample::compute(model, x, opts, false, false)?;
            let n = sample.g.nrows();
            let g = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| sample.g[(i, j)]).collect();
            (g, sample.gap, sample.g0 as f64)
        }
        _ => return Err(Error::InvalidModel("no Hamiltonian available".into())),
    };
    let mut row = x.to_vec();
    row.extend(g);
    row.push(gap);
    row.push(g0);
    Ok(row)
}

fn cmd_metric(config: &RunConfig) -> Result<Outcome> {
    let spec = config.model()?;
    let dim = spec.param_dim()?;
    let dense = match spec {
        ModelSpec::Ising { .. } => None,
        _ => Some(spec.hamiltonian()?),
    };
    let points = grid_points(config, dim)?;
    let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    for i in 1..=dim {
        for j in 1..=dim {
            header.push(format!("g{i}{j}"));
        }
    }
    header.push("gap".into());
    header.push("g0".into());
    let rows = sweep::map_slice(config.execution(), &points, |x| {
        metric_row(spec, dense.as_deref(), x, &config.solver.spectral)
    });
    let mut table = CsvTable::new(header.clone());
    table.comment(format!("model: {}", spec.describe()));
    for (x, row) in points.iter().zip(rows) {
        let row = row.map_err(|e| Error::InvalidInput(format!("at x = {x:?}: {e}")))?;
        table.push(row)?;
    }
    let mut out = Outcome::default();
    out.write_csv(&config.out, "metric.csv", &table)?;
    #[derive(Serialize)]
    struct MetricJson<'a> {
        model: &'a ModelSpec,
        columns: &'a [String],
        rows: &'a [Vec<f64>],
    }
    out.write_json(&config.out, "metric.json", &MetricJson { model: spec, columns: &header, rows: &table.rows })?;
    out.summary.push(format!("{} grid points", points.len()));
    Ok(out)
}

/// A solved geodesic with the columns of the path export.
struct GeodesicExport {
    path: Path,
    speed: Vec<f64>,
    eps: Vec<f64>,
    residual: f64,
    length: f64,
    iterations: usize,
    method: String,
}

impl GeodesicExport {
    fn table(&self, spec: &ModelSpec, from: &[f64], to: &[f64], solver: &str) -> Result<CsvTable> {
        let mut t = io::path_table(&self.path, &[("speed", &self.speed), ("eps", &self.eps)])?;
        t.comment(format!("model: {}", spec.describe()));
        t.comment(format!("from: {from:?}"));
        t.comment(format!("to: {to:?}"));
        t.comment(format!("solver: {solver}"));
        t.comment(format!("method: {}", self.method));
        t.comment(format!("residual: {}", io::fmt17(self.residual)));
        t.comment(format!("length: {}", io::fmt17(self.length)));
        Ok(t)
    }
}

/// One-parameter geodesic by arc-length inversion, with `eps = sqrt(2 g0) * arc length`.
fn quadrature_export<G>(metric_fn: G, from: f64, to: f64, breakpoints: Vec<f64>, opts: &QuadratureGeodesicOptions, g0: f64) -> Result<GeodesicExport>
where
    G: Fn(f64) -> Result<f64> + Sync + Clone,
{
    let qopts = QuadratureGeodesicOptions { breakpoints, ..opts.clone() };
    let q = geodesic::quadrature_geodesic_1d(metric_fn.clone(), from, to, &qopts)?;
    let speed = q
        .path
        .x
        .iter()
        .zip(&q.path.xdot)
        .map(|(x, v)| metric_fn(x[0]).map(|g| (g.max(0.0)).sqrt() * v[0].abs()).unwrap_or(f64::NAN))
        .collect();
    let eps = q.path.s.iter().map(|s| (2.0 * g0).sqrt() * q.length * s).collect();
    Ok(GeodesicExport { path: q.path, speed, eps, residual: 0.0, length: q.length, iterations: 0, method: "quadrature".into() })
}

fn dense_geodesic(model: &dyn HamiltonianModel, from: &[f64], to: &[f64], solver: &SolverConfig) -> Result<GeodesicExport> {
    let mut export = if solver.quadrature_1d {
        if model.param_dim() != 1 {
            return Err(Error::InvalidInput("quadrature geodesics need a one-parameter model".into()));
        }
        let opts = solver.spectral;
        let metric_fn = move |x: f64| metric::metric_tensor(model, &[x], &opts).map(|g| g[(0, 0)]);
        quadrature_export(metric_fn, from[0], to[0], Vec::new(), &solver.quadrature, 1.0)?
    } else {
        let field = HamiltonianMetric::with_options(model, solver.spectral);
        let sol = geodesic::solve_geodesic(&field, from, to, &solver.geodesic)?;
        GeodesicExport {
            speed: sol.speed.clone(),
            eps: Vec::new(),
            residual: sol.residual,
            length: sol.length,
            iterations: sol.iterations,
            method: format!("{:?}", sol.method).to_lowercase(),
            path: sol.path,
        }
    };
    let acc = metric::path_error_functional(model, &export.path, &solver.spectral, &solver.path_quadrature)?;
    export.eps = export.path.s.iter().map(|s| acc.eps_at(*s)).collect();
    Ok(export)
}

fn ising_line_geodesic(m: usize, modes: ModeSet, case: IsingCase, from: f64, to: f64, solver: &SolverConfig) -> Result<GeodesicExport> {
    let chain = IsingChain::new(m, modes)?;
    let x_c = case.critical_point();
    let breakpoints = if (from - x_c) * (to - x_c) < 0.0 { vec![x_c] } else { Vec::new() };
    quadrature_export(move |x| chain.line_metric(case, x), from, to, breakpoints, &solver.quadrature, 1.0)
}

#[derive(Serialize)]
struct GeodesicRecord {
    model: ModelSpec,
    from: Vec<f64>,
    to: Vec<f64>,
    series: Vec<SeriesRecord>,
}

#[derive(Serialize)]
struct SeriesRecord {
    label: String,
    file: Option<PathBuf>,
    length: Option<f64>,
    residual: Option<f64>,
    iterations: Option<usize>,
    /// Sup-distance to the thermodynamic-limit geodesic, when one exists.
    sup_distance_to_limit: Option<f64>,
    error: Option<Failure>,
}

fn cmd_geodesic(config: &RunConfig) -> Result<Outcome> {
    let spec = config.model()?;
    let (def_from, def_to) = spec.default_endpoints()?;
    let (from, to) = config.path.endpoints();
    let from = from.unwrap_or(def_from);
    let to = to.unwrap_or(def_to);
    let solver_json = serde_json::to_string(&config.solver.geodesic)?;
    let mut out = Outcome::default();
    let mut record = GeodesicRecord { model: spec.clone(), from: from.clone(), to: to.clone(), series: Vec::new() };

    match spec {
        ModelSpec::Ising { m, case: Some(case), modes } => {
            if from.len() != 1 || to.len() != 1 {
                return Err(Error::InvalidInput("an Ising slice has one parameter".into()));
            }
            let ms = if config.sweep_m.is_empty() { vec![*m] } else { config.sweep_m.clone() };
            let solved = sweep::map_slice(config.execution(), &ms, |&mm| {
                ising_line_geodesic(mm, *modes, *case, from[0], to[0], &config.solver)
            });
            let has_limit = from[0] == 0.0 && to[0] == 1.0;
            let limit = |s: f64| ising_geodesic_closed_form(*case, s);
            let samples = config.solver.quadrature.samples.max(1);
            let grid: Vec<f64> = (0..=samples).map(|k| k as f64 / samples as f64).collect();
            let mut header = vec!["s".to_string()];
            let mut columns: Vec<Vec<f64>> = Vec::new();
            for (mm, res) in ms.iter().zip(solved) {
                match res {
                    Ok(export) => {
                        let name = format!("geodesic_m{mm}.csv");
                        out.write_csv(&config.out, &name, &export.table(spec, &from, &to, "quadrature")?)?;
                        let col: Vec<f64> = grid.iter().map(|s| export.path.position(*s)[0]).collect();
                        let sup = has_limit.then(|| grid.iter().zip(&col).map(|(s, x)| (x - limit(*s)).abs()).fold(0.0, f64::max));
                        header.push(format!("x_m{mm}"));
                        columns.push(col);
                        record.series.push(SeriesRecord {
                            label: format!("m={mm}"),
                            file: Some(config.out.join(name)),
                            length: Some(export.length),
                            residual: None,
                            iterations: None,
                            sup_distance_to_limit: sup,
                            error: None,
                        });
                        if let Some(d) = sup {
                            out.summary.push(format!("m={mm}: sup distance to limit {d:.3e}"));
                        }
                    }
                    Err(e) => {
                        let f = Failure::new(format!("geodesic m={mm}"), &e);
                        out.failures.push(f.clone());
                        record.series.push(SeriesRecord {
                            label: format!("m={mm}"),
                            file: None,
                            length: None,
                            residual: None,
                            iterations: None,
                            sup_distance_to_limit: None,
                            error: Some(f),
                        });
                    }
                }
            }
            if has_limit {
                header.push("x_limit".into());
                columns.push(grid.iter().map(|s| limit(*s)).collect());
            }
            let mut table = CsvTable::new(header);
            table.comment(format!("model: {}", spec.describe()));
            for (k, s) in grid.iter().enumerate() {
                let mut row = vec![*s];
                row.extend(columns.iter().map(|c| c[k]));
                table.push(row)?;
            }
            out.write_csv(&config.out, "geodesic_sweep.csv", &table)?;
        }
        ModelSpec::Ising { m, case: None, modes } => {
            let field = IsingPlaneMetric(IsingChain::new(*m, *modes)?);
            let sol = geodesic::solve_geodesic(&field, &from, &to, &config.solver.geodesic)?;
            let export = GeodesicExport {
                speed: sol.speed.clone(),
                eps: sol.speed.iter().zip(&sol.path.s).map(|(v, s)| 2f64.sqrt() * v * s).collect(),
                residual: sol.residual,
                length: sol.length,
                iterations: sol.iterations,
                method: format!("{:?}", sol.method).to_lowercase(),
                path: sol.path,
            };
            out.write_csv(&config.out, "geodesic.csv", &export.table(spec, &from, &to, &solver_json)?)?;
            record.series.push(series_of(&export, config.out.join("geodesic.csv")));
        }
        _ => {
            let model = spec.hamiltonian()?;
            let export = dense_geodesic(model.as_ref(), &from, &to, &config.solver)?;
            out.write_csv(&config.out, "geodesic.csv", &export.table(spec, &from, &to, &solver_json)?)?;
            out.summary.push(format!("length {:.6e}, residual {:.2e}", export.length, export.residual));
            record.series.push(series_of(&export, config.out.join("geodesic.csv")));
        }
    }
    out.write_json(&config.out, "geodesic.json", &record)?;
    Ok(out)
}

fn series_of(export: &GeodesicExport, file: PathBuf) -> SeriesRecord {
    SeriesRecord {
        label: export.method.clone(),
        file: Some(file),
        length: Some(export.length),
        residual: Some(export.residual),
        iterations: Some(export.iterations),
        sup_distance_to_limit: None,
        error: None,
    }
}

/// Largest mesh the automatic refinement of the Dyson iterates will try.
pub const MAX_AUTO_DYSON_MESH: usize = 1 << 17;

/// Initial recording mesh of the Dyson iterates for total time `t`; it is
/// doubled while the first iterate is not resolved.
pub fn auto_dyson_mesh(t: f64) -> usize {
    let m = (16.0 * t).ceil().max(512.0) as usize;
    m + m % 2
}

#[derive(Debug, Clone, Serialize)]
struct TimeRecord {
    total_time: f64,
    file: Option<PathBuf>,
    steps: Option<usize>,
    steps_adiabatic: Option<usize>,
    error_estimate: Option<f64>,
    delta: Option<f64>,
    delta_frobenius: Option<f64>,
    fidelity_end: Option<f64>,
    fidelity_bound_holds: Option<bool>,
    omega1: Option<f64>,
    eps_tilde: Option<f64>,
    dyson_remainders: Option<Vec<f64>>,
    /// `||E1^dagger V(1) E0 e^{iT int E0} - V^[0]||`.
    holonomy_deviation: Option<f64>,
    holonomy_deviation_adiabatic: Option<f64>,
    error: Option<Failure>,
}

#[derive(Serialize)]
struct PropagationRecord {
    model: ModelSpec,
    path: PathSpec,
    dim: usize,
    eps: f64,
    eps_frobenius: f64,
    eps_tilde_metric: f64,
    holonomy: Option<Vec<Vec<[f64; 2]>>>,
    holonomy_error: Option<Failure>,
    runs: Vec<TimeRecord>,
    /// Least-squares slope of `ln delta` against `ln T` over the converged runs.
    slope: Option<f64>,
}

fn build_schedule(config: &RunConfig, model: &dyn HamiltonianModel) -> Result<Box<dyn Schedule>> {
    let spec = config.model()?;
    let (def_from, def_to) = spec.default_endpoints()?;
    Ok(match &config.path {
        PathSpec::Linear { from, to } => Box::new(LinearSchedule::new(
            from.clone().unwrap_or(def_from),
            to.clone().unwrap_or(def_to),
        )?),
        PathSpec::Geodesic { from, to } => {
            let from = from.clone().unwrap_or(def_from);
            let to = to.clone().unwrap_or(def_to);
            Box::new(dense_geodesic(model, &from, &to, &config.solver)?.path)
        }
        PathSpec::File { file } => Box::new(io::path_from_table(&CsvTable::read(file)?)?),
    })
}

fn cmd_propagate(config: &RunConfig) -> Result<Outcome> {
    let spec = config.model()?;
    let model = spec.hamiltonian()?;
    let model: &dyn HamiltonianModel = model.as_ref();
    let schedule = build_schedule(config, model)?;
    let schedule: &dyn Schedule = schedule.as_ref();
    if config.times.is_empty() {
        return Err(Error::InvalidInput("propagate needs at least one total time".into()));
    }
    let solver = &config.solver;
    let acc = metric::path_error_functional(model, schedule, &solver.spectral, &solver.path_quadrature)?;
    let n = model.dim() as f64;
    let (holonomy, holonomy_error) = match dynamics::wilczek_zee_holonomy(model, schedule, solver.holonomy_mesh, &solver.spectral) {
        Ok(h) => (Some(h), None),
        Err(e) => (None, Some(Failure::new("holonomy", &e))),
    };

    let exec = config.execution();
    let runs = sweep::map_slice(exec, &config.times, |&t| -> Result<(TimeRecord, CsvTable)> {
        let fixed = solver.dyson_mesh > 0;
        let mut mesh = if fixed { solver.dyson_mesh } else { auto_dyson_mesh(t) };
        let (result, ladder) = loop {
            let popts = PropagationOptions { record: mesh, execution: exec, ..solver.propagation };
            let result = dynamics::run(model, schedule, t, &popts)?;
            match dynamics::dyson_ladder_from(model, schedule, &result, solver.dyson_depth, &solver.spectral) {
                Ok(ladder) => break (result, ladder),
                // an automatic mesh is refined until the first iterate settles
                Err(Error::MeshTooCoarse(_)) if !fixed && mesh < MAX_AUTO_DYSON_MESH => mesh *= 2,
                Err(e) => return Err(e),
            }
        };
        let fidelity = result.fidelity();
        let mut table = CsvTable::new(["s", "fidelity", "fidelity_bound", "deviation", "eps", "eps_tilde", "omega1"]);
        table.comment(format!("model: {}", spec.describe()));
        table.comment(format!("T: {}", io::fmt17(t)));
        let mut bound_holds = true;
        for (k, s) in result.s.iter().enumerate() {
            let eps = acc.eps_at(*s);
            let bound = 1.0 - eps / n.sqrt();
            bound_holds &= fidelity[k] >= bound - 1e-9 && fidelity[k] <= 1.0 + 1e-12;
            let omega1 = ladder.norms.get(1).map(|v| v[k]).unwrap_or(f64::NAN);
            table.push(vec![*s, fidelity[k], bound, result.deviation[k], eps, ladder.eps_tilde[k], omega1])?;
        }
        let (hol_dev, hol_dev_ad) = match &holonomy {
            Some(h) if h.matrix.nrows() > 0 => (
                Some(crate::linalg::op_norm(&(h.ground_block(&result.v[result.v.len() - 1], t) - &h.matrix))),
                Some(crate::linalg::op_norm(&(h.ground_block(&result.v_ad[result.v_ad.len() - 1], t) - &h.matrix))),
            ),
            _ => (None, None),
        };
        let record = TimeRecord {
            total_time: t,
            file: None,
            steps: Some(result.steps),
            steps_adiabatic: Some(result.steps_adiabatic),
            error_estimate: Some(result.error_estimate),
            delta: Some(result.delta),
            delta_frobenius: Some(result.delta_frobenius),
            fidelity_end: fidelity.last().copied(),
            fidelity_bound_holds: Some(bound_holds),
            omega1: Some(ladder.delta1()),
            eps_tilde: Some(ladder.eps_tilde_total()),
            dyson_remainders: Some(ladder.remainders.clone()),
            holonomy_deviation: hol_dev,
            holonomy_deviation_adiabatic: hol_dev_ad,
            error: None,
        };
        Ok((record, table))
    });

    let mut out = Outcome::default();
    let mut records = Vec::new();
    let mut slope_points = Vec::new();
    for (t, res) in config.times.iter().zip(runs) {
        match res {
            Ok((mut record, table)) => {
                let name = format!("propagate_T{t}.csv");
                out.write_csv(&config.out, &name, &table)?;
                record.file = Some(config.out.join(&name));
                if let Some(d) = record.delta {
                    slope_points.push((*t, d));
                    out.summary.push(format!("T={t}: delta {d:.6e}, f(1) {:.12}", record.fidelity_end.unwrap_or(f64::NAN)));
                }
                records.push(record);
            }
            Err(e) => {
                let f = Failure::new(format!("propagate T={t}"), &e);
                out.failures.push(f.clone());
                records.push(TimeRecord {
                    total_time: *t,
                    file: None,
                    steps: None,
                    steps_adiabatic: None,
                    error_estimate: None,
                    delta: None,
                    delta_frobenius: None,
                    fidelity_end: None,
                    fidelity_bound_holds: None,
                    omega1: None,
                    eps_tilde: None,
                    dyson_remainders: None,
                    holonomy_deviation: None,
                    holonomy_deviation_adiabatic: None,
                    error: Some(f),
                });
            }
        }
    }
    let slope = scaling::log_log_slope(&slope_points).ok();
    if let Some(s) = slope {
        out.summary.push(format!("log-log slope of delta vs T: {s:.4}"));
    }
    if let Some(f) = &holonomy_error {
        out.failures.push(f.clone());
    }
    let record = PropagationRecord {
        model: spec.clone(),
        path: config.path.clone(),
        dim: model.dim(),
        eps: acc.eps_total,
        eps_frobenius: acc.eps_frobenius,
        eps_tilde_metric: acc.eps_tilde_total,
        holonomy: holonomy.as_ref().map(|h| io::complex_rows(&h.matrix)),
        holonomy_error,
        runs: records,
        slope,
    };
    out.write_json(&config.out, "propagate.json", &record)?;
    Ok(out)
}

fn fit_samples(spec: &FitSpec, seed: u64) -> Result<Vec<(f64, f64)>> {
    let window = spec.effective_window();
    Ok(match spec.quantity {
        FitQuantity::IsingGeodesic => scaling::ising_geodesic_exponent_samples(window, spec.samples),
        FitQuantity::IsingMetric => scaling::ising_metric_divergence_samples(window, spec.samples),
        FitQuantity::Synthetic => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            window
                .log_grid(spec.samples)
                .into_iter()
                .map(|t| (t, t.powf(spec.planted) * (1.0 + spec.noise * rng.gen_range(-1.0..1.0))))
                .collect()
        }
        FitQuantity::Csv => {
            let file = spec.input.as_ref().ok_or_else(|| Error::InvalidInput("csv fit needs an input file".into()))?;
            let table = CsvTable::read(file)?;
            let col = |name: &str| {
                table.column(name).ok_or_else(|| Error::InvalidInput(format!("input has no column '{name}'")))
            };
            let t = col(&spec.t_column)?;
            let y = col(&spec.y_column)?;
            t.into_iter().zip(y).collect()
        }
    })
}

fn cmd_fit(config: &RunConfig) -> Result<Outcome> {
    let spec = config.fit.as_ref().ok_or_else(|| Error::InvalidInput("fit needs a fit specification".into()))?;
    let window = spec.effective_window();
    let samples = fit_samples(spec, config.seed)?;
    let fit = scaling::fit_power_law(&samples, Some(window))?;
    let ising = scaling::CriticalExponents::ising();
    let (label, theory) = match spec.quantity {
        FitQuantity::IsingGeodesic => ("ising geodesic exponent chi", spec.theoretical.or(Some(ising.chi()))),
        FitQuantity::IsingMetric => ("ising metric divergence exponent nu*kappa", spec.theoretical.or(Some(ising.nu_kappa()))),
        FitQuantity::Synthetic => ("synthetic planted exponent", spec.theoretical.or(Some(spec.planted))),
        FitQuantity::Csv => ("csv series exponent", spec.theoretical),
    };
    let report = FitReport::new(label, window, &fit, theory);
    let mut out = Outcome::default();
    out.write_json(&config.out, "fit.json", &report)?;
    let mut table = CsvTable::new(["t", "y"]);
    for (t, y) in samples.iter().filter(|(t, _)| window.contains(*t)) {
        table.push(vec![*t, *y])?;
    }
    out.write_csv(&config.out, "fit_samples.csv", &table)?;
    out.summary.push(format!(
        "{label}: {:.5} +- {:.1e} (r^2 {:.6}){}",
        fit.exponent,
        fit.stderr,
        fit.r_squared,
        theory.map(|t| format!(", theory {t}")).unwrap_or_default()
    ));
    Ok(out)
}

/// Parse arguments, run, report; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let report = |f: &Failure| eprintln!("{}", serde_json::to_string(f).unwrap_or_default());
    let config = match cli.resolve() {
        Ok(c) => c,
        Err(e) => {
            report(&Failure::new("config", &e));
            return 1;
        }
    };
    if cli.dump_config {
        match config.to_json() {
            Ok(text) => {
                println!("{text}");
                return 0;
            }
            Err(e) => {
                report(&Failure::new("config", &e));
                return 1;
            }
        }
    }
    match execute(&config) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            for f in &outcome.failures {
                report(f);
            }
            i32::from(!outcome.failures.is_empty())
        }
        Err(e) => {
            report(&Failure::new(format!("{:?}", config.command).to_lowercase(), &e));
            1
        }
    }
}
