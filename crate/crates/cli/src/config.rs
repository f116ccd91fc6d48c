//! Run configuration: a TOML file, overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use gptw::curve::{parse_p_list, SweepOptions};
use gptw::grid::TorusGrid;
use gptw::kernels::KernelSpec;
use gptw::kpi::PetviashviliConfig;
use gptw::minimizer::SolveConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Subcommand)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Minimize the energy at one momentum.
    Solve,
    /// Dispersion curve over a list of momenta.
    Sweep,
    /// KP-I ground state and its action.
    Kp,
    /// Kernel integrals against their closed forms.
    Kernels,
    /// Certificates for a stored field.
    Diagnose,
    /// Small-momentum expansion of the dispersion curve.
    VerifyAsymptotics,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Kp => "kp",
            Command::Kernels => "kernels",
            Command::Diagnose => "diagnose",
            Command::VerifyAsymptotics => "verify-asymptotics",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    /// Half period in units of pi.
    pub n: f64,
    /// Points per axis.
    pub size: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            dim: 2,
            n: 16.0,
            size: 256,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<TorusGrid, ConfigError> {
        TorusGrid::torus(self.dim, &vec![self.size; self.dim], self.n).map_err(|e| invalid(format!("grid: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KpConfig {
    pub size: usize,
    /// Full box period.
    pub period: f64,
    /// Also solve on boxes 1.5 and 2 times larger and extrapolate.
    pub extrapolate: bool,
    pub petviashvili: PetviashviliConfig,
}

impl Default for KpConfig {
    fn default() -> Self {
        KpConfig {
            size: gptw::kpi::DEFAULT_SIZE,
            period: gptw::kpi::DEFAULT_PERIOD,
            extrapolate: true,
            petviashvili: PetviashviliConfig::default(),
        }
    }
}

impl KpConfig {
    /// `(points, period)` for every box, the base box first.
    pub fn boxes(&self) -> Vec<(usize, f64)> {
        if self.extrapolate {
            vec![
                (self.size, self.period),
                (self.size * 3 / 2, self.period * 1.5),
                (self.size * 2, self.period * 2.0),
            ]
        } else {
            vec![(self.size, self.period)]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct KernelsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Also run the unreduced integral.
    pub full: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Speed; read from the sidecar or estimated when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticsConfig {
    /// Momenta of the scaled sweep used for the fit.
    pub p_fit: String,
    /// Momenta of the comparison-map bound.
    pub p_bound: String,
}

impl Default for AsymptoticsConfig {
    fn default() -> Self {
        AsymptoticsConfig {
            p_fit: "0.02,0.04,0.06,0.08,0.1,0.15,0.2,0.25,0.3".into(),
            p_bound: "0.02:0.02:0.1".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FormatConfig {
    /// Write field snapshots next to the reports.
    pub snapshots: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<Command>,
    pub output: PathBuf,
    /// Single momentum, comma list or `start:step:stop`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<String>,
    pub grid: GridConfig,
    pub solver: SolveConfig,
    pub sweep: SweepOptions,
    pub kp: KpConfig,
    pub kernels: KernelsConfig,
    pub diagnose: DiagnoseConfig,
    pub asymptotics: AsymptoticsConfig,
    pub format: FormatConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            subcommand: None,
            output: PathBuf::from("out"),
            p: None,
            grid: GridConfig::default(),
            solver: SolveConfig::default(),
            sweep: SweepOptions::default(),
            kp: KpConfig::default(),
            kernels: KernelsConfig::default(),
            diagnose: DiagnoseConfig::default(),
            asymptotics: AsymptoticsConfig::default(),
            format: FormatConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn command(&self) -> Result<Command, ConfigError> {
        self.subcommand.ok_or_else(|| invalid("no subcommand given on the command line or in the config file"))
    }

    pub fn p_list(&self) -> Result<Vec<f64>, ConfigError> {
        let spec = self.p.as_deref().ok_or_else(|| invalid("a momentum list is required (--p)"))?;
        let list = parse_p_list(spec).map_err(invalid)?;
        if list.is_empty() || list.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(invalid(format!("momenta must be positive: `{spec}`")));
        }
        Ok(list)
    }

    /// Everything that can be checked without running a solve.
    pub fn validate(&self) -> Result<Command, ConfigError> {
        let cmd = self.command()?;
        self.solver.validate().map_err(|e| invalid(e.to_string()))?;
        match cmd {
            Command::Solve => {
                self.grid.build()?;
                if self.p_list()?.len() != 1 {
                    return Err(invalid("solve takes a single momentum"));
                }
            }
            Command::Sweep => {
                self.grid.build()?;
                let list = self.p_list()?;
                if list.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("momenta must increase"));
                }
            }
            Command::Kp | Command::VerifyAsymptotics => {
                if self.kp.size < 32 || !self.kp.size.is_multiple_of(2) {
                    return Err(invalid("kp.size must be even and at least 32"));
                }
                if !(self.kp.period > 0.0 && self.kp.period.is_finite()) {
                    return Err(invalid("kp.period must be positive"));
                }
                if cmd == Command::VerifyAsymptotics {
                    for spec in [&self.asymptotics.p_fit, &self.asymptotics.p_bound] {
                        let list = parse_p_list(spec).map_err(invalid)?;
                        if list.is_empty() || list.iter().any(|p| p.is_nan() || *p <= 0.0) {
                            return Err(invalid(format!("momenta must be positive: `{spec}`")));
                        }
                    }
                }
            }
            Command::Kernels => {
                let c = self.kernels.c.ok_or_else(|| invalid("kernels needs --c"))?;
                KernelSpec::new(self.grid.dim, c).map_err(|e| invalid(e.to_string()))?;
            }
            Command::Diagnose => {
                let input = self.diagnose.input.as_ref().ok_or_else(|| invalid("diagnose needs --input"))?;
                if !input.is_file() {
                    return Err(invalid(format!("{}: no such snapshot", input.display())));
                }
            }
        }
        Ok(cmd)
    }
}

#[derive(Debug, Parser)]
#[command(name = "gptw", version, about = "Gross-Pitaevskii travelling waves on periodic tori")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub flags: Flags,
}

/// Flags override the corresponding config file values.
#[derive(Debug, Default, Args)]
pub struct Flags {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Half period in units of pi.
    #[arg(long, global = true)]
    pub n: Option<f64>,
    /// Points per axis.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Momentum, comma list or start:step:stop.
    #[arg(long, global = true)]
    pub p: Option<String>,
    /// Speed for `kernels` and `diagnose`.
    #[arg(long, global = true)]
    pub c: Option<f64>,
    /// Snapshot for `diagnose`.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    #[arg(long, global = true)]
    pub grad_tol: Option<f64>,
    #[arg(long, global = true)]
    pub random_seed: Option<u64>,
    #[arg(long, global = true)]
    pub seed_noise: Option<f64>,
    /// Sweep without warm starts.
    #[arg(long, global = true)]
    pub no_warm_start: bool,
    #[arg(long, global = true)]
    pub kp_size: Option<usize>,
    #[arg(long, global = true)]
    pub kp_period: Option<f64>,
    /// Single KP box, no extrapolation.
    #[arg(long, global = true)]
    pub no_extrapolate: bool,
    /// Unreduced kernel integral as well.
    #[arg(long, global = true)]
    pub full: bool,
    /// Write field snapshots.
    #[arg(long, global = true)]
    pub snapshots: bool,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
}

impl Cli {
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let f = &self.flags;
        let mut cfg = match &f.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if self.command.is_some() {
            cfg.subcommand = self.command;
        }
        if let Some(v) = &f.out {
            cfg.output = v.clone();
        }
        if let Some(v) = f.dim {
            cfg.grid.dim = v;
        }
        if let Some(v) = f.n {
            cfg.grid.n = v;
        }
        if let Some(v) = f.grid {
            cfg.grid.size = v;
        }
        if let Some(v) = &f.p {
            cfg.p = Some(v.clone());
        }
        if let Some(v) = f.c {
            cfg.kernels.c = Some(v);
            cfg.diagnose.c = Some(v);
        }
        if let Some(v) = &f.input {
            cfg.diagnose.input = Some(v.clone());
        }
        if let Some(v) = f.max_iters {
            cfg.solver.max_iters = v;
        }
        if let Some(v) = f.grad_tol {
            cfg.solver.grad_tol = v;
        }
        if let Some(v) = f.random_seed {
            cfg.solver.random_seed = v;
        }
        if let Some(v) = f.seed_noise {
            cfg.solver.seed_noise = v;
        }
        if f.no_warm_start {
            cfg.sweep.warm_start = false;
        }
        if let Some(v) = f.kp_size {
            cfg.kp.size = v;
        }
        if let Some(v) = f.kp_period {
            cfg.kp.period = v;
        }
        if f.no_extrapolate {
            cfg.kp.extrapolate = false;
        }
        if f.full {
            cfg.kernels.full = true;
        }
        if f.snapshots {
            cfg.format.snapshots = true;
        }
        Ok(cfg)
    }
}
