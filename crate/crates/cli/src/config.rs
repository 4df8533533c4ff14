use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;

use sbm_core::assembly::MaterialParams;
use sbm_core::geometry::{Square, TrueDomain};
use sbm_core::harness::{Problem, StudySpec};
use sbm_core::solve::ConditionMode;
use sbm_core::{BcKind, Face};

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl From<sbm_core::SbmError> for ConfigError {
    fn from(e: sbm_core::SbmError) -> Self {
        match e {
            sbm_core::SbmError::Argument(msg) => ConfigError(msg),
            other => ConfigError(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProblemArg {
    Poisson,
    Elasticity,
}

impl From<ProblemArg> for Problem {
    fn from(p: ProblemArg) -> Self {
        match p {
            ProblemArg::Poisson => Problem::Poisson,
            ProblemArg::Elasticity => Problem::Elasticity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CondModeArg {
    Auto,
    Dense,
    Iterative,
}

impl From<CondModeArg> for ConditionMode {
    fn from(m: CondModeArg) -> Self {
        match m {
            CondModeArg::Auto => ConditionMode::Auto,
            CondModeArg::Dense => ConditionMode::DenseSvd,
            CondModeArg::Iterative => ConditionMode::Iterative,
        }
    }
}

/// Contents of a JSON configuration file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub problem: Option<ProblemArg>,
    pub order: Option<usize>,
    pub levels: Option<Vec<usize>>,
    pub rotations: Option<Vec<f64>>,
    pub side: Option<f64>,
    pub center: Option<[f64; 2]>,
    pub young: Option<f64>,
    pub poisson_ratio: Option<f64>,
    pub condition: Option<bool>,
    pub condition_mode: Option<CondModeArg>,
    pub threads: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub verbosity: Option<u8>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("config {}: {e}", path.display())))
    }
}

/// Study flags shared by `study`, `solve` and `diag`. Each overrides the
/// matching key of the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct StudyArgs {
    /// JSON config file; flags given on the command line take precedence
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Model problem [default: poisson]
    #[arg(long, value_enum)]
    pub problem: Option<ProblemArg>,
    /// Polynomial order k, 1 to 5 [default: 1]
    #[arg(long)]
    pub order: Option<usize>,
    /// Background cells per side, comma separated powers of two
    /// [default: 8..128 for k <= 3, 8..64 otherwise]
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub levels: Option<Vec<usize>>,
    /// Grid rotations in degrees, comma separated, within [0, 45]
    /// [default: 0, 4.5, ..., 45]
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    pub rotations: Option<Vec<f64>>,
    /// Side of the square domain [default: 0.43]
    #[arg(long)]
    pub side: Option<f64>,
    /// Centre of the square domain as x,y [default: 0.5,0.5]
    #[arg(long, value_delimiter = ',', value_name = "X,Y")]
    pub center: Option<Vec<f64>>,
    /// Young's modulus for elasticity [default: 1e10]
    #[arg(long)]
    pub young: Option<f64>,
    /// Poisson's ratio for elasticity [default: 0.3]
    #[arg(long)]
    pub poisson_ratio: Option<f64>,
    /// Estimate the 2-norm condition number of every system
    #[arg(long)]
    pub condition: bool,
    /// Condition estimator [default: auto]
    #[arg(long, value_enum)]
    pub condition_mode: Option<CondModeArg>,
    /// Worker threads; 1 forces serial execution [default: all cores]
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory [default: $SBM_OUTPUT_DIR, else the current directory]
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub spec: StudySpec,
    pub output_dir: PathBuf,
    pub verbosity: Option<u8>,
}

impl StudyArgs {
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let problem: Problem = self
            .problem
            .or(file.problem)
            .unwrap_or(ProblemArg::Poisson)
            .into();
        let order = self.order.or(file.order).unwrap_or(1);
        let mut spec = StudySpec::benchmark(problem, order);
        if let Some(levels) = self.levels.clone().or(file.levels) {
            spec.levels = levels;
        }
        if let Some(rotations) = self.rotations.clone().or(file.rotations) {
            spec.rotations = rotations;
        }
        let side = self.side.or(file.side);
        let center = match &self.center {
            Some(c) if c.len() == 2 => Some([c[0], c[1]]),
            Some(_) => return Err(ConfigError("center needs exactly two coordinates".into())),
            None => file.center,
        };
        if side.is_some() || center.is_some() {
            let sq = Square::new(center.unwrap_or([0.5, 0.5]), side.unwrap_or(0.43))?;
            spec.domain = TrueDomain::Square(match problem {
                Problem::Poisson => sq,
                Problem::Elasticity => sq.with_face_bc(Face::Top, BcKind::Neumann),
            });
        }
        let young = self.young.or(file.young);
        let nu = self.poisson_ratio.or(file.poisson_ratio);
        if young.is_some() || nu.is_some() {
            spec.material = MaterialParams::new(
                young.unwrap_or(spec.material.young),
                nu.unwrap_or(spec.material.poisson),
            )?;
        }
        spec.compute_condition = self.condition || file.condition.unwrap_or(false);
        if let Some(mode) = self.condition_mode.or(file.condition_mode) {
            spec.condition_mode = mode.into();
        }
        spec.threads = self.threads.or(file.threads);
        spec.validate()?;
        let output_dir = self
            .output_dir
            .clone()
            .or(file.output_dir)
            .or_else(|| std::env::var_os("SBM_OUTPUT_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Resolved {
            spec,
            output_dir,
            verbosity: file.verbosity,
        })
    }
}
