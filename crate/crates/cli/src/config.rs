//! Experiment configuration: one JSON document describing a run.
//!
//! Resolution order is defaults, then the config file, then command-line
//! flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use robust_sparse::verify::ConcentrationKind;
use robust_sparse::{Adversary, ModelSpec, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Gen,
    Mean,
    SpcaDetect,
    SpcaRecover,
    Bench,
    Conc,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Gen => "gen",
            CommandKind::Mean => "mean",
            CommandKind::SpcaDetect => "spca-detect",
            CommandKind::SpcaRecover => "spca-recover",
            CommandKind::Bench => "bench",
            CommandKind::Conc => "conc",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    SparseMean,
    Spiked,
    Isotropic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Robust vs thresholded-mean error across ε.
    MeanVsEps,
    /// Robust vs plain detection across ρ, both arms.
    Detect,
    /// Robust vs plain ℓ1-SDP recovery across ε.
    Recover,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::MeanVsEps => "mean-vs-eps",
            Suite::Detect => "detect",
            Suite::Recover => "recover",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    Isotropic,
    Spiked,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Isotropic => "isotropic",
            Arm::Spiked => "spiked",
        }
    }
}

/// Adversary as written on the command line, e.g. `sparse-shift:1.0` or
/// `variance-spike:10:3`. Support sizes default to `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AdversaryConfig {
    None,
    SparseShift { magnitude: f64, support: Option<usize> },
    VarianceSpike { scale: f64, support: Option<usize> },
    Dense { radius: f64 },
    Decoy { rho_decoy: f64 },
}

impl AdversaryConfig {
    pub fn resolve(&self, k: usize) -> Adversary {
        match *self {
            AdversaryConfig::None => Adversary::None,
            AdversaryConfig::SparseShift { magnitude, support } => {
                Adversary::SparseShift { support: support.unwrap_or(k), magnitude }
            }
            AdversaryConfig::VarianceSpike { scale, support } => {
                Adversary::SparseVarianceSpike { support: support.unwrap_or(k), scale }
            }
            AdversaryConfig::Dense { radius } => Adversary::DenseOutliers { radius },
            AdversaryConfig::Decoy { rho_decoy } => Adversary::OrthogonalDecoy { rho_decoy },
        }
    }
}

impl fmt::Display for AdversaryConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let support = |s: &Option<usize>| s.map(|s| format!(":{s}")).unwrap_or_default();
        match self {
            AdversaryConfig::None => write!(f, "none"),
            AdversaryConfig::SparseShift { magnitude, support: s } => write!(f, "sparse-shift:{magnitude}{}", support(s)),
            AdversaryConfig::VarianceSpike { scale, support: s } => write!(f, "variance-spike:{scale}{}", support(s)),
            AdversaryConfig::Dense { radius } => write!(f, "dense:{radius}"),
            AdversaryConfig::Decoy { rho_decoy } => write!(f, "decoy:{rho_decoy}"),
        }
    }
}

impl FromStr for AdversaryConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64, String> {
            let raw = parts.get(i).ok_or_else(|| format!("adversary `{s}` is missing a parameter"))?;
            raw.parse::<f64>().map_err(|_| format!("adversary `{s}`: `{raw}` is not a number"))
        };
        let support = || -> Result<Option<usize>, String> {
            parts
                .get(2)
                .map(|raw| raw.parse::<usize>().map_err(|_| format!("adversary `{s}`: bad support `{raw}`")))
                .transpose()
        };
        let max_parts = match parts[0] {
            "none" => 1,
            "sparse-shift" | "variance-spike" => 3,
            _ => 2,
        };
        if parts.len() > max_parts {
            return Err(format!("adversary `{s}` has too many parameters"));
        }
        match parts[0] {
            "none" => Ok(AdversaryConfig::None),
            "sparse-shift" => Ok(AdversaryConfig::SparseShift { magnitude: num(1)?, support: support()? }),
            "variance-spike" => Ok(AdversaryConfig::VarianceSpike { scale: num(1)?, support: support()? }),
            "dense" => Ok(AdversaryConfig::Dense { radius: num(1)? }),
            "decoy" => Ok(AdversaryConfig::Decoy { rho_decoy: num(1)? }),
            other => Err(format!(
                "unknown adversary `{other}` (expected none, sparse-shift, variance-spike, dense, decoy)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub model: ModelName,
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub epsilon: f64,
    pub rho: f64,
    pub delta: f64,
    /// Entry magnitude of the planted sparse mean.
    pub magnitude: f64,
    pub adversary: AdversaryConfig,
    pub solver: SolverConfig,
    pub trials: usize,
    pub seed: u64,
    pub input: Option<PathBuf>,
    /// Sample CSV written by `gen`.
    pub output: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub suite: Suite,
    pub eps_grid: Vec<f64>,
    pub rho_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub arms: Vec<Arm>,
    pub conc_kind: ConcentrationKind,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: CommandKind::Gen,
            model: ModelName::SparseMean,
            d: 50,
            k: 5,
            n: 2000,
            epsilon: 0.0,
            rho: 1.0,
            delta: 0.01,
            magnitude: 1.0,
            adversary: AdversaryConfig::None,
            solver: SolverConfig::default(),
            trials: 20,
            seed: 0,
            input: None,
            output: None,
            out_dir: PathBuf::from("."),
            suite: Suite::MeanVsEps,
            eps_grid: vec![0.01, 0.02, 0.05, 0.1],
            rho_grid: Vec::new(),
            n_grid: vec![250, 1000, 4000, 16000],
            arms: vec![Arm::Isotropic, Arm::Spiked],
            conc_kind: ConcentrationKind::UkUniform,
        }
    }
}

fn field(name: &str, message: impl Into<String>) -> CliError {
    CliError::Config { field: name.to_string(), message: message.into() }
}

fn check_fraction(name: &str, x: f64, upper_open: f64) -> Result<(), CliError> {
    if !(x.is_finite() && (0.0..upper_open).contains(&x)) {
        return Err(field(name, format!("must lie in [0, {upper_open}), got {x}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| CliError::ConfigFile { line: e.line(), column: e.column(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn model_spec(&self, rho: f64) -> ModelSpec {
        match self.model {
            ModelName::SparseMean => ModelSpec::SparseMean { mu: None, magnitude: self.magnitude },
            ModelName::Spiked => ModelSpec::Spiked { rho, v: None },
            ModelName::Isotropic => ModelSpec::Isotropic,
        }
    }

    /// The ρ values a detect bench sweeps: `rho_grid`, or `[rho]` when empty.
    pub fn rhos(&self) -> Vec<f64> {
        if self.rho_grid.is_empty() {
            vec![self.rho]
        } else {
            self.rho_grid.clone()
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.d == 0 {
            return Err(field("d", "must be >= 1"));
        }
        // Input-driven commands take d from the file.
        let d_known = !matches!(self.command, CommandKind::Mean | CommandKind::SpcaDetect | CommandKind::SpcaRecover);
        if self.k == 0 || (d_known && self.k > self.d) {
            return Err(field("k", format!("must lie in [1, d = {}], got {}", self.d, self.k)));
        }
        if self.n == 0 {
            return Err(field("n", "must be >= 1"));
        }
        check_fraction("epsilon", self.epsilon, 0.5)?;
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(field("rho", format!("must be finite and > 0, got {}", self.rho)));
        }
        if !(self.delta.is_finite() && self.delta > 0.0 && self.delta < 1.0) {
            return Err(field("delta", format!("must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.magnitude.is_finite() && self.magnitude >= 0.0) {
            return Err(field("magnitude", format!("must be finite and >= 0, got {}", self.magnitude)));
        }
        if self.trials == 0 {
            return Err(field("trials", "must be >= 1"));
        }
        self.adversary.resolve(self.k).validate().map_err(|e| field("adversary", e.to_string()))?;
        self.solver.validate().map_err(|e| field("solver", e.to_string()))?;
        for (i, &e) in self.eps_grid.iter().enumerate() {
            check_fraction(&format!("eps_grid[{i}]"), e, 0.5)?;
        }
        for (i, &r) in self.rho_grid.iter().enumerate() {
            if !(r.is_finite() && r > 0.0) {
                return Err(field(&format!("rho_grid[{i}]"), format!("must be finite and > 0, got {r}")));
            }
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) || self.n_grid.contains(&0) {
            return Err(field("n_grid", "must be positive and strictly increasing"));
        }
        if self.arms.is_empty() {
            return Err(field("arms", "must name at least one arm"));
        }
        match self.command {
            CommandKind::Mean | CommandKind::SpcaDetect | CommandKind::SpcaRecover if self.input.is_none() => {
                Err(field("input", format!("`{}` needs an input CSV", self.command.name())))
            }
            CommandKind::Bench if self.suite != Suite::Detect && self.eps_grid.is_empty() => {
                Err(field("eps_grid", "must not be empty"))
            }
            CommandKind::Conc if self.n_grid.is_empty() => Err(field("n_grid", "must not be empty")),
            _ => Ok(()),
        }
    }
}
