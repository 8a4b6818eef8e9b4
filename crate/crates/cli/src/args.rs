//! Command-line flags. Every flag is optional and, when given, overrides the
//! config file value.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use robust_sparse::verify::ConcentrationKind;

use crate::config::{AdversaryConfig, Arm, CommandKind, ExperimentConfig, ModelName, Suite};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "robust-sparse", version, about = "Robust sparse mean estimation and sparse PCA experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
    /// JSON experiment config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: ROBUST_SPARSE_THREADS, else logical cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for result files.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Print the resolved config and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Generate a sample CSV and its ground-truth sidecar.
    Gen(GenArgs),
    /// Robust sparse mean of an input CSV.
    Mean(MeanArgs),
    /// Robust sparse PCA detection on an input CSV.
    SpcaDetect(SpcaArgs),
    /// Robust sparse PCA recovery on an input CSV.
    SpcaRecover(SpcaArgs),
    /// Monte-Carlo benchmark suite.
    Bench(BenchArgs),
    /// Concentration sweep on clean isotropic data.
    Conc(ConcArgs),
}

#[derive(Debug, Args, Default)]
pub struct SolverArgs {
    #[arg(long)]
    pub eta_constant: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub dual_iterations: Option<usize>,
    #[arg(long)]
    pub subgradient_iterations: Option<usize>,
    #[arg(long)]
    pub subgradient_restarts: Option<usize>,
    #[arg(long)]
    pub ellipsoid_iterations: Option<usize>,
    /// Run the mean estimator above its guaranteed ε range.
    #[arg(long)]
    pub allow_large_epsilon: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub model: Option<ModelName>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Entry magnitude of the planted sparse mean.
    #[arg(long)]
    pub magnitude: Option<f64>,
    /// none | sparse-shift:MAG[:SUPPORT] | variance-spike:SCALE[:SUPPORT] | dense:RADIUS | decoy:RHO
    #[arg(long)]
    pub adversary: Option<AdversaryConfig>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV path (default: OUT_DIR/data.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MeanArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct SpcaArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub suite: Option<Suite>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated ε grid (mean-vs-eps, recover) or the single ε (detect).
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Comma-separated ρ values.
    #[arg(long, value_delimiter = ',')]
    pub rho: Option<Vec<f64>>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub magnitude: Option<f64>,
    #[arg(long)]
    pub adversary: Option<AdversaryConfig>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub arms: Option<Vec<Arm>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct ConcArgs {
    /// uk-uniform | xk-uniform | wk-uniform | uk-adversarial | xk-adversarial
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<ConcentrationKind>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// ε for the adversarial-weight kinds.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Comma-separated, strictly increasing sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

fn parse_kind(s: &str) -> Result<ConcentrationKind, String> {
    ConcentrationKind::parse(s).map_err(|e| e.to_string())
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl SolverArgs {
    fn apply(self, cfg: &mut ExperimentConfig) {
        let s = &mut cfg.solver;
        set(&mut s.eta_constant, self.eta_constant);
        set(&mut s.tolerance, self.tolerance);
        set(&mut s.dual_iterations, self.dual_iterations);
        set(&mut s.subgradient_iterations, self.subgradient_iterations);
        set(&mut s.subgradient_restarts, self.subgradient_restarts);
        set(&mut s.ellipsoid_iterations, self.ellipsoid_iterations);
        if self.allow_large_epsilon {
            s.allow_large_epsilon = true;
        }
    }
}

impl Cli {
    /// Defaults, then the config file, then flags.
    pub fn resolve(self) -> Result<(ExperimentConfig, usize), CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        set(&mut cfg.out_dir, self.out_dir);
        match self.command {
            Cmd::Gen(a) => {
                cfg.command = CommandKind::Gen;
                set(&mut cfg.model, a.model);
                set(&mut cfg.d, a.d);
                set(&mut cfg.k, a.k);
                set(&mut cfg.n, a.n);
                set(&mut cfg.epsilon, a.eps);
                set(&mut cfg.rho, a.rho);
                set(&mut cfg.magnitude, a.magnitude);
                set(&mut cfg.adversary, a.adversary);
                set(&mut cfg.seed, a.seed);
                if a.out.is_some() {
                    cfg.output = a.out;
                }
            }
            Cmd::Mean(a) => {
                cfg.command = CommandKind::Mean;
                if a.input.is_some() {
                    cfg.input = a.input;
                }
                set(&mut cfg.k, a.k);
                set(&mut cfg.epsilon, a.eps);
                set(&mut cfg.delta, a.delta);
                a.solver.apply(&mut cfg);
            }
            Cmd::SpcaDetect(a) => {
                cfg.command = CommandKind::SpcaDetect;
                apply_spca(a, &mut cfg);
            }
            Cmd::SpcaRecover(a) => {
                cfg.command = CommandKind::SpcaRecover;
                apply_spca(a, &mut cfg);
            }
            Cmd::Bench(a) => {
                cfg.command = CommandKind::Bench;
                set(&mut cfg.suite, a.suite);
                set(&mut cfg.d, a.d);
                set(&mut cfg.k, a.k);
                set(&mut cfg.n, a.n);
                if let Some(eps) = a.eps {
                    if cfg.suite == Suite::Detect {
                        if eps.len() != 1 {
                            return Err(CliError::Config {
                                field: "eps".into(),
                                message: "the detect suite takes a single ε".into(),
                            });
                        }
                        cfg.epsilon = eps[0];
                    } else {
                        cfg.eps_grid = eps;
                    }
                }
                if let Some(rho) = a.rho {
                    if cfg.suite == Suite::Detect {
                        cfg.rho_grid = rho;
                    } else if rho.len() == 1 {
                        cfg.rho = rho[0];
                    } else {
                        return Err(CliError::Config {
                            field: "rho".into(),
                            message: "only the detect suite sweeps ρ".into(),
                        });
                    }
                }
                set(&mut cfg.delta, a.delta);
                set(&mut cfg.magnitude, a.magnitude);
                set(&mut cfg.adversary, a.adversary);
                set(&mut cfg.arms, a.arms);
                set(&mut cfg.trials, a.trials);
                set(&mut cfg.seed, a.seed);
                a.solver.apply(&mut cfg);
            }
            Cmd::Conc(a) => {
                cfg.command = CommandKind::Conc;
                set(&mut cfg.conc_kind, a.kind);
                set(&mut cfg.d, a.d);
                set(&mut cfg.k, a.k);
                set(&mut cfg.epsilon, a.eps);
                set(&mut cfg.n_grid, a.n_grid);
                set(&mut cfg.trials, a.trials);
                set(&mut cfg.seed, a.seed);
                a.solver.apply(&mut cfg);
            }
        }
        cfg.validate()?;
        let threads = match self.threads {
            Some(t) => t,
            None => threads_from_env()?,
        };
        if threads == 0 {
            return Err(CliError::Config { field: "threads".into(), message: "must be >= 1".into() });
        }
        Ok((cfg, threads))
    }
}

fn apply_spca(a: SpcaArgs, cfg: &mut ExperimentConfig) {
    if a.input.is_some() {
        cfg.input = a.input;
    }
    set(&mut cfg.k, a.k);
    set(&mut cfg.epsilon, a.eps);
    set(&mut cfg.rho, a.rho);
    a.solver.apply(cfg);
}

/// `ROBUST_SPARSE_THREADS`, else the number of logical cores.
pub fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var("ROBUST_SPARSE_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| CliError::Config {
            field: "ROBUST_SPARSE_THREADS".into(),
            message: format!("not a thread count: `{v}`"),
        }),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<(ExperimentConfig, usize), CliError> {
        Cli::try_parse_from(std::iter::once("robust-sparse").chain(args.iter().copied())).unwrap().resolve()
    }

    #[test]
    fn gen_flags_land_in_config() {
        let (cfg, _) = parse(&[
            "gen", "--model", "sparse-mean", "--d", "50", "--k", "5", "--n", "2000", "--eps", "0.05",
            "--adversary", "sparse-shift:1.0", "--seed", "7", "--threads", "2",
        ])
        .unwrap();
        assert_eq!(cfg.command, CommandKind::Gen);
        assert_eq!((cfg.d, cfg.k, cfg.n, cfg.seed), (50, 5, 2000, 7));
        assert_eq!(cfg.adversary, AdversaryConfig::SparseShift { magnitude: 1.0, support: None });
    }

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"d": 30, "k": 4, "trials": 3, "solver": {"eta_constant": 1.5}}"#).unwrap();
        let p = path.to_str().unwrap();
        let (cfg, threads) =
            parse(&["bench", "--config", p, "--k", "2", "--eps", "0.01,0.02", "--threads", "1"]).unwrap();
        assert_eq!(threads, 1);
        assert_eq!(cfg.d, 30);
        assert_eq!(cfg.k, 2);
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.eps_grid, vec![0.01, 0.02]);
        assert_eq!(cfg.solver.eta_constant, 1.5);
        assert_eq!(cfg.n, ExperimentConfig::default().n);
    }

    #[test]
    fn detect_suite_takes_rho_grid_and_single_eps() {
        let (cfg, _) = parse(&["bench", "--suite", "detect", "--eps", "0.05", "--rho", "0.2,0.5,1", "--threads", "1"])
            .unwrap();
        assert_eq!(cfg.epsilon, 0.05);
        assert_eq!(cfg.rhos(), vec![0.2, 0.5, 1.0]);
        assert!(parse(&["bench", "--suite", "detect", "--eps", "0.05,0.1", "--threads", "1"]).is_err());
    }

    #[test]
    fn invalid_values_are_rejected_at_parse_time() {
        assert!(matches!(
            parse(&["gen", "--k", "0", "--threads", "1"]),
            Err(CliError::Config { field, .. }) if field == "k"
        ));
        assert!(Cli::try_parse_from(["robust-sparse", "gen", "--adversary", "gremlin:1"]).is_err());
        assert!(matches!(parse(&["mean", "--threads", "1"]), Err(CliError::Config { field, .. }) if field == "input"));
    }
}
