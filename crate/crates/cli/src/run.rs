use std::fs;
use std::path::{Path, PathBuf};

use robust_sparse::io::{load_sample_set, save_sample_set, sidecar_path};
use robust_sparse::mean::recover_robust_smean;
use robust_sparse::spca::{spca_detect, spca_recover, Verdict};
use robust_sparse::{generate_instance, loss_subspace, CorruptionSpec, GroundTruth, ModelKind, SampleSet};
use serde_json::{json, Value};

use crate::bench::{self, BenchReport};
use crate::config::{CommandKind, ExperimentConfig, Suite};
use crate::error::CliError;
use crate::plot::render_svg;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Result of one command.
#[derive(Debug)]
pub struct Outcome {
    /// 0 on success, 2 when any verdict was indeterminate.
    pub exit_code: u8,
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.display().to_string(), e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Io(path.display().to_string(), e))
}

/// Envelope every JSON artifact is wrapped in.
fn provenance(cfg: &ExperimentConfig, body: Value) -> Value {
    json!({
        "tool": "robust-sparse",
        "version": VERSION,
        "library_version": robust_sparse::VERSION,
        "config": cfg,
        "result": body,
    })
}

fn write_json(path: &Path, cfg: &ExperimentConfig, body: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(&provenance(cfg, body.clone())).expect("json value serializes");
    text.push('\n');
    write(path, text.as_bytes())
}

fn load_input(cfg: &ExperimentConfig) -> Result<SampleSet, CliError> {
    let path = cfg.input.as_deref().expect("validated");
    Ok(load_sample_set(path)?.0)
}

fn truth_mean(gt: Option<&GroundTruth>) -> Option<Vec<f64>> {
    match &gt?.model {
        ModelKind::SparseMean { mu, .. } => Some(mu.clone()),
        _ => None,
    }
}

fn truth_spike(gt: Option<&GroundTruth>) -> Option<Vec<f64>> {
    match &gt?.model {
        ModelKind::Spiked { v, .. } => Some(v.clone()),
        _ => None,
    }
}

/// Runs the configured command with `threads` workers for trial-level work.
pub fn run(cfg: &ExperimentConfig, threads: usize) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let dir = &cfg.out_dir;
    match cfg.command {
        CommandKind::Gen => {
            let csv = cfg.output.clone().unwrap_or_else(|| dir.join("data.csv"));
            let spec = CorruptionSpec::new(cfg.epsilon, cfg.adversary.resolve(cfg.k), cfg.seed);
            let s = generate_instance(&cfg.model_spec(cfg.rho), cfg.d, cfg.k, cfg.n, &spec)?;
            if let Some(parent) = csv.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| CliError::Io(parent.display().to_string(), e))?;
            }
            save_sample_set(&csv, &s, cfg.k)?;
            let truth = sidecar_path(&csv);
            let bad = s.ground_truth().map_or(0, |g| g.bad_indices.len());
            Ok(Outcome {
                exit_code: 0,
                summary: json!({ "samples": csv, "ground_truth": truth, "corrupted": bad }),
                files: vec![csv, truth],
            })
        }
        CommandKind::Mean => {
            let s = load_input(cfg)?;
            let r = recover_robust_smean(&s, cfg.k, cfg.epsilon, cfg.delta, &cfg.solver)?;
            let error = truth_mean(s.ground_truth()).map(|mu| {
                r.mu_hat.iter().zip(&mu).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            });
            let body = json!({
                "mu_hat": r.mu_hat,
                "support": r.support,
                "weights": r.weights,
                "oracle_queries": r.oracle_queries,
                "cuts_emitted": r.cuts_emitted,
                "eta": r.eta,
                "flags": { "status": r.status, "pruned": r.pruned.len(), "statistic": r.statistic },
                "error_vs_truth": error,
            });
            let path = dir.join("mean.json");
            write_json(&path, cfg, &body)?;
            Ok(Outcome { exit_code: 0, files: vec![path], summary: json!({ "support": r.support, "error_vs_truth": error }) })
        }
        CommandKind::SpcaDetect => {
            let s = load_input(cfg)?;
            let r = spca_detect(&s, cfg.k, cfg.rho, cfg.epsilon, &cfg.solver)?;
            let body = serde_json::to_value(&r).expect("result serializes");
            let path = dir.join("spca-detect.json");
            write_json(&path, cfg, &body)?;
            let code = if r.verdict == Verdict::Indeterminate { 2 } else { 0 };
            Ok(Outcome {
                exit_code: code,
                files: vec![path],
                summary: json!({
                    "verdict": r.verdict,
                    "gamma": r.gamma,
                    "gamma_lower": r.gamma_lower,
                    "gamma_upper": r.gamma_upper,
                    "threshold": r.threshold,
                }),
            })
        }
        CommandKind::SpcaRecover => {
            let s = load_input(cfg)?;
            let r = spca_recover(&s, cfg.k, cfg.rho, cfg.epsilon, &cfg.solver)?;
            let loss = match truth_spike(s.ground_truth()) {
                Some(v) => Some(loss_subspace(&r.v_hat, &v)?),
                None => None,
            };
            let mut body = serde_json::to_value(&r).expect("result serializes");
            body["loss_vs_truth"] = serde_json::to_value(loss).expect("loss serializes");
            let path = dir.join("spca-recover.json");
            write_json(&path, cfg, &body)?;
            Ok(Outcome {
                exit_code: if r.ambiguous { 2 } else { 0 },
                files: vec![path],
                summary: json!({ "v_hat": r.v_hat, "ambiguous": r.ambiguous, "loss_vs_truth": loss }),
            })
        }
        CommandKind::Bench => {
            let pool = bench::build_pool(threads)?;
            let mut resolved = cfg.clone();
            if cfg.suite == Suite::MeanVsEps {
                // The sweep deliberately runs past the estimator's ε regime.
                resolved.solver.allow_large_epsilon = true;
            }
            match cfg.suite {
                Suite::MeanVsEps => emit_bench(&resolved, bench::mean_vs_eps(&resolved, &pool)?),
                Suite::Detect => emit_bench(&resolved, bench::detect(&resolved, &pool)?),
                Suite::Recover => emit_bench(&resolved, bench::recover(&resolved, &pool)?),
            }
        }
        CommandKind::Conc => {
            let pool = bench::build_pool(threads)?;
            let report = bench::concentration(cfg, &pool)?;
            let stem = format!("conc-{}", report.kind.name());
            let csv = dir.join(format!("{stem}.csv"));
            let mut bytes = Vec::new();
            report.write_csv(&mut bytes)?;
            write(&csv, &bytes)?;
            let body = serde_json::to_value(&report).expect("report serializes");
            let json_path = dir.join(format!("{stem}.json"));
            write_json(&json_path, cfg, &body)?;
            let svg = dir.join(format!("{stem}.svg"));
            write(&svg, render_svg(&bench::concentration_chart(&report)).as_bytes())?;
            Ok(Outcome {
                exit_code: 0,
                files: vec![csv, json_path, svg],
                summary: json!({ "grid": report.grid, "slope": report.slope }),
            })
        }
    }
}

fn emit_bench<R: serde::Serialize>(cfg: &ExperimentConfig, report: BenchReport<R>) -> Result<Outcome, CliError> {
    let stem = format!("bench-{}", cfg.suite.name());
    let csv = cfg.out_dir.join(format!("{stem}.csv"));
    write(&csv, &report.csv_bytes()?)?;
    let json_path = cfg.out_dir.join(format!("{stem}.json"));
    write_json(&json_path, cfg, &report.summary)?;
    let svg = cfg.out_dir.join(format!("{stem}.svg"));
    write(&svg, render_svg(&report.chart).as_bytes())?;
    Ok(Outcome {
        exit_code: if report.indeterminate > 0 { 2 } else { 0 },
        files: vec![csv, json_path, svg],
        summary: report.summary,
    })
}
