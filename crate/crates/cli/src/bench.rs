//! Monte-Carlo benchmark suites. Trials run on a worker pool; every trial
//! derives its own seed from the master seed and its grid position, so the
//! output is the same for any number of workers.

use rayon::prelude::*;
use robust_sparse::mean::recover_robust_smean;
use robust_sparse::spca::{spca_detect, spca_recover, Verdict};
use robust_sparse::verify::{concentration_sweep_with, nonrobust_spca_detect, nonrobust_spca_recover, threshold_mean};
use robust_sparse::verify::ConcentrationReport;
use robust_sparse::{derive_seed, generate_instance, loss_subspace, CorruptionSpec, Error, ModelKind, ModelSpec};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{Arm, ExperimentConfig};
use crate::error::CliError;
use crate::plot::{Chart, Series};

/// Seed for trial `trial` at grid position `path`.
pub fn trial_seed(master: u64, path: &[u64], trial: usize) -> u64 {
    let base = path.iter().fold(master, |s, &p| derive_seed(s, p));
    derive_seed(base, trial as u64)
}

pub fn build_pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| CliError::Pool(e.to_string()))
}

fn par_map<J: Sync, T: Send>(pool: &rayon::ThreadPool, jobs: &[J], f: impl Fn(&J) -> T + Sync + Send) -> Vec<T> {
    pool.install(|| jobs.par_iter().map(f).collect())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Rows, a JSON summary and a chart for one suite.
#[derive(Clone, Debug)]
pub struct BenchReport<R> {
    pub rows: Vec<R>,
    pub summary: serde_json::Value,
    pub chart: Chart,
    pub indeterminate: usize,
}

impl<R: Serialize> BenchReport<R> {
    pub fn csv_bytes(&self) -> Result<Vec<u8>, CliError> {
        rows_to_csv(&self.rows)
    }
}

pub fn rows_to_csv<R: Serialize>(rows: &[R]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| CliError::Io("csv buffer".into(), e.into_error()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub epsilon: f64,
    pub trial: usize,
    pub seed: u64,
    pub robust_error: f64,
    pub naive_error: f64,
    pub oracle_queries: usize,
    pub cuts_emitted: usize,
    pub pruned: usize,
    /// `ok` or `indeterminate`.
    pub status: String,
}

/// Robust mean vs the thresholded empirical mean across `eps_grid`.
pub fn mean_vs_eps(cfg: &ExperimentConfig, pool: &rayon::ThreadPool) -> Result<BenchReport<MeanRow>, CliError> {
    let mut solver = cfg.solver.clone();
    solver.allow_large_epsilon = true;
    let adversary = cfg.adversary.resolve(cfg.k);
    let jobs: Vec<(usize, usize)> =
        (0..cfg.eps_grid.len()).flat_map(|e| (0..cfg.trials).map(move |t| (e, t))).collect();
    let rows = par_map(pool, &jobs, |&(e, trial)| -> Result<MeanRow, CliError> {
        let epsilon = cfg.eps_grid[e];
        let seed = trial_seed(cfg.seed, &[e as u64], trial);
        let model = ModelSpec::SparseMean { mu: None, magnitude: cfg.magnitude };
        let s = generate_instance(&model, cfg.d, cfg.k, cfg.n, &CorruptionSpec::new(epsilon, adversary.clone(), seed))?;
        let mu = match &s.ground_truth().expect("generated").model {
            ModelKind::SparseMean { mu, .. } => mu.clone(),
            _ => unreachable!("sparse mean model"),
        };
        let naive_error = l2_distance(&threshold_mean(&s, cfg.k)?, &mu);
        let row = |robust_error, oracle_queries, cuts_emitted, pruned, status: &str| MeanRow {
            epsilon,
            trial,
            seed,
            robust_error,
            naive_error,
            oracle_queries,
            cuts_emitted,
            pruned,
            status: status.to_string(),
        };
        match recover_robust_smean(&s, cfg.k, epsilon, cfg.delta, &solver) {
            Ok(r) => Ok(row(l2_distance(&r.mu_hat, &mu), r.oracle_queries, r.cuts_emitted, r.pruned.len(), "ok")),
            Err(Error::Indeterminate { .. }) => Ok(row(f64::NAN, 0, 0, 0, "indeterminate")),
            Err(e) => Err(e.into()),
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let mut robust = Vec::new();
    let mut naive = Vec::new();
    let mut per_eps = Vec::new();
    for &epsilon in &cfg.eps_grid {
        let at: Vec<&MeanRow> = rows.iter().filter(|r| r.epsilon == epsilon).collect();
        let mr = median(&at.iter().map(|r| r.robust_error).collect::<Vec<_>>());
        let mn = median(&at.iter().map(|r| r.naive_error).collect::<Vec<_>>());
        robust.push((epsilon, mr));
        naive.push((epsilon, mn));
        per_eps.push(json!({
            "epsilon": epsilon,
            "median_robust_error": mr,
            "median_naive_error": mn,
            "ratio": mr / mn,
            "indeterminate": at.iter().filter(|r| r.status != "ok").count(),
        }));
    }
    let indeterminate = rows.iter().filter(|r| r.status != "ok").count();
    Ok(BenchReport {
        rows,
        summary: json!({ "suite": "mean-vs-eps", "per_epsilon": per_eps }),
        chart: Chart {
            title: format!("sparse mean, d={} k={} n={}, {}", cfg.d, cfg.k, cfg.n, cfg.adversary),
            x_label: "epsilon".into(),
            y_label: "median l2 error".into(),
            log_x: false,
            log_y: false,
            series: vec![
                Series { label: "robust".into(), points: robust },
                Series { label: "threshold mean".into(), points: naive },
            ],
        },
        indeterminate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectRow {
    pub rho: f64,
    pub arm: String,
    pub trial: usize,
    pub seed: u64,
    pub gamma: f64,
    pub gamma_lower: f64,
    pub gamma_upper: f64,
    pub verdict: String,
    pub nonrobust_statistic: f64,
    pub nonrobust_verdict: String,
    pub iterations: usize,
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Isotropic => "isotropic",
        Verdict::Spiked => "spiked",
        Verdict::Indeterminate => "indeterminate",
    }
}

impl DetectRow {
    pub fn correct(&self) -> bool {
        self.verdict == self.arm
    }

    pub fn nonrobust_correct(&self) -> bool {
        self.nonrobust_verdict == self.arm
    }
}

/// Robust and plain detection on both arms for every ρ.
pub fn detect(cfg: &ExperimentConfig, pool: &rayon::ThreadPool) -> Result<BenchReport<DetectRow>, CliError> {
    let adversary = cfg.adversary.resolve(cfg.k);
    let rhos = cfg.rhos();
    let mut jobs = Vec::new();
    for r in 0..rhos.len() {
        for &arm in &cfg.arms {
            for t in 0..cfg.trials {
                jobs.push((r, arm, t));
            }
        }
    }
    let rows = par_map(pool, &jobs, |&(r, arm, trial)| -> Result<DetectRow, CliError> {
        let rho = rhos[r];
        let arm_id = match arm {
            Arm::Isotropic => 0,
            Arm::Spiked => 1,
        };
        let seed = trial_seed(cfg.seed, &[r as u64, arm_id], trial);
        let model = match arm {
            Arm::Isotropic => ModelSpec::Isotropic,
            Arm::Spiked => ModelSpec::Spiked { rho, v: None },
        };
        let spec = CorruptionSpec::new(cfg.epsilon, adversary.clone(), seed);
        let s = generate_instance(&model, cfg.d, cfg.k, cfg.n, &spec)?;
        let robust = spca_detect(&s, cfg.k, rho, cfg.epsilon, &cfg.solver)?;
        let plain = nonrobust_spca_detect(&s, cfg.k, rho / 2.0, &cfg.solver)?;
        Ok(DetectRow {
            rho,
            arm: arm.name().to_string(),
            trial,
            seed,
            gamma: robust.gamma,
            gamma_lower: robust.gamma_lower,
            gamma_upper: robust.gamma_upper,
            verdict: verdict_name(robust.verdict).to_string(),
            nonrobust_statistic: plain.statistic,
            nonrobust_verdict: verdict_name(plain.verdict).to_string(),
            iterations: robust.iterations,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let rate = |rs: &[&DetectRow], f: &dyn Fn(&DetectRow) -> bool| {
        if rs.is_empty() {
            f64::NAN
        } else {
            rs.iter().filter(|r| f(r)).count() as f64 / rs.len() as f64
        }
    };
    let mut robust_err = Vec::new();
    let mut plain_err = Vec::new();
    let mut per_rho = Vec::new();
    for &rho in &rhos {
        let at: Vec<&DetectRow> = rows.iter().filter(|r| r.rho == rho).collect();
        let iso: Vec<&DetectRow> = at.iter().copied().filter(|r| r.arm == "isotropic").collect();
        let spk: Vec<&DetectRow> = at.iter().copied().filter(|r| r.arm == "spiked").collect();
        let acc = rate(&at, &|r| r.correct());
        let plain_acc = rate(&at, &|r| r.nonrobust_correct());
        robust_err.push((rho, 1.0 - acc));
        plain_err.push((rho, 1.0 - plain_acc));
        per_rho.push(json!({
            "rho": rho,
            "accuracy": acc,
            "indeterminate_rate": rate(&at, &|r| r.verdict == "indeterminate"),
            "false_positive_rate": rate(&iso, &|r| r.verdict == "spiked"),
            "spiked_rate": rate(&spk, &|r| r.verdict == "spiked"),
            "nonrobust_accuracy": plain_acc,
            "nonrobust_false_positive_rate": rate(&iso, &|r| r.nonrobust_verdict == "spiked"),
            "median_gamma_isotropic": median(&iso.iter().map(|r| r.gamma).collect::<Vec<_>>()),
            "median_gamma_spiked": median(&spk.iter().map(|r| r.gamma).collect::<Vec<_>>()),
        }));
    }
    let indeterminate = rows.iter().filter(|r| r.verdict == "indeterminate").count();
    Ok(BenchReport {
        rows,
        summary: json!({ "suite": "detect", "per_rho": per_rho }),
        chart: Chart {
            title: format!("sparse PCA detection, d={} k={} n={} eps={}", cfg.d, cfg.k, cfg.n, cfg.epsilon),
            x_label: "rho".into(),
            y_label: "error rate".into(),
            log_x: false,
            log_y: false,
            series: vec![
                Series { label: "robust".into(), points: robust_err },
                Series { label: "plain".into(), points: plain_err },
            ],
        },
        indeterminate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoverRow {
    pub epsilon: f64,
    pub trial: usize,
    pub seed: u64,
    pub robust_loss: f64,
    pub nonrobust_loss: f64,
    pub ambiguous: bool,
    pub objective: f64,
    pub initial_objective: f64,
}

/// Robust recovery vs the plain ℓ1-SDP estimate across `eps_grid`.
pub fn recover(cfg: &ExperimentConfig, pool: &rayon::ThreadPool) -> Result<BenchReport<RecoverRow>, CliError> {
    let adversary = cfg.adversary.resolve(cfg.k);
    let jobs: Vec<(usize, usize)> =
        (0..cfg.eps_grid.len()).flat_map(|e| (0..cfg.trials).map(move |t| (e, t))).collect();
    let rows = par_map(pool, &jobs, |&(e, trial)| -> Result<RecoverRow, CliError> {
        let epsilon = cfg.eps_grid[e];
        let seed = trial_seed(cfg.seed, &[e as u64], trial);
        let model = ModelSpec::Spiked { rho: cfg.rho, v: None };
        let s = generate_instance(&model, cfg.d, cfg.k, cfg.n, &CorruptionSpec::new(epsilon, adversary.clone(), seed))?;
        let v = match &s.ground_truth().expect("generated").model {
            ModelKind::Spiked { v, .. } => v.clone(),
            _ => unreachable!("spiked model"),
        };
        let robust = spca_recover(&s, cfg.k, cfg.rho, epsilon, &cfg.solver)?;
        let plain = nonrobust_spca_recover(&s, cfg.k, &cfg.solver)?;
        Ok(RecoverRow {
            epsilon,
            trial,
            seed,
            robust_loss: loss_subspace(&robust.v_hat, &v)?.frobenius,
            nonrobust_loss: loss_subspace(&plain, &v)?.frobenius,
            ambiguous: robust.ambiguous,
            objective: robust.objective,
            initial_objective: robust.initial_objective,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let mut robust = Vec::new();
    let mut plain = Vec::new();
    let mut per_eps = Vec::new();
    for &epsilon in &cfg.eps_grid {
        let at: Vec<&RecoverRow> = rows.iter().filter(|r| r.epsilon == epsilon).collect();
        let mr = median(&at.iter().map(|r| r.robust_loss).collect::<Vec<_>>());
        let mp = median(&at.iter().map(|r| r.nonrobust_loss).collect::<Vec<_>>());
        robust.push((epsilon, mr));
        plain.push((epsilon, mp));
        per_eps.push(json!({
            "epsilon": epsilon,
            "median_robust_loss": mr,
            "median_nonrobust_loss": mp,
            "ambiguous": at.iter().filter(|r| r.ambiguous).count(),
        }));
    }
    let indeterminate = rows.iter().filter(|r| r.ambiguous).count();
    Ok(BenchReport {
        rows,
        summary: json!({ "suite": "recover", "per_epsilon": per_eps }),
        chart: Chart {
            title: format!("sparse PCA recovery, d={} k={} n={} rho={}", cfg.d, cfg.k, cfg.n, cfg.rho),
            x_label: "epsilon".into(),
            y_label: "median subspace loss".into(),
            log_x: false,
            log_y: false,
            series: vec![
                Series { label: "robust".into(), points: robust },
                Series { label: "plain l1-SDP".into(), points: plain },
            ],
        },
        indeterminate,
    })
}

/// Concentration sweep with trials on the pool.
pub fn concentration(cfg: &ExperimentConfig, pool: &rayon::ThreadPool) -> Result<ConcentrationReport, CliError> {
    Ok(concentration_sweep_with(
        cfg.conc_kind,
        cfg.d,
        cfg.k,
        cfg.epsilon,
        &cfg.n_grid,
        cfg.trials,
        cfg.seed,
        &cfg.solver,
        |jobs, f| par_map(pool, jobs, |&(n, t)| f(n, t)),
    )?)
}

pub fn concentration_chart(r: &ConcentrationReport) -> Chart {
    Chart {
        title: format!("{}, d={} k={}, slope {:.3}", r.kind.name(), r.d, r.k, r.slope),
        x_label: "n".into(),
        y_label: "statistic".into(),
        log_x: true,
        log_y: true,
        series: vec![
            Series { label: "median".into(), points: r.grid.iter().map(|g| (g.n as f64, g.median)).collect() },
            Series { label: "max".into(), points: r.grid.iter().map(|g| (g.n as f64, g.max)).collect() },
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{AdversaryConfig, CommandKind, Suite};

    fn small(suite: Suite) -> ExperimentConfig {
        ExperimentConfig {
            command: CommandKind::Bench,
            suite,
            d: 12,
            k: 2,
            n: 300,
            trials: 3,
            epsilon: 0.05,
            rho: 1.0,
            eps_grid: vec![0.02, 0.05],
            adversary: AdversaryConfig::SparseShift { magnitude: 1.0, support: None },
            solver: robust_sparse::SolverConfig { subgradient_iterations: 40, ..Default::default() },
            seed: 5,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn worker_count_does_not_change_csv() {
        let cfg = small(Suite::MeanVsEps);
        let one = mean_vs_eps(&cfg, &build_pool(1).unwrap()).unwrap().csv_bytes().unwrap();
        let three = mean_vs_eps(&cfg, &build_pool(3).unwrap()).unwrap().csv_bytes().unwrap();
        assert_eq!(one, three);
        let text = String::from_utf8(one).unwrap();
        assert!(text.starts_with("epsilon,trial,seed,robust_error,naive_error,"));
        assert_eq!(text.lines().count(), 1 + 6);
    }

    #[test]
    fn detect_rows_cover_every_arm() {
        let cfg = ExperimentConfig { rho_grid: vec![0.5, 1.0], trials: 2, ..small(Suite::Detect) };
        let r = detect(&cfg, &build_pool(2).unwrap()).unwrap();
        assert_eq!(r.rows.len(), 2 * 2 * 2);
        assert_eq!(r.summary["per_rho"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn trial_seeds_differ_across_grid_and_trials() {
        let a = trial_seed(7, &[0], 0);
        assert_ne!(a, trial_seed(7, &[1], 0));
        assert_ne!(a, trial_seed(7, &[0], 1));
        assert_eq!(a, trial_seed(7, &[0], 0));
    }

    #[test]
    fn median_skips_nan() {
        assert_eq!(median(&[3.0, f64::NAN, 1.0, 2.0]), 2.0);
        assert!(median(&[f64::NAN]).is_nan());
    }
}
