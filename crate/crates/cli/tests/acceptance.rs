//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line to
//! stderr (bypassing libtest capture) and then asserts the same condition.
//!
//! Criteria 5-9 run once and cache their CSV bytes; criterion 10 reruns the
//! same configurations on a pool with a different worker count and compares
//! the bytes.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_sparse::dualnorm::{decompose_k2_blocks, matrix_dual_norm, project_matrix_ball, topk_dual_norm, MatrixBall};
use robust_sparse::mean::find_feasible_weights;
use robust_sparse::verify::ConcentrationKind;
use robust_sparse::{generate_instance, Adversary, CorruptionSpec, ModelSpec, SolverConfig, WeightVector};
use robust_sparse_cli::bench::{self, BenchReport, DetectRow, MeanRow, RecoverRow};
use robust_sparse_cli::config::{AdversaryConfig, Arm, CommandKind, ExperimentConfig, Suite};

fn report(id: u32, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{tag} criterion {id}: {detail}");
    assert!(pass, "criterion {id}: {detail}");
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// A worker count different from the first run's.
fn rerun_workers() -> usize {
    workers() + 1
}

fn random_symmetric(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    (&g + g.transpose()) * 0.5
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Calls `f` on every k-subset of `0..d` in lexicographic order.
fn for_each_support(d: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == d - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn exhaustive_topk(x: &[f64], k: usize) -> f64 {
    let mut best: f64 = 0.0;
    for_each_support(x.len(), k, |s| {
        best = best.max(s.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt());
    });
    best
}

/// `max_{|S|=k} max(λ_max(A_S), -λ_min(A_S))`, a feasible value for `X_k`.
fn exhaustive_support_bound(a: &DMatrix<f64>, k: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for_each_support(a.nrows(), k, |s| {
        let sub = DMatrix::from_fn(k, k, |i, j| a[(s[i], s[j])]);
        let ev = sub.symmetric_eigenvalues();
        best = best.max(ev.max()).max(-ev.min());
    });
    best
}

fn median(v: &[f64]) -> f64 {
    bench::median(v)
}

#[test]
fn criterion_01_topk_matches_exhaustive_enumeration() {
    const TOL: f64 = 1e-12;
    const LIMIT: Duration = Duration::from_secs(10);
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let d = rng.random_range(1..=12);
        let k = rng.random_range(1..=4.min(d));
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let got = topk_dual_norm(&x, k).unwrap().value;
        worst = worst.max((got - exhaustive_topk(&x, k)).abs());
    }
    let elapsed = start.elapsed();
    report(
        1,
        worst <= TOL && elapsed < LIMIT,
        &format!("500 vectors, max |topk - exhaustive| = {worst:.2e} (tol {TOL:.0e}), {:.2}s", elapsed.as_secs_f64()),
    );
}

#[test]
fn criterion_02_xk_solver_sandwich_and_small_exactness() {
    const TOL: f64 = 1e-4;
    const LIMIT: Duration = Duration::from_secs(120);
    let start = Instant::now();
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut sandwich_violations = 0;
    for _ in 0..100 {
        let d = rng.random_range(2..=30);
        let k = rng.random_range(1..=5.min(d));
        let u = random_unit(&mut rng, d);
        let t = topk_dual_norm(&u, k).unwrap().value;
        let a = DMatrix::from_fn(d, d, |i, j| u[i] * u[j]);
        let r = matrix_dual_norm(&a, &MatrixBall::x_k(k), &cfg).unwrap();
        let gap = r.gap();
        if r.value < t * t - gap - 1e-12 || r.value > 4.0 * t * t + gap + 1e-12 {
            sandwich_violations += 1;
        }
    }
    let mut certified = 0;
    let mut mismatches = 0;
    for _ in 0..100 {
        let d = rng.random_range(2..=6);
        let k = rng.random_range(1..=2.min(d));
        let a = random_symmetric(&mut rng, d);
        let bound = exhaustive_support_bound(&a, k);
        let r = matrix_dual_norm(&a, &MatrixBall::x_k(k), &cfg).unwrap();
        if r.upper_cert - bound <= TOL {
            certified += 1;
            if (r.value - bound).abs() > TOL {
                mismatches += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        2,
        sandwich_violations == 0 && mismatches == 0 && elapsed < LIMIT,
        &format!(
            "sandwich violations {sandwich_violations}/100; small matrices {mismatches} mismatches among {certified} certified (tol {TOL:.0e}), {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_03_block_decomposition_postconditions() {
    const LIMIT: Duration = Duration::from_secs(30);
    const D: usize = 20;
    const K: usize = 3;
    let start = Instant::now();
    let cfg = SolverConfig::default();
    let ball = MatrixBall::x_k(K);
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut failures = Vec::new();
    let mut worst_budget: f64 = 0.0;
    let mut worst_residual: f64 = 0.0;
    for sample in 0..200 {
        let g = DMatrix::from_fn(D, D, |_, _| rng.random_range(-1.0..1.0));
        let x = project_matrix_ball(&(&g * g.transpose()), &ball, &cfg).unwrap().point;
        let dec = decompose_k2_blocks(&x, K).unwrap();
        let mut sum = DMatrix::zeros(D, D);
        let mut owner = DMatrix::from_element(D, D, usize::MAX);
        for (b, y) in dec.blocks.iter().enumerate() {
            if y.iter().filter(|v| **v != 0.0).count() > 2 * K * K {
                failures.push(format!("sample {sample}: block {b} too dense"));
            }
            for i in 0..D {
                for j in 0..D {
                    if y[(i, j)] == 0.0 {
                        continue;
                    }
                    if y[(i, j)] != y[(j, i)] {
                        failures.push(format!("sample {sample}: block {b} asymmetric"));
                    }
                    if owner[(i, j)] != usize::MAX {
                        failures.push(format!("sample {sample}: supports overlap at ({i},{j})"));
                    }
                    owner[(i, j)] = b;
                }
            }
            sum += y;
        }
        worst_residual = worst_residual.max((sum - &x).amax());
        worst_budget = worst_budget.max(dec.frobenius_sum);
    }
    let elapsed = start.elapsed();
    report(
        3,
        failures.is_empty() && worst_residual == 0.0 && worst_budget <= 8.0 && elapsed < LIMIT,
        &format!(
            "200 points in X_3 (d=20): {} structural failures, max reassembly residual {worst_residual:.1e}, max sum ||Y_i||_F = {worst_budget:.3} (<= 8), {:.1}s",
            failures.len(),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_04_oracle_cut_algebra() {
    const TOL: f64 = 1e-6;
    const EPSILON: f64 = 0.1;
    let adversaries = [
        Adversary::SparseVarianceSpike { support: 3, scale: 80.0 },
        Adversary::SparseVarianceSpike { support: 3, scale: 150.0 },
        Adversary::SparseVarianceSpike { support: 1, scale: 100.0 },
        Adversary::SparseShift { support: 3, magnitude: 25.0 },
        Adversary::DenseOutliers { radius: 40.0 },
    ];
    let cfg = SolverConfig { ellipsoid_iterations: 300, allow_large_epsilon: true, ..SolverConfig::default() };
    let eta = cfg.eta(EPSILON);
    let (mut cuts, mut at_query_bad, mut good_not_separated) = (0, 0, 0);
    for (a, adversary) in adversaries.iter().enumerate() {
        for seed in 0..3u64 {
            let spec = CorruptionSpec::new(EPSILON, adversary.clone(), 1000 + 10 * a as u64 + seed);
            let s = generate_instance(&ModelSpec::sparse_mean(), 20, 3, 400, &spec).unwrap();
            let good = s.ground_truth().unwrap().good_indices(s.count());
            let mut w_good = vec![0.0; s.count()];
            for &i in &good {
                w_good[i] = 1.0 / good.len() as f64;
            }
            WeightVector::new(w_good.clone(), EPSILON).unwrap();
            let found = find_feasible_weights(&s, 3, EPSILON, eta, 0.01, &cfg).unwrap();
            for c in &found.cuts {
                cuts += 1;
                if c.hyperplane.evaluate(&c.queried).abs() > TOL {
                    at_query_bad += 1;
                }
                if c.hyperplane.evaluate(&w_good) >= 0.0 {
                    good_not_separated += 1;
                }
            }
        }
    }
    report(
        4,
        cuts > 0 && at_query_bad == 0 && good_not_separated == 0,
        &format!(
            "{cuts} cuts over 15 instances: {at_query_bad} with |l(w_query)| > {TOL:.0e}, {good_not_separated} with l(w_good) >= 0"
        ),
    );
}

struct Run<R> {
    report: BenchReport<R>,
    csv: Vec<u8>,
    elapsed: Duration,
}

fn execute<R: serde::Serialize>(
    cfg: &ExperimentConfig,
    threads: usize,
    f: fn(&ExperimentConfig, &rayon::ThreadPool) -> Result<BenchReport<R>, robust_sparse_cli::CliError>,
) -> Run<R> {
    let pool = bench::build_pool(threads).unwrap();
    let start = Instant::now();
    let report = f(cfg, &pool).unwrap();
    let elapsed = start.elapsed();
    let csv = report.csv_bytes().unwrap();
    Run { report, csv, elapsed }
}

fn bench_cfg(suite: Suite) -> ExperimentConfig {
    ExperimentConfig { command: CommandKind::Bench, suite, ..ExperimentConfig::default() }
}

// Robust sparse mean, ε = 0.05.
const MEAN_EPSILON: f64 = 0.05;
/// Median error / (ε·sqrt(ln(1/ε))), measured by `calibrate_mean_envelope`
/// on seeds disjoint from the acceptance run, then frozen with 25% slack.
const C_REC: f64 = 0.5;

fn mean_cfg(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        d: 100,
        k: 5,
        n: 4000,
        eps_grid: vec![MEAN_EPSILON],
        trials: 20,
        seed,
        adversary: AdversaryConfig::SparseShift { magnitude: 1.0, support: None },
        ..bench_cfg(Suite::MeanVsEps)
    }
}

fn mean_run() -> &'static Run<MeanRow> {
    static RUN: OnceLock<Run<MeanRow>> = OnceLock::new();
    RUN.get_or_init(|| execute(&mean_cfg(7), workers(), bench::mean_vs_eps))
}

#[test]
fn criterion_05_robust_mean_end_to_end() {
    const LIMIT: Duration = Duration::from_secs(20 * 60);
    const RATIO: f64 = 0.5;
    let run = mean_run();
    let robust = median(&run.report.rows.iter().map(|r| r.robust_error).collect::<Vec<_>>());
    let naive = median(&run.report.rows.iter().map(|r| r.naive_error).collect::<Vec<_>>());
    let envelope = C_REC * MEAN_EPSILON * (1.0 / MEAN_EPSILON).ln().sqrt();
    report(
        5,
        robust <= envelope && robust <= RATIO * naive && run.elapsed < LIMIT,
        &format!(
            "median robust error {robust:.4} vs envelope {envelope:.4} (C_rec {C_REC}); vs {RATIO} x threshold-mean error {naive:.4} = {:.4}; {:.0}s",
            RATIO * naive,
            run.elapsed.as_secs_f64()
        ),
    );
}

/// Prints the robust-mean envelope constant on calibration seeds.
#[test]
#[ignore = "calibration run; prints the constant frozen in C_REC"]
fn calibrate_mean_envelope() {
    let run = execute(&mean_cfg(0xCA11B), workers(), bench::mean_vs_eps);
    let robust = median(&run.report.rows.iter().map(|r| r.robust_error).collect::<Vec<_>>());
    let scale = MEAN_EPSILON * (1.0 / MEAN_EPSILON).ln().sqrt();
    let _ = writeln!(
        std::io::stderr(),
        "median robust error {robust:.4}, ratio {:.4}, {:.0}s",
        robust / scale,
        run.elapsed.as_secs_f64()
    );
}

// Sparse PCA detection, ρ = 0.5.
const DETECT_RHO: f64 = 0.5;
const DETECT_DELTA: f64 = 0.01;
/// Multiplier on the detection sample-size formula, frozen after a sweep of
/// n on seeds disjoint from the acceptance run.
const C_DETECT: f64 = 1.25;

fn ln_binomial(n: u64, k: u64) -> f64 {
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// `C · (min(d, k²) + ln C(d², k²) + ln(1/δ)) / ρ²`, rounded up.
fn detection_sample_size(d: usize, k: usize, rho: f64, delta: f64, constant: f64) -> usize {
    let (d, k) = (d as u64, k as u64);
    let base = (d.min(k * k) as f64 + ln_binomial(d * d, k * k) + (1.0 / delta).ln()) / (rho * rho);
    (constant * base).ceil() as usize
}

fn detect_cfg() -> ExperimentConfig {
    ExperimentConfig {
        d: 50,
        k: 5,
        n: detection_sample_size(50, 5, DETECT_RHO, DETECT_DELTA, C_DETECT),
        epsilon: 0.05,
        rho: DETECT_RHO,
        rho_grid: vec![DETECT_RHO],
        trials: 40,
        seed: 7,
        adversary: AdversaryConfig::VarianceSpike { scale: 5.0, support: None },
        ..bench_cfg(Suite::Detect)
    }
}

fn detect_run() -> &'static Run<DetectRow> {
    static RUN: OnceLock<Run<DetectRow>> = OnceLock::new();
    RUN.get_or_init(|| execute(&detect_cfg(), workers(), bench::detect))
}

#[test]
fn criterion_06_spca_detection_accuracy() {
    const LIMIT: Duration = Duration::from_secs(15 * 60);
    const MIN_ACCURACY: f64 = 0.90;
    const MAX_INDETERMINATE: f64 = 0.05;
    let run = detect_run();
    let rows = &run.report.rows;
    let total = rows.len() as f64;
    let accuracy = rows.iter().filter(|r| r.correct()).count() as f64 / total;
    let indeterminate = rows.iter().filter(|r| r.verdict == "indeterminate").count() as f64 / total;
    let count = |arm: &str, verdict: &str| rows.iter().filter(|r| r.arm == arm && r.verdict == verdict).count();
    report(
        6,
        accuracy >= MIN_ACCURACY && indeterminate <= MAX_INDETERMINATE && run.elapsed < LIMIT,
        &format!(
            "n={} accuracy {:.1}% (>= {:.0}%), indeterminate {:.1}% (<= {:.0}%); isotropic arm {}/{}/{} and spiked arm {}/{}/{} (isotropic/indeterminate/spiked); {:.0}s",
            detect_cfg().n,
            100.0 * accuracy,
            100.0 * MIN_ACCURACY,
            100.0 * indeterminate,
            100.0 * MAX_INDETERMINATE,
            count("isotropic", "isotropic"),
            count("isotropic", "indeterminate"),
            count("isotropic", "spiked"),
            count("spiked", "isotropic"),
            count("spiked", "indeterminate"),
            count("spiked", "spiked"),
            run.elapsed.as_secs_f64()
        ),
    );
}

// Sparse PCA recovery against a planted decoy direction.
fn recover_cfg() -> ExperimentConfig {
    // 300 outer steps: at n = 6000 the default budget does not fit the
    // runtime limit on a single core.
    let solver = SolverConfig { subgradient_iterations: 300, ..SolverConfig::default() };
    ExperimentConfig {
        solver,
        d: 50,
        k: 5,
        n: 6000,
        rho: 1.0,
        eps_grid: vec![0.02],
        trials: 20,
        seed: 7,
        adversary: AdversaryConfig::Decoy { rho_decoy: 1.5 },
        ..bench_cfg(Suite::Recover)
    }
}

fn recover_run() -> &'static Run<RecoverRow> {
    static RUN: OnceLock<Run<RecoverRow>> = OnceLock::new();
    RUN.get_or_init(|| execute(&recover_cfg(), workers(), bench::recover))
}

#[test]
fn criterion_07_spca_recovery_under_decoy() {
    const LIMIT: Duration = Duration::from_secs(20 * 60);
    const MAX_LOSS: f64 = 0.35;
    const RATIO: f64 = 0.5;
    let run = recover_run();
    let robust = median(&run.report.rows.iter().map(|r| r.robust_loss).collect::<Vec<_>>());
    let plain = median(&run.report.rows.iter().map(|r| r.nonrobust_loss).collect::<Vec<_>>());
    report(
        7,
        robust <= MAX_LOSS && robust <= RATIO * plain && run.elapsed < LIMIT,
        &format!(
            "median loss {robust:.4} (<= {MAX_LOSS}), plain l1-SDP {plain:.4} (robust <= {RATIO}x); {:.0}s",
            run.elapsed.as_secs_f64()
        ),
    );
}

// Concentration envelopes.
struct ConcRun {
    slope: f64,
    medians: Vec<f64>,
    csv: Vec<u8>,
    elapsed: Duration,
}

fn conc_cfg(kind: ConcentrationKind) -> ExperimentConfig {
    ExperimentConfig {
        command: CommandKind::Conc,
        conc_kind: kind,
        d: 50,
        k: 5,
        n_grid: vec![250, 1000, 4000, 16000],
        trials: 20,
        seed: 7,
        ..ExperimentConfig::default()
    }
}

fn conc_execute(kind: ConcentrationKind, threads: usize) -> ConcRun {
    let pool = bench::build_pool(threads).unwrap();
    let start = Instant::now();
    let r = bench::concentration(&conc_cfg(kind), &pool).unwrap();
    let elapsed = start.elapsed();
    let mut csv = Vec::new();
    r.write_csv(&mut csv).unwrap();
    ConcRun { slope: r.slope, medians: r.grid.iter().map(|g| g.median).collect(), csv, elapsed }
}

fn conc_runs() -> &'static [ConcRun; 2] {
    static RUN: OnceLock<[ConcRun; 2]> = OnceLock::new();
    RUN.get_or_init(|| {
        [conc_execute(ConcentrationKind::UkUniform, workers()), conc_execute(ConcentrationKind::XkUniform, workers())]
    })
}

#[test]
fn criterion_08_concentration_slopes() {
    const LIMIT: Duration = Duration::from_secs(15 * 60);
    const SLOPE: f64 = -0.5;
    const SLOPE_TOL: f64 = 0.15;
    let [uk, xk] = conc_runs();
    let ok = |r: &ConcRun| (r.slope - SLOPE).abs() <= SLOPE_TOL;
    report(
        8,
        ok(uk) && ok(xk) && uk.elapsed + xk.elapsed < LIMIT,
        &format!(
            "log-log slope Uk {:.3} (medians {:?}), Xk {:.3} (medians {:?}), target {SLOPE} +/- {SLOPE_TOL}; {:.0}s",
            uk.slope,
            uk.medians.iter().map(|m| (m * 1e4).round() / 1e4).collect::<Vec<_>>(),
            xk.slope,
            xk.medians.iter().map(|m| (m * 1e4).round() / 1e4).collect::<Vec<_>>(),
            (uk.elapsed + xk.elapsed).as_secs_f64()
        ),
    );
}

// Robust vs plain detection on contaminated isotropic data.
fn contrast_cfg() -> ExperimentConfig {
    ExperimentConfig {
        d: 50,
        k: 5,
        n: detection_sample_size(50, 5, DETECT_RHO, DETECT_DELTA, C_DETECT),
        epsilon: 0.1,
        rho: DETECT_RHO,
        rho_grid: vec![DETECT_RHO],
        arms: vec![Arm::Isotropic],
        trials: 40,
        seed: 7,
        adversary: AdversaryConfig::VarianceSpike { scale: 5.0, support: None },
        ..bench_cfg(Suite::Detect)
    }
}

fn contrast_run() -> &'static Run<DetectRow> {
    static RUN: OnceLock<Run<DetectRow>> = OnceLock::new();
    RUN.get_or_init(|| execute(&contrast_cfg(), workers(), bench::detect))
}

#[test]
fn criterion_09_plain_detector_fooled_robust_not() {
    const LIMIT: Duration = Duration::from_secs(10 * 60);
    const MIN_PLAIN_FP: f64 = 0.5;
    const MAX_ROBUST_FP: f64 = 0.1;
    let run = contrast_run();
    let rows = &run.report.rows;
    let total = rows.len() as f64;
    let plain_fp = rows.iter().filter(|r| r.nonrobust_verdict == "spiked").count() as f64 / total;
    let robust_fp = rows.iter().filter(|r| r.verdict == "spiked").count() as f64 / total;
    report(
        9,
        plain_fp >= MIN_PLAIN_FP && robust_fp <= MAX_ROBUST_FP && run.elapsed < LIMIT,
        &format!(
            "{} isotropic instances at eps=0.1: plain false-positive {:.1}% (>= {:.0}%), robust {:.1}% (<= {:.0}%); {:.0}s",
            rows.len(),
            100.0 * plain_fp,
            100.0 * MIN_PLAIN_FP,
            100.0 * robust_fp,
            100.0 * MAX_ROBUST_FP,
            run.elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_10_reruns_are_byte_identical() {
    let threads = rerun_workers();
    let mut differing = Vec::new();
    if execute(&mean_cfg(7), threads, bench::mean_vs_eps).csv != mean_run().csv {
        differing.push("5");
    }
    if execute(&detect_cfg(), threads, bench::detect).csv != detect_run().csv {
        differing.push("6");
    }
    if execute(&recover_cfg(), threads, bench::recover).csv != recover_run().csv {
        differing.push("7");
    }
    let [uk, xk] = conc_runs();
    if conc_execute(ConcentrationKind::UkUniform, threads).csv != uk.csv
        || conc_execute(ConcentrationKind::XkUniform, threads).csv != xk.csv
    {
        differing.push("8");
    }
    if execute(&contrast_cfg(), threads, bench::detect).csv != contrast_run().csv {
        differing.push("9");
    }
    report(
        10,
        differing.is_empty(),
        &format!(
            "criteria 5-9 rerun with {threads} workers (first run {}): differing CSVs {:?}",
            workers(),
            differing
        ),
    );
}
