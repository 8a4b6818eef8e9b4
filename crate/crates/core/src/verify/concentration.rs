use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dualnorm::{topk_dual_norm, DualNormOptions, DualNormSolver, MatrixBall};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{derive_seed, generate_instance, CorruptionSpec, ModelSpec, SampleSet, SolverConfig};
use crate::simplex::{project_capped_simplex, WeightVector};
use crate::spca::centered_step;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcentrationKind {
    /// `‖(1/n) Σ x_i‖*_{U_k}`.
    UkUniform,
    /// `‖(1/n) Σ x_i x_iᵀ - I‖*_{X_k}`.
    XkUniform,
    /// `‖(1/n) Σ x_i x_iᵀ - I‖*_{W_k}`.
    WkUniform,
    /// Sup over `w ∈ S_{n,ε}` of `‖Σ w_i x_i‖*_{U_k}` (optimizer lower bound).
    UkAdversarialWeights,
    /// Sup over `w ∈ S_{n,ε}` of `‖Σ w_i x_i x_iᵀ - I‖*_{X_k}`.
    XkAdversarialWeights,
}

impl ConcentrationKind {
    pub fn name(self) -> &'static str {
        match self {
            ConcentrationKind::UkUniform => "uk-uniform",
            ConcentrationKind::XkUniform => "xk-uniform",
            ConcentrationKind::WkUniform => "wk-uniform",
            ConcentrationKind::UkAdversarialWeights => "uk-adversarial",
            ConcentrationKind::XkAdversarialWeights => "xk-adversarial",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [
            ConcentrationKind::UkUniform,
            ConcentrationKind::XkUniform,
            ConcentrationKind::WkUniform,
            ConcentrationKind::UkAdversarialWeights,
            ConcentrationKind::XkAdversarialWeights,
        ]
        .into_iter()
        .find(|kind| kind.name() == s)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown concentration kind `{s}`")))
    }

    fn is_adversarial(self) -> bool {
        matches!(self, ConcentrationKind::UkAdversarialWeights | ConcentrationKind::XkAdversarialWeights)
    }

    fn is_vector(self) -> bool {
        matches!(self, ConcentrationKind::UkUniform | ConcentrationKind::UkAdversarialWeights)
    }
}

/// Evaluates a statistic at weights `w`: the value and the weight-space
/// gradient of the active linear piece.
struct Evaluator<'a> {
    samples: &'a SampleSet,
    kind: ConcentrationKind,
    k: usize,
    solver: Option<DualNormSolver>,
    opts: DualNormOptions,
}

impl<'a> Evaluator<'a> {
    fn new(samples: &'a SampleSet, kind: ConcentrationKind, k: usize, cfg: &SolverConfig) -> Result<Self> {
        let d = samples.dim();
        if k == 0 || k > d {
            return Err(Error::SparsityOutOfRange { k, d });
        }
        let solver = match kind {
            ConcentrationKind::UkUniform | ConcentrationKind::UkAdversarialWeights => None,
            ConcentrationKind::WkUniform => Some(DualNormSolver::new(MatrixBall::w_family(k), d, cfg.seed)?),
            _ => Some(DualNormSolver::new(MatrixBall::x_k(k), d, cfg.seed)?),
        };
        let opts = DualNormOptions::from_config(cfg).with_gap(cfg.tolerance.max(1e-5));
        Ok(Self { samples, kind, k, solver, opts })
    }

    fn eval(&mut self, w: &[f64], with_gradient: bool) -> Result<(f64, Option<Vec<f64>>)> {
        let data = self.samples.columns();
        if self.kind.is_vector() {
            let mean = linalg::weighted_mean(data, w);
            let t = topk_dual_norm(mean.as_slice(), self.k)?;
            let grad = with_gradient.then(|| {
                let mut u = nalgebra::DVector::from_column_slice(&t.vector);
                if t.value == 0.0 {
                    // Zero mean: any sparse unit vector is a subgradient; take
                    // the one aligned with the largest sample.
                    let far = (0..data.ncols())
                        .max_by(|&a, &b| data.column(a).norm().total_cmp(&data.column(b).norm()))
                        .unwrap_or(0);
                    if let Ok(s) = topk_dual_norm(data.column(far).as_slice(), self.k) {
                        u = nalgebra::DVector::from_column_slice(&s.vector);
                    }
                }
                (data.transpose() * u).as_slice().to_vec()
            });
            return Ok((t.value, grad));
        }
        let mut m = linalg::weighted_gram(data, w);
        for i in 0..m.nrows() {
            m[(i, i)] -= 1.0;
        }
        let solver = self.solver.as_mut().expect("matrix statistic has a solver");
        let r = solver.solve(&m, &self.opts)?;
        let grad = with_gradient
            .then(|| linalg::quadratic_forms(data, &r.witness).into_iter().map(|x| r.sign * x).collect());
        Ok((r.value, grad))
    }
}

/// Value of a statistic at uniform weights.
pub fn statistic(samples: &SampleSet, kind: ConcentrationKind, k: usize, cfg: &SolverConfig) -> Result<f64> {
    let n = samples.count();
    let mut ev = Evaluator::new(samples, kind, k, cfg)?;
    Ok(ev.eval(&vec![1.0 / n as f64; n], false)?.0)
}

/// Projected subgradient ascent of the statistic over `S_{n,ε}`, starting
/// at uniform weights. Returns the best weights seen and their value, a
/// lower bound on the supremum.
pub fn adversarial_weight_search(
    samples: &SampleSet,
    kind: ConcentrationKind,
    k: usize,
    epsilon: f64,
    cfg: &SolverConfig,
) -> Result<(WeightVector, f64)> {
    let n = samples.count();
    let mut ev = Evaluator::new(samples, kind, k, cfg)?;
    let uniform = WeightVector::uniform(n, epsilon)?;
    let (v0, g0) = ev.eval(uniform.as_slice(), true)?;
    let mut best = (uniform.clone(), v0);
    if epsilon == 0.0 {
        return Ok(best);
    }
    let cap = uniform.cap();
    let mut w = uniform;
    let mut grad = g0;
    // Steps sized so early moves reach the boundary of S_{n,ε}.
    let radius = (cap - 1.0 / n as f64).max(0.0).sqrt();
    let iterations = cfg.subgradient_iterations.min(200);
    for t in 0..iterations {
        let Some((g_c, norm2)) = grad.as_deref().and_then(centered_step) else { break };
        let step = radius * 2.0 / ((1.0 + t as f64).sqrt() * norm2.sqrt());
        let moved: Vec<f64> = w.as_slice().iter().zip(&g_c).map(|(wi, gi)| wi + step * gi).collect();
        w = project_capped_simplex(&moved, epsilon)?;
        let (v, g) = ev.eval(w.as_slice(), true)?;
        if v > best.1 {
            best = (w.clone(), v);
        }
        grad = g;
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub trial: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n: usize,
    pub trials: usize,
    pub median: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub kind: ConcentrationKind,
    pub d: usize,
    pub k: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub grid: Vec<GridPoint>,
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `ln(median)` against `ln(n)`; NaN (serialized
    /// as null) with fewer than two grid points.
    pub slope: f64,
    pub slope_defined: bool,
}

impl ConcentrationReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "n", "trial", "value"])?;
        for r in &self.rows {
            w.write_record([self.kind.name().to_string(), r.n.to_string(), r.trial.to_string(), format!("{}", r.value)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub(crate) fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return f64::NAN;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Per-trial seed for grid point `n`, trial `t`.
pub fn sweep_seed(seed: u64, n: usize, trial: usize) -> u64 {
    derive_seed(derive_seed(seed, n as u64), trial as u64)
}

/// Runs one statistic on clean isotropic data over a grid of sample sizes.
/// With `trial_runner`, trials are mapped through it (for example a thread
/// pool); results do not depend on execution order.
#[allow(clippy::too_many_arguments)]
pub fn concentration_sweep(
    kind: ConcentrationKind,
    d: usize,
    k: usize,
    epsilon: f64,
    n_grid: &[usize],
    trials: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<ConcentrationReport> {
    concentration_sweep_with(kind, d, k, epsilon, n_grid, trials, seed, cfg, |jobs, f| {
        jobs.iter().map(|&(n, t)| f(n, t)).collect()
    })
}

type TrialFn<'a> = dyn Fn(usize, usize) -> Result<f64> + Sync + 'a;

/// [`concentration_sweep`] with a caller-supplied trial executor.
#[allow(clippy::too_many_arguments)]
pub fn concentration_sweep_with<E>(
    kind: ConcentrationKind,
    d: usize,
    k: usize,
    epsilon: f64,
    n_grid: &[usize],
    trials: usize,
    seed: u64,
    cfg: &SolverConfig,
    execute: E,
) -> Result<ConcentrationReport>
where
    E: FnOnce(&[(usize, usize)], &TrialFn<'_>) -> Vec<Result<f64>>,
{
    if n_grid.is_empty() || trials == 0 {
        return Err(Error::InvalidParameter("sweep needs a nonempty grid and trials >= 1".into()));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("grid sizes must be strictly increasing".into()));
    }
    if k == 0 || k > d {
        return Err(Error::SparsityOutOfRange { k, d });
    }
    let eps = if kind.is_adversarial() { epsilon } else { 0.0 };
    let run = move |n: usize, t: usize| -> Result<f64> {
        let s = generate_instance(&ModelSpec::Isotropic, d, k, n, &CorruptionSpec::clean(sweep_seed(seed, n, t)))?;
        if kind.is_adversarial() {
            Ok(adversarial_weight_search(&s, kind, k, eps, cfg)?.1)
        } else {
            statistic(&s, kind, k, cfg)
        }
    };
    let jobs: Vec<(usize, usize)> = n_grid.iter().flat_map(|&n| (0..trials).map(move |t| (n, t))).collect();
    let values = execute(&jobs, &run);
    let mut rows = Vec::with_capacity(jobs.len());
    for (&(n, trial), v) in jobs.iter().zip(values) {
        rows.push(SweepRow { n, trial, value: v? });
    }
    let grid: Vec<GridPoint> = n_grid
        .iter()
        .map(|&n| {
            let mut vals: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.value).collect();
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            GridPoint { n, trials, median: median(&mut vals), max }
        })
        .collect();
    let slope = log_log_slope(&grid.iter().map(|g| (g.n as f64, g.median)).collect::<Vec<_>>());
    Ok(ConcentrationReport {
        kind,
        d,
        k,
        epsilon: eps,
        seed,
        grid,
        rows,
        slope,
        slope_defined: slope.is_finite(),
    })
}
