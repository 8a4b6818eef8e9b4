use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{centered_step, weighted_second_moment_raw};
use crate::dualnorm::{DualNormOptions, DualNormSolver, MatrixBall};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{SampleSet, SolverConfig};
use crate::simplex::{min_linear_over_weights, project_capped_simplex, WeightVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Isotropic,
    Spiked,
    /// The certified bracket on γ straddles `ρ/2`.
    Indeterminate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetectionResult {
    /// Objective at the best weights found (a feasible-witness value).
    pub gamma: f64,
    /// Certified lower bound on `min_w ‖Σ_w - I‖*_{X_k}`.
    pub gamma_lower: f64,
    /// Certified upper bound on the same minimum.
    pub gamma_upper: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub iterations: usize,
    pub restarts_used: usize,
    pub weights: WeightVector,
    /// Objective estimate per iteration.
    pub trace: Vec<f64>,
}

impl DetectionResult {
    pub fn gap(&self) -> f64 {
        (self.gamma_upper - self.gamma_lower).max(0.0)
    }
}

/// Lower bound `min_w ⟨Y, Σ_w - I⟩` for `Y` in the symmetric hull of the ball.
fn hull_lower_bound(samples: &SampleSet, y: &DMatrix<f64>, epsilon: f64) -> Result<f64> {
    let c = linalg::quadratic_forms(samples.columns(), y);
    let (value, _) = min_linear_over_weights(&c, epsilon)?;
    Ok(value - y.trace())
}

struct Averages {
    all: DMatrix<f64>,
    all_weight: f64,
    recent: DMatrix<f64>,
    recent_weight: f64,
}

impl Averages {
    fn new(d: usize) -> Self {
        Self { all: DMatrix::zeros(d, d), all_weight: 0.0, recent: DMatrix::zeros(d, d), recent_weight: 0.0 }
    }

    fn push(&mut self, x: &DMatrix<f64>, weight: f64) {
        self.all += x * weight;
        self.all_weight += weight;
        self.recent += x * weight;
        self.recent_weight += weight;
    }

    fn candidates(&self) -> Vec<DMatrix<f64>> {
        let mut out = Vec::new();
        if self.all_weight > 0.0 {
            out.push(&self.all / self.all_weight);
        }
        if self.recent_weight > 0.0 {
            out.push(&self.recent / self.recent_weight);
        }
        out
    }

    fn restart_recent(&mut self) {
        self.recent.fill(0.0);
        self.recent_weight = 0.0;
    }
}

/// Minimizes `‖Σ_w - I‖*_{X_k}` over `w ∈ S_{n,ε}` and compares with `ρ/2`.
pub fn spca_detect(
    samples: &SampleSet,
    k: usize,
    rho: f64,
    epsilon: f64,
    cfg: &SolverConfig,
) -> Result<DetectionResult> {
    cfg.validate()?;
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidParameter(format!("rho must be finite and > 0, got {rho}")));
    }
    let d = samples.dim();
    let n = samples.count();
    let threshold = rho / 2.0;
    let mut solver = DualNormSolver::new(MatrixBall::x_k(k), d, cfg.seed)?;
    let full = crate::verify::uniform_statistic_options(cfg, threshold);
    let inner = DualNormOptions {
        iterations: cfg.inner_iterations,
        random_starts: 0,
        gap_target: 0.0,
        threshold: None,
        check_every: cfg.inner_iterations,
        ..full.clone()
    };

    let uniform = WeightVector::uniform(n, epsilon)?;
    let objective = |w: &[f64]| {
        let mut m = weighted_second_moment_raw(samples, w);
        for i in 0..d {
            m[(i, i)] -= 1.0;
        }
        m
    };
    let start = solver.solve(&objective(uniform.as_slice()), &full)?;
    let mut trace = vec![start.value];
    let mut gamma_upper = start.upper_cert;
    let mut gamma = start.value;
    let mut best_w = uniform.clone();
    let mut averages = Averages::new(d);
    averages.push(&(&start.witness * start.sign), 1.0);
    let mut gamma_lower = f64::NEG_INFINITY;
    for y in averages.candidates() {
        gamma_lower = gamma_lower.max(hull_lower_bound(samples, &y, epsilon)?);
    }

    let decided = |lo: f64, hi: f64| lo >= threshold || hi < threshold;
    let mut iterations = 0;
    let mut restarts_used = 0;
    let a = start.value.abs().max(1e-12);
    let b = cfg.step_offset;
    let check_every = 25;

    if epsilon > 0.0 && !decided(gamma_lower, gamma_upper) {
        let mut rng_state = cfg.seed;
        'restarts: for restart in 0..=cfg.subgradient_restarts {
            let mut w = if restart == 0 {
                best_w.clone()
            } else {
                restarts_used = restart;
                averages.restart_recent();
                rng_state = crate::model::derive_seed(rng_state, restart as u64);
                let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(rng_state);
                let noise: Vec<f64> =
                    (0..n).map(|_| rand::Rng::random_range(&mut rng, 0.0..2.0) / n as f64).collect();
                project_capped_simplex(&noise, epsilon)?
            };
            for t in 0..cfg.subgradient_iterations {
                iterations += 1;
                let r = solver.solve(&objective(w.as_slice()), &inner)?;
                trace.push(r.value);
                if r.upper_cert < gamma_upper {
                    gamma_upper = r.upper_cert;
                    gamma = r.value;
                    best_w = w.clone();
                }
                let g: Vec<f64> = linalg::quadratic_forms(samples.columns(), &r.witness)
                    .into_iter()
                    .map(|x| r.sign * x)
                    .collect();
                let Some((g_c, norm2)) = centered_step(&g) else { break };
                let step = a * b / ((b + t as f64) * norm2);
                averages.push(&(&r.witness * r.sign), step);
                let moved: Vec<f64> = w.as_slice().iter().zip(&g_c).map(|(wi, gi)| wi - step * gi).collect();
                w = project_capped_simplex(&moved, epsilon)?;
                if (t + 1) % check_every == 0 {
                    for y in averages.candidates() {
                        gamma_lower = gamma_lower.max(hull_lower_bound(samples, &y, epsilon)?);
                    }
                    if decided(gamma_lower, gamma_upper) {
                        break 'restarts;
                    }
                }
            }
            for y in averages.candidates() {
                gamma_lower = gamma_lower.max(hull_lower_bound(samples, &y, epsilon)?);
            }
            if decided(gamma_lower, gamma_upper) {
                break;
            }
        }
    }

    let verdict = if gamma_lower >= threshold {
        Verdict::Spiked
    } else if gamma_upper < threshold {
        Verdict::Isotropic
    } else {
        Verdict::Indeterminate
    };
    Ok(DetectionResult {
        gamma,
        gamma_lower: gamma_lower.min(gamma_upper),
        gamma_upper,
        threshold,
        verdict,
        iterations,
        restarts_used,
        weights: best_w,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sample_gives_unit_gamma() {
        let s = SampleSet::from_rows(1, 4, &[0.0; 4]).unwrap();
        let r = spca_detect(&s, 2, 1.0, 0.0, &SolverConfig::default()).unwrap();
        assert!((r.gamma - 1.0).abs() < 1e-9);
        assert_eq!(r.verdict, Verdict::Spiked);
    }

    #[test]
    fn hull_bound_is_below_objective_at_every_weight() {
        let s = crate::model::generate_instance(
            &crate::model::ModelSpec::Isotropic,
            6,
            2,
            60,
            &crate::model::CorruptionSpec::clean(4),
        )
        .unwrap();
        let y = linalg::outer(&[0.6, 0.0, 0.8, 0.0, 0.0, 0.0]);
        let lb = hull_lower_bound(&s, &y, 0.2).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
        for _ in 0..50 {
            let v: Vec<f64> = (0..60).map(|_| rand::Rng::random_range(&mut rng, 0.0..1.0)).collect();
            let w = project_capped_simplex(&v, 0.2).unwrap();
            let mut m = weighted_second_moment_raw(&s, w.as_slice());
            for i in 0..6 {
                m[(i, i)] -= 1.0;
            }
            assert!(linalg::inner(&y, &m) >= lb - 1e-12);
        }
    }
}
