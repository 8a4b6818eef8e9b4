//! Non-robust baselines and Monte-Carlo concentration checks.

mod concentration;

pub use concentration::{
    adversarial_weight_search, concentration_sweep, concentration_sweep_with, statistic, sweep_seed, ConcentrationKind, ConcentrationReport, GridPoint,
    SweepRow,
};

use serde::{Deserialize, Serialize};

use crate::dualnorm::{truncate_topk, DualNormOptions, DualNormSolver, MatrixBall};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{SampleSet, SolverConfig};
use crate::spca::{sparse_direction, Verdict};

fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Empirical mean truncated to its top-k magnitude coordinates.
pub fn threshold_mean(samples: &SampleSet, k: usize) -> Result<Vec<f64>> {
    let d = samples.dim();
    if k == 0 || k > d {
        return Err(Error::SparsityOutOfRange { k, d });
    }
    let mean = linalg::weighted_mean(samples.columns(), &uniform_weights(samples.count()));
    Ok(truncate_topk(mean.as_slice(), k))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonrobustDetection {
    /// `‖Σ̂ - I‖*_{X_k}` at uniform weights (feasible-witness value).
    pub statistic: f64,
    pub upper_cert: f64,
    pub verdict: Verdict,
}

/// Options used for the uniform-weight statistic, shared with the robust
/// detector so both report the same number on the same data.
pub(crate) fn uniform_statistic_options(cfg: &SolverConfig, threshold: f64) -> DualNormOptions {
    DualNormOptions::from_config(cfg).with_gap(cfg.tolerance.max(threshold * 2e-4))
}

/// Thresholds `‖Σ̂ - I‖*_{X_k}` at uniform weights: no protection against
/// corrupted samples.
pub fn nonrobust_spca_detect(
    samples: &SampleSet,
    k: usize,
    threshold: f64,
    cfg: &SolverConfig,
) -> Result<NonrobustDetection> {
    let d = samples.dim();
    let mut m = linalg::weighted_gram(samples.columns(), &uniform_weights(samples.count()));
    for i in 0..d {
        m[(i, i)] -= 1.0;
    }
    let mut solver = DualNormSolver::new(MatrixBall::x_k(k), d, cfg.seed)?;
    let r = solver.solve(&m, &uniform_statistic_options(cfg, threshold))?;
    let verdict = if r.value >= threshold { Verdict::Spiked } else { Verdict::Isotropic };
    Ok(NonrobustDetection { statistic: r.value, upper_cert: r.upper_cert, verdict })
}

/// The plain ℓ1-relaxed sparse PCA estimate: sparse top eigenvector of the
/// `X_k` maximizer of `⟨Σ̂, X⟩`.
pub fn nonrobust_spca_recover(samples: &SampleSet, k: usize, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let d = samples.dim();
    let m = linalg::weighted_gram(samples.columns(), &uniform_weights(samples.count()));
    let mut solver = DualNormSolver::new(MatrixBall::x_k(k), d, cfg.seed)?;
    let r = solver.solve(&m, &DualNormOptions::from_config(cfg).with_gap(cfg.tolerance.max(1e-4)))?;
    Ok(sparse_direction(&r.witness, k)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dualnorm::topk_dual_norm;
    use crate::model::{generate_instance, CorruptionSpec, ModelSpec};
    use proptest::prelude::*;

    #[test]
    fn single_sample_top_one() {
        let s = SampleSet::from_rows(1, 3, &[3.0, 0.0, 4.0]).unwrap();
        assert_eq!(threshold_mean(&s, 1).unwrap(), vec![0.0, 0.0, 4.0]);
    }

    #[test]
    fn full_k_keeps_mean() {
        let s = SampleSet::from_rows(2, 3, &[1.0, 2.0, 3.0, 3.0, 0.0, -1.0]).unwrap();
        assert_eq!(threshold_mean(&s, 3).unwrap(), vec![2.0, 1.0, 1.0]);
    }

    #[test]
    fn threshold_mean_is_topk_witness_scaled() {
        let s = generate_instance(&ModelSpec::sparse_mean(), 12, 3, 50, &CorruptionSpec::clean(2)).unwrap();
        let t = threshold_mean(&s, 3).unwrap();
        let mean = linalg::weighted_mean(s.columns(), &uniform_weights(50));
        let w = topk_dual_norm(mean.as_slice(), 3).unwrap();
        for i in 0..12 {
            assert!((t[i] - w.value * w.vector[i]).abs() < 1e-14);
            assert_eq!(t[i] != 0.0, w.support.contains(&i));
        }
    }

    proptest! {
        // Weighted power-mean inequality: Σ ω a² ≥ (Σ ω a)².
        #[test]
        fn weighted_square_mean_dominates_squared_mean(
            raw in proptest::collection::vec((0.0f64..1.0, -100.0f64..100.0), 1..20)
        ) {
            let total: f64 = raw.iter().map(|p| p.0).sum();
            prop_assume!(total > 1e-9);
            let lhs: f64 = raw.iter().map(|(w, a)| w / total * a * a).sum();
            let mean: f64 = raw.iter().map(|(w, a)| w / total * a).sum();
            prop_assert!(lhs >= mean * mean - 1e-9 * (1.0 + lhs));
        }
    }
}
