//! Robust sparse PCA: detection of a planted sparse spike and recovery of
//! its direction, both by minimizing sparse dual norms over sample weights.

mod detect;
mod recover;

use nalgebra::DMatrix;

pub use detect::{spca_detect, DetectionResult, Verdict};
pub use recover::{spca_recover, RecoveryResult};
pub(crate) use recover::sparse_direction;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::SampleSet;
use crate::simplex::WeightVector;

/// `Σ_w = Σ_i w_i x_i x_iᵀ`.
pub fn weighted_second_moment(samples: &SampleSet, w: &WeightVector) -> Result<DMatrix<f64>> {
    if w.len() != samples.count() {
        return Err(Error::DimensionMismatch { expected: samples.count(), actual: w.len() });
    }
    Ok(weighted_second_moment_raw(samples, w.as_slice()))
}

pub(crate) fn weighted_second_moment_raw(samples: &SampleSet, w: &[f64]) -> DMatrix<f64> {
    linalg::weighted_gram(samples.columns(), w)
}

/// Projects a weight-space gradient onto `Σ w = 0` and returns it with its
/// squared norm, or `None` when it vanishes.
pub(crate) fn centered_step(g: &[f64]) -> Option<(Vec<f64>, f64)> {
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    let g_c: Vec<f64> = g.iter().map(|x| x - mean).collect();
    let norm2: f64 = g_c.iter().map(|x| x * x).sum();
    (norm2 > 0.0 && norm2.is_finite()).then_some((g_c, norm2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_instance, CorruptionSpec, ModelSpec};

    #[test]
    fn scaled_basis_rows_give_diagonal() {
        let rows = [2.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 1.0];
        let s = SampleSet::from_rows(3, 3, &rows).unwrap();
        let m = weighted_second_moment(&s, &WeightVector::uniform(3, 0.0).unwrap()).unwrap();
        let want = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0 / 3.0, 3.0, 1.0 / 3.0]));
        assert!((m - want).amax() < 1e-15);
    }

    #[test]
    fn concentrated_weight_gives_outer_product() {
        let s = SampleSet::from_rows(2, 2, &[1.0, 2.0, -5.0, 7.0]).unwrap();
        // cap = 1/(0.51·2) ≈ 0.98: nearly all mass on the first row.
        let cap = crate::simplex::weight_cap(2, 0.49);
        let w = WeightVector::new(vec![cap, 1.0 - cap], 0.49).unwrap();
        let m = weighted_second_moment(&s, &w).unwrap();
        let x0 = linalg::outer(&[1.0, 2.0]);
        let x1 = linalg::outer(&[-5.0, 7.0]);
        assert!((m - (x0 * cap + x1 * (1.0 - cap))).amax() < 1e-12);
    }

    #[test]
    fn matches_naive_triple_loop() {
        let s = generate_instance(&ModelSpec::Isotropic, 7, 2, 40, &CorruptionSpec::clean(6)).unwrap();
        let v: Vec<f64> = (0..40).map(|i| (i % 7) as f64 + 0.5).collect();
        let w = crate::simplex::project_capped_simplex(&v, 0.3).unwrap();
        let m = weighted_second_moment(&s, &w).unwrap();
        let mut naive = DMatrix::zeros(7, 7);
        for i in 0..40 {
            for a in 0..7 {
                for b in 0..7 {
                    naive[(a, b)] += w.as_slice()[i] * s.sample(i)[a] * s.sample(i)[b];
                }
            }
        }
        assert!((m - naive).amax() < 1e-12);
    }
}
