use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximizer of `⟨x, u⟩` over k-sparse unit vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseDualWitness {
    /// The top-k restriction of `x`, normalized; zero when `value == 0`.
    pub vector: Vec<f64>,
    pub value: f64,
    /// Retained coordinates, in ascending index order.
    pub support: Vec<usize>,
}

/// Indices of the `k` largest-magnitude entries; ties go to the lower index.
/// Returned in ascending index order.
pub fn topk_indices(x: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// `x` with everything outside its top-k magnitudes zeroed.
pub fn truncate_topk(x: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for i in topk_indices(x, k) {
        out[i] = x[i];
    }
    out
}

pub fn topk_dual_norm(x: &[f64], k: usize) -> Result<SparseDualWitness> {
    let d = x.len();
    if k == 0 || k > d {
        return Err(Error::SparsityOutOfRange { k, d });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let support = topk_indices(x, k);
    let mut vector = truncate_topk(x, k);
    let value = crate::linalg::norm2(&vector);
    if value > 0.0 {
        vector.iter_mut().for_each(|v| *v /= value);
    }
    Ok(SparseDualWitness { vector, value, support })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn subsets(d: usize, k: usize) -> Vec<Vec<usize>> {
        (0u32..1 << d)
            .filter(|m| m.count_ones() as usize == k)
            .map(|m| (0..d).filter(|i| m >> i & 1 == 1).collect())
            .collect()
    }

    #[test]
    fn closed_form_example() {
        let w = topk_dual_norm(&[3.0, 0.0, 4.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(w.value, 5.0);
        assert_eq!(w.vector, vec![0.6, 0.0, 0.8, 0.0, 0.0]);
        assert_eq!(w.support, vec![0, 2]);
    }

    #[test]
    fn zero_vector_has_zero_value() {
        let w = topk_dual_norm(&[0.0; 4], 2).unwrap();
        assert_eq!(w.value, 0.0);
        assert!(w.vector.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_k_is_euclidean_norm() {
        let x = [1.0, -2.0, 2.0];
        assert!((topk_dual_norm(&x, 3).unwrap().value - 3.0).abs() < 1e-15);
    }

    #[test]
    fn ties_prefer_lower_index() {
        let w = topk_dual_norm(&[1.0, -1.0, 1.0, 0.5], 2).unwrap();
        assert_eq!(w.support, vec![0, 1]);
    }

    #[test]
    fn out_of_range_k_rejected() {
        assert!(topk_dual_norm(&[1.0, 2.0], 0).is_err());
        assert!(topk_dual_norm(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn matches_support_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let d = rng.random_range(1..=10);
            let k = rng.random_range(1..=d.min(4));
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let best = subsets(d, k)
                .iter()
                .map(|s| s.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            let got = topk_dual_norm(&x, k).unwrap();
            assert!((got.value - best).abs() <= 1e-12);
            let dot: f64 = got.vector.iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((dot - got.value).abs() <= 1e-12);
        }
    }
}
