//! Small dense linear-algebra helpers shared by the solvers.
//!
//! Sample matrices are stored as `d × n` column-major matrices, so every
//! sample is one contiguous column (the same memory layout as a row-major
//! `n × d` table).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order. Column `j` of `vectors` pairs with `values[j]`.
pub struct SortedEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn sym_eigen(m: &DMatrix<f64>) -> SortedEigen {
    let eig = m.clone().symmetric_eigen();
    let (values, vectors) = if eig.eigenvalues.iter().chain(eig.eigenvectors.iter()).all(|x| x.is_finite()) {
        (eig.eigenvalues.as_slice().to_vec(), eig.eigenvectors)
    } else {
        // nalgebra's QR iteration occasionally returns NaN on finite input.
        jacobi_eigen(m)
    };
    let d = values.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    SortedEigen {
        values: order.iter().map(|&j| values[j]).collect(),
        vectors: DMatrix::from_fn(d, d, |i, c| vectors[(i, order[c])]),
    }
}

/// Cyclic Jacobi eigendecomposition, unsorted.
fn jacobi_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let d = m.nrows();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(d, d);
    let scale = a.norm_squared();
    for _ in 0..100 {
        let off: f64 = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 { 1.0 } else { -1.0 } / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (kp, kq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * kp - s * kq;
                    a[(k, q)] = s * kp + c * kq;
                }
                for k in 0..d {
                    let (pk, qk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * pk - s * qk;
                    a[(q, k)] = s * pk + c * qk;
                }
                for k in 0..d {
                    let (kp, kq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * kp - s * kq;
                    v[(k, q)] = s * kp + c * kq;
                }
            }
        }
    }
    ((0..d).map(|i| a[(i, i)]).collect(), v)
}

/// Eigenvalues of a symmetric matrix in no particular order.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let vals = m.clone().symmetric_eigenvalues();
    if vals.iter().all(|x| x.is_finite()) {
        vals.as_slice().to_vec()
    } else {
        jacobi_eigen(m).0
    }
}

/// Extreme eigenvalues `(λ_min, λ_max)` of a symmetric matrix.
pub fn extreme_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    let vals = sym_eigenvalues(m);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in vals.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Rebuilds `Q diag(x) Qᵀ`, skipping zero weights.
pub fn reconstruct(vectors: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let d = vectors.nrows();
    let mut out = DMatrix::zeros(d, d);
    for (j, &x) in weights.iter().enumerate() {
        if x != 0.0 {
            let q = vectors.column(j);
            out.ger(x, &q, &q, 1.0);
        }
    }
    symmetrize(&mut out);
    out
}

pub fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn l1_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x.abs()).sum()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..d {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Rejects non-square, non-finite or visibly asymmetric input.
pub fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), actual: m.ncols() });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let scale = max_abs(m).max(1.0);
    let asym = max_asymmetry(m);
    if asym > 1e-9 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Replaces `m` by `(m + mᵀ)/2` in place.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for j in 0..d {
        for i in 0..j {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// `Σ_i w_i x_i x_iᵀ` for samples stored as the columns of `data`.
pub fn weighted_gram(data: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut scaled = data.clone();
    for (mut col, &wi) in scaled.column_iter_mut().zip(w) {
        col *= wi;
    }
    let mut out = &scaled * data.transpose();
    symmetrize(&mut out);
    out
}

/// `x_iᵀ M x_i` for every column `x_i` of `data`.
pub fn quadratic_forms(data: &DMatrix<f64>, m: &DMatrix<f64>) -> Vec<f64> {
    let mx = m * data;
    mx.column_iter()
        .zip(data.column_iter())
        .map(|(a, b)| a.dot(&b))
        .collect()
}

/// `Σ_i w_i x_i`.
pub fn weighted_mean(data: &DMatrix<f64>, w: &[f64]) -> DVector<f64> {
    data * DVector::from_column_slice(w)
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Outer product `x xᵀ`.
pub fn outer(x: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    DMatrix::from_fn(d, d, |i, j| x[i] * x[j])
}
