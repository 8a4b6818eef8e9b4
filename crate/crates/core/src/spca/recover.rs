use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{centered_step, weighted_second_moment_raw};
use crate::dualnorm::{dykstra_projection, topk_dual_norm, DualNormOptions, DualNormSolver, MatrixBall};
use crate::error::{Error, Result};
use crate::linalg::{self, sym_eigen};
use crate::model::{SampleSet, SolverConfig};
use crate::simplex::{project_capped_simplex, WeightVector};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryResult {
    /// k-sparse unit vector.
    pub v_hat: Vec<f64>,
    pub a_star: DMatrix<f64>,
    pub w_star: WeightVector,
    /// Certified upper bound on the objective at `(w_star, a_star)`.
    pub objective: f64,
    /// Same bound at the starting point.
    pub initial_objective: f64,
    pub top_eigenvalue: f64,
    pub second_eigenvalue: f64,
    /// Top eigenvalue of `A*` is not isolated (gap below 1e-6).
    pub ambiguous: bool,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

/// Top eigenvector of `a`, sign fixed so its largest-magnitude coordinate is
/// positive (lowest index on ties).
pub(crate) fn signed_top_eigenvector(a: &DMatrix<f64>) -> (Vec<f64>, f64, f64) {
    let eig = sym_eigen(a);
    let mut u: Vec<f64> = eig.vectors.column(0).iter().copied().collect();
    let lead = (0..u.len()).max_by(|&i, &j| u[i].abs().total_cmp(&u[j].abs()).then(j.cmp(&i))).unwrap_or(0);
    if u[lead] < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
    }
    let second = eig.values.get(1).copied().unwrap_or(f64::NEG_INFINITY);
    (u, eig.values[0], second)
}

/// The k-sparse unit vector reported for a matrix estimate.
pub(crate) fn sparse_direction(a: &DMatrix<f64>, k: usize) -> Result<(Vec<f64>, f64, f64)> {
    let (u, l1, l2) = signed_top_eigenvector(a);
    let t = topk_dual_norm(&u, k)?;
    Ok((t.vector, l1, l2))
}

/// Jointly minimizes `‖Σ_w - I - ρA‖*_{W_{2k}}` over `w ∈ S_{n,ε}` and
/// `A ∈ X_k` by alternating projected subgradient steps, then reads off the
/// sparse top eigenvector of the best `A`.
pub fn spca_recover(
    samples: &SampleSet,
    k: usize,
    rho: f64,
    epsilon: f64,
    cfg: &SolverConfig,
) -> Result<RecoveryResult> {
    cfg.validate()?;
    let d = samples.dim();
    let n = samples.count();
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidParameter(format!("rho must be finite and > 0, got {rho}")));
    }
    if k == 0 || 2 * k > d {
        return Err(Error::SparsityOutOfRange { k, d });
    }
    let x_ball = MatrixBall::x_k(k);
    let mut solver = DualNormSolver::new(MatrixBall::w_family(2 * k), d, cfg.seed)?;
    let full = DualNormOptions::from_config(cfg).with_gap(cfg.tolerance.max(rho * 1e-4));
    let inner = DualNormOptions {
        iterations: cfg.inner_iterations,
        random_starts: 0,
        gap_target: 0.0,
        threshold: None,
        check_every: cfg.inner_iterations,
        ..full.clone()
    };
    let residual = |w: &[f64], a: &DMatrix<f64>| {
        let mut m = weighted_second_moment_raw(samples, w);
        for i in 0..d {
            m[(i, i)] -= 1.0;
        }
        m -= a * rho;
        m
    };

    let w0 = WeightVector::uniform(n, epsilon)?;
    let (v0, _, _) = sparse_direction(&residual(w0.as_slice(), &DMatrix::zeros(d, d)), k)?;
    let a0 = linalg::outer(&v0);
    let start = solver.solve(&residual(w0.as_slice(), &a0), &full)?;
    let scale = start.value.abs().max(1e-12);
    let b = cfg.step_offset;

    let mut w = w0.clone();
    let mut a = a0.clone();
    let mut best = (start.upper_cert, w0.clone(), a0.clone());
    let mut trace = vec![start.value];
    let mut iterations = 0;
    let dykstra_budget = cfg.dykstra_iterations.min(50);

    for t in 0..cfg.subgradient_iterations {
        iterations += 1;
        let r = solver.solve(&residual(w.as_slice(), &a), &inner)?;
        trace.push(r.value);
        if r.upper_cert < best.0 {
            best = (r.upper_cert, w.clone(), a.clone());
        }
        let decay = scale * b / (b + t as f64);

        if epsilon > 0.0 {
            let g: Vec<f64> =
                linalg::quadratic_forms(samples.columns(), &r.witness).into_iter().map(|x| r.sign * x).collect();
            if let Some((g_c, norm2)) = centered_step(&g) {
                let step = decay / norm2;
                let moved: Vec<f64> = w.as_slice().iter().zip(&g_c).map(|(wi, gi)| wi - step * gi).collect();
                w = project_capped_simplex(&moved, epsilon)?;
            }
        }
        // g_A = -σρM.
        let norm2 = rho * rho * r.witness.norm_squared();
        if norm2 > 0.0 {
            let step = decay / norm2;
            let moved = &a + &r.witness * (r.sign * rho * step);
            a = dykstra_projection(&moved, &x_ball, dykstra_budget, cfg.tolerance).point;
        }
    }

    // Re-score the best iterate and the start with the full solver.
    let final_best = solver.solve(&residual(best.1.as_slice(), &best.2), &full)?;
    solver.reset();
    let final_start = solver.solve(&residual(w0.as_slice(), &a0), &full)?;
    let (objective, w_star, a_star) = if final_best.upper_cert <= final_start.upper_cert {
        (final_best.upper_cert, best.1, best.2)
    } else {
        (final_start.upper_cert, w0, a0)
    };
    let (v_hat, top, second) = sparse_direction(&a_star, k)?;
    Ok(RecoveryResult {
        v_hat,
        a_star,
        w_star,
        objective,
        initial_objective: final_start.upper_cert,
        top_eigenvalue: top,
        second_eigenvalue: second,
        ambiguous: top - second < 1e-6,
        iterations,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_convention_makes_largest_entry_positive() {
        let v = [0.1, -0.9, 0.3];
        let n = linalg::norm2(&v);
        let v: Vec<f64> = v.iter().map(|x| x / n).collect();
        let (u, l1, _) = signed_top_eigenvector(&linalg::outer(&v));
        assert!((l1 - 1.0).abs() < 1e-12);
        assert!(u[1] > 0.0);
        assert!((u[1] + v[1]).abs() < 1e-12);
    }

    #[test]
    fn rank_one_noiseless_data_is_recovered_exactly() {
        let d = 8;
        let k = 2;
        let rho = 1.0;
        let mut v = vec![0.0; d];
        v[1] = 0.6;
        v[5] = -0.8;
        let zs = [1.3, -0.4, 2.0, 0.7, -1.1, 0.2, -0.5, 1.6, -2.2, 0.9];
        let rows: Vec<f64> = zs.iter().flat_map(|z| v.iter().map(move |x| (1.0 + rho as f64).sqrt() * x * z)).collect();
        let s = SampleSet::from_rows(zs.len(), d, &rows).unwrap();
        let cfg = SolverConfig { subgradient_iterations: 100, ..SolverConfig::default() };
        let r = spca_recover(&s, k, rho, 0.0, &cfg).unwrap();
        let dot: f64 = r.v_hat.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-9, "{dot}");
        assert!(r.objective <= r.initial_objective);
    }
}
