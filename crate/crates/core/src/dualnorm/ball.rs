use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, check_symmetric, reconstruct, sym_eigen};
use crate::model::SolverConfig;
use crate::simplex::{max_linear_box_sum, project_box_sum, SumMode};

/// A convex set of symmetric matrices cut out by PSD, trace, spectral and
/// entrywise-ℓ1 constraints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixBall {
    pub k: usize,
    pub trace_max: f64,
    /// `None` means no spectral cap.
    pub spectral_max: Option<f64>,
    pub l1_max: f64,
    pub require_psd: bool,
    pub trace_mode: SumMode,
}

/// Amounts by which a matrix breaks each constraint (0 when satisfied).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BallViolation {
    pub psd: f64,
    pub trace: f64,
    pub spectral: f64,
    pub l1: f64,
    pub asymmetry: f64,
}

impl BallViolation {
    pub fn within(&self, tol: f64) -> bool {
        self.psd <= 1e-8 && self.trace <= tol && self.spectral <= tol && self.l1 <= tol && self.asymmetry <= tol
    }
}

impl MatrixBall {
    /// `{X ⪰ 0, tr X = 1, ‖X‖₁ ≤ k}`.
    pub fn x_k(k: usize) -> Self {
        Self {
            k,
            trace_max: 1.0,
            spectral_max: None,
            l1_max: k as f64,
            require_psd: true,
            trace_mode: SumMode::Equal,
        }
    }

    /// `{X ⪰ 0, tr X ≤ 2, ‖X‖₂ ≤ 1, ‖X‖₁ ≤ 3k}`.
    pub fn w_family(k: usize) -> Self {
        Self {
            k,
            trace_max: 2.0,
            spectral_max: Some(1.0),
            l1_max: 3.0 * k as f64,
            require_psd: true,
            trace_mode: SumMode::AtMost,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.k == 0 || self.k > d {
            return Err(Error::SparsityOutOfRange { k: self.k, d });
        }
        if !self.require_psd {
            return Err(Error::InvalidParameter("only PSD matrix balls are supported".into()));
        }
        let spectral_ok = self.spectral_max.is_none_or(|s| s.is_finite() && s > 0.0);
        if !(self.trace_max.is_finite() && self.trace_max > 0.0 && self.l1_max >= 0.0 && spectral_ok) {
            return Err(Error::InvalidParameter("matrix ball bounds must be finite and positive".into()));
        }
        if self.trace_mode == SumMode::Equal {
            // tr X ≤ ‖X‖₁ for PSD X, and tr X ≤ d·‖X‖₂.
            if self.l1_max < self.trace_max {
                return Err(Error::InvalidParameter("ℓ1 bound below the required trace".into()));
            }
            if let Some(s) = self.spectral_max {
                if s * (d as f64) < self.trace_max {
                    return Err(Error::InvalidParameter("spectral cap too small for the trace".into()));
                }
            }
        }
        Ok(())
    }

    fn eigen_upper(&self) -> f64 {
        self.spectral_max.unwrap_or(f64::INFINITY)
    }

    /// Projects an eigenvalue vector onto the spectral constraints.
    pub(crate) fn project_eigenvalues(&self, values: &[f64]) -> Vec<f64> {
        project_box_sum(values, 0.0, self.eigen_upper(), self.trace_max, self.trace_mode)
    }

    /// Projection onto the PSD/trace/spectral part of the ball.
    pub fn project_spectral(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let eig = sym_eigen(m);
        let x = self.project_eigenvalues(&eig.values);
        reconstruct(&eig.vectors, &x)
    }

    /// Projection onto `{‖X‖₁ ≤ l1_max}` by entrywise soft thresholding.
    pub fn project_l1(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let theta = l1_threshold(m.as_slice(), self.l1_max);
        if theta == 0.0 {
            return m.clone();
        }
        m.map(|x| x.signum() * (x.abs() - theta).max(0.0))
    }

    /// Support function `max ⟨B, X⟩` over the spectral part, given the
    /// eigenvalues of `B`.
    pub fn spectral_support(&self, eigenvalues: &[f64]) -> f64 {
        max_linear_box_sum(eigenvalues, 0.0, self.eigen_upper(), self.trace_max, self.trace_mode)
    }

    pub fn violation(&self, x: &DMatrix<f64>) -> BallViolation {
        let eig = linalg::sym_eigenvalues(x);
        let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tr = x.trace();
        let trace = match self.trace_mode {
            SumMode::Equal => (tr - self.trace_max).abs(),
            SumMode::AtMost => (tr - self.trace_max).max(0.0),
        };
        BallViolation {
            psd: (-lo).max(0.0),
            trace,
            spectral: self.spectral_max.map_or(0.0, |s| (hi - s).max(0.0)),
            l1: (linalg::l1_norm(x) - self.l1_max).max(0.0),
            asymmetry: linalg::max_asymmetry(x),
        }
    }

    /// Pulls a matrix that satisfies the spectral constraints inside the
    /// ℓ1 bound while keeping the spectral constraints.
    ///
    /// Equal-trace balls mix in `e_j e_jᵀ` (scaled to the trace), which keeps
    /// trace and PSD exactly; at-most-trace balls are scaled down.
    pub fn repair(&self, x: &DMatrix<f64>, favored: usize) -> DMatrix<f64> {
        let l1 = linalg::l1_norm(x);
        if l1 <= self.l1_max {
            return x.clone();
        }
        match self.trace_mode {
            SumMode::AtMost => x * (self.l1_max / l1),
            SumMode::Equal => {
                let t = self.trace_max;
                let keep = if l1 > t { ((self.l1_max - t) / (l1 - t)).clamp(0.0, 1.0) } else { 0.0 };
                let mut out = x * keep;
                out[(favored, favored)] += (1.0 - keep) * t;
                out
            }
        }
    }
}

/// Soft-threshold level putting `values` on the ℓ1 sphere of `radius`
/// (0 when already inside).
fn l1_threshold(values: &[f64], radius: f64) -> f64 {
    let total: f64 = values.iter().map(|x| x.abs()).sum();
    if total <= radius {
        return 0.0;
    }
    let mut mags: Vec<f64> = values.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in mags.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - radius) / (j + 1) as f64;
        if u > t {
            theta = t;
        } else {
            break;
        }
    }
    theta.max(0.0)
}

/// Result of [`project_matrix_ball`].
#[derive(Clone, Debug)]
pub struct Projection {
    pub point: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Euclidean projection onto the ball by Dykstra's alternating projections
/// between the spectral part and the ℓ1 ball.
///
/// The returned point is the last spectral-part iterate, nudged into the ℓ1
/// bound with [`MatrixBall::repair`], so it is always exactly feasible.
pub fn project_matrix_ball(m: &DMatrix<f64>, ball: &MatrixBall, cfg: &SolverConfig) -> Result<Projection> {
    check_symmetric(m)?;
    ball.validate(m.nrows())?;
    Ok(dykstra_projection(m, ball, cfg.dykstra_iterations, cfg.tolerance))
}

pub fn dykstra_projection(m: &DMatrix<f64>, ball: &MatrixBall, max_iter: usize, tol: f64) -> Projection {
    let d = m.nrows();
    let scale = m.norm().max(1.0);
    let mut x = m.clone();
    let mut p = DMatrix::zeros(d, d);
    let mut q = DMatrix::zeros(d, d);
    let mut y = ball.project_spectral(m);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=max_iter.max(1) {
        iterations = it;
        let y_prev = y;
        y = ball.project_spectral(&(&x + &p));
        p += &x - &y;
        let x_next = ball.project_l1(&(&y + &q));
        q += &y - &x_next;
        x = x_next;
        let split = (&y - &x).norm();
        let moved = if it == 1 { f64::INFINITY } else { (&y - &y_prev).norm() };
        if split <= tol * scale && moved <= tol * scale {
            converged = true;
            break;
        }
    }
    let favored = (0..d).max_by(|&a, &b| y[(a, a)].total_cmp(&y[(b, b)])).unwrap_or(0);
    Projection { point: ball.repair(&y, favored), iterations, converged }
}
