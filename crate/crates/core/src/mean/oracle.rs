use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dualnorm::{DualNormOptions, DualNormSolver, MatrixBall};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{SampleSet, SolverConfig};
use crate::simplex::WeightVector;

/// Affine function `ℓ(w) = ⟨coefficients, w⟩ + offset` on weight space.
/// Weights with `ℓ(w) > 0` are cut away.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Hyperplane {
    /// `c_i = σ (x_i - μ̂)ᵀ A (x_i - μ̂)`.
    pub coefficients: Vec<f64>,
    /// `-σ - |⟨A, Σ̂ - I⟩|`.
    pub offset: f64,
    pub frozen_witness: DMatrix<f64>,
    pub frozen_center: Vec<f64>,
    pub sign: f64,
}

impl Hyperplane {
    pub fn evaluate(&self, w: &[f64]) -> f64 {
        self.coefficients.iter().zip(w).map(|(c, x)| c * x).sum::<f64>() + self.offset
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum OracleDecision {
    Yes,
    Cut(Hyperplane),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub decision: OracleDecision,
    /// Certified lower bound on `‖Σ̂ - I‖*_{X_k}`, attained by the witness.
    pub statistic: f64,
    pub upper_cert: f64,
    pub gap: f64,
}

impl OracleVerdict {
    pub fn is_yes(&self) -> bool {
        matches!(self.decision, OracleDecision::Yes)
    }

    pub fn cut(&self) -> Option<&Hyperplane> {
        match &self.decision {
            OracleDecision::Cut(h) => Some(h),
            OracleDecision::Yes => None,
        }
    }
}

/// Weighted mean and centered covariance minus identity.
pub(crate) fn centered_moments(samples: &SampleSet, w: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let data = samples.columns();
    let mu = linalg::weighted_mean(data, w);
    let mut m = linalg::weighted_gram(data, w);
    m.ger(-1.0, &mu, &mu, 1.0);
    for i in 0..m.nrows() {
        m[(i, i)] -= 1.0;
    }
    linalg::symmetrize(&mut m);
    (mu.as_slice().to_vec(), m)
}

/// Separation oracle with a warm dual-norm solver, reused across queries.
pub(crate) struct MeanOracle<'a> {
    samples: &'a SampleSet,
    solver: DualNormSolver,
    eta: f64,
    opts: DualNormOptions,
}

impl<'a> MeanOracle<'a> {
    pub fn new(samples: &'a SampleSet, k: usize, eta: f64, cfg: &SolverConfig) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidParameter(format!("eta must be finite and > 0, got {eta}")));
        }
        let solver = DualNormSolver::new(MatrixBall::x_k(k), samples.dim(), cfg.seed)?;
        let opts = DualNormOptions::from_config(cfg).with_gap(eta / 10.0).with_threshold(20.0 * eta);
        Ok(Self { samples, solver, eta, opts })
    }

    pub fn query(&mut self, w: &[f64]) -> Result<OracleVerdict> {
        let threshold = 20.0 * self.eta;
        let (mu, m) = centered_moments(self.samples, w);
        let mut r = self.solver.solve(&m, &self.opts)?;
        if r.lower_cert < threshold && r.upper_cert >= threshold {
            let retry = DualNormOptions {
                iterations: 4 * self.opts.iterations,
                random_starts: self.opts.random_starts.max(1),
                ..self.opts.clone()
            };
            r = self.solver.solve(&m, &retry)?;
        }
        let gap = r.gap();
        let decision = if r.lower_cert >= threshold {
            let centered = self.samples.columns().map_with_location(|i, _, x| x - mu[i]);
            let q = linalg::quadratic_forms(&centered, &r.witness);
            OracleDecision::Cut(Hyperplane {
                coefficients: q.iter().map(|x| r.sign * x).collect(),
                offset: -r.sign - r.value,
                frozen_witness: r.witness.clone(),
                frozen_center: mu,
                sign: r.sign,
            })
        } else if r.upper_cert < threshold || gap <= self.eta / 10.0 {
            // A straddling but tight bracket means ‖Σ̂ - I‖* < 20η + η/10.
            OracleDecision::Yes
        } else {
            return Err(Error::Indeterminate { lower: r.lower_cert, upper: r.upper_cert, threshold });
        };
        Ok(OracleVerdict { decision, statistic: r.value, upper_cert: r.upper_cert, gap })
    }
}

/// One query of the separation oracle at weights `w`.
pub fn smean_oracle(
    samples: &SampleSet,
    w: &WeightVector,
    k: usize,
    eta: f64,
    cfg: &SolverConfig,
) -> Result<OracleVerdict> {
    if w.len() != samples.count() {
        return Err(Error::DimensionMismatch { expected: samples.count(), actual: w.len() });
    }
    w.check()?;
    MeanOracle::new(samples, k, eta, cfg)?.query(w.as_slice())
}
