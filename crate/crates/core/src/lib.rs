//! Robust estimation of sparse means and sparse principal components from
//! samples in which an adversary may have replaced an ε-fraction of points.
//!
//! The crate is organized around a weight vector `w` over samples, living in
//! the capped simplex `{Σw = 1, 0 ≤ w_i ≤ 1/((1-ε)n)}`:
//!
//! * [`mean`] searches for weights whose centered second moment looks
//!   isotropic along every sparse direction, using a separation oracle inside
//!   an ellipsoid method, and thresholds the reweighted mean.
//! * [`spca`] minimizes the sparse dual norm of `Σ_w - I` over the weights to
//!   detect a planted sparse spike, and jointly over a sparse PSD matrix to
//!   recover it.
//! * [`dualnorm`] computes the sparse vector and matrix dual norms these rely
//!   on, with explicit lower and upper certificates.
//! * [`verify`] holds non-robust baselines and Monte-Carlo concentration
//!   checks.

/// Crate version, embedded in result files.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod dualnorm;
pub mod error;
pub mod io;
pub mod linalg;
pub mod mean;
pub mod model;
pub mod simplex;
pub mod spca;
pub mod verify;

pub use dualnorm::{
    decompose_k2_blocks, matrix_dual_norm, project_matrix_ball, topk_dual_norm, CertifiedValue, MatrixBall,
    SparseDualWitness,
};
pub use error::{Error, Result};
pub use mean::{
    find_feasible_weights, naive_prune, recover_robust_smean, smean_oracle, FeasibleWeights, Hyperplane,
    OracleVerdict, PruneReport, RobustMeanResult,
};
pub use model::{
    derive_seed, generate_instance, loss_subspace, Adversary, CorruptionSpec, GroundTruth, ModelKind, ModelSpec,
    SampleSet, SolverConfig, SubspaceLoss,
};
pub use simplex::{project_capped_simplex, WeightVector};
pub use spca::{spca_detect, spca_recover, weighted_second_moment, DetectionResult, RecoveryResult, Verdict};
pub use verify::{
    adversarial_weight_search, concentration_sweep, nonrobust_spca_detect, nonrobust_spca_recover, threshold_mean,
    ConcentrationKind, ConcentrationReport,
};
