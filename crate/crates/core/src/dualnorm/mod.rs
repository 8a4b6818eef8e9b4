//! Dual norms over sparse vector and sparse PSD matrix sets.
//!
//! * `U_k` (k-sparse unit vectors): closed form, [`topk_dual_norm`].
//! * `X_k = {X ⪰ 0, tr X = 1, ‖X‖₁ ≤ k}` and the `W` family
//!   `{X ⪰ 0, tr X ≤ 2, ‖X‖₂ ≤ 1, ‖X‖₁ ≤ 3k}`: first-order solver with
//!   certificates, [`matrix_dual_norm`].

mod ball;
mod decompose;
mod solver;
mod topk;

pub use ball::{dykstra_projection, project_matrix_ball, BallViolation, MatrixBall, Projection};
pub use decompose::{decompose_k2_blocks, Decomposition};
pub use solver::{matrix_dual_norm, CertifiedValue, DualNormOptions, DualNormSolver};
pub use topk::{topk_dual_norm, topk_indices, truncate_topk, SparseDualWitness};
