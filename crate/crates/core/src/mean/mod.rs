//! Robust sparse mean estimation.
//!
//! Pipeline: prune far-away samples, search the capped simplex for weights
//! under which the centered second moment is close to identity along every
//! sparse direction, then threshold the reweighted mean to its top `k`
//! coordinates.

mod ellipsoid;
mod oracle;
mod prune;

use serde::{Deserialize, Serialize};

pub use ellipsoid::{find_feasible_weights, CutRecord, FeasibleWeights, SearchStatus};
pub use oracle::{smean_oracle, Hyperplane, OracleDecision, OracleVerdict};
pub use prune::{naive_prune, PruneReport};

use crate::dualnorm::{topk_indices, truncate_topk};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{SampleSet, SolverConfig};

/// Largest ε the estimator's guarantee covers.
pub const MAX_EPSILON: f64 = 1.0 / 288.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RobustMeanResult {
    /// k-sparse estimate.
    pub mu_hat: Vec<f64>,
    pub support: Vec<usize>,
    /// Weights over all `n` input samples (pruned samples get 0).
    pub weights: Vec<f64>,
    pub oracle_queries: usize,
    pub cuts_emitted: usize,
    pub eta: f64,
    pub pruned: Vec<usize>,
    pub status: SearchStatus,
    pub statistic: Option<f64>,
}

pub fn recover_robust_smean(
    samples: &SampleSet,
    k: usize,
    epsilon: f64,
    delta: f64,
    cfg: &SolverConfig,
) -> Result<RobustMeanResult> {
    cfg.validate()?;
    let d = samples.dim();
    if k == 0 || k > d {
        return Err(Error::SparsityOutOfRange { k, d });
    }
    if !(0.0..0.5).contains(&epsilon) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    if epsilon > MAX_EPSILON && !cfg.allow_large_epsilon {
        return Err(Error::EpsilonRegime(epsilon));
    }
    let eta = cfg.eta(epsilon);

    let (kept_set, pruned) = if samples.count() >= 2 {
        let report = naive_prune(samples, delta, cfg.prune_constant)?;
        (samples.subset(&report.kept), report)
    } else {
        let all: Vec<usize> = (0..samples.count()).collect();
        (samples.clone(), PruneReport { kept: all, removed: Vec::new(), center: Vec::new(), radius: 0.0 })
    };
    if kept_set.count() == 0 {
        return Err(Error::EmptyFeasibleSet { n: 0, epsilon });
    }

    let found = find_feasible_weights(&kept_set, k, epsilon, eta, delta, cfg)?;
    let mean = linalg::weighted_mean(kept_set.columns(), found.weights.as_slice());
    let mu_hat = truncate_topk(mean.as_slice(), k);
    let support = topk_indices(mean.as_slice(), k);

    let mut weights = vec![0.0; samples.count()];
    for (&i, &w) in pruned.kept.iter().zip(found.weights.as_slice()) {
        weights[i] = w;
    }
    Ok(RobustMeanResult {
        mu_hat,
        support,
        weights,
        oracle_queries: found.oracle_queries,
        cuts_emitted: found.cuts.len(),
        eta,
        pruned: pruned.removed,
        status: found.status,
        statistic: found.statistic,
    })
}
