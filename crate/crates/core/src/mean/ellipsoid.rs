//! Ellipsoid search for weights the separation oracle accepts.
//!
//! The search runs inside the hyperplane `Σ w_i = 1`, which has dimension
//! `m = n - 1`. The shape matrix is kept in low-rank form
//! `P = s · (R² Π - Σ_j β_j h_j h_jᵀ)` with `Π = I - 11ᵀ/n`, so a cut costs
//! `O(n · cuts)` instead of `O(n²)`.

use serde::{Deserialize, Serialize};

use super::oracle::{Hyperplane, MeanOracle};
use crate::error::{Error, Result};
use crate::model::{SampleSet, SolverConfig};
use crate::simplex::{project_capped_simplex, weight_cap, WeightVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    /// The oracle answered Yes.
    Accepted,
    /// The ellipsoid shrank below the volume floor; best-seen weights returned.
    VolumeFloor,
    /// Iteration cap hit; best-seen weights returned.
    IterationCap,
    /// The shape matrix lost positive definiteness numerically.
    Degenerate,
}

/// A cut emitted by the oracle together with the point it was queried at.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutRecord {
    pub hyperplane: Hyperplane,
    pub queried: Vec<f64>,
    pub statistic: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeasibleWeights {
    pub weights: WeightVector,
    pub status: SearchStatus,
    pub oracle_queries: usize,
    pub box_cuts: usize,
    /// Every oracle cut, in order.
    pub cuts: Vec<CutRecord>,
    /// Oracle statistic at the returned weights; `None` when the weight set
    /// is a single point and the oracle was never consulted.
    pub statistic: Option<f64>,
}

impl FeasibleWeights {
    pub fn accepted(&self) -> bool {
        self.status == SearchStatus::Accepted
    }
}

struct Ellipsoid {
    n: usize,
    center: Vec<f64>,
    r2: f64,
    scale: f64,
    terms: Vec<(f64, Vec<f64>)>,
    log_det: f64,
}

impl Ellipsoid {
    fn new(n: usize, radius: f64) -> Self {
        let m = (n - 1) as f64;
        Self {
            n,
            center: vec![1.0 / n as f64; n],
            r2: radius * radius,
            scale: 1.0,
            terms: Vec::new(),
            log_det: m * (radius * radius).ln(),
        }
    }

    /// `P g`.
    fn apply(&self, g: &[f64]) -> Vec<f64> {
        let mean = g.iter().sum::<f64>() / self.n as f64;
        let mut out: Vec<f64> = g.iter().map(|x| self.r2 * (x - mean)).collect();
        for (beta, h) in &self.terms {
            let dot: f64 = h.iter().zip(g).map(|(a, b)| a * b).sum();
            let c = beta * dot;
            out.iter_mut().zip(h).for_each(|(o, hi)| *o -= c * hi);
        }
        out.iter_mut().for_each(|o| *o *= self.scale);
        out
    }

    /// Diagonal entry `P_ii`.
    fn diag(&self, i: usize) -> f64 {
        let pi = 1.0 - 1.0 / self.n as f64;
        let low: f64 = self.terms.iter().map(|(beta, h)| beta * h[i] * h[i]).sum();
        self.scale * (self.r2 * pi - low)
    }

    /// Keeps `{w : gᵀw ≤ gᵀc - α·sqrt(gᵀPg)}`. Returns false when the
    /// update is not possible (`α ≥ 1` or a non-positive `gᵀPg`).
    fn cut(&mut self, g: &[f64], alpha: f64) -> bool {
        let m = (self.n - 1) as f64;
        let pg = self.apply(g);
        let gpg: f64 = pg.iter().zip(g).map(|(a, b)| a * b).sum();
        if !(gpg > 0.0) || alpha >= 1.0 {
            return false;
        }
        let alpha = alpha.max(0.0);
        let root = gpg.sqrt();
        let tau = (1.0 + m * alpha) / (m + 1.0);
        let sigma = 2.0 * (1.0 + m * alpha) / ((m + 1.0) * (1.0 + alpha));
        let delta = m * m * (1.0 - alpha * alpha) / (m * m - 1.0);
        self.center.iter_mut().zip(&pg).for_each(|(c, p)| *c -= tau * p / root);
        // P' = δ (P - σ pg pgᵀ / gPg); in unscaled form the new term is
        // (σ / (s·gPg)) pg pgᵀ.
        self.terms.push((sigma / (self.scale * gpg), pg));
        self.scale *= delta;
        self.log_det += m * delta.ln() + (1.0 - sigma).ln();
        true
    }
}

/// Ellipsoid method over `S_{n,ε}` driven by the separation oracle.
pub fn find_feasible_weights(
    samples: &SampleSet,
    k: usize,
    epsilon: f64,
    eta: f64,
    delta: f64,
    cfg: &SolverConfig,
) -> Result<FeasibleWeights> {
    let n = samples.count();
    let uniform = WeightVector::uniform(n, epsilon)?;
    if epsilon == 0.0 || n < 2 {
        // The capped simplex is the single uniform point.
        return Ok(FeasibleWeights {
            weights: uniform,
            status: SearchStatus::Accepted,
            oracle_queries: 0,
            box_cuts: 0,
            cuts: Vec::new(),
            statistic: None,
        });
    }
    let mut oracle = MeanOracle::new(samples, k, eta, cfg)?;
    let cap = weight_cap(n, epsilon);
    let m = (n - 1) as f64;
    let d = samples.dim() as f64;
    let floor = cfg.ellipsoid_volume_floor.unwrap_or_else(|| {
        epsilon / (n as f64 * (d * (n as f64 / delta).ln().max(1.0)).sqrt())
    });
    let log_floor = 2.0 * m * floor.ln();
    // Every point of S_{n,ε} lies within sqrt(cap - 1/n) of uniform.
    let radius = ((cap - 1.0 / n as f64).max(0.0).sqrt() * (1.0 + 1e-9)).max(f64::MIN_POSITIVE);
    let mut ell = Ellipsoid::new(n, radius);

    let mut best: Option<(f64, WeightVector)> = None;
    let mut cuts = Vec::new();
    let mut queries = 0;
    let mut box_cuts = 0;
    let mut status = SearchStatus::IterationCap;

    for _ in 0..cfg.ellipsoid_iterations {
        if ell.log_det < log_floor {
            status = SearchStatus::VolumeFloor;
            break;
        }
        // Most violated box constraint, measured in ellipsoid widths.
        let mut worst: Option<(f64, usize, f64)> = None;
        for (i, &c) in ell.center.iter().enumerate() {
            let (excess, sign) = if c > cap {
                (c - cap, 1.0)
            } else if c < 0.0 {
                (-c, -1.0)
            } else {
                continue;
            };
            let width = ell.diag(i).max(0.0).sqrt();
            let alpha = if width > 0.0 { excess / width } else { f64::INFINITY };
            if worst.is_none_or(|w| alpha > w.0) {
                worst = Some((alpha, i, sign));
            }
        }
        if let Some((alpha, i, sign)) = worst {
            let mut g = vec![0.0; n];
            g[i] = sign;
            box_cuts += 1;
            if !ell.cut(&g, alpha) {
                status = SearchStatus::Degenerate;
                break;
            }
            continue;
        }

        let w = project_capped_simplex(&ell.center, epsilon)?;
        let verdict = oracle.query(w.as_slice())?;
        queries += 1;
        if best.as_ref().is_none_or(|b| verdict.statistic < b.0) {
            best = Some((verdict.statistic, w.clone()));
        }
        let Some(h) = verdict.cut() else {
            return Ok(FeasibleWeights {
                weights: w,
                status: SearchStatus::Accepted,
                oracle_queries: queries,
                box_cuts,
                cuts,
                statistic: Some(verdict.statistic),
            });
        };
        // ℓ(w) = 0 at the queried point; the center may differ from it by
        // rounding in the projection, which makes the cut slightly deep.
        let at_center = h.evaluate(&ell.center);
        let pg = ell.apply(&h.coefficients);
        let gpg: f64 = pg.iter().zip(&h.coefficients).map(|(a, b)| a * b).sum();
        let alpha = if gpg > 0.0 { at_center / gpg.sqrt() } else { 0.0 };
        let ok = ell.cut(&h.coefficients, alpha);
        cuts.push(CutRecord { hyperplane: h.clone(), queried: w.into_vec(), statistic: verdict.statistic });
        if !ok {
            status = SearchStatus::Degenerate;
            break;
        }
    }

    let (statistic, weights) = match best {
        Some(b) => b,
        None => {
            let v = oracle.query(uniform.as_slice())?;
            queries += 1;
            (v.statistic, uniform)
        }
    };
    if !statistic.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(FeasibleWeights { weights, status, oracle_queries: queries, box_cuts, cuts, statistic: Some(statistic) })
}
