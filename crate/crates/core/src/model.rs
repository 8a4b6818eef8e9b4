//! Domain types for ε-corrupted Gaussian samples and the synthetic
//! instance generator.
//!
//! An instance is produced in three seeded steps: draw the model
//! parameters (sparse mean or sparse spike), draw `n` clean samples, then
//! let the chosen adversary replace exactly `floor(εn)` of them at positions
//! picked by a seeded shuffle.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clean model parameters of a generated instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// `N(μ, I)` with `μ` k-sparse.
    SparseMean { mu: Vec<f64>, k: usize },
    /// `N(0, I + ρ v vᵀ)` with `v` a k-sparse unit vector.
    Spiked { v: Vec<f64>, rho: f64, k: usize },
    /// `N(0, I)`.
    Isotropic,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::SparseMean { .. } => "sparse-mean",
            ModelKind::Spiked { .. } => "spiked",
            ModelKind::Isotropic => "isotropic",
        }
    }
}

/// What the generator is asked to produce. Parameters left as `None` are
/// drawn from the seeded generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Random supports get entries `±magnitude` unless `mu` is given.
    SparseMean { mu: Option<Vec<f64>>, magnitude: f64 },
    Spiked { rho: f64, v: Option<Vec<f64>> },
    Isotropic,
}

impl ModelSpec {
    pub fn sparse_mean() -> Self {
        ModelSpec::SparseMean { mu: None, magnitude: 1.0 }
    }

    pub fn spiked(rho: f64) -> Self {
        ModelSpec::Spiked { rho, v: None }
    }
}

/// Concrete adversaries. Each one edits the clean draw it replaces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Adversary {
    None,
    /// Adds `magnitude · u` for a fixed random unit `u` with `support` nonzeros.
    SparseShift { support: usize, magnitude: f64 },
    /// Adds `±sqrt(scale) · u` (random sign) for a fixed sparse unit `u`,
    /// raising the second moment along `u` by `scale` on the bad rows.
    SparseVarianceSpike { support: usize, scale: f64 },
    /// Replaces the row by `center + radius · r` with `r` a uniform random
    /// unit vector.
    DenseOutliers { radius: f64 },
    /// Adds `±sqrt(rho_decoy/ε) · u` for a k-sparse unit `u` orthogonal to the
    /// planted spike, so the overall covariance gains `rho_decoy · u uᵀ`.
    OrthogonalDecoy { rho_decoy: f64 },
}

impl Adversary {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, x: f64| {
            Err(Error::InvalidParameter(format!("adversary {name} must be finite and >= 0, got {x}")))
        };
        match *self {
            Adversary::None => Ok(()),
            Adversary::SparseShift { support, magnitude } => {
                if !(magnitude.is_finite() && magnitude >= 0.0) {
                    return bad("magnitude", magnitude);
                }
                check_support(support)
            }
            Adversary::SparseVarianceSpike { support, scale } => {
                if !(scale.is_finite() && scale >= 0.0) {
                    return bad("scale", scale);
                }
                check_support(support)
            }
            Adversary::DenseOutliers { radius } if !(radius.is_finite() && radius >= 0.0) => {
                bad("radius", radius)
            }
            Adversary::OrthogonalDecoy { rho_decoy } if !(rho_decoy.is_finite() && rho_decoy >= 0.0) => {
                bad("rho_decoy", rho_decoy)
            }
            _ => Ok(()),
        }
    }
}

fn check_support(support: usize) -> Result<()> {
    if support == 0 {
        return Err(Error::InvalidParameter("adversary support size must be >= 1".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub epsilon: f64,
    pub adversary: Adversary,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn clean(seed: u64) -> Self {
        Self { epsilon: 0.0, adversary: Adversary::None, seed }
    }

    pub fn new(epsilon: f64, adversary: Adversary, seed: u64) -> Self {
        Self { epsilon, adversary, seed }
    }
}

/// Number of corrupted rows, `floor(εn)`, robust to binary rounding of `ε`.
pub fn corrupted_count(epsilon: f64, n: usize) -> usize {
    (epsilon * n as f64 + 1e-9).floor() as usize
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub model: ModelKind,
    /// Sorted indices of the corrupted rows.
    pub bad_indices: Vec<usize>,
    pub epsilon: f64,
    pub adversary: Adversary,
    pub seed: u64,
}

impl GroundTruth {
    pub fn good_indices(&self, n: usize) -> Vec<usize> {
        let mut bad = self.bad_indices.iter().peekable();
        (0..n)
            .filter(|i| {
                if bad.peek() == Some(&i) {
                    bad.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }

    pub fn sparsity(&self) -> Option<usize> {
        match self.model {
            ModelKind::SparseMean { k, .. } | ModelKind::Spiked { k, .. } => Some(k),
            ModelKind::Isotropic => None,
        }
    }
}

/// `n` samples in `R^d`, optionally with the ground truth that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    /// `d × n`; column `i` is sample `i`, contiguous in memory.
    data: DMatrix<f64>,
    ground_truth: Option<GroundTruth>,
}

impl SampleSet {
    /// Builds a sample set from row-major `n × d` data.
    pub fn from_rows(n: usize, d: usize, rows: &[f64]) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidParameter("sample set needs n >= 1 and d >= 1".into()));
        }
        if rows.len() != n * d {
            return Err(Error::DimensionMismatch { expected: n * d, actual: rows.len() });
        }
        if rows.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { data: DMatrix::from_column_slice(d, n, rows), ground_truth: None })
    }

    pub fn from_vecs(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.len());
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, actual: r.len() });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_rows(n, d, &flat)
    }

    pub fn with_ground_truth(mut self, truth: GroundTruth) -> Result<Self> {
        if truth.bad_indices.iter().any(|&i| i >= self.count()) {
            return Err(Error::InvalidParameter("bad index outside the sample range".into()));
        }
        self.ground_truth = Some(truth);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn count(&self) -> usize {
        self.data.ncols()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.data.as_slice()[i * d..(i + 1) * d]
    }

    /// Row-major `n × d` view of the samples.
    pub fn as_row_major(&self) -> &[f64] {
        self.data.as_slice()
    }

    /// Samples as the columns of a `d × n` matrix.
    pub fn columns(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn ground_truth(&self) -> Option<&GroundTruth> {
        self.ground_truth.as_ref()
    }

    /// Keeps only `indices` (ascending), remapping any ground truth.
    pub fn subset(&self, indices: &[usize]) -> SampleSet {
        let d = self.dim();
        let mut rows = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            rows.extend_from_slice(self.sample(i));
        }
        let data = DMatrix::from_column_slice(d, indices.len(), &rows);
        let ground_truth = self.ground_truth.as_ref().map(|gt| {
            let bad: std::collections::HashSet<usize> = gt.bad_indices.iter().copied().collect();
            let remapped = indices
                .iter()
                .enumerate()
                .filter(|(_, i)| bad.contains(i))
                .map(|(new, _)| new)
                .collect();
            GroundTruth { bad_indices: remapped, ..gt.clone() }
        });
        SampleSet { data, ground_truth }
    }

    /// Every sample multiplied by `c`; ground truth is dropped.
    pub fn scaled(&self, c: f64) -> SampleSet {
        SampleSet { data: &self.data * c, ground_truth: None }
    }
}

/// Counter-based seed splitting (SplitMix64 finalizer), so per-trial
/// streams do not depend on scheduling.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn random_support(rng: &mut ChaCha8Rng, d: usize, k: usize, exclude: &[usize]) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..d).filter(|i| !exclude.contains(i)).collect();
    if pool.len() < k {
        pool = (0..d).collect();
    }
    pool.shuffle(rng);
    let mut support = pool[..k].to_vec();
    support.sort_unstable();
    support
}

/// Unit vector with `±1/sqrt(k)` entries on a random k-subset.
fn random_sparse_unit(rng: &mut ChaCha8Rng, d: usize, k: usize, exclude: &[usize]) -> Vec<f64> {
    let k = k.min(d);
    let support = random_support(rng, d, k, exclude);
    let mut v = vec![0.0; d];
    let mag = 1.0 / (k as f64).sqrt();
    for &i in &support {
        v[i] = if rng.random::<bool>() { mag } else { -mag };
    }
    v
}

fn support_of(v: &[f64]) -> Vec<usize> {
    v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, _)| i).collect()
}

fn gaussian_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Draws an ε-corrupted instance. Deterministic in `spec.seed`.
pub fn generate_instance(
    model: &ModelSpec,
    d: usize,
    k: usize,
    n: usize,
    spec: &CorruptionSpec,
) -> Result<SampleSet> {
    if k == 0 || k > d {
        return Err(Error::SparsityOutOfRange { k, d });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    if !(0.0..0.5).contains(&spec.epsilon) {
        return Err(Error::InvalidEpsilon(spec.epsilon));
    }
    spec.adversary.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let kind = match model {
        ModelSpec::SparseMean { mu, magnitude } => {
            let mu = match mu {
                Some(mu) => {
                    if mu.len() != d {
                        return Err(Error::DimensionMismatch { expected: d, actual: mu.len() });
                    }
                    if mu.iter().any(|x| !x.is_finite()) {
                        return Err(Error::NonFinite);
                    }
                    if support_of(mu).len() > k {
                        return Err(Error::InvalidMean { k });
                    }
                    mu.clone()
                }
                None => {
                    let scale = magnitude * (k as f64).sqrt();
                    random_sparse_unit(&mut rng, d, k, &[]).iter().map(|x| x * scale).collect()
                }
            };
            ModelKind::SparseMean { mu, k }
        }
        ModelSpec::Spiked { rho, v } => {
            if !(rho.is_finite() && *rho >= 0.0) {
                return Err(Error::InvalidParameter(format!("rho must be finite and >= 0, got {rho}")));
            }
            let v = match v {
                Some(v) => {
                    if v.len() != d {
                        return Err(Error::DimensionMismatch { expected: d, actual: v.len() });
                    }
                    let norm = crate::linalg::norm2(v);
                    if (norm - 1.0).abs() > 1e-9 || support_of(v).len() > k {
                        return Err(Error::InvalidSpike { k });
                    }
                    v.clone()
                }
                None => random_sparse_unit(&mut rng, d, k, &[]),
            };
            ModelKind::Spiked { v, rho: *rho, k }
        }
        ModelSpec::Isotropic => ModelKind::Isotropic,
    };

    let mut rows = Vec::with_capacity(n * d);
    for _ in 0..n {
        let mut x = gaussian_vec(&mut rng, d);
        match &kind {
            ModelKind::SparseMean { mu, .. } => x.iter_mut().zip(mu).for_each(|(a, m)| *a += m),
            ModelKind::Spiked { v, rho, .. } => {
                let z: f64 = rng.sample(StandardNormal);
                let s = rho.sqrt() * z;
                x.iter_mut().zip(v).for_each(|(a, vi)| *a += s * vi);
            }
            ModelKind::Isotropic => {}
        }
        rows.extend(x);
    }

    let bad_count = corrupted_count(spec.epsilon, n);
    let mut positions: Vec<usize> = (0..n).collect();
    positions.shuffle(&mut rng);
    let mut bad_indices = positions[..bad_count].to_vec();
    bad_indices.sort_unstable();

    let center: Vec<f64> = match &kind {
        ModelKind::SparseMean { mu, .. } => mu.clone(),
        _ => vec![0.0; d],
    };
    let planted_support = match &kind {
        ModelKind::Spiked { v, .. } => support_of(v),
        ModelKind::SparseMean { mu, .. } => support_of(mu),
        ModelKind::Isotropic => Vec::new(),
    };

    if bad_count > 0 {
        match spec.adversary {
            Adversary::None => {}
            Adversary::SparseShift { support, magnitude } => {
                let u = random_sparse_unit(&mut rng, d, support, &[]);
                for &i in &bad_indices {
                    let row = &mut rows[i * d..(i + 1) * d];
                    row.iter_mut().zip(&u).for_each(|(a, ui)| *a += magnitude * ui);
                }
            }
            Adversary::SparseVarianceSpike { support, scale } => {
                let u = random_sparse_unit(&mut rng, d, support, &[]);
                let amp = scale.sqrt();
                for &i in &bad_indices {
                    let s = if rng.random::<bool>() { amp } else { -amp };
                    let row = &mut rows[i * d..(i + 1) * d];
                    row.iter_mut().zip(&u).for_each(|(a, ui)| *a += s * ui);
                }
            }
            Adversary::DenseOutliers { radius } => {
                for &i in &bad_indices {
                    let mut r = gaussian_vec(&mut rng, d);
                    let norm = crate::linalg::norm2(&r).max(f64::MIN_POSITIVE);
                    r.iter_mut().for_each(|x| *x *= radius / norm);
                    let row = &mut rows[i * d..(i + 1) * d];
                    for j in 0..d {
                        row[j] = center[j] + r[j];
                    }
                }
            }
            Adversary::OrthogonalDecoy { rho_decoy } => {
                let mut u = random_sparse_unit(&mut rng, d, k, &planted_support);
                if let ModelKind::Spiked { v, .. } = &kind {
                    // Only reachable when d < 2k and supports must overlap.
                    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                    u.iter_mut().zip(v).for_each(|(a, b)| *a -= dot * b);
                    let norm = crate::linalg::norm2(&u);
                    if norm > 0.0 {
                        u.iter_mut().for_each(|a| *a /= norm);
                    }
                }
                let amp = (rho_decoy / spec.epsilon).sqrt();
                for &i in &bad_indices {
                    let s = if rng.random::<bool>() { amp } else { -amp };
                    let row = &mut rows[i * d..(i + 1) * d];
                    row.iter_mut().zip(&u).for_each(|(a, ui)| *a += s * ui);
                }
            }
        }
    }

    let truth = GroundTruth {
        model: kind,
        bad_indices,
        epsilon: spec.epsilon,
        adversary: spec.adversary.clone(),
        seed: spec.seed,
    };
    SampleSet::from_rows(n, d, &rows)?.with_ground_truth(truth)
}

/// Subspace distance between two directions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceLoss {
    /// `‖uuᵀ - vvᵀ‖_F / √2 = sqrt(1 - (uᵀv)²)`; the primary metric.
    pub frobenius: f64,
    /// `‖uuᵀ - vvᵀ‖_2 / √2`.
    pub spectral: f64,
}

/// Loss between the lines spanned by `u` and `v` (both normalized first).
pub fn loss_subspace(u: &[f64], v: &[f64]) -> Result<SubspaceLoss> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: v.len(), actual: u.len() });
    }
    let nu = crate::linalg::norm2(u);
    let nv = crate::linalg::norm2(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    let cos: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / (nu * nv);
    let sin = (1.0 - cos * cos).max(0.0).sqrt();
    Ok(SubspaceLoss { frobenius: sin, spectral: sin / std::f64::consts::SQRT_2 })
}

/// Solver knobs shared by every algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// `η = eta_constant · ε · sqrt(ln(1/ε))`.
    pub eta_constant: f64,
    pub tolerance: f64,
    /// Ascent iterations per start in the matrix dual-norm solver.
    pub dual_iterations: usize,
    /// Random PSD starts tried when the top-k start does not certify.
    pub dual_random_starts: usize,
    /// Ascent step is `dual_step_scale / ‖A‖_F`.
    pub dual_step_scale: f64,
    pub dykstra_iterations: usize,
    /// Outer iterations of the weight-space subgradient methods.
    pub subgradient_iterations: usize,
    pub subgradient_restarts: usize,
    /// Warm dual-norm ascent steps per outer subgradient iteration.
    pub inner_iterations: usize,
    /// `b` in the step schedule `a·b/((b+t)‖g‖²)`.
    pub step_offset: f64,
    pub ellipsoid_iterations: usize,
    /// Radius whose ball volume stops the ellipsoid search; `None` derives
    /// `ε/(n·sqrt(d·ln(n/δ)))`.
    pub ellipsoid_volume_floor: Option<f64>,
    pub prune_constant: f64,
    /// Skip the `ε ≤ 1/288` regime check in robust mean recovery.
    pub allow_large_epsilon: bool,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eta_constant: 2.0,
            tolerance: 1e-6,
            dual_iterations: 500,
            dual_random_starts: 3,
            dual_step_scale: 1.0,
            dykstra_iterations: 500,
            subgradient_iterations: 2000,
            subgradient_restarts: 5,
            inner_iterations: 3,
            step_offset: 10.0,
            ellipsoid_iterations: 4000,
            ellipsoid_volume_floor: None,
            prune_constant: 3.0,
            allow_large_epsilon: false,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn eta(&self, epsilon: f64) -> f64 {
        if epsilon <= 0.0 {
            0.0
        } else {
            self.eta_constant * epsilon * (1.0 / epsilon).ln().sqrt()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eta_constant", self.eta_constant),
            ("tolerance", self.tolerance),
            ("dual_step_scale", self.dual_step_scale),
            ("step_offset", self.step_offset),
            ("prune_constant", self.prune_constant),
        ];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and > 0")));
            }
        }
        if self.dual_iterations == 0 || self.subgradient_iterations == 0 || self.inner_iterations == 0 {
            return Err(Error::InvalidParameter("iteration budgets must be >= 1".into()));
        }
        if let Some(r) = self.ellipsoid_volume_floor {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidParameter("ellipsoid_volume_floor must be > 0".into()));
            }
        }
        Ok(())
    }
}
