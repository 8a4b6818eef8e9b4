//! Certified maximization of `|⟨A, X⟩|` over a [`MatrixBall`].
//!
//! The primal side is an ADMM splitting of the ball into its spectral part
//! `C1` (PSD, trace, spectral cap) and the entrywise ℓ1 ball `C2`:
//!
//! ```text
//! X ← P_C1(Z - τV + τσA)
//! Z ← P_C2(X + τV)
//! V ← V + (X - Z)/τ
//! ```
//!
//! Every `X` iterate is repaired into the ball and scored, giving feasible
//! lower bounds. The multiplier `V` gives the Lagrangian upper bound
//! `h_C1(σA - V) + l1_max·max|V|`, valid for any `V`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ball::MatrixBall;
use super::topk::truncate_topk;
use crate::error::Result;
use crate::linalg::{self, check_symmetric, sym_eigen};
use crate::model::SolverConfig;
use crate::simplex::SumMode;

/// A dual-norm value with a feasible witness and a provable bracket.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertifiedValue {
    /// `sign · ⟨A, witness⟩`, the best feasible objective found.
    pub value: f64,
    pub witness: DMatrix<f64>,
    /// `+1` or `-1`: which of `±A` the witness aligns with.
    pub sign: f64,
    pub lower_cert: f64,
    pub upper_cert: f64,
    /// For `X_k` with `d ≤ 12`: `max` over k-subsets `S` of `λ_max(±A_SS)`.
    pub exhaustive_bound: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl CertifiedValue {
    pub fn gap(&self) -> f64 {
        (self.upper_cert - self.lower_cert).max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualNormOptions {
    /// ADMM iterations per start.
    pub iterations: usize,
    /// Extra random PSD starts, used only when the first run leaves a gap.
    pub random_starts: usize,
    /// Absolute certificate gap at which the solve stops.
    pub gap_target: f64,
    /// Stop as soon as the bracket lies entirely on one side of this value.
    pub threshold: Option<f64>,
    /// Upper certificates cost an extra eigenvalue solve; computed this often.
    pub check_every: usize,
    pub step_scale: f64,
    pub seed: u64,
}

impl DualNormOptions {
    pub fn from_config(cfg: &SolverConfig) -> Self {
        Self {
            iterations: cfg.dual_iterations,
            random_starts: cfg.dual_random_starts,
            gap_target: cfg.tolerance,
            threshold: None,
            check_every: 10,
            step_scale: cfg.dual_step_scale,
            seed: cfg.seed,
        }
    }

    pub fn with_gap(mut self, gap: f64) -> Self {
        self.gap_target = gap;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(threshold);
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }
}

struct SignState {
    z: DMatrix<f64>,
    v: DMatrix<f64>,
}

struct Best {
    value: f64,
    witness: DMatrix<f64>,
    sign: f64,
}

impl Best {
    fn offer(&mut self, value: f64, witness: DMatrix<f64>, sign: f64) {
        if value > self.value {
            *self = Best { value, witness, sign };
        }
    }
}

/// Reusable solver for one ball and dimension. Keeps the ADMM state of both
/// signs between calls, so a sequence of nearby matrices is solved warm.
pub struct DualNormSolver {
    ball: MatrixBall,
    d: usize,
    states: [Option<SignState>; 2],
    rng: ChaCha8Rng,
}

const SIGNS: [f64; 2] = [1.0, -1.0];

impl DualNormSolver {
    pub fn new(ball: MatrixBall, d: usize, seed: u64) -> Result<Self> {
        ball.validate(d)?;
        Ok(Self { ball, d, states: [None, None], rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn ball(&self) -> &MatrixBall {
        &self.ball
    }

    /// Drops the warm state.
    pub fn reset(&mut self) {
        self.states = [None, None];
    }

    /// Largest sparsity of a unit vector `v` with `vvᵀ` inside the ball.
    fn rank_one_sparsity(&self) -> usize {
        (self.ball.l1_max.floor() as usize).clamp(1, self.d)
    }

    fn repair_for(&self, x: &DMatrix<f64>, a: &DMatrix<f64>, sign: f64) -> DMatrix<f64> {
        let favored = (0..self.d)
            .max_by(|&i, &j| (sign * a[(i, i)]).total_cmp(&(sign * a[(j, j)])).then(j.cmp(&i)))
            .unwrap_or(0);
        self.ball.repair(x, favored)
    }

    /// Sparse rank-one start: top eigenvector refined by truncated power
    /// iteration.
    fn rank_one_start(&self, sa: &DMatrix<f64>, q: &[f64], shift: f64) -> (f64, DMatrix<f64>) {
        let s = self.rank_one_sparsity();
        let normalize = |mut v: Vec<f64>| {
            let n = linalg::norm2(&v);
            if n > 0.0 {
                v.iter_mut().for_each(|x| *x /= n);
            }
            v
        };
        let score = |v: &[f64]| {
            let vv = nalgebra::DVector::from_column_slice(v);
            (vv.transpose() * sa * &vv)[(0, 0)]
        };
        let mut v = normalize(truncate_topk(q, s));
        let mut best_v = v.clone();
        let mut best = score(&v);
        for _ in 0..30 {
            let vv = nalgebra::DVector::from_column_slice(&v);
            let mut next = sa * &vv + vv * shift;
            if next.norm() == 0.0 {
                break;
            }
            next /= next.norm();
            v = normalize(truncate_topk(next.as_slice(), s));
            let val = score(&v);
            if val > best + 1e-15 {
                best = val;
                best_v = v.clone();
            } else {
                break;
            }
        }
        let mut x = linalg::outer(&best_v);
        if self.ball.trace_mode == SumMode::Equal {
            x *= self.ball.trace_max;
        }
        // ‖vvᵀ‖₁ = ‖v‖₁² ≤ s ≤ l1_max already; repair only guards rounding.
        let x = self.ball.repair(&x, 0);
        (linalg::inner(sa, &x), x)
    }

    fn exhaustive(&self, a: &DMatrix<f64>) -> Option<(f64, DMatrix<f64>, f64)> {
        let k = self.ball.k;
        let d = self.d;
        let is_x_k = self.ball.trace_mode == SumMode::Equal
            && self.ball.trace_max == 1.0
            && self.ball.spectral_max.is_none()
            && self.ball.l1_max >= k as f64;
        if !is_x_k || d > 12 {
            return None;
        }
        let mut best: Option<(f64, DMatrix<f64>, f64)> = None;
        for mask in 0u32..(1 << d) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let idx: Vec<usize> = (0..d).filter(|i| mask >> i & 1 == 1).collect();
            let sub = DMatrix::from_fn(k, k, |i, j| a[(idx[i], idx[j])]);
            let eig = sym_eigen(&sub);
            for (sign, col, val) in [(1.0, 0, eig.values[0]), (-1.0, k - 1, -eig.values[k - 1])] {
                if best.as_ref().is_none_or(|b| val > b.0) {
                    let mut v = vec![0.0; d];
                    for (r, &i) in idx.iter().enumerate() {
                        v[i] = eig.vectors[(r, col)];
                    }
                    best = Some((val, linalg::outer(&v), sign));
                }
            }
        }
        best
    }

    /// Solves from the current warm state (or a fresh one).
    pub fn solve(&mut self, a: &DMatrix<f64>, opts: &DualNormOptions) -> Result<CertifiedValue> {
        check_symmetric(a)?;
        if a.nrows() != self.d {
            return Err(crate::error::Error::DimensionMismatch { expected: self.d, actual: a.nrows() });
        }
        let d = self.d;
        if linalg::max_abs(a) == 0.0 {
            return Ok(CertifiedValue {
                value: 0.0,
                witness: DMatrix::zeros(d, d),
                sign: 1.0,
                lower_cert: 0.0,
                upper_cert: 0.0,
                exhaustive_bound: None,
                iterations: 0,
                converged: true,
            });
        }

        let eig = sym_eigen(a);
        let neg: Vec<f64> = eig.values.iter().map(|x| -x).collect();
        let l1_bound = self.ball.l1_max * linalg::max_abs(a);
        let mut upper = [
            self.ball.spectral_support(&eig.values).min(l1_bound),
            self.ball.spectral_support(&neg).min(l1_bound),
        ];

        let mut best = Best { value: f64::NEG_INFINITY, witness: DMatrix::zeros(d, d), sign: 1.0 };
        for (s, &sign) in SIGNS.iter().enumerate() {
            let sa = a * sign;
            let col = if s == 0 { 0 } else { d - 1 };
            let q: Vec<f64> = eig.vectors.column(col).iter().copied().collect();
            let shift = (-(sign * eig.values[d - 1 - col])).max(0.0);
            let (val, x) = self.rank_one_start(&sa, &q, shift);
            best.offer(val, x, sign);
            let j = (0..d).max_by(|&i, &j| sa[(i, i)].total_cmp(&sa[(j, j)]).then(j.cmp(&i))).unwrap_or(0);
            let mut e = DMatrix::zeros(d, d);
            e[(j, j)] = self.ball.trace_max.min(self.ball.spectral_max.unwrap_or(f64::INFINITY));
            if self.ball.trace_mode == SumMode::Equal {
                e[(j, j)] = self.ball.trace_max;
            }
            if linalg::l1_norm(&e) <= self.ball.l1_max {
                best.offer(sign * a[(j, j)] * e[(j, j)], e, sign);
            }
        }

        let exhaustive_bound = self.exhaustive(a).map(|(val, x, sign)| {
            best.offer(val, x, sign);
            val
        });

        let tau = opts.step_scale / a.norm();
        let check_every = opts.check_every.max(1);
        let mut iterations = 0;
        let done = |lower: f64, upper: &[f64; 2]| {
            let hi = upper[0].max(upper[1]);
            hi - lower <= opts.gap_target || opts.threshold.is_some_and(|t| lower >= t || hi < t)
        };

        for start in 0..=opts.random_starts {
            if done(best.value, &upper) {
                break;
            }
            if start > 0 {
                for s in 0..2 {
                    if let Some(state) = self.states[s].as_mut() {
                        let g = DMatrix::from_fn(d, d, |_, _| self.rng.random_range(-1.0..1.0));
                        state.z = self.ball.project_spectral(&(&g * g.transpose()));
                    }
                }
            }
            for s in 0..2 {
                if self.states[s].is_none() {
                    let z = if best.sign == SIGNS[s] {
                        best.witness.clone()
                    } else {
                        self.ball.project_spectral(&(a * SIGNS[s]))
                    };
                    self.states[s] = Some(SignState { z, v: DMatrix::zeros(d, d) });
                }
            }
            for t in 1..=opts.iterations {
                iterations += 1;
                let check = t % check_every == 0 || t == opts.iterations;
                for (s, &sign) in SIGNS.iter().enumerate() {
                    if upper[s] <= best.value {
                        continue;
                    }
                    let state = self.states[s].as_mut().expect("initialized above");
                    let x = self.ball.project_spectral(&(&state.z - &state.v * tau + a * (sign * tau)));
                    let z = self.ball.project_l1(&(&x + &state.v * tau));
                    state.v += (&x - &z) / tau;
                    state.z = z;
                    if check {
                        let dual = a * sign - &state.v;
                        let vals = linalg::sym_eigenvalues(&dual);
                        let cert = self.ball.spectral_support(&vals)
                            + self.ball.l1_max * linalg::max_abs(&state.v);
                        upper[s] = upper[s].min(cert);
                        let w = self.repair_for(&x, a, sign);
                        best.offer(sign * linalg::inner(a, &w), w, sign);
                    }
                }
                if check && done(best.value, &upper) {
                    break;
                }
            }
        }

        let upper_cert = upper[0].max(upper[1]).max(best.value);
        Ok(CertifiedValue {
            value: best.value,
            witness: best.witness,
            sign: best.sign,
            lower_cert: best.value,
            upper_cert,
            exhaustive_bound,
            iterations,
            converged: upper_cert - best.value <= opts.gap_target,
        })
    }
}

/// `max_{X ∈ ball} |⟨A, X⟩|` with certificates, from a cold start.
pub fn matrix_dual_norm(a: &DMatrix<f64>, ball: &MatrixBall, cfg: &SolverConfig) -> Result<CertifiedValue> {
    let mut solver = DualNormSolver::new(ball.clone(), a.nrows(), cfg.seed)?;
    let scale = linalg::max_abs(a).max(1.0);
    solver.solve(a, &DualNormOptions::from_config(cfg).with_gap(cfg.tolerance * scale))
}
