//! The capped simplex `S_{n,ε}` of sample weights and box-with-sum projections.
//!
//! `S_{n,ε} = { w : Σ w_i = 1, 0 ≤ w_i ≤ 1/((1-ε)n) }` is the convex hull of
//! uniform distributions over `(1-ε)n`-subsets. The same box-plus-sum
//! machinery projects eigenvalue vectors in the matrix-ball projections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a coordinate-sum constraint is an equality or an upper bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SumMode {
    Equal,
    AtMost,
}

/// Per-coordinate cap `1/((1-ε)n)` of `S_{n,ε}`.
pub fn weight_cap(n: usize, epsilon: f64) -> f64 {
    1.0 / ((1.0 - epsilon) * n as f64)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(0.0..0.5).contains(&epsilon) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    Ok(())
}

/// A point of `S_{n,ε}`: belief weights over samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    w: Vec<f64>,
    epsilon: f64,
}

impl WeightVector {
    pub fn uniform(n: usize, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if n == 0 {
            return Err(Error::EmptyFeasibleSet { n, epsilon });
        }
        Ok(Self { w: vec![1.0 / n as f64; n], epsilon })
    }

    /// Wraps raw weights after checking the `S_{n,ε}` invariants.
    pub fn new(w: Vec<f64>, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        let out = Self { w, epsilon };
        out.check()?;
        Ok(out)
    }

    pub(crate) fn from_parts(w: Vec<f64>, epsilon: f64) -> Self {
        Self { w, epsilon }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn cap(&self) -> f64 {
        weight_cap(self.w.len(), self.epsilon)
    }

    /// Sum within 1e-9 and box within 1e-12.
    pub fn check(&self) -> Result<()> {
        if self.w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let sum: f64 = self.w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("weights sum to {sum}, not 1")));
        }
        let cap = self.cap();
        if let Some(bad) = self.w.iter().find(|&&x| x < -1e-12 || x > cap + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "weight {bad} outside [0, {cap}]"
            )));
        }
        Ok(())
    }

    /// Total weight on the given indices.
    pub fn mass_on(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.w[i]).sum()
    }
}

/// Euclidean projection onto `S_{n,ε}`.
///
/// Each output coordinate is `clamp(v_i - θ, 0, cap)` with `θ` solving the
/// sum constraint exactly (piecewise-linear sweep over breakpoints).
pub fn project_capped_simplex(v: &[f64], epsilon: f64) -> Result<WeightVector> {
    check_epsilon(epsilon)?;
    let n = v.len();
    if n == 0 {
        return Err(Error::EmptyFeasibleSet { n, epsilon });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if epsilon == 0.0 {
        // cap = 1/n: the set is the single uniform point.
        return WeightVector::uniform(n, 0.0);
    }
    let cap = weight_cap(n, epsilon);
    if cap * (n as f64) < 1.0 {
        return Err(Error::EmptyFeasibleSet { n, epsilon });
    }
    let w = project_box_sum(v, 0.0, cap, 1.0, SumMode::Equal);
    Ok(WeightVector::from_parts(w, epsilon))
}

/// Projection onto `{ lo ≤ x_i ≤ hi, Σ x_i = total }` (or `≤ total`).
///
/// `lo` must be finite; `hi` may be `+∞`. The caller guarantees the set is
/// nonempty (`n·lo ≤ total`, and `total ≤ n·hi` in `Equal` mode).
pub(crate) fn project_box_sum(v: &[f64], lo: f64, hi: f64, total: f64, mode: SumMode) -> Vec<f64> {
    let clamp = |x: f64| x.max(lo).min(hi);
    if mode == SumMode::AtMost {
        let clipped: Vec<f64> = v.iter().map(|&x| clamp(x)).collect();
        if clipped.iter().sum::<f64>() <= total {
            return clipped;
        }
    }
    let theta = solve_shift(v, lo, hi, total);
    v.iter().map(|&x| clamp(x - theta)).collect()
}

/// Finds θ with `Σ clamp(v_i - θ, lo, hi) = total`.
fn solve_shift(v: &[f64], lo: f64, hi: f64, total: f64) -> f64 {
    // (breakpoint, true = leaves the upper bound, false = reaches the lower bound)
    let mut events: Vec<(f64, bool)> = Vec::with_capacity(2 * v.len());
    let mut constant = 0.0;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for &x in v {
        if hi.is_finite() {
            events.push((x - hi, true));
            constant += hi;
        } else {
            free_sum += x;
            free += 1;
        }
        events.push((x - lo, false));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut last = f64::NEG_INFINITY;
    for &(at, leaves_upper) in &events {
        let h_right = constant + free_sum - free as f64 * at;
        if h_right <= total {
            return if free > 0 {
                ((constant + free_sum - total) / free as f64).max(last).min(at)
            } else {
                at
            };
        }
        if leaves_upper {
            constant -= hi;
            free_sum += at + hi;
            free += 1;
        } else {
            free_sum -= at + lo;
            free -= 1;
            constant += lo;
        }
        last = at;
    }
    last
}

/// `max Σ c_i x_i` over `{ lo ≤ x_i ≤ hi, Σ x_i = total }` (or `≤ total`).
pub(crate) fn max_linear_box_sum(c: &[f64], lo: f64, hi: f64, total: f64, mode: SumMode) -> f64 {
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by(|&a, &b| c[b].total_cmp(&c[a]));
    let mut budget = total - lo * c.len() as f64;
    let mut value: f64 = c.iter().map(|&ci| ci * lo).sum();
    for &i in &order {
        if budget <= 0.0 || (mode == SumMode::AtMost && c[i] <= 0.0) {
            break;
        }
        let take = budget.min(hi - lo);
        value += c[i] * take;
        budget -= take;
    }
    value
}

/// Minimizes `⟨c, w⟩` over `S_{n,ε}`: the cap goes on the smallest entries.
pub fn min_linear_over_weights(c: &[f64], epsilon: f64) -> Result<(f64, WeightVector)> {
    check_epsilon(epsilon)?;
    let n = c.len();
    if n == 0 {
        return Err(Error::EmptyFeasibleSet { n, epsilon });
    }
    if epsilon == 0.0 {
        let value = c.iter().sum::<f64>() / n as f64;
        return Ok((value, WeightVector::uniform(n, 0.0)?));
    }
    let cap = weight_cap(n, epsilon);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| c[a].total_cmp(&c[b]).then(a.cmp(&b)));
    let mut w = vec![0.0; n];
    let mut remaining: f64 = 1.0;
    for &i in &order {
        if remaining <= 0.0 {
            break;
        }
        let take = remaining.min(cap);
        w[i] = take;
        remaining -= take;
    }
    let value = c.iter().zip(&w).map(|(a, b)| a * b).sum();
    Ok((value, WeightVector::from_parts(w, epsilon)))
}
