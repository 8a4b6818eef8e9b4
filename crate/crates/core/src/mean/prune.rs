use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SampleSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
    pub center: Vec<f64>,
    pub radius: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Drops samples farther than `c·sqrt(d·ln(n/δ))` from the coordinatewise
/// median.
pub fn naive_prune(samples: &SampleSet, delta: f64, prune_constant: f64) -> Result<PruneReport> {
    let n = samples.count();
    let d = samples.dim();
    if n < 2 {
        return Err(Error::InvalidParameter("pruning needs at least 2 samples".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    let mut column = vec![0.0; n];
    let center: Vec<f64> = (0..d)
        .map(|j| {
            for (i, c) in column.iter_mut().enumerate() {
                *c = samples.sample(i)[j];
            }
            median(&mut column)
        })
        .collect();
    let radius = prune_constant * (d as f64 * (n as f64 / delta).ln()).sqrt();
    let (kept, removed): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| {
        let dist2: f64 = samples.sample(i).iter().zip(&center).map(|(x, c)| (x - c) * (x - c)).sum();
        dist2.sqrt() <= radius
    });
    Ok(PruneReport { kept, removed, center, radius })
}
