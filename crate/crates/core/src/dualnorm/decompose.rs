use nalgebra::DMatrix;

use crate::error::Result;
use crate::linalg::check_symmetric;

/// Split of a symmetric matrix into blocks of decreasing magnitude.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub blocks: Vec<DMatrix<f64>>,
    /// `Σ_i ‖Y_i‖_F`.
    pub frobenius_sum: f64,
    /// False when the input was not (numerically) in `X_k`; the blocks are
    /// still valid, but the Frobenius budget is not guaranteed.
    pub input_in_x_k: bool,
}

/// Splits `X` into blocks with disjoint symmetric supports, at most `2k²`
/// nonzeros each, by sorting entries by magnitude and filling blocks in
/// order. An off-diagonal pair `(i,j),(j,i)` always stays in one block.
pub fn decompose_k2_blocks(x: &DMatrix<f64>, k: usize) -> Result<Decomposition> {
    check_symmetric(x)?;
    let d = x.nrows();
    if k == 0 || k > d {
        return Err(crate::error::Error::SparsityOutOfRange { k, d });
    }
    let ball = super::MatrixBall::x_k(k);
    let input_in_x_k = ball.violation(x).within(1e-6);

    // (magnitude, i, j) with i ≤ j.
    let mut units: Vec<(f64, usize, usize)> = Vec::new();
    for j in 0..d {
        for i in 0..=j {
            if x[(i, j)] != 0.0 {
                units.push((x[(i, j)].abs(), i, j));
            }
        }
    }
    units.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));

    let budget = 2 * k * k;
    let mut blocks = Vec::new();
    let mut current = DMatrix::zeros(d, d);
    let mut filled = 0;
    for (_, i, j) in units {
        let cost = if i == j { 1 } else { 2 };
        if filled + cost > budget {
            blocks.push(std::mem::replace(&mut current, DMatrix::zeros(d, d)));
            filled = 0;
        }
        current[(i, j)] = x[(i, j)];
        current[(j, i)] = x[(j, i)];
        filled += cost;
    }
    if filled > 0 {
        blocks.push(current);
    }
    let frobenius_sum = blocks.iter().map(|b| b.norm()).sum();
    Ok(Decomposition { blocks, frobenius_sum, input_in_x_k })
}
