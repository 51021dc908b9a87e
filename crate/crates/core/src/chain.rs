//! Dense Markov-chain helpers shared by the model and analysis code.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values of `I - P` below this count toward the null space.
const RANK_TOL: f64 = 1e-9;

pub fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// Checks that `I - P` has exactly one null direction, i.e. that the chain has
/// a single recurrent class.
pub fn check_unichain(p: &DMatrix<f64>) -> Result<()> {
    let n = p.nrows();
    if n <= 1 {
        return Ok(());
    }
    let a = DMatrix::identity(n, n) - p;
    let sv = a.singular_values();
    let scale = sv.max().max(1.0);
    let null_dim = sv.iter().filter(|&&s| s <= RANK_TOL * scale).count();
    if null_dim > 1 {
        return Err(Error::ReducibleChain);
    }
    Ok(())
}

/// Stationary distribution `d` with `dᵀ(I - P) = 0`, `Σ d = 1`.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = p.nrows();
    check_unichain(p)?;
    // Transposed balance equations with the last one replaced by normalization.
    let mut a = (DMatrix::identity(n, n) - p).transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let d = a.lu().solve(&b).ok_or(Error::ReducibleChain)?;
    Ok(d.map(|v| if v < 0.0 && v > -1e-12 { 0.0 } else { v }))
}

/// Smallest `t0 <= n²` with every entry of `P^t0` positive, with
/// `ρ = min_ij P^t0(i, j)`.
pub fn doeblin_constants(p: &DMatrix<f64>) -> Result<(usize, f64)> {
    let n = p.nrows();
    let limit = (n * n).max(1);
    let mut power = p.clone();
    for t0 in 1..=limit {
        let rho = power.min();
        if rho > 0.0 {
            return Ok((t0, rho));
        }
        power = &power * p;
    }
    Err(Error::PeriodicChain { searched: limit })
}

/// Total-variation distance between two distributions.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
