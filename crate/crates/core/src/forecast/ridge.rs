use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Solve `(XᵀX + λI) B = XᵀY` for `B` (`d × m`).
pub(crate) fn solve(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    solve_normal(x.tr_mul(x), &x.tr_mul(y), lambda)
}

/// Same, from accumulated `XᵀX` and `XᵀY`.
pub(crate) fn solve_normal(
    mut gram: DMatrix<f64>,
    rhs: &DMatrix<f64>,
    lambda: f64,
) -> Result<DMatrix<f64>> {
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("ridge normal equations are not positive definite".into()))?;
    Ok(chol.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_linear_map() {
        let x = DMatrix::from_fn(50, 3, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0 + j as f64 * 0.1 * i as f64);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 0.5, 0.0, 3.0, 1.5]);
        let y = &x * &b;
        let got = solve(&x, &y, 1e-12).unwrap();
        assert!((got - b).abs().max() < 1e-8);
    }

    #[test]
    fn huge_penalty_shrinks_to_zero() {
        let x = DMatrix::from_fn(20, 2, |i, j| (i + j) as f64);
        let y = DMatrix::from_fn(20, 1, |i, _| i as f64);
        assert!(solve(&x, &y, 1e12).unwrap().abs().max() < 1e-6);
    }
}
