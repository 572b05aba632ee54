//! Small dense linear algebra: cyclic Jacobi eigendecomposition and ridge
//! solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{HssError, Result};

pub const JACOBI_TOLERANCE: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix, eigenvalues descending; column `j` of
/// `vectors` pairs with `values[j]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm falls
/// below `tol` times the matrix norm.
pub fn jacobi_eigen(a: &DMatrix<f64>, tol: f64) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(HssError::Dimension { what: "square matrix", expected: n, got: a.ncols() });
    }
    if (a - a.transpose()).amax() > 1e-12 * a.amax().max(1.0) {
        return Err(HssError::invalid("matrix is not symmetric"));
    }
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm().max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[(i, j)].powi(2)).sum::<f64>().sqrt();
        if off <= tol * scale {
            return Ok(sorted(m, v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(HssError::Divergence("Jacobi sweeps did not converge".into()))
}

fn sorted(m: DMatrix<f64>, v: DMatrix<f64>) -> SymmetricEigen {
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[(b, b)].total_cmp(&m[(a, a)]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    SymmetricEigen { values, vectors }
}

/// Ridge regression `argmin_w Σ(w·x_i − y_i)² + λ‖w‖²` via Cholesky.
pub fn ridge_solve(xs: &[Vec<f64>], ys: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let d = xs.first().map_or(0, Vec::len);
    if xs.len() != ys.len() || d == 0 {
        return Err(HssError::invalid("ridge needs matching, nonempty design and targets"));
    }
    if !(lambda > 0.0) {
        return Err(HssError::invalid("ridge penalty must be positive"));
    }
    let x = DMatrix::from_fn(xs.len(), d, |i, j| xs[i][j]);
    let y = DVector::from_column_slice(ys);
    let gram = x.transpose() * &x + DMatrix::identity(d, d) * lambda;
    let chol = gram.cholesky().ok_or_else(|| HssError::Divergence("ridge system is not positive definite".into()))?;
    Ok(chol.solve(&(x.transpose() * y)).iter().copied().collect())
}

/// Solves `(A + c I) x = b` for symmetric positive semidefinite `A`, `c > 0`.
pub fn solve_shifted(a: &[Vec<f64>], b: &[f64], c: f64) -> Result<Vec<f64>> {
    let n = a.len();
    let m = DMatrix::from_fn(n, n, |i, j| a[i][j]) + DMatrix::identity(n, n) * c;
    let chol = m.cholesky().ok_or_else(|| HssError::Divergence("shifted system is not positive definite".into()))?;
    Ok(chol.solve(&DVector::from_column_slice(b)).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_matches_nalgebra() {
        let a = DMatrix::from_row_slice(4, 4, &[4.0, 1.0, 0.5, 0.0, 1.0, 3.0, 0.2, 0.1, 0.5, 0.2, 2.0, 0.3, 0.0, 0.1, 0.3, 1.0]);
        let e = jacobi_eigen(&a, JACOBI_TOLERANCE).unwrap();
        let mut reference: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        reference.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in e.values.iter().zip(&reference) {
            assert!((x - y).abs() < 1e-9);
        }
        let recon = &e.vectors * DMatrix::from_diagonal(&DVector::from_vec(e.values.clone())) * e.vectors.transpose();
        assert!((recon - a).amax() < 1e-9);
    }

    #[test]
    fn jacobi_diagonal_and_errors() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 2.0]));
        assert_eq!(jacobi_eigen(&a, JACOBI_TOLERANCE).unwrap().values, vec![3.0, 2.0, 1.0]);
        assert!(jacobi_eigen(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]), 1e-10).is_err());
    }

    #[test]
    fn ridge_recovers_noiseless_weights() {
        let xs = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let ys = vec![2.0, -1.0, 1.0];
        let w = ridge_solve(&xs, &ys, 1e-10).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-6 && (w[1] + 1.0).abs() < 1e-6);
        assert!(ridge_solve(&xs, &ys, 0.0).is_err());
    }
}
