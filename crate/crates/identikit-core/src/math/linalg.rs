//! Symmetric-matrix helpers built on nalgebra: sorted eigendecompositions,
//! floor-regularized inversion and the symmetric square root.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[allow(unused_imports)]
use num_traits::Float;

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted
/// ascending; column i of the returned matrix is the eigenvector of
/// eigenvalue i.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = 0.5 * (m + m.transpose());
    let eig = sym.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Result of [`regularized_inverse`].
#[derive(Debug, Clone)]
pub struct RegularizedInverse {
    pub inverse: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// Indices (into `eigenvalues`) that fell below the floor.
    pub floored: Vec<usize>,
    /// Eigenvectors of the floored eigenvalues, one per entry of `floored`.
    pub weak_directions: Vec<Vec<f64>>,
}

/// Invert a symmetric matrix with an eigenvalue floor.
///
/// Eigenvalues below `rel_floor * max_eigenvalue` are raised to that floor
/// before inversion so the inverse always exists; the directions that were
/// floored are reported as candidates for non-identifiable combinations.
pub fn regularized_inverse(m: &DMatrix<f64>, rel_floor: f64) -> Result<RegularizedInverse> {
    if m.nrows() != m.ncols() {
        return Err(Error::validation(
            "regularized_inverse requires a square matrix",
        ));
    }
    let (values, vectors) = sym_eigen(m);
    let max_ev = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max_ev.is_finite() || max_ev <= 0.0 {
        return Err(Error::Degenerate(alloc::format!(
            "matrix has no positive eigenvalue (max = {max_ev:.3e})"
        )));
    }
    let floor = rel_floor * max_ev;
    let mut floored = Vec::new();
    let mut weak = Vec::new();
    let n = values.len();
    let mut inv = DMatrix::zeros(n, n);
    for i in 0..n {
        let ev = values[i];
        let used = if ev < floor {
            floored.push(i);
            weak.push(vectors.column(i).iter().cloned().collect());
            floor
        } else {
            ev
        };
        let v = vectors.column(i);
        // inv += (1/used) v v^T
        for r in 0..n {
            for c in 0..n {
                inv[(r, c)] += v[r] * v[c] / used;
            }
        }
    }
    Ok(RegularizedInverse {
        inverse: inv,
        eigenvalues: values,
        floored,
        weak_directions: weak,
    })
}

/// Symmetric square root A with A A^T = m, via eigendecomposition.
///
/// Eigenvalues in [-tol, 0) are clamped to zero; below -tol the matrix is
/// rejected as not positive semidefinite.
pub fn sym_sqrt(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let (values, vectors) = sym_eigen(m);
    let scale = values
        .iter()
        .cloned()
        .fold(0.0_f64, |a, b| a.max(b.abs()))
        .max(1.0);
    let n = values.len();
    let mut root = DMatrix::zeros(n, n);
    for i in 0..n {
        let ev = values[i];
        if ev < -tol * scale {
            return Err(Error::Degenerate(alloc::format!(
                "covariance is not positive semidefinite (eigenvalue {ev:.3e})"
            )));
        }
        let s = ev.max(0.0).sqrt();
        let v = vectors.column(i);
        for r in 0..n {
            for c in 0..n {
                root[(r, c)] += s * v[r] * v[c];
            }
        }
    }
    Ok(root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn eigen_sorted_ascending() {
        let m = dmatrix![4.0, 1.0; 1.0, 2.0];
        let (vals, vecs) = sym_eigen(&m);
        assert!(vals[0] < vals[1]);
        // reconstruct
        let mut rec = DMatrix::zeros(2, 2);
        for i in 0..2 {
            let v = vecs.column(i);
            for r in 0..2 {
                for c in 0..2 {
                    rec[(r, c)] += vals[i] * v[r] * v[c];
                }
            }
        }
        assert!((rec - m).norm() < 1e-12);
    }

    #[test]
    fn identity_inverts_to_identity() {
        let m = DMatrix::identity(3, 3);
        let reg = regularized_inverse(&m, 1e-10).unwrap();
        assert!((reg.inverse - DMatrix::identity(3, 3)).norm() < 1e-12);
        assert!(reg.floored.is_empty());
    }

    #[test]
    fn tiny_eigenvalue_gets_floored_and_reported() {
        let m = dmatrix![1.0, 0.0; 0.0, 1e-14];
        let reg = regularized_inverse(&m, 1e-10).unwrap();
        assert_eq!(reg.floored.len(), 1);
        // floored direction is e2
        let d = &reg.weak_directions[0];
        assert!(d[1].abs() > 0.99);
        // inverse entry uses the floor 1e-10 * 1.0
        assert!((reg.inverse[(1, 1)] - 1e10).abs() / 1e10 < 1e-9);
    }

    #[test]
    fn sqrt_squares_back() {
        let m = dmatrix![2.0, 0.5; 0.5, 1.0];
        let a = sym_sqrt(&m, 1e-12).unwrap();
        assert!((&a * a.transpose() - m).norm() < 1e-12);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let m = dmatrix![1.0, 0.0; 0.0, -0.5];
        assert!(sym_sqrt(&m, 1e-12).is_err());
    }
}
