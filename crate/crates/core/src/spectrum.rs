//! Eigenvalues of dense nonsymmetric matrices and eigenspace/subspace
//! alignment.
//!
//! Eigenvalues come from faer's real Schur decomposition (Hessenberg
//! reduction followed by multishift QR with aggressive deflation); the
//! subspace routines use nalgebra's SVD.

use faer::complex_native::c64;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::matrix::Mat;

pub const EIGEN_METHOD: &str = "real Schur (Hessenberg reduction + multishift QR)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl Eigenvalue {
    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// All eigenvalues, sorted by decreasing real part then increasing imaginary
/// part.
pub fn eigenvalues(m: &Mat) -> Vec<Eigenvalue> {
    assert!(m.is_square(), "eigenvalues of a non-square matrix");
    if m.is_empty() {
        return Vec::new();
    }
    let fm = faer::Mat::<f64>::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)]);
    let mut ev: Vec<Eigenvalue> = fm
        .eigenvalues::<c64>()
        .into_iter()
        .map(|z| Eigenvalue { re: z.re, im: z.im })
        .collect();
    ev.sort_by(|x, y| {
        y.re.partial_cmp(&x.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    ev
}

/// Orthonormal basis (as columns) of the span of `columns`, dropping
/// directions whose singular value is below `rel_tol` times the largest.
pub fn orthonormal_basis(columns: &[Vec<f64>], rel_tol: f64) -> Vec<Vec<f64>> {
    let Some(first) = columns.first() else {
        return Vec::new();
    };
    let dim = first.len();
    let m = DMatrix::from_fn(dim, columns.len(), |i, j| columns[j][i]);
    let svd = m.svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Vec::new();
    }
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > rel_tol * smax)
        .map(|(k, _)| u.column(k).iter().copied().collect())
        .collect()
}

/// Right singular vectors of `m` for its `count` smallest singular values,
/// with those singular values.
pub fn smallest_right_singular_vectors(m: &Mat, count: usize) -> Vec<(f64, Vec<f64>)> {
    let svd = m.to_nalgebra().svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    idx.into_iter()
        .take(count)
        .map(|k| (svd.singular_values[k], vt.row(k).iter().copied().collect()))
        .collect()
}

/// Cosines of the principal angles between two subspaces given by
/// orthonormal bases, largest first.
pub fn principal_cosines(basis_u: &[Vec<f64>], basis_v: &[Vec<f64>]) -> Vec<f64> {
    if basis_u.is_empty() || basis_v.is_empty() {
        return Vec::new();
    }
    let g: DMatrix<f64> = DMatrix::from_fn(basis_u.len(), basis_v.len(), |i, j| {
        basis_u[i].iter().zip(&basis_v[j]).map(|(x, y)| x * y).sum::<f64>()
    });
    let mut s: Vec<f64> = g.singular_values().iter().map(|x| x.min(1.0)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_block_has_complex_pair() {
        let m = Mat::from_rows(&[&[-1.0, 2.0, 0.0], &[-2.0, -1.0, 0.0], &[0.0, 0.0, 3.0]]);
        let ev = eigenvalues(&m);
        assert!((ev[0].re - 3.0).abs() < 1e-12 && ev[0].im == 0.0);
        assert!((ev[1].re + 1.0).abs() < 1e-12 && (ev[1].im + 2.0).abs() < 1e-12);
        assert!((ev[2].re + 1.0).abs() < 1e-12 && (ev[2].im - 2.0).abs() < 1e-12);
    }

    #[test]
    fn triangular_eigenvalues_are_the_diagonal() {
        let m = Mat::from_fn(5, 5, |i, j| if j >= i { (i + 1) as f64 * if i == j { -1.0 } else { 0.3 } } else { 0.0 });
        let ev = eigenvalues(&m);
        let re: Vec<f64> = ev.iter().map(|e| e.re).collect();
        for (got, want) in re.iter().zip([-1.0, -2.0, -3.0, -4.0, -5.0]) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn basis_and_angles() {
        let cols = vec![vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0]];
        let basis = orthonormal_basis(&cols, 1e-10);
        assert_eq!(basis.len(), 1);
        let e1 = vec![vec![1.0, 0.0, 0.0]];
        let cos = principal_cosines(&basis, &e1);
        assert!((cos[0] - 0.5f64.sqrt()).abs() < 1e-12);

        let m = Mat::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let v = smallest_right_singular_vectors(&m, 1);
        assert!(v[0].0 < 1e-15);
        assert!((v[0].1[1].abs() - 1.0).abs() < 1e-12);
    }
}
