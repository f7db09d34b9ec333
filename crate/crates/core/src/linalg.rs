//! Small dense linear-algebra helpers on symmetric matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative eigenvalue floor for the positive definite check.
pub const PD_FLOOR: f64 = 1e-10;

/// Largest absolute asymmetry tolerated before a matrix is treated as non-symmetric.
const SYMMETRY_TOL: f64 = 1e-9;

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn is_symmetric(a: &DMatrix<f64>) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = a.amax().max(1.0);
    let n = a.nrows();
    (0..n).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= SYMMETRY_TOL * scale))
}

/// Eigen-decomposition of the symmetric part of `a`.
pub fn sym_eigen(a: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(symmetrize(a))
}

/// Symmetric, finite, and smallest eigenvalue above `PD_FLOOR * trace / m`.
pub fn is_spd(a: &DMatrix<f64>) -> bool {
    if a.nrows() == 0 || !is_symmetric(a) || a.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let m = a.nrows() as f64;
    let trace = a.trace();
    if !(trace > 0.0) {
        return false;
    }
    let eig = sym_eigen(a);
    eig.eigenvalues.min() > PD_FLOOR * trace / m
}

/// Applies `f` to the eigenvalues of a symmetric matrix.
pub fn sym_map(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = sym_eigen(a);
    let q = &eig.eigenvectors;
    let d = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| f(l)));
    let scaled = q * DMatrix::from_diagonal(&d);
    symmetrize(&(scaled * q.transpose()))
}

/// Principal square root of a positive semidefinite matrix; negative round-off is clipped.
pub fn sqrtm_psd(a: &DMatrix<f64>) -> DMatrix<f64> {
    sym_map(a, |l| l.max(0.0).sqrt())
}

/// Sample mean and (biased, divide-by-n) covariance of the rows of `x`.
pub fn mean_and_cov(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.nrows();
    let m = x.ncols();
    let mut mean = DVector::zeros(m);
    for row in x.row_iter() {
        mean += row.transpose();
    }
    mean /= n.max(1) as f64;
    let mut cov = DMatrix::zeros(m, m);
    for row in x.row_iter() {
        let d = row.transpose() - &mean;
        cov.ger(1.0, &d, &d, 1.0);
    }
    cov /= n.max(1) as f64;
    (mean, cov)
}
