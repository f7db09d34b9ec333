//! The product manifold sphere × Euclidean × positive definite cone, with the
//! Lyapunov-operator form of the Bures–Wasserstein geometry on scatter matrices.
//!
//! The `E[R²]/m` scale of the metric is omitted throughout; it only rescales the
//! step size.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, PD_FLOOR};

/// Smallest allowed entry of `sqrt(pi)` after a step.
pub const SPHERE_CLAMP: f64 = 1e-6;

/// A positive definite matrix with its eigen-decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct PdPoint {
    sigma: DMatrix<f64>,
    vectors: DMatrix<f64>,
    values: DVector<f64>,
}

impl PdPoint {
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        if !sigma.is_square() || sigma.nrows() == 0 || !linalg::is_symmetric(&sigma) {
            return Err(Error::NotPositiveDefinite);
        }
        let sigma = linalg::symmetrize(&sigma);
        let eig = linalg::sym_eigen(&sigma);
        let floor = PD_FLOOR * sigma.trace() / sigma.nrows() as f64;
        if !(eig.eigenvalues.min() > floor) || eig.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { sigma, vectors: eig.eigenvectors, values: eig.eigenvalues })
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn into_sigma(self) -> DMatrix<f64> {
        self.sigma
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }
}

/// Solves `A B + B A = C` in the eigenbasis of `A`.
pub fn lyapunov_solve(a: &PdPoint, c: &DMatrix<f64>) -> DMatrix<f64> {
    let q = &a.vectors;
    let mut rotated = q.transpose() * c * q;
    let m = a.dim();
    for i in 0..m {
        for j in 0..m {
            rotated[(i, j)] /= a.values[i] + a.values[j];
        }
    }
    linalg::symmetrize(&(q * rotated * q.transpose()))
}

/// Riemannian gradient `G Sigma + Sigma G` of a Euclidean gradient `G`.
pub fn riem_grad_sigma(sigma: &DMatrix<f64>, egrad: &DMatrix<f64>) -> DMatrix<f64> {
    let gs = egrad * sigma;
    &gs + gs.transpose()
}

/// Metric `tr(L[U] Sigma L[V])` on symmetric tangent vectors.
pub fn metric_sigma(sigma: &PdPoint, u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let lu = lyapunov_solve(sigma, u);
    let lv = lyapunov_solve(sigma, v);
    (lu * sigma.sigma() * lv).trace()
}

/// `(L[step] + I) Sigma (L[step] + I)` for an already scaled tangent `step`.
///
/// Fails with [`Error::StepTooLarge`] when the result leaves the cone.
pub fn exp_sigma(sigma: &PdPoint, step: &DMatrix<f64>) -> Result<PdPoint> {
    let m = sigma.dim();
    let factor = lyapunov_solve(sigma, step) + DMatrix::identity(m, m);
    let next = linalg::symmetrize(&(&factor * sigma.sigma() * &factor));
    PdPoint::new(next).map_err(|_| Error::StepTooLarge)
}

/// Great-circle step `cos|t| s - sin|t|/|t| t` along `-t`.
pub fn exp_sphere(s: &DVector<f64>, tangent: &DVector<f64>) -> DVector<f64> {
    let norm = tangent.norm();
    if norm == 0.0 {
        return s.clone();
    }
    let out = s * norm.cos() - tangent * (norm.sin() / norm);
    let n = out.norm();
    out / n
}

/// Projection `g - (s.g) s` onto the tangent space at `s`.
pub fn project_sphere_grad(s: &DVector<f64>, egrad: &DVector<f64>) -> DVector<f64> {
    egrad - s * s.dot(egrad)
}

/// Transport `L_from[u] to + to L_from[u]` of a tangent vector from `from` to `to`.
pub fn transport_sigma(from: &PdPoint, to: &DMatrix<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
    let l = lyapunov_solve(from, u);
    let lt = &l * to;
    linalg::symmetrize(&(&lt + lt.transpose()))
}

/// Floors every entry of `s` at [`SPHERE_CLAMP`] and renormalises.
pub fn clamp_sphere(s: &DVector<f64>) -> DVector<f64> {
    let clamped = s.map(|v| v.max(SPHERE_CLAMP));
    let n = clamped.norm();
    clamped / n
}

/// Riemannian gradient triple for `sqrt(pi)`, the locations and the scatter matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentUpdate {
    pub d_sqrtpi: DVector<f64>,
    pub d_mu: Vec<DVector<f64>>,
    pub d_sigma: Vec<DMatrix<f64>>,
}

impl TangentUpdate {
    /// Product-manifold inner product at `(s, _, sigma)`.
    pub fn inner(&self, other: &TangentUpdate, sigma: &[PdPoint]) -> f64 {
        let sphere = self.d_sqrtpi.dot(&other.d_sqrtpi);
        let euclid: f64 = self.d_mu.iter().zip(&other.d_mu).map(|(a, b)| a.dot(b)).sum();
        let pd: f64 = self.d_sigma.iter().zip(&other.d_sigma).zip(sigma).map(|((a, b), p)| metric_sigma(p, a, b)).sum();
        sphere + euclid + pd
    }
}
