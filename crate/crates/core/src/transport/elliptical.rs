use nalgebra::DMatrix;

use crate::elliptical::EllipticalComponent;
use crate::error::{Error, Result};
use crate::linalg;

/// How the scatter term of the elliptical W2 is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScatterWeight {
    /// `E[R²]/m`, the covariance scale of the family; errors when it is infinite.
    #[default]
    Moment,
    /// Weight one, usable for every family.
    Unit,
}

/// `tr(A + B - 2 (A^½ B A^½)^½)`, clamped at zero.
pub fn bures_term(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let root = linalg::sqrtm_psd(a);
    let inner = linalg::symmetrize(&(&root * b * &root));
    let eig = linalg::sym_eigen(&inner);
    let cross: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    (a.trace() + b.trace() - 2.0 * cross).max(0.0)
}

/// Squared 2-Wasserstein distance between two elliptical laws of the same family.
pub fn w2_elliptical(c1: &EllipticalComponent, c2: &EllipticalComponent, weight: ScatterWeight) -> Result<f64> {
    if c1.family != c2.family {
        return Err(Error::InvalidModel("components belong to different families".into()));
    }
    let m = c1.family.dim();
    if c1.mu.len() != m || c2.mu.len() != m {
        return Err(Error::DimensionMismatch("location length differs from family dimension".into()));
    }
    if !linalg::is_spd(&c1.sigma) || !linalg::is_spd(&c2.sigma) {
        return Err(Error::NotPositiveDefinite);
    }
    let scale = match weight {
        ScatterWeight::Unit => 1.0,
        ScatterWeight::Moment => c1.family.covariance_scale().ok_or(Error::Unavailable("second moment"))?,
    };
    Ok((&c1.mu - &c2.mu).norm_squared() + scale * bures_term(&c1.sigma, &c2.sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptical::{EllipticalFamily, FamilyKind};
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn comp(mu: &[f64], sigma: DMatrix<f64>) -> EllipticalComponent {
        EllipticalComponent::new(DVector::from_column_slice(mu), sigma, EllipticalFamily::gaussian(mu.len())).unwrap()
    }

    /// Denman–Beavers iteration, independent of the eigen path.
    fn sqrtm_newton(a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let mut y = a.clone();
        let mut z = DMatrix::identity(n, n);
        for _ in 0..60 {
            let yi = y.clone().try_inverse().unwrap();
            let zi = z.clone().try_inverse().unwrap();
            let y_next = (&y + zi) * 0.5;
            z = (&z + yi) * 0.5;
            y = y_next;
        }
        y
    }

    fn random_spd(seed: &[f64], m: usize) -> DMatrix<f64> {
        let a = DMatrix::from_column_slice(m, m, &seed[..m * m]);
        &a * a.transpose() + DMatrix::identity(m, m) * 0.1
    }

    #[test]
    fn identical_components_have_zero_distance() {
        let c = comp(&[1.0, 2.0], DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]));
        assert!(w2_elliptical(&c, &c, ScatterWeight::Moment).unwrap() < 1e-14);
    }

    #[test]
    fn commuting_scatter() {
        let a = comp(&[0.0, 0.0], DMatrix::identity(2, 2));
        let b = comp(&[0.0, 0.0], DMatrix::identity(2, 2) * 4.0);
        assert!((w2_elliptical(&a, &b, ScatterWeight::Moment).unwrap() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn undefined_moment_needs_unit_weight() {
        let fam = EllipticalFamily::new(FamilyKind::cauchy(2), 2).unwrap();
        let a = EllipticalComponent::new(DVector::zeros(2), DMatrix::identity(2, 2), fam).unwrap();
        let b = EllipticalComponent::new(DVector::zeros(2), DMatrix::identity(2, 2) * 4.0, fam).unwrap();
        assert!(matches!(w2_elliptical(&a, &b, ScatterWeight::Moment), Err(Error::Unavailable(_))));
        assert!((w2_elliptical(&a, &b, ScatterWeight::Unit).unwrap() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn moment_weight_scales_scatter_term() {
        let fam = EllipticalFamily::new(FamilyKind::student_t(5.0, 2), 2).unwrap();
        let a = EllipticalComponent::new(DVector::zeros(2), DMatrix::identity(2, 2), fam).unwrap();
        let b = EllipticalComponent::new(DVector::zeros(2), DMatrix::identity(2, 2) * 4.0, fam).unwrap();
        // covariance of a t5 law is 5/3 times its scatter
        let d = w2_elliptical(&a, &b, ScatterWeight::Moment).unwrap();
        assert!((d - 2.0 * 5.0 / 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn matches_newton_square_root(seed in proptest::collection::vec(-1.0..1.0f64, 18), shift in proptest::collection::vec(-3.0..3.0f64, 3)) {
            let s1 = random_spd(&seed[..9], 3);
            let s2 = random_spd(&seed[9..], 3);
            let r1 = sqrtm_newton(&s1);
            let cross = sqrtm_newton(&(&r1 * &s2 * &r1)).trace();
            let oracle = shift.iter().map(|x| x * x).sum::<f64>() + s1.trace() + s2.trace() - 2.0 * cross;
            let got = w2_elliptical(&comp(&shift, s1.clone()), &comp(&[0.0; 3], s2.clone()), ScatterWeight::Moment).unwrap();
            prop_assert!((got - oracle).abs() < 1e-9 * oracle.max(1.0));
        }

        #[test]
        fn bures_scales_quadratically(seed in proptest::collection::vec(-1.0..1.0f64, 8), c in 0.1..10.0f64) {
            let s1 = random_spd(&seed[..4], 2);
            let s2 = random_spd(&seed[4..], 2);
            let base = bures_term(&s1, &s2);
            let scaled = bures_term(&(&s1 * (c * c)), &(&s2 * (c * c)));
            prop_assert!((scaled - c * c * base).abs() < 1e-9 * (c * c * base).max(1e-6));
        }
    }
}
