use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mixture::MixtureModel;

use super::hungarian;
use super::sliced::random_projections;

/// Largest sample size solved as an exact assignment problem.
pub const ASSIGNMENT_CUTOFF: usize = 2048;
/// Number of projections used above the cutoff.
pub const SLICED_PROJECTIONS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum W2Method {
    SortedMatching,
    Assignment,
    Sliced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalW2 {
    pub value: f64,
    pub method: W2Method,
}

/// Squared W2 between two equal-size uniform point clouds (rows).
pub fn empirical_w2<R: Rng + ?Sized>(x: &DMatrix<f64>, y: &DMatrix<f64>, rng: &mut R) -> Result<EmpiricalW2> {
    let n = x.nrows();
    if y.nrows() != n || x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "point clouds are {}x{} and {}x{}",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidDataset("empty point cloud".into()));
    }
    let m = x.ncols();
    if m == 1 {
        let value = sorted_w2(x.column(0).iter().copied().collect(), y.column(0).iter().copied().collect());
        return Ok(EmpiricalW2 { value, method: W2Method::SortedMatching });
    }
    if n <= ASSIGNMENT_CUTOFF {
        let mut cost = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                cost[i * n + j] = (x.row(i) - y.row(j)).norm_squared();
            }
        }
        let (_, total) = hungarian::solve(&cost, n);
        return Ok(EmpiricalW2 { value: total / n as f64, method: W2Method::Assignment });
    }
    let projections = random_projections(rng, m, SLICED_PROJECTIONS);
    let total: f64 = projections
        .iter()
        .map(|p| sorted_w2((x * p).iter().copied().collect(), (y * p).iter().copied().collect()))
        .sum();
    Ok(EmpiricalW2 { value: total / SLICED_PROJECTIONS as f64, method: W2Method::Sliced })
}

fn sorted_w2(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>() / a.len() as f64
}

/// What a model is compared against by [`mc_mixture_w2`].
pub enum Reference<'a> {
    Model(&'a MixtureModel),
    Samples(&'a DMatrix<f64>),
}

/// Monte Carlo W2² between a model and another model or a data set, using `n`
/// draws from each side. Data sets larger than `n` are subsampled without
/// replacement.
pub fn mc_mixture_w2<R: Rng + ?Sized>(
    model: &MixtureModel,
    reference: Reference<'_>,
    rng: &mut R,
    n: usize,
) -> Result<EmpiricalW2> {
    if n < 2 {
        return Err(Error::Config("at least two draws are required".into()));
    }
    let x = model.sample(rng, n)?;
    let y = match reference {
        Reference::Model(other) => other.sample(rng, n)?,
        Reference::Samples(data) => {
            if data.nrows() < n {
                return Err(Error::InvalidDataset(format!("{} samples, {n} requested", data.nrows())));
            }
            if data.nrows() == n {
                data.clone()
            } else {
                let rows: Vec<usize> = index::sample(rng, data.nrows(), n).into_vec();
                data.select_rows(rows.iter())
            }
        }
    };
    empirical_w2(&x, &y, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptical::EllipticalFamily;
    use crate::rng;
    use crate::transport::{w2_elliptical, ScatterWeight};
    use nalgebra::DVector;

    #[test]
    fn identical_clouds() {
        let mut r = rng::from_seed(0);
        let x = DMatrix::from_fn(50, 3, |i, j| (i * 7 + j) as f64 % 5.0);
        assert_eq!(empirical_w2(&x, &x, &mut r).unwrap().value, 0.0);
    }

    #[test]
    fn one_dimensional_points() {
        let mut r = rng::from_seed(0);
        let x = DMatrix::from_element(1, 1, 0.0);
        let y = DMatrix::from_element(1, 1, 3.0);
        let w = empirical_w2(&x, &y, &mut r).unwrap();
        assert_eq!(w.value, 9.0);
        assert_eq!(w.method, W2Method::SortedMatching);
    }

    #[test]
    fn gaussian_clouds_match_closed_form() {
        let fam = EllipticalFamily::gaussian(2);
        let a = MixtureModel::new(fam, vec![1.0], vec![DVector::zeros(2)], vec![DMatrix::identity(2, 2)]).unwrap();
        let b = MixtureModel::new(
            fam,
            vec![1.0],
            vec![DVector::from_vec(vec![10.0, 2.0])],
            vec![DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5])],
        )
        .unwrap();
        let exact = w2_elliptical(&a.component(0), &b.component(0), ScatterWeight::Moment).unwrap();
        let mut r = rng::from_seed(17);
        let w = mc_mixture_w2(&a, Reference::Model(&b), &mut r, 1024).unwrap();
        assert_eq!(w.method, W2Method::Assignment);
        assert!((w.value / exact - 1.0).abs() < 0.05, "{} vs {exact}", w.value);
    }
}
