use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::elliptical::EllipticalFamily;
use crate::error::{Error, Result};
use crate::linalg;
use crate::mixture::{pick, MixtureModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InitStrategy {
    /// Locations uniform in the data bounding box.
    #[default]
    #[serde(rename = "random")]
    Random,
    /// Locations by squared-distance-weighted sampling of data points.
    #[serde(rename = "kmeanspp-lite")]
    KmeansppLite,
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitStrategy::Random => "random",
            InitStrategy::KmeansppLite => "kmeanspp-lite",
        })
    }
}

impl FromStr for InitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(InitStrategy::Random),
            "kmeanspp-lite" => Ok(InitStrategy::KmeansppLite),
            _ => Err(Error::Config(format!("unknown init strategy {s:?}, expected random or kmeanspp-lite"))),
        }
    }
}

/// Starting model: weights uniform on the simplex, isotropic scatter with the
/// trace of the data covariance, locations chosen by `strategy`.
pub fn initialize<R: Rng + ?Sized>(
    samples: &DMatrix<f64>,
    k: usize,
    family: EllipticalFamily,
    strategy: InitStrategy,
    rng: &mut R,
) -> Result<MixtureModel> {
    let (n, m) = samples.shape();
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    if n < k {
        return Err(Error::InvalidDataset(format!("{n} samples cannot seed {k} components")));
    }
    if family.dim() != m {
        return Err(Error::DimensionMismatch(format!("family has dimension {}, data has {m} columns", family.dim())));
    }
    let draws: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    let pi = draws.iter().map(|d| d / total).collect();

    let (_, cov) = linalg::mean_and_cov(samples);
    let scale = cov.trace() / m as f64;
    if !(scale > 0.0) {
        return Err(Error::InvalidDataset("data covariance has zero trace".into()));
    }
    let sigma = vec![DMatrix::identity(m, m) * scale; k];

    let mu = match strategy {
        InitStrategy::Random => {
            let lo: Vec<f64> = samples.column_iter().map(|c| c.min()).collect();
            let hi: Vec<f64> = samples.column_iter().map(|c| c.max()).collect();
            (0..k).map(|_| DVector::from_fn(m, |j, _| lo[j] + (hi[j] - lo[j]) * rng.random::<f64>())).collect()
        }
        InitStrategy::KmeansppLite => seed_by_distance(samples, k, rng),
    };
    MixtureModel::new(family, pi, mu, sigma)
}

fn seed_by_distance<R: Rng + ?Sized>(samples: &DMatrix<f64>, k: usize, rng: &mut R) -> Vec<DVector<f64>> {
    let n = samples.nrows();
    let first = rng.random_range(0..n);
    let mut centres = vec![samples.row(first).transpose()];
    let mut d2: Vec<f64> = samples.row_iter().map(|r| (r.transpose() - &centres[0]).norm_squared()).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let w: Vec<f64> = d2.iter().map(|d| d / total).collect();
            pick(&w, rng.random())
        } else {
            rng.random_range(0..n)
        };
        let c = samples.row(next).transpose();
        for (d, r) in d2.iter_mut().zip(samples.row_iter()) {
            *d = d.min((r.transpose() - &c).norm_squared());
        }
        centres.push(c);
    }
    centres
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn clusters(r: &mut crate::rng::Rng) -> DMatrix<f64> {
        let centres = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        DMatrix::from_fn(300, 2, |i, j| centres[i % 3][j] + (r.random::<f64>() - 0.5))
    }

    #[test]
    fn weights_and_scatter() {
        let mut r = rng::from_seed(4);
        let x = clusters(&mut r);
        let (_, cov) = linalg::mean_and_cov(&x);
        for strategy in [InitStrategy::Random, InitStrategy::KmeansppLite] {
            let model = initialize(&x, 4, EllipticalFamily::gaussian(2), strategy, &mut r).unwrap();
            assert!((model.pi().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for s in model.sigma() {
                assert!((s.trace() - cov.trace()).abs() < 1e-9);
                assert_eq!(s[(0, 1)], 0.0);
                assert_eq!(s[(0, 0)], s[(1, 1)]);
            }
        }
    }

    #[test]
    fn random_locations_inside_bounding_box() {
        let mut r = rng::from_seed(5);
        let x = clusters(&mut r);
        let model = initialize(&x, 6, EllipticalFamily::gaussian(2), InitStrategy::Random, &mut r).unwrap();
        for mu in model.mu() {
            for j in 0..2 {
                assert!(mu[j] >= x.column(j).min() && mu[j] <= x.column(j).max());
            }
        }
    }

    #[test]
    fn too_few_samples() {
        let mut r = rng::from_seed(0);
        let x = DMatrix::from_element(2, 1, 1.0);
        assert!(initialize(&x, 3, EllipticalFamily::gaussian(1), InitStrategy::Random, &mut r).is_err());
    }

    #[test]
    fn strategy_names() {
        for s in [InitStrategy::Random, InitStrategy::KmeansppLite] {
            assert_eq!(s.to_string().parse::<InitStrategy>().unwrap(), s);
        }
    }
}
