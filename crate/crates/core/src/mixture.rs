//! Elliptical mixture models, their likelihood, and synthetic ground-truth data.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::elliptical::{EllipticalComponent, EllipticalFamily};
use crate::error::{Error, Result};
use crate::linalg;
use crate::special::log_sum_exp;

/// Tolerance on `sum(pi) == 1`.
pub const WEIGHT_TOL: f64 = 1e-12;

/// `k` components with weights `pi`, sharing one family.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    family: EllipticalFamily,
    pi: Vec<f64>,
    mu: Vec<DVector<f64>>,
    sigma: Vec<DMatrix<f64>>,
}

impl MixtureModel {
    pub fn new(
        family: EllipticalFamily,
        pi: Vec<f64>,
        mu: Vec<DVector<f64>>,
        sigma: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let k = pi.len();
        let m = family.dim();
        if k == 0 {
            return Err(Error::InvalidModel("at least one component is required".into()));
        }
        if mu.len() != k || sigma.len() != k {
            return Err(Error::InvalidModel(format!(
                "{k} weights but {} locations and {} scatter matrices",
                mu.len(),
                sigma.len()
            )));
        }
        if pi.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidModel("weights must be finite and nonnegative".into()));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidModel(format!("weights sum to {total}, not 1")));
        }
        for (i, (mu_i, sigma_i)) in mu.iter().zip(&sigma).enumerate() {
            if mu_i.len() != m || sigma_i.nrows() != m || sigma_i.ncols() != m {
                return Err(Error::DimensionMismatch(format!("component {i} does not have dimension {m}")));
            }
            if mu_i.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidModel(format!("component {i} has a non-finite location")));
            }
            if !linalg::is_spd(sigma_i) {
                return Err(Error::InvalidModel(format!("component {i} scatter is not positive definite")));
            }
        }
        Ok(Self { family, pi, mu, sigma })
    }

    pub fn from_components(pi: Vec<f64>, components: Vec<EllipticalComponent>) -> Result<Self> {
        let family = components
            .first()
            .map(|c| c.family)
            .ok_or_else(|| Error::InvalidModel("at least one component is required".into()))?;
        if components.iter().any(|c| c.family != family) {
            return Err(Error::InvalidModel("components must share one family".into()));
        }
        let (mu, sigma) = components.into_iter().map(|c| (c.mu, c.sigma)).unzip();
        Self::new(family, pi, mu, sigma)
    }

    pub fn family(&self) -> EllipticalFamily {
        self.family
    }

    pub fn k(&self) -> usize {
        self.pi.len()
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn mu(&self) -> &[DVector<f64>] {
        &self.mu
    }

    pub fn sigma(&self) -> &[DMatrix<f64>] {
        &self.sigma
    }

    pub fn component(&self, i: usize) -> EllipticalComponent {
        EllipticalComponent { mu: self.mu[i].clone(), sigma: self.sigma[i].clone(), family: self.family }
    }

    /// Elementwise square root of the weights.
    pub fn sqrt_pi(&self) -> DVector<f64> {
        DVector::from_iterator(self.k(), self.pi.iter().map(|p| p.sqrt()))
    }

    /// Replaces the weights by `s²`, renormalised.
    pub fn with_sqrt_pi(&self, s: &DVector<f64>) -> Result<Self> {
        let norm2 = s.norm_squared();
        let pi = s.iter().map(|v| v * v / norm2).collect();
        Self::new(self.family, pi, self.mu.clone(), self.sigma.clone())
    }

    pub fn log_pdf(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.evaluator()?.log_pdf(x.as_slice()))
    }

    pub fn pdf(&self, x: &DVector<f64>) -> Result<f64> {
        self.log_pdf(x).map(f64::exp)
    }

    /// Average negative log-likelihood of the rows of `samples`.
    pub fn nll(&self, samples: &DMatrix<f64>) -> Result<f64> {
        if samples.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "model has dimension {}, data has {} columns",
                self.dim(),
                samples.ncols()
            )));
        }
        if samples.nrows() == 0 {
            return Err(Error::InvalidDataset("no samples".into()));
        }
        let eval = self.evaluator()?;
        let mut x = vec![0.0; self.dim()];
        let mut total = 0.0;
        for row in samples.row_iter() {
            x.iter_mut().zip(row.iter()).for_each(|(d, s)| *d = *s);
            total -= eval.log_pdf(&x);
        }
        Ok(total / samples.nrows() as f64)
    }

    /// Precomputes Cholesky factors for repeated density evaluation.
    pub fn evaluator(&self) -> Result<MixtureEvaluator<'_>> {
        if !self.family.has_density() {
            return Err(Error::Unavailable("density"));
        }
        let mut parts = Vec::with_capacity(self.k());
        for (i, sigma) in self.sigma.iter().enumerate() {
            let chol = sigma.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
            let l = chol.l();
            let half_log_det: f64 = l.diagonal().iter().map(|d| d.ln()).sum();
            parts.push((self.pi[i].ln() - half_log_det, l));
        }
        Ok(MixtureEvaluator { model: self, parts })
    }

    /// Draws `n` samples: a component by its weight, then the elliptical representation.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<DMatrix<f64>> {
        let m = self.dim();
        let factors: Vec<DMatrix<f64>> = self
            .sigma
            .iter()
            .map(|s| s.clone().cholesky().map(|c| c.l()).ok_or(Error::NotPositiveDefinite))
            .collect::<Result<_>>()?;
        let kind = self.family.kind();
        let mut out = DMatrix::zeros(n, m);
        let mut dir = DVector::zeros(m);
        for row in 0..n {
            let i = pick(&self.pi, rng.random());
            crate::elliptical::uniform_on_sphere(rng, dir.as_mut_slice());
            let r = crate::elliptical::draw_r_squared(&kind, m, rng).sqrt();
            let x = &self.mu[i] + (&factors[i] * &dir) * r;
            out.row_mut(row).copy_from(&x.transpose());
        }
        Ok(out)
    }

    /// First moment `sum pi_i mu_i`.
    pub fn mean(&self) -> DVector<f64> {
        self.mu.iter().zip(&self.pi).fold(DVector::zeros(self.dim()), |acc, (mu, &p)| acc + mu * p)
    }

    /// Covariance of the mixture, or `None` when `E[R²]` is infinite.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        let scale = self.family.covariance_scale()?;
        let mean = self.mean();
        let mut cov = -&mean * mean.transpose();
        for ((mu, sigma), &p) in self.mu.iter().zip(&self.sigma).zip(&self.pi) {
            cov += (sigma * scale + mu * mu.transpose()) * p;
        }
        Some(cov)
    }
}

/// Index of the categorical draw for uniform `u` in `[0, 1)`.
pub(crate) fn pick(pi: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in pi.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    pi.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// A mixture with cached factorisations.
pub struct MixtureEvaluator<'a> {
    model: &'a MixtureModel,
    /// `(log pi_i - log det(L_i), L_i)`
    parts: Vec<(f64, DMatrix<f64>)>,
}

impl MixtureEvaluator<'_> {
    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        log_sum_exp(&self.component_log_terms(x))
    }

    /// Log of each weighted component density at `x`.
    pub fn component_log_terms(&self, x: &[f64]) -> Vec<f64> {
        let m = self.model.dim();
        let mut z = vec![0.0; m];
        self.parts
            .iter()
            .zip(&self.model.mu)
            .map(|((offset, l), mu)| {
                let mut t = 0.0;
                for r in 0..m {
                    let mut acc = x[r] - mu[r];
                    for c in 0..r {
                        acc -= l[(r, c)] * z[c];
                    }
                    z[r] = acc / l[(r, r)];
                    t += z[r] * z[r];
                }
                offset + self.model.family.log_cg(t)
            })
            .collect()
    }
}

/// Samples with optional ground truth.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: DMatrix<f64>,
    pub truth: Option<MixtureModel>,
    pub seed: u64,
}

impl Dataset {
    pub fn new(samples: DMatrix<f64>, truth: Option<MixtureModel>, seed: u64) -> Result<Self> {
        if samples.nrows() == 0 || samples.ncols() == 0 {
            return Err(Error::InvalidDataset("dataset must have at least one row and column".into()));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidDataset("non-finite entry".into()));
        }
        Ok(Self { samples, truth, seed })
    }

    pub fn n(&self) -> usize {
        self.samples.nrows()
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }
}

/// Parameters of the separated random Gaussian mixture generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    /// Upper bound on the square root of each covariance condition number.
    pub eccentricity: f64,
    /// Minimum pairwise mean distance in units of `sqrt(max trace Sigma)`.
    pub separation: f64,
}

const MAX_PLACEMENT_TRIES: usize = 100;

/// Random Gaussian mixture satisfying the separation and eccentricity bounds,
/// together with `n` samples from it.
///
/// Scatter matrices are `Q diag(l) Q^T` with `l` log-uniform on
/// `[l_max / ecc², l_max]` and `l_max = 1 / separation²`, so that well-separated
/// clusters live on a unit-sized layout. Means are drawn uniformly in a ball
/// just large enough to hold `k` separated points, rejecting draws that break
/// the separation bound.
pub fn generate_synthetic<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R, seed: u64) -> Result<Dataset> {
    let SyntheticSpec { m, k, n, eccentricity, separation } = *spec;
    if m == 0 || k == 0 || n == 0 {
        return Err(Error::Generation("m, k and n must be positive".into()));
    }
    if !(eccentricity >= 1.0) || !(separation > 0.0) || !eccentricity.is_finite() || !separation.is_finite() {
        return Err(Error::Generation("eccentricity must be >= 1 and separation > 0".into()));
    }
    let top = separation.powi(-2);
    let log_span = 2.0 * eccentricity.ln();
    let sigma: Vec<DMatrix<f64>> = (0..k)
        .map(|_| {
            let q = random_orthogonal(rng, m);
            let l = DVector::from_fn(m, |_, _| top * (-log_span * rng.random::<f64>()).exp());
            linalg::symmetrize(&(&q * DMatrix::from_diagonal(&l) * q.transpose()))
        })
        .collect();
    let max_trace = sigma.iter().map(|s| s.trace()).fold(0.0, f64::max);
    let needed = separation * max_trace.sqrt();

    // rejection in a ball sized to hold k separated points, grown on repeated failure
    let mut radius = needed * (k as f64).powf(1.0 / m as f64);
    let mut mu = None;
    for attempt in 0..MAX_PLACEMENT_TRIES * 20 {
        let cand: Vec<DVector<f64>> = (0..k).map(|_| uniform_in_ball(rng, m) * radius).collect();
        if k == 1 || min_pairwise(&cand) >= needed {
            mu = Some(cand);
            break;
        }
        if attempt % MAX_PLACEMENT_TRIES == MAX_PLACEMENT_TRIES - 1 {
            radius *= 1.25;
        }
    }
    let mu = mu.ok_or_else(|| Error::Generation("could not place separated means".into()))?;
    let pi = vec![1.0 / k as f64; k];
    let truth = MixtureModel::new(EllipticalFamily::gaussian(m), pi, mu, sigma)?;
    let samples = truth.sample(rng, n)?;
    Dataset::new(samples, Some(truth), seed)
}

fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, m: usize) -> DVector<f64> {
    let mut v = DVector::zeros(m);
    crate::elliptical::uniform_on_sphere(rng, v.as_mut_slice());
    v * rng.random::<f64>().powf(1.0 / m as f64)
}

fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, m: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(m, m, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub(crate) fn min_pairwise(points: &[DVector<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in 0..i {
            best = best.min((&points[i] - &points[j]).norm());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptical::FamilyKind;
    use crate::rng;
    use std::f64::consts::PI;

    fn gaussian_model(pi: Vec<f64>, mu: Vec<Vec<f64>>, sigma: Vec<Vec<f64>>) -> MixtureModel {
        let m = mu[0].len();
        MixtureModel::new(
            EllipticalFamily::gaussian(m),
            pi,
            mu.into_iter().map(DVector::from_vec).collect(),
            sigma.into_iter().map(|s| DMatrix::from_row_slice(m, m, &s)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn standard_gaussian_center() {
        let model = gaussian_model(vec![1.0], vec![vec![0.0, 0.0]], vec![vec![1.0, 0.0, 0.0, 1.0]]);
        let p = model.pdf(&DVector::zeros(2)).unwrap();
        assert!((p - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn duplicated_component_collapses() {
        let one = gaussian_model(vec![1.0], vec![vec![0.5, -1.0]], vec![vec![2.0, 0.3, 0.3, 1.0]]);
        let two = gaussian_model(
            vec![0.5, 0.5],
            vec![vec![0.5, -1.0], vec![0.5, -1.0]],
            vec![vec![2.0, 0.3, 0.3, 1.0], vec![2.0, 0.3, 0.3, 1.0]],
        );
        let x = DVector::from_vec(vec![0.1, 0.2]);
        assert!((one.pdf(&x).unwrap() - two.pdf(&x).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn pdf_matches_naive_sum() {
        let model = gaussian_model(
            vec![0.2, 0.5, 0.3],
            vec![vec![0.0, 0.0], vec![2.0, 1.0], vec![-1.0, 3.0]],
            vec![vec![1.0, 0.2, 0.2, 0.5], vec![0.3, 0.0, 0.0, 2.0], vec![1.5, -0.4, -0.4, 1.0]],
        );
        let x = DVector::from_vec(vec![0.7, 1.1]);
        let naive: f64 = (0..3)
            .map(|i| {
                let s = &model.sigma()[i];
                let d = &x - &model.mu()[i];
                let t = (d.transpose() * s.clone().try_inverse().unwrap() * &d)[0];
                model.pi()[i] * (-0.5 * t).exp() / (2.0 * PI * s.determinant().sqrt())
            })
            .sum();
        assert!((model.pdf(&x).unwrap() - naive).abs() < 1e-12 * naive);
    }

    #[test]
    fn alpha_stable_density_unavailable() {
        let fam = EllipticalFamily::new(FamilyKind::AlphaStable { a: 1.5 }, 1).unwrap();
        let model = MixtureModel::new(fam, vec![1.0], vec![DVector::zeros(1)], vec![DMatrix::identity(1, 1)]).unwrap();
        assert!(matches!(model.pdf(&DVector::zeros(1)), Err(Error::Unavailable(_))));
        let mut r = rng::from_seed(0);
        assert_eq!(model.sample(&mut r, 5).unwrap().nrows(), 5);
    }

    #[test]
    fn invalid_models_rejected() {
        let fam = EllipticalFamily::gaussian(1);
        let mu = vec![DVector::zeros(1)];
        let s = vec![DMatrix::identity(1, 1)];
        assert!(MixtureModel::new(fam, vec![0.9], mu.clone(), s.clone()).is_err());
        assert!(MixtureModel::new(fam, vec![], vec![], vec![]).is_err());
        assert!(MixtureModel::new(fam, vec![1.0], mu, vec![DMatrix::zeros(1, 1)]).is_err());
    }

    #[test]
    fn nll_of_single_point_at_mode() {
        let model = gaussian_model(vec![1.0], vec![vec![1.0, 2.0]], vec![vec![1.0, 0.0, 0.0, 1.0]]);
        let data = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!((model.nll(&data).unwrap() - (2.0 * PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn pick_respects_zero_weights() {
        assert_eq!(pick(&[0.0, 1.0, 0.0], 0.0), 1);
        assert_eq!(pick(&[0.5, 0.5, 0.0], 1.0 - 1e-17), 1);
    }

    #[test]
    fn synthetic_separation_holds() {
        let spec = SyntheticSpec { m: 2, k: 3, n: 100, eccentricity: 10.0, separation: 10.0 };
        for seed in 0..20 {
            let mut r = rng::from_seed(seed);
            let data = generate_synthetic(&spec, &mut r, seed).unwrap();
            let truth = data.truth.unwrap();
            let max_tr = truth.sigma().iter().map(|s| s.trace()).fold(0.0, f64::max);
            assert!(min_pairwise(truth.mu()) >= 10.0 * max_tr.sqrt());
            for s in truth.sigma() {
                let e = linalg::sym_eigen(s).eigenvalues;
                assert!(e.max() / e.min() <= 100.0 * (1.0 + 1e-9));
            }
        }
    }
}
