//! Elliptical distribution families.
//!
//! A family is fixed by its density generator `g(t)` (a function of the
//! Mahalanobis distance `t`) together with the law of the modular variable
//! `R²`. Density evaluation works with `log(c_m g(t))`, the generator times its
//! closed-form (or quadrature) normaliser.

mod parse;
mod sampling;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::special::{adaptive_simpson, ln_bessel_k, ln_gamma, ln_sphere_area};

pub use parse::{family_from_parts, parse_family_kind};
pub(crate) use sampling::{draw_r_squared, uniform_on_sphere};
pub use sampling::{sample_gig, sample_positive_stable};

/// Parameters of a family, one variant per generator row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyKind {
    /// `t^(a-1) exp(-b t^s)`.
    Kotz { a: f64, b: f64, s: f64 },
    /// `(1 + t/v)^(-s)`.
    PearsonVII { v: f64, s: f64 },
    /// Generalised hyperbolic with GIG(v, a, lambda) mixing. `a == 0` selects
    /// the gamma-mixing limit, which requires `lambda > 0`.
    Hyperbolic { v: f64, a: f64, lambda: f64 },
    /// `exp(-t) / (1 + exp(-t))^2`.
    Logistic,
    /// Sub-Gaussian symmetric stable law of index `a`; sampling only.
    AlphaStable { a: f64 },
    /// `(1 - t)^(s-1)` on `t in [0, 1]`.
    PearsonII { s: f64 },
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Kotz { .. } => "kotz",
            FamilyKind::PearsonVII { .. } => "pearson7",
            FamilyKind::Hyperbolic { .. } => "hyperbolic",
            FamilyKind::Logistic => "logistic",
            FamilyKind::AlphaStable { .. } => "alphastable",
            FamilyKind::PearsonII { .. } => "pearson2",
        }
    }

    pub fn gaussian() -> Self {
        FamilyKind::Kotz { a: 1.0, b: 0.5, s: 1.0 }
    }

    /// Student-t with `v` degrees of freedom in dimension `m`.
    pub fn student_t(v: f64, m: usize) -> Self {
        FamilyKind::PearsonVII { v, s: 0.5 * (m as f64 + v) }
    }

    pub fn cauchy(m: usize) -> Self {
        FamilyKind::PearsonVII { v: 1.0, s: 0.5 * (m as f64 + 1.0) }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(*self, FamilyKind::Kotz { a, b, s } if a == 1.0 && b == 0.5 && s == 1.0)
    }
}

/// A validated family in a fixed dimension. Immutable and cheap to copy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticalFamily {
    kind: FamilyKind,
    dim: usize,
    /// `log c_m` including any generator-specific normaliser; NaN when the
    /// family has no closed density.
    log_norm: f64,
}

impl EllipticalFamily {
    pub fn new(kind: FamilyKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidFamily("dimension must be positive".into()));
        }
        validate(&kind, dim)?;
        let log_norm = log_normaliser(&kind, dim);
        Ok(Self { kind, dim, log_norm })
    }

    pub fn gaussian(dim: usize) -> Self {
        Self::new(FamilyKind::gaussian(), dim).expect("gaussian parameters are valid")
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_density(&self) -> bool {
        !matches!(self.kind, FamilyKind::AlphaStable { .. })
    }

    /// Same generator in another dimension.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        Self::new(self.kind, dim)
    }

    /// `log(c_m g(t))`.
    pub fn log_density_generator(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Support(format!("t = {t} must be nonnegative")));
        }
        if !self.has_density() {
            return Err(Error::Unavailable("density"));
        }
        if let FamilyKind::PearsonII { .. } = self.kind {
            if t > 1.0 {
                return Err(Error::Support(format!("t = {t} exceeds 1")));
            }
        }
        Ok(self.log_cg(t))
    }

    /// `c_m g'(t)`.
    pub fn density_generator_derivative(&self, t: f64) -> Result<f64> {
        let log_cg = self.log_density_generator(t)?;
        if self.is_singular_at(t) {
            return Err(Error::Singular(t));
        }
        let ratio = self.dlog_g(t);
        if log_cg == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        Ok(ratio * log_cg.exp())
    }

    fn is_singular_at(&self, t: f64) -> bool {
        if t != 0.0 {
            return false;
        }
        match self.kind {
            FamilyKind::Kotz { a, .. } => a != 1.0,
            FamilyKind::Hyperbolic { a, lambda, .. } => a == 0.0 && lambda - 0.5 * self.dim as f64 <= 0.0,
            _ => false,
        }
    }

    /// Unchecked `log(c_m g(t))` for `t >= 0`; `-inf` outside the support,
    /// NaN for families without a density.
    pub(crate) fn log_cg(&self, t: f64) -> f64 {
        let m = self.dim as f64;
        match self.kind {
            FamilyKind::Kotz { a, b, s } => {
                let power = if a == 1.0 { 0.0 } else { (a - 1.0) * t.ln() };
                self.log_norm + power - b * t.powf(s)
            }
            FamilyKind::PearsonVII { v, s } => self.log_norm - s * (t / v).ln_1p(),
            FamilyKind::Hyperbolic { v, a, lambda } => {
                let nu = lambda - 0.5 * m;
                if a == 0.0 && t == 0.0 {
                    return if nu > 0.0 {
                        // z^nu K_nu(z) -> Gamma(nu) 2^(nu-1) as z -> 0
                        self.log_norm + ln_gamma(nu) + (nu - 1.0) * 2f64.ln() - nu * v.ln()
                    } else {
                        f64::INFINITY
                    };
                }
                let z = (v * (a + t)).sqrt();
                self.log_norm + ln_bessel_k(nu, z) + 0.5 * nu * ((a + t) / v).ln()
            }
            FamilyKind::Logistic => self.log_norm - t - 2.0 * (-t).exp().ln_1p(),
            FamilyKind::AlphaStable { .. } => f64::NAN,
            FamilyKind::PearsonII { s } => {
                if t > 1.0 {
                    f64::NEG_INFINITY
                } else if s == 1.0 {
                    self.log_norm
                } else {
                    self.log_norm + (s - 1.0) * (-t).ln_1p()
                }
            }
        }
    }

    /// `g'(t) / g(t)`.
    pub(crate) fn dlog_g(&self, t: f64) -> f64 {
        let m = self.dim as f64;
        match self.kind {
            FamilyKind::Kotz { a, b, s } => {
                let shape = if a == 1.0 { 0.0 } else { (a - 1.0) / t };
                let tail = if s == 1.0 { b } else { b * s * t.powf(s - 1.0) };
                shape - tail
            }
            FamilyKind::PearsonVII { v, s } => -s / (v + t),
            FamilyKind::Hyperbolic { v, a, lambda } => {
                let nu = lambda - 0.5 * m;
                let z = (v * (a + t)).sqrt();
                if z == 0.0 {
                    // only reached for nu > 1 in the limit row, where the ratio is finite
                    return -v / (4.0 * (nu - 1.0));
                }
                -(v / (2.0 * z)) * (ln_bessel_k(nu - 1.0, z) - ln_bessel_k(nu, z)).exp()
            }
            FamilyKind::Logistic => -(0.5 * t).tanh(),
            FamilyKind::AlphaStable { .. } => f64::NAN,
            FamilyKind::PearsonII { s } => {
                if t >= 1.0 {
                    0.0
                } else {
                    -(s - 1.0) / (1.0 - t)
                }
            }
        }
    }

    /// Draws `n` i.i.d. copies of the modular variable `R²`.
    pub fn sample_r_squared<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| sampling::draw_r_squared(&self.kind, self.dim, rng)).collect()
    }

    /// `E[R²]`, or `None` when the family has no finite second moment.
    pub fn expected_r_squared(&self) -> Option<f64> {
        let m = self.dim as f64;
        match self.kind {
            FamilyKind::Kotz { a, b, s } => {
                let k = (2.0 * a + m - 2.0) / (2.0 * s);
                Some((ln_gamma(k + 1.0 / s) - ln_gamma(k) - b.ln() / s).exp())
            }
            FamilyKind::PearsonVII { v, s } => (s > 0.5 * m + 1.0).then(|| m * v / (2.0 * s - m - 2.0)),
            FamilyKind::Hyperbolic { v, a, lambda } => {
                if a == 0.0 {
                    Some(m * 2.0 * lambda / v)
                } else {
                    let omega = (a * v).sqrt();
                    let ratio = (ln_bessel_k(lambda + 1.0, omega) - ln_bessel_k(lambda, omega)).exp();
                    Some(m * (a / v).sqrt() * ratio)
                }
            }
            FamilyKind::Logistic => Some(logistic_moment_ratio(self.dim)),
            FamilyKind::AlphaStable { .. } => None,
            FamilyKind::PearsonII { s } => Some(0.5 * m / (0.5 * m + s)),
        }
    }

    /// Scale factor `E[R²]/m` relating `Σ` to the covariance.
    pub fn covariance_scale(&self) -> Option<f64> {
        self.expected_r_squared().map(|e| e / self.dim as f64)
    }
}

fn validate(kind: &FamilyKind, dim: usize) -> Result<()> {
    let m = dim as f64;
    let bad = |msg: String| Err(Error::InvalidFamily(msg));
    let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
    match *kind {
        FamilyKind::Kotz { a, b, s } => {
            if !finite(&[a, b, s]) || a <= 1.0 - m / 2.0 || b <= 0.0 || s <= 0.0 {
                return bad(format!("kotz requires a > 1 - m/2, b > 0, s > 0 (a={a}, b={b}, s={s}, m={dim})"));
            }
        }
        FamilyKind::PearsonVII { v, s } => {
            if !finite(&[v, s]) || v <= 0.0 || s <= m / 2.0 {
                return bad(format!("pearson7 requires v > 0, s > m/2 (v={v}, s={s}, m={dim})"));
            }
        }
        FamilyKind::Hyperbolic { v, a, lambda } => {
            if !finite(&[v, a, lambda]) || v <= 0.0 || a < 0.0 || (a == 0.0 && lambda <= 0.0) {
                return bad(format!(
                    "hyperbolic requires v > 0 and a > 0, or a = 0 with lambda > 0 (v={v}, a={a}, lambda={lambda})"
                ));
            }
        }
        FamilyKind::Logistic => {}
        FamilyKind::AlphaStable { a } => {
            if !(a > 0.0 && a < 2.0) {
                return bad(format!("alphastable requires a in (0, 2), got {a}"));
            }
        }
        FamilyKind::PearsonII { s } => {
            if !(s > 1.0) || !s.is_finite() {
                return bad(format!("pearson2 requires s > 1, got {s}"));
            }
        }
    }
    Ok(())
}

fn log_normaliser(kind: &FamilyKind, dim: usize) -> f64 {
    let m = dim as f64;
    let half = 0.5 * m;
    match *kind {
        FamilyKind::Kotz { a, b, s } => {
            let k = (2.0 * a + m - 2.0) / (2.0 * s);
            ln_gamma(half) + s.ln() + k * b.ln() - ln_gamma(k) - half * PI.ln()
        }
        FamilyKind::PearsonVII { v, s } => -half * (PI * v).ln() + ln_gamma(s) - ln_gamma(s - half),
        FamilyKind::Hyperbolic { v, a, lambda } => {
            if a == 0.0 {
                2f64.ln() + lambda * (0.5 * v).ln() - ln_gamma(lambda) - half * (2.0 * PI).ln()
            } else {
                0.5 * lambda * (v / a).ln() - half * (2.0 * PI).ln() - ln_bessel_k(lambda, (a * v).sqrt())
            }
        }
        FamilyKind::Logistic => logistic_log_normaliser(dim),
        FamilyKind::AlphaStable { .. } => f64::NAN,
        FamilyKind::PearsonII { s } => ln_gamma(half + s) - half * PI.ln() - ln_gamma(s),
    }
}

fn logistic_generator(t: f64) -> f64 {
    let e = (-t).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// Radial integral `∫_0^∞ r^(m-1+2j) g(r²) dr` of the logistic generator.
fn logistic_radial_moment(dim: usize, j: i32) -> f64 {
    let p = dim as i32 - 1 + 2 * j;
    adaptive_simpson(&|r: f64| r.powi(p) * logistic_generator(r * r), 0.0, 30.0, 1e-14)
}

fn logistic_cache() -> &'static Mutex<HashMap<usize, (f64, f64)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, (f64, f64)>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `(log c_m, E[R²])` for the logistic generator, computed once per dimension.
fn logistic_constants(dim: usize) -> (f64, f64) {
    let mut cache = logistic_cache().lock().expect("logistic cache poisoned");
    *cache.entry(dim).or_insert_with(|| {
        let i0 = logistic_radial_moment(dim, 0);
        let i1 = logistic_radial_moment(dim, 1);
        (-(ln_sphere_area(dim) + i0.ln()), i1 / i0)
    })
}

fn logistic_log_normaliser(dim: usize) -> f64 {
    logistic_constants(dim).0
}

fn logistic_moment_ratio(dim: usize) -> f64 {
    logistic_constants(dim).1
}

/// A location/scatter pair sharing a family.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticalComponent {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub family: EllipticalFamily,
}

impl EllipticalComponent {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>, family: EllipticalFamily) -> Result<Self> {
        let m = family.dim();
        if mu.len() != m || sigma.nrows() != m || sigma.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "component expects dimension {m}, got mu {} and sigma {}x{}",
                mu.len(),
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if !linalg::is_spd(&sigma) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { mu, sigma, family })
    }

    /// Draws `n` samples as the rows of an `n x m` matrix using
    /// `mu + R L S` with `L` the Cholesky factor of `sigma`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<DMatrix<f64>> {
        let chol = self.sigma.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let l = chol.l();
        let m = self.family.dim();
        let mut out = DMatrix::zeros(n, m);
        let mut dir = DVector::zeros(m);
        for row in 0..n {
            sampling::uniform_on_sphere(rng, dir.as_mut_slice());
            let r = sampling::draw_r_squared(&self.family.kind, m, rng).sqrt();
            let x = &self.mu + (&l * &dir) * r;
            out.row_mut(row).copy_from(&x.transpose());
        }
        Ok(out)
    }

    /// Log density at `x`; `-inf` outside the support.
    pub fn log_pdf(&self, x: &DVector<f64>) -> Result<f64> {
        if !self.family.has_density() {
            return Err(Error::Unavailable("density"));
        }
        let chol = self.sigma.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let diff = x - &self.mu;
        let z = chol.l().solve_lower_triangular(&diff).ok_or(Error::NotPositiveDefinite)?;
        let t = z.norm_squared();
        let half_log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum();
        Ok(self.family.log_cg(t) - half_log_det)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn gaussian_center_density() {
        let fam = EllipticalFamily::gaussian(2);
        let v = fam.log_density_generator(0.0).unwrap();
        assert!((v - (1.0 / (2.0 * PI)).ln()).abs() < 1e-14);
    }

    #[test]
    fn cauchy_center_density() {
        let fam = EllipticalFamily::new(FamilyKind::cauchy(1), 1).unwrap();
        let v = fam.log_density_generator(0.0).unwrap();
        assert!((v - (1.0 / PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn logistic_normaliser_matches_eta_series() {
        // For m = 2 the normaliser is 2/pi, from ∫ u^0 g(u) du = eta(0) = 1/2.
        let fam = EllipticalFamily::new(FamilyKind::Logistic, 2).unwrap();
        let got = fam.log_density_generator(0.0).unwrap() - logistic_generator(0.0).ln();
        assert!((got - (2.0 / PI).ln()).abs() < 1e-10, "{got}");
        // m = 4: ∫ u g(u) du = eta(1) = ln 2, normaliser = 1 / (pi^2 ln 2 / 2 ... )
        // c_4 * S_4 * (1/2) ∫ u g(u) du = 1 with S_4 = 2 pi^2
        let fam4 = EllipticalFamily::new(FamilyKind::Logistic, 4).unwrap();
        let c4 = fam4.log_density_generator(0.0).unwrap() - logistic_generator(0.0).ln();
        let expect = -(2.0 * PI * PI * 0.5 * 2f64.ln()).ln();
        assert!((c4 - expect).abs() < 1e-10, "{c4} vs {expect}");
    }

    #[test]
    fn logistic_normaliser_monte_carlo() {
        // Importance sampling with a standard normal proposal in m = 3.
        let fam = EllipticalFamily::new(FamilyKind::Logistic, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let z: [f64; 3] = [0, 1, 2].map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal));
            let t: f64 = z.iter().map(|v| v * v).sum();
            let log_q = -1.5 * (2.0 * PI).ln() - 0.5 * t;
            acc += (fam.log_cg(t) - log_q).exp();
        }
        let mass = acc / n as f64;
        assert!((mass - 1.0).abs() < 0.01, "{mass}");
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(EllipticalFamily::new(FamilyKind::Kotz { a: 0.0, b: 1.0, s: 1.0 }, 2).is_err());
        assert!(EllipticalFamily::new(FamilyKind::Kotz { a: 0.6, b: 1.0, s: 1.0 }, 2).is_ok());
        assert!(EllipticalFamily::new(FamilyKind::PearsonVII { v: 1.0, s: 1.0 }, 2).is_err());
        assert!(EllipticalFamily::new(FamilyKind::Hyperbolic { v: 1.0, a: 0.0, lambda: -1.0 }, 2).is_err());
        assert!(EllipticalFamily::new(FamilyKind::AlphaStable { a: 2.0 }, 2).is_err());
        assert!(EllipticalFamily::new(FamilyKind::PearsonII { s: 1.0 }, 2).is_err());
        assert!(EllipticalFamily::new(FamilyKind::Logistic, 0).is_err());
    }

    #[test]
    fn support_errors() {
        let p2 = EllipticalFamily::new(FamilyKind::PearsonII { s: 2.0 }, 2).unwrap();
        assert!(matches!(p2.log_density_generator(1.5), Err(Error::Support(_))));
        assert_eq!(p2.log_cg(1.5), f64::NEG_INFINITY);
        let g = EllipticalFamily::gaussian(2);
        assert!(g.log_density_generator(-1.0).is_err());
        let st = EllipticalFamily::new(FamilyKind::AlphaStable { a: 1.5 }, 2).unwrap();
        assert!(matches!(st.log_density_generator(1.0), Err(Error::Unavailable(_))));
        let kotz = EllipticalFamily::new(FamilyKind::Kotz { a: 0.7, b: 1.0, s: 1.0 }, 2).unwrap();
        assert!(matches!(kotz.density_generator_derivative(0.0), Err(Error::Singular(_))));
        assert_eq!(kotz.log_density_generator(0.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn generator_derivative_ratios() {
        let g = EllipticalFamily::gaussian(3);
        for &t in &[0.0, 0.3, 4.0, 17.0] {
            assert!((g.dlog_g(t) + 0.5).abs() < 1e-15);
        }
        let cauchy = EllipticalFamily::new(FamilyKind::cauchy(1), 1).unwrap();
        assert!((cauchy.dlog_g(0.0) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn generator_derivative_matches_central_differences() {
        let families = [
            (FamilyKind::gaussian(), 2),
            (FamilyKind::Kotz { a: 2.0, b: 1.0, s: 1.0 }, 2),
            (FamilyKind::Kotz { a: 1.5, b: 0.7, s: 1.7 }, 3),
            (FamilyKind::student_t(5.0, 2), 2),
            (FamilyKind::Hyperbolic { v: 2.0, a: 1.3, lambda: -0.5 }, 2),
            (FamilyKind::Hyperbolic { v: 2.0, a: 0.0, lambda: 1.0 }, 1),
            (FamilyKind::Logistic, 3),
            (FamilyKind::PearsonII { s: 2.5 }, 2),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (kind, m) in families {
            let fam = EllipticalFamily::new(kind, m).unwrap();
            let hi = if matches!(kind, FamilyKind::PearsonII { .. }) { 0.9 } else { 6.0 };
            for _ in 0..20 {
                let t: f64 = rng.random_range(0.05..hi);
                let h = 1e-5 * t.max(1e-3);
                let f = |x: f64| fam.log_density_generator(x).unwrap().exp();
                let fd = (f(t + h) - f(t - h)) / (2.0 * h);
                let an = fam.density_generator_derivative(t).unwrap();
                assert!(rel(an, fd) < 1e-6, "{kind:?} t={t}: {an} vs {fd}");
            }
        }
    }

    #[test]
    fn expected_r_squared_values() {
        let k = EllipticalFamily::new(FamilyKind::gaussian(), 3).unwrap();
        assert!((k.expected_r_squared().unwrap() - 3.0).abs() < 1e-12);
        let c = EllipticalFamily::new(FamilyKind::cauchy(2), 2).unwrap();
        assert!(c.expected_r_squared().is_none());
        let st = EllipticalFamily::new(FamilyKind::AlphaStable { a: 1.2 }, 2).unwrap();
        assert!(st.expected_r_squared().is_none());
        // Gamma((2a+m-2)/(2s)) with a = 2, m = 2, s = 1 has shape 2 and mean 2 / b.
        let k2 = EllipticalFamily::new(FamilyKind::Kotz { a: 2.0, b: 1.0, s: 1.0 }, 2).unwrap();
        assert!((k2.expected_r_squared().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn component_rejects_indefinite_scatter() {
        let fam = EllipticalFamily::gaussian(2);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(EllipticalComponent::new(DVector::zeros(2), bad, fam), Err(Error::NotPositiveDefinite)));
        assert!(EllipticalComponent::new(DVector::zeros(3), DMatrix::identity(2, 2), fam).is_err());
    }
}
