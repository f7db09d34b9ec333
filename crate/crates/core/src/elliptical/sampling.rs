//! Samplers for the modular variable `R²` and its mixing laws.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Beta, ChiSquared, Distribution, Exp1, Gamma, StandardNormal};

use super::FamilyKind;

/// Fills `out` with a point uniform on the unit sphere.
pub(crate) fn uniform_on_sphere<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut norm2 = 0.0;
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
            norm2 += *v * *v;
        }
        if norm2 > 0.0 {
            let inv = norm2.sqrt().recip();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, rate.recip()).expect("validated gamma parameters").sample(rng)
}

fn chi_squared<R: Rng + ?Sized>(rng: &mut R, m: usize) -> f64 {
    ChiSquared::new(m as f64).expect("positive dimension").sample(rng)
}

pub(crate) fn draw_r_squared<R: Rng + ?Sized>(kind: &FamilyKind, m: usize, rng: &mut R) -> f64 {
    let mf = m as f64;
    match *kind {
        FamilyKind::Kotz { a, b, s } => {
            let g = gamma(rng, (2.0 * a + mf - 2.0) / (2.0 * s), b);
            if s == 1.0 {
                g
            } else {
                g.powf(s.recip())
            }
        }
        FamilyKind::PearsonVII { v, s } => chi_squared(rng, m) / gamma(rng, s - 0.5 * mf, 0.5 * v),
        FamilyKind::Hyperbolic { v, a, lambda } => {
            let mix = if a == 0.0 { gamma(rng, lambda, 0.5 * v) } else { sample_gig(rng, lambda, a, v) };
            chi_squared(rng, m) * mix
        }
        FamilyKind::Logistic => loop {
            // proposal t^(m/2-1) e^-t, acceptance ratio (1 + e^-t)^-2 >= 1/4
            let t = gamma(rng, 0.5 * mf, 1.0);
            let u: f64 = rng.random();
            let q = 1.0 + (-t).exp();
            if u * q * q <= 1.0 {
                break t;
            }
        },
        FamilyKind::AlphaStable { a } => chi_squared(rng, m) * 2.0 * sample_positive_stable(rng, 0.5 * a),
        FamilyKind::PearsonII { s } => Beta::new(0.5 * mf, s).expect("validated beta parameters").sample(rng),
    }
}

/// Positive stable variate with Laplace transform `exp(-u^index)`, `index in (0, 1)`,
/// by Kanter's representation.
pub fn sample_positive_stable<R: Rng + ?Sized>(rng: &mut R, index: f64) -> f64 {
    if index == 1.0 {
        return 1.0;
    }
    let u = loop {
        let u: f64 = rng.random::<f64>() * PI;
        if u > 0.0 {
            break u;
        }
    };
    let e: f64 = rng.sample(Exp1);
    let lead = (index * u).sin() / u.sin().powf(index.recip());
    lead * ((((1.0 - index) * u).sin()) / e).powf((1.0 - index) / index)
}

/// Generalised inverse Gaussian variate with density proportional to
/// `x^(lambda-1) exp(-(chi/x + psi x)/2)`, `chi, psi > 0`.
///
/// Devroye's rejection sampler for `log x` of the standardised law.
pub fn sample_gig<R: Rng + ?Sized>(rng: &mut R, lambda: f64, chi: f64, psi: f64) -> f64 {
    let omega = (chi * psi).sqrt();
    let eta = (chi / psi).sqrt();
    if lambda < 0.0 {
        return eta / standard_gig(rng, -lambda, omega);
    }
    eta * standard_gig(rng, lambda, omega)
}

/// Density proportional to `x^(lambda-1) exp(-omega (x + 1/x) / 2)`, `lambda >= 0`.
fn standard_gig<R: Rng + ?Sized>(rng: &mut R, lambda: f64, omega: f64) -> f64 {
    let alpha = (omega * omega + lambda * lambda).sqrt() - lambda;
    let psi = |x: f64| -alpha * (x.cosh() - 1.0) - lambda * (x.exp() - x - 1.0);
    let dpsi = |x: f64| -alpha * x.sinh() - lambda * (x.exp() - 1.0);

    let at_one = -psi(1.0);
    let t = if (0.5..=2.0).contains(&at_one) {
        1.0
    } else if at_one > 2.0 {
        (2.0 / (alpha + lambda)).sqrt()
    } else {
        (4.0 / (alpha + 2.0 * lambda)).ln()
    };
    let at_minus_one = -psi(-1.0);
    let s = if (0.5..=2.0).contains(&at_minus_one) {
        1.0
    } else if at_minus_one > 2.0 {
        (4.0 / (alpha * 1f64.cosh() + lambda)).sqrt()
    } else {
        let bound = (1.0 + 1.0 / alpha + (1.0 / (alpha * alpha) + 2.0 / alpha).sqrt()).ln();
        if lambda > 0.0 {
            bound.min(1.0 / lambda)
        } else {
            bound
        }
    };

    let eta = -psi(t);
    let zeta = -dpsi(t);
    let theta = -psi(-s);
    let xi = dpsi(-s);
    let p = 1.0 / xi;
    let r = 1.0 / zeta;
    let t_in = t - r * eta;
    let s_in = s - p * theta;
    let q = t_in + s_in;
    let total = p + q + r;

    loop {
        let u: f64 = rng.random();
        let v: f64 = 1.0 - rng.random::<f64>();
        let w: f64 = rng.random();
        let x = if u < q / total {
            -s_in + q * v
        } else if u < (q + r) / total {
            t_in - r * v.ln()
        } else {
            -s_in + p * v.ln()
        };
        let hat = if x > t_in {
            (-eta - zeta * (x - t)).exp()
        } else if x < -s_in {
            (-theta + xi * (x + s)).exp()
        } else {
            1.0
        };
        if w * hat <= psi(x).exp() {
            let shift = lambda / omega + (1.0 + (lambda / omega).powi(2)).sqrt();
            return shift * x.exp();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::ln_bessel_k;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gig_moment(lambda: f64, chi: f64, psi: f64, order: f64) -> f64 {
        let omega = (chi * psi).sqrt();
        (chi / psi).powf(0.5 * order) * (ln_bessel_k(lambda + order, omega) - ln_bessel_k(lambda, omega)).exp()
    }

    #[test]
    fn gig_moments_match_bessel_ratios() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(lambda, chi, psi) in
            &[(0.5, 1.0, 1.0), (-1.5, 2.0, 0.5), (3.0, 0.1, 4.0), (0.0, 5.0, 5.0), (-0.2, 0.01, 0.02)]
        {
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| sample_gig(&mut rng, lambda, chi, psi)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let inv = xs.iter().map(|x| x.recip()).sum::<f64>() / n as f64;
            let m1 = gig_moment(lambda, chi, psi, 1.0);
            let mi = gig_moment(lambda, chi, psi, -1.0);
            assert!((mean / m1 - 1.0).abs() < 0.02, "{lambda} {chi} {psi}: {mean} vs {m1}");
            assert!((inv / mi - 1.0).abs() < 0.02, "{lambda} {chi} {psi}: {inv} vs {mi}");
        }
    }

    #[test]
    fn positive_stable_half_is_levy() {
        // index 1/2: S = 1 / (4 G) with G ~ Gamma(1/2, 1), so P(S <= x) = erfc(1 / (2 sqrt x)).
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| sample_positive_stable(&mut rng, 0.5)).collect();
        xs.sort_by(f64::total_cmp);
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = libm::erfc(0.5 / x.sqrt());
                ((i + 1) as f64 / n as f64 - f).abs().max((f - i as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "{ks}");
    }

    #[test]
    fn sphere_points_are_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut buf = [0.0; 5];
        for _ in 0..100 {
            uniform_on_sphere(&mut rng, &mut buf);
            let n: f64 = buf.iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-14);
        }
    }
}
