//! Special functions and scalar quadrature used by the density generators.

use std::f64::consts::PI;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `log(exp(a) + exp(b))` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Natural log of the modified Bessel function of the second kind, `ln K_nu(x)`,
/// for real order and `x > 0`.
///
/// Uses `K_nu(x) = 1/2 ∫ exp(-x cosh t + nu t) dt` over the real line and the
/// trapezoid rule, which converges geometrically for this entire integrand.
pub fn ln_bessel_k(nu: f64, x: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return if x == f64::INFINITY { f64::NEG_INFINITY } else { f64::NAN };
    }
    let nu = nu.abs();
    let peak = (nu / x).asinh();
    let exponent = |t: f64| -x * t.cosh() + nu * t;
    let curvature = x.hypot(nu);
    let step = (0.5 / curvature.sqrt()).min(0.1);
    let top = exponent(peak);
    let cutoff = top - 46.0;

    let mut acc = 1.0;
    for dir in [1.0, -1.0] {
        let mut j = 1usize;
        loop {
            let e = exponent(peak + dir * step * j as f64);
            if e < cutoff {
                break;
            }
            acc += (e - top).exp();
            j += 1;
        }
    }
    top + (0.5 * step * acc).ln()
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    // Split first so that narrow features are not missed by the initial probe.
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + h * i as f64;
            let hi = lo + h;
            let fa = f(lo);
            let fb = f(hi);
            let fm = f(0.5 * (lo + hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            rec(f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, 40)
        })
        .sum()
}

/// Surface area of the unit sphere in `R^m`.
pub fn ln_sphere_area(m: usize) -> f64 {
    let half = m as f64 / 2.0;
    (2.0f64).ln() + half * PI.ln() - ln_gamma(half)
}
