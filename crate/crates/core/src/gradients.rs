//! Euclidean gradients of the per-projection semi-discrete cost with respect
//! to `sqrt(pi)`, the locations and the scatter matrices.
//!
//! Every gradient is a quadrature of the centred Kantorovich potential against
//! the derivative of the projected density; see
//! [`SemiDiscreteSolution::node_weights`].

use nalgebra::{DMatrix, DVector};

use crate::elliptical::FamilyKind;
use crate::error::{Error, Result};
use crate::transport::semidiscrete::{ProjectionContext, SemiDiscreteSolution};
use crate::transport::sliced::{solve_projection, ProjectedMixture, RawParams};

pub use crate::elliptical::EllipticalFamily;

/// Gradient triple. Each scatter gradient is `w_sigma[i] * p p'`.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanGrad {
    pub g_sqrtpi: DVector<f64>,
    pub g_mu: Vec<DVector<f64>>,
    pub g_sigma: Vec<DMatrix<f64>>,
    pub w_sigma: Vec<f64>,
    /// Projection direction shared by all components.
    pub direction: DVector<f64>,
}

impl EuclideanGrad {
    pub fn zeros(k: usize, m: usize) -> Self {
        Self {
            g_sqrtpi: DVector::zeros(k),
            g_mu: vec![DVector::zeros(m); k],
            g_sigma: vec![DMatrix::zeros(m, m); k],
            w_sigma: vec![0.0; k],
            direction: DVector::zeros(m),
        }
    }

    /// `self += other * scale`, used to average projection batches.
    pub fn add_scaled(&mut self, other: &EuclideanGrad, scale: f64) {
        self.g_sqrtpi += &other.g_sqrtpi * scale;
        for (a, b) in self.g_mu.iter_mut().zip(&other.g_mu) {
            *a += b * scale;
        }
        for (a, b) in self.g_sigma.iter_mut().zip(&other.g_sigma) {
            *a += b * scale;
        }
        for (a, b) in self.w_sigma.iter_mut().zip(&other.w_sigma) {
            *a += b * scale;
        }
    }
}

/// `c_m g'(t)`, with boundary singularities reported as errors.
pub fn density_generator_derivative(family: &EllipticalFamily, t: f64) -> Result<f64> {
    family.density_generator_derivative(t)
}

/// Gradients of the normalised semi-discrete cost of one projection.
pub fn euclidean_grad(
    params: &RawParams<'_>,
    proj: &ProjectedMixture,
    ctx: &ProjectionContext,
    sol: &SemiDiscreteSolution,
) -> Result<EuclideanGrad> {
    if let FamilyKind::AlphaStable { .. } = params.family.kind() {
        return Err(Error::Unavailable("generator derivative"));
    }
    let k = params.k();
    let m = params.family.dim();
    let p = ctx.direction();
    let grid = ctx.grid();
    let mut g_sqrtpi = DVector::zeros(k);
    let mut g_mu = Vec::with_capacity(k);
    let mut g_sigma = Vec::with_capacity(k);
    let mut w_sigma = Vec::with_capacity(k);
    for i in 0..k {
        let s2 = proj.scale2[i];
        let inv_sd = s2.sqrt().recip();
        let inv_sd3 = inv_sd / s2;
        let (mut ws, mut wm, mut wsig) = (0.0, 0.0, 0.0);
        for (n, &w) in sol.node_weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let terms = proj.terms(i, grid.node(n), true);
            ws += w * terms.cg;
            wm += w * terms.dcg * terms.offset;
            wsig += w * (0.5 * terms.cg + terms.dcg * terms.t);
        }
        let pi_i = proj.weight[i];
        g_sqrtpi[i] = 2.0 * params.sqrt_pi[i] * inv_sd * ws;
        g_mu.push(p * (-2.0 * pi_i * inv_sd3 * wm));
        let w = -pi_i * inv_sd3 * wsig;
        w_sigma.push(w);
        g_sigma.push(p * p.transpose() * w);
    }
    debug_assert_eq!(p.len(), m);
    Ok(EuclideanGrad { g_sqrtpi, g_mu, g_sigma, w_sigma, direction: p.clone() })
}

/// Cost and gradients for one projection context.
pub fn projection_grad(params: &RawParams<'_>, ctx: &ProjectionContext) -> Result<(f64, EuclideanGrad)> {
    let (proj, sol) = solve_projection(params, ctx)?;
    let grad = euclidean_grad(params, &proj, ctx, &sol)?;
    Ok((sol.cost, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::MixtureModel;
    use crate::rng;
    use crate::transport::sliced::random_projection;
    use crate::transport::{sliced_cost_raw, ProjectionContext};
    use nalgebra::DMatrix;

    fn two_component_model() -> MixtureModel {
        MixtureModel::new(
            EllipticalFamily::gaussian(2),
            vec![0.35, 0.65],
            vec![DVector::from_vec(vec![-1.0, 0.5]), DVector::from_vec(vec![1.5, -0.3])],
            vec![
                DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.2, 0.5]),
                DMatrix::from_row_slice(2, 2, &[0.4, -0.1, -0.1, 0.9]),
            ],
        )
        .unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-4 * b.abs().max(a.abs()) || (a - b).abs() < 1e-7
    }

    #[test]
    fn gradients_match_central_differences() {
        let truth = two_component_model();
        let mut r = rng::from_seed(21);
        let data = truth.sample(&mut r, 3000).unwrap();
        let model = MixtureModel::new(
            truth.family(),
            vec![0.5, 0.5],
            vec![DVector::from_vec(vec![-0.6, 0.1]), DVector::from_vec(vec![1.0, 0.2])],
            vec![DMatrix::identity(2, 2) * 0.7, DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.6])],
        )
        .unwrap();
        let p = random_projection(&mut r, 2);
        let ctx = ProjectionContext::new(p.clone(), &data).unwrap();
        let s: Vec<f64> = model.sqrt_pi().iter().copied().collect();
        let params = RawParams::from_model(&model, &s);
        let (_, grad) = projection_grad(&params, &ctx).unwrap();

        let h = 1e-5;
        let cost = |s: &[f64], mu: &[DVector<f64>], sigma: &[DMatrix<f64>]| {
            let params = RawParams { family: model.family(), sqrt_pi: s, mu, sigma };
            crate::transport::sliced::solve_projection(&params, &ctx).unwrap().1.cost
        };
        for i in 0..2 {
            let mut sp = s.clone();
            let mut sm = s.clone();
            sp[i] += h;
            sm[i] -= h;
            let fd = (cost(&sp, model.mu(), model.sigma()) - cost(&sm, model.mu(), model.sigma())) / (2.0 * h);
            assert!(close(grad.g_sqrtpi[i], fd), "sqrt_pi[{i}]: {} vs {fd}", grad.g_sqrtpi[i]);
            for a in 0..2 {
                let mut mp = model.mu().to_vec();
                let mut mm = model.mu().to_vec();
                mp[i][a] += h;
                mm[i][a] -= h;
                let fd = (cost(&s, &mp, model.sigma()) - cost(&s, &mm, model.sigma())) / (2.0 * h);
                assert!(close(grad.g_mu[i][a], fd), "mu[{i}][{a}]: {} vs {fd}", grad.g_mu[i][a]);
                for b in 0..=a {
                    let mut up = model.sigma().to_vec();
                    let mut dn = model.sigma().to_vec();
                    up[i][(a, b)] += h;
                    dn[i][(a, b)] -= h;
                    if a != b {
                        up[i][(b, a)] += h;
                        dn[i][(b, a)] -= h;
                    }
                    let fd = (cost(&s, model.mu(), &up) - cost(&s, model.mu(), &dn)) / (2.0 * h);
                    let g = &grad.g_sigma[i];
                    let an = if a == b { g[(a, a)] } else { g[(a, b)] + g[(b, a)] };
                    assert!(close(an, fd), "sigma[{i}][{a},{b}]: {an} vs {fd}");
                }
            }
        }
        // the whole-batch helper agrees with the single-projection solve
        let direct = sliced_cost_raw(&params, &data, std::slice::from_ref(&p)).unwrap();
        assert!((direct - cost(&s, model.mu(), model.sigma())).abs() < 1e-15);
    }

    #[test]
    fn location_gradient_points_away_from_data() {
        let data = DMatrix::from_fn(500, 1, |i, _| 3.0 + ((i as f64 + 0.5) / 500.0 - 0.5));
        let model = MixtureModel::new(
            EllipticalFamily::gaussian(1),
            vec![1.0],
            vec![DVector::zeros(1)],
            vec![DMatrix::identity(1, 1)],
        )
        .unwrap();
        let ctx = ProjectionContext::new(DVector::from_element(1, 1.0), &data).unwrap();
        let s = [1.0];
        let (_, grad) = projection_grad(&RawParams::from_model(&model, &s), &ctx).unwrap();
        assert!(grad.g_mu[0][0] < 0.0);
    }

    #[test]
    fn rank_one_scatter_gradient() {
        let model = two_component_model();
        let mut r = rng::from_seed(3);
        let data = model.sample(&mut r, 500).unwrap();
        let p = random_projection(&mut r, 2);
        let ctx = ProjectionContext::new(p.clone(), &data).unwrap();
        let s: Vec<f64> = model.sqrt_pi().iter().copied().collect();
        let (_, grad) = projection_grad(&RawParams::from_model(&model, &s), &ctx).unwrap();
        for (g, w) in grad.g_sigma.iter().zip(&grad.w_sigma) {
            assert!((g - &p * p.transpose() * *w).amax() < 1e-15);
        }
    }

    #[test]
    fn alpha_stable_has_no_gradient() {
        let fam = EllipticalFamily::new(FamilyKind::AlphaStable { a: 1.5 }, 1).unwrap();
        let mu = [DVector::zeros(1)];
        let sigma = [DMatrix::identity(1, 1)];
        let params = RawParams { family: fam, sqrt_pi: &[1.0], mu: &mu, sigma: &sigma };
        let ctx = ProjectionContext::from_values(vec![0.0, 1.0]).unwrap();
        assert!(projection_grad(&params, &ctx).is_err());
    }
}
