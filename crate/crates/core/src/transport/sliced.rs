//! Sliced semi-discrete cost of a mixture against data.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::elliptical::EllipticalFamily;
use crate::error::{Error, Result};
use crate::mixture::MixtureModel;

use super::semidiscrete::{solve, Grid, ProjectionContext, SemiDiscreteSolution};

/// Mixture parameters with unnormalised weights `sqrt_pi²`, the form in which
/// the sliced cost is differentiated.
#[derive(Debug, Clone, Copy)]
pub struct RawParams<'a> {
    pub family: EllipticalFamily,
    pub sqrt_pi: &'a [f64],
    pub mu: &'a [DVector<f64>],
    pub sigma: &'a [DMatrix<f64>],
}

impl<'a> RawParams<'a> {
    pub fn from_model(model: &'a MixtureModel, sqrt_pi: &'a [f64]) -> Self {
        Self { family: model.family(), sqrt_pi, mu: model.mu(), sigma: model.sigma() }
    }

    pub fn k(&self) -> usize {
        self.sqrt_pi.len()
    }
}

/// One-dimensional image of a mixture under a projection: weight `pi_i`,
/// location `p.mu_i` and squared scale `p' Sigma_i p` per component, keeping
/// the `m`-dimensional generator and normaliser.
#[derive(Debug, Clone)]
pub struct ProjectedMixture {
    family: EllipticalFamily,
    pub weight: Vec<f64>,
    pub loc: Vec<f64>,
    pub scale2: Vec<f64>,
}

/// Per-node generator values for one component.
#[derive(Debug, Clone, Copy)]
pub struct NodeTerms {
    /// `c_m g(t)`, zero where it is not finite.
    pub cg: f64,
    /// `c_m g'(t)`, zero where it is not finite.
    pub dcg: f64,
    /// `y - loc`.
    pub offset: f64,
    pub t: f64,
}

impl ProjectedMixture {
    pub fn new(params: &RawParams<'_>, p: &DVector<f64>) -> Result<Self> {
        let k = params.k();
        if params.mu.len() != k || params.sigma.len() != k {
            return Err(Error::InvalidModel("parameter lists differ in length".into()));
        }
        if !params.family.has_density() {
            return Err(Error::Unavailable("projected density"));
        }
        let weight = params.sqrt_pi.iter().map(|s| s * s).collect();
        let loc = params.mu.iter().map(|mu| mu.dot(p)).collect();
        let scale2: Vec<f64> = params.sigma.iter().map(|s| (s * p).dot(p)).collect();
        if scale2.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { family: params.family, weight, loc, scale2 })
    }

    pub fn family(&self) -> &EllipticalFamily {
        &self.family
    }

    pub fn terms(&self, i: usize, y: f64, with_derivative: bool) -> NodeTerms {
        let offset = y - self.loc[i];
        let t = offset * offset / self.scale2[i];
        let lcg = self.family.log_cg(t);
        let cg = if lcg.is_finite() { lcg.exp() } else { 0.0 };
        let dcg = if with_derivative && cg > 0.0 {
            let d = cg * self.family.dlog_g(t);
            if d.is_finite() {
                d
            } else {
                0.0
            }
        } else {
            0.0
        };
        NodeTerms { cg, dcg, offset, t }
    }

    /// Unnormalised nodal density `sum_i pi_i (s_i)^(-1/2) c_m g(t_i)`.
    pub fn density_on(&self, grid: &Grid) -> Vec<f64> {
        let inv_sd: Vec<f64> = self.scale2.iter().map(|s| s.sqrt().recip()).collect();
        (0..grid.nodes)
            .map(|n| {
                let y = grid.node(n);
                (0..self.weight.len()).map(|i| self.weight[i] * inv_sd[i] * self.terms(i, y, false).cg).sum()
            })
            .collect()
    }
}

/// Projects the mixture, grids its density on the context, and solves.
pub fn solve_projection(
    params: &RawParams<'_>,
    ctx: &ProjectionContext,
) -> Result<(ProjectedMixture, SemiDiscreteSolution)> {
    let proj = ProjectedMixture::new(params, ctx.direction())?;
    let density = proj.density_on(ctx.grid());
    let sol = solve(ctx, &density)?;
    Ok((proj, sol))
}

/// Mean over projections of the normalised semi-discrete W2².
pub fn sliced_cost(model: &MixtureModel, samples: &DMatrix<f64>, projections: &[DVector<f64>]) -> Result<f64> {
    let s = model.sqrt_pi();
    sliced_cost_raw(&RawParams::from_model(model, s.as_slice()), samples, projections)
}

pub fn sliced_cost_raw(params: &RawParams<'_>, samples: &DMatrix<f64>, projections: &[DVector<f64>]) -> Result<f64> {
    if projections.is_empty() {
        return Err(Error::Config("at least one projection is required".into()));
    }
    let mut total = 0.0;
    for p in projections {
        let ctx = ProjectionContext::new(p.clone(), samples)?;
        total += solve_projection(params, &ctx)?.1.cost;
    }
    Ok(total / projections.len() as f64)
}

/// Sliced cost against fixed projections with the contexts built once.
#[derive(Debug, Clone)]
pub struct SlicedEvaluator {
    contexts: Vec<ProjectionContext>,
}

impl SlicedEvaluator {
    pub fn new(samples: &DMatrix<f64>, projections: &[DVector<f64>]) -> Result<Self> {
        if projections.is_empty() {
            return Err(Error::Config("at least one projection is required".into()));
        }
        let contexts = projections.iter().map(|p| ProjectionContext::new(p.clone(), samples)).collect::<Result<_>>()?;
        Ok(Self { contexts })
    }

    pub fn cost(&self, model: &MixtureModel) -> Result<f64> {
        let s = model.sqrt_pi();
        self.cost_raw(&RawParams::from_model(model, s.as_slice()))
    }

    pub fn cost_raw(&self, params: &RawParams<'_>) -> Result<f64> {
        let mut total = 0.0;
        for ctx in &self.contexts {
            total += solve_projection(params, ctx)?.1.cost;
        }
        Ok(total / self.contexts.len() as f64)
    }
}

/// Uniform direction on the unit sphere in `R^m`.
pub fn random_projection<R: Rng + ?Sized>(rng: &mut R, m: usize) -> DVector<f64> {
    let mut p = DVector::zeros(m);
    crate::elliptical::uniform_on_sphere(rng, p.as_mut_slice());
    // exact renormalisation keeps the unit-norm check tight
    let n = p.norm();
    p / n
}

pub fn random_projections<R: Rng + ?Sized>(rng: &mut R, m: usize, count: usize) -> Vec<DVector<f64>> {
    (0..count).map(|_| random_projection(rng, m)).collect()
}
