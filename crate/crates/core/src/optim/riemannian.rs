use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::gradients::{projection_grad, EuclideanGrad};
use crate::linalg;
use crate::manifold::{
    clamp_sphere, exp_sigma, exp_sphere, project_sphere_grad, riem_grad_sigma, transport_sigma, PdPoint,
};
use crate::mixture::{MixtureModel, WEIGHT_TOL};
use crate::transport::{random_projection, random_projections, ProjectionContext, RawParams, SlicedEvaluator};

use super::config::{Method, OptimizerConfig, EARLY_STOP_WINDOW};
use super::report::{EventKind, FitReport, TraceRow};

/// Moment estimates carried between iterations. Scatter moments always live
/// in the tangent space of the current scatter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    /// First moments of the scatter gradients.
    pub u: Vec<DMatrix<f64>>,
    /// Second moments of the scatter gradients.
    pub v: Vec<DMatrix<f64>>,
    /// Running maxima of `p' v p`.
    pub adp: Vec<f64>,
    pub m_sqrtpi: DVector<f64>,
    pub v_sqrtpi: DVector<f64>,
    pub m_mu: Vec<DVector<f64>>,
    pub v_mu: Vec<DVector<f64>>,
}

impl OptimizerState {
    pub fn zeros(k: usize, m: usize) -> Self {
        Self {
            u: vec![DMatrix::zeros(m, m); k],
            v: vec![DMatrix::zeros(m, m); k],
            adp: vec![0.0; k],
            m_sqrtpi: DVector::zeros(k),
            v_sqrtpi: DVector::zeros(k),
            m_mu: vec![DVector::zeros(m); k],
            v_mu: vec![DVector::zeros(m); k],
        }
    }
}

/// Result of a single iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub cost: f64,
    pub halvings: usize,
}

/// Iterate-by-iterate driver shared by the manifold methods.
pub struct RiemannianFit<'a> {
    cfg: &'a OptimizerConfig,
    samples: &'a DMatrix<f64>,
    model0: MixtureModel,
    s: DVector<f64>,
    mu: Vec<DVector<f64>>,
    sigma: Vec<PdPoint>,
    state: OptimizerState,
    h: usize,
    report: FitReport,
}

impl<'a> RiemannianFit<'a> {
    pub fn new(model0: &MixtureModel, samples: &'a DMatrix<f64>, cfg: &'a OptimizerConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.method == Method::Em {
            return Err(Error::Config("EM is not a manifold method".into()));
        }
        if samples.ncols() != model0.dim() {
            return Err(Error::DimensionMismatch(format!(
                "model has dimension {}, data has {} columns",
                model0.dim(),
                samples.ncols()
            )));
        }
        let sigma = model0.sigma().iter().map(|s| PdPoint::new(s.clone())).collect::<Result<_>>()?;
        Ok(Self {
            cfg,
            samples,
            s: model0.sqrt_pi(),
            mu: model0.mu().to_vec(),
            sigma,
            state: OptimizerState::zeros(model0.k(), model0.dim()),
            h: 0,
            report: FitReport::new(cfg.method, model0.clone()),
            model0: model0.clone(),
        })
    }

    pub fn iteration(&self) -> usize {
        self.h
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn report(&self) -> &FitReport {
        &self.report
    }

    pub fn model(&self) -> Result<MixtureModel> {
        let norm2 = self.s.norm_squared();
        let pi = self.s.iter().map(|v| v * v / norm2).collect();
        let sigma = self.sigma.iter().map(|p| p.sigma().clone()).collect();
        MixtureModel::new(self.model0.family(), pi, self.mu.clone(), sigma)
    }

    fn sigma_mats(&self) -> Vec<DMatrix<f64>> {
        self.sigma.iter().map(|p| p.sigma().clone()).collect()
    }

    /// Cost and averaged gradient over `batch` fresh projections.
    fn gradient<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, EuclideanGrad, Vec<DVector<f64>>)> {
        let (k, m) = (self.mu.len(), self.samples.ncols());
        let sigma = self.sigma_mats();
        let params =
            RawParams { family: self.model0.family(), sqrt_pi: self.s.as_slice(), mu: &self.mu, sigma: &sigma };
        let batch = self.cfg.batch;
        let mut grad = EuclideanGrad::zeros(k, m);
        let mut cost = 0.0;
        let mut dirs = Vec::with_capacity(batch);
        for _ in 0..batch {
            let p = random_projection(rng, m);
            let ctx = ProjectionContext::new(p.clone(), self.samples)?;
            let (c, g) = projection_grad(&params, &ctx)?;
            cost += c / batch as f64;
            grad.add_scaled(&g, 1.0 / batch as f64);
            dirs.push(p);
        }
        Ok((cost, grad, dirs))
    }

    /// One iteration: fresh projections, gradient, moment updates, retractions.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<StepOutcome> {
        self.h += 1;
        let h = self.h;
        let cfg = self.cfg;
        let lr = cfg.lr.at(h);
        let b1 = cfg.beta1.at(h);
        let b2 = cfg.beta2;
        let (cost, grad, dirs) = self.gradient(rng)?;
        let finite = cost.is_finite()
            && grad.g_sqrtpi.iter().all(|v| v.is_finite())
            && grad.g_mu.iter().all(|g| g.iter().all(|v| v.is_finite()))
            && grad.w_sigma.iter().all(|v| v.is_finite());
        if !finite {
            self.report.event(h, EventKind::NonFiniteCost, None);
            return Err(Error::DegenerateGrid(format!("non-finite cost or gradient at iteration {h}")));
        }
        let correct1 = if cfg.bias_correction { 1.0 - b1.powi(h as i32) } else { 1.0 };
        let correct2 = if cfg.bias_correction { 1.0 - b2.powi(h as i32) } else { 1.0 };
        let method = cfg.method;

        if cfg.updates.weights {
            let g = project_sphere_grad(&self.s, &grad.g_sqrtpi);
            let dir = if method == Method::Radam {
                let st = &mut self.state;
                st.m_sqrtpi = project_sphere_grad(&self.s, &st.m_sqrtpi) * b1 + &g * (1.0 - b1);
                st.v_sqrtpi = &st.v_sqrtpi * b2 + g.component_mul(&g) * (1.0 - b2);
                let d = if cfg.adaptive {
                    st.m_sqrtpi
                        .zip_map(&st.v_sqrtpi, |mv, vv| (mv / correct1) / ((vv / correct2).sqrt() + cfg.adam_eps))
                } else {
                    st.m_sqrtpi.clone()
                };
                project_sphere_grad(&self.s, &d)
            } else {
                g
            };
            self.s = clamp_sphere(&exp_sphere(&self.s, &(dir * lr)));
        }

        if cfg.updates.locations {
            let adaptive = method == Method::Radam || (method == Method::Dadam && cfg.adaptive_locations);
            for (i, g) in grad.g_mu.iter().enumerate() {
                let dir = if adaptive {
                    let st = &mut self.state;
                    st.m_mu[i] = &st.m_mu[i] * b1 + g * (1.0 - b1);
                    st.v_mu[i] = &st.v_mu[i] * b2 + g.component_mul(g) * (1.0 - b2);
                    if method == Method::Radam && !cfg.adaptive {
                        st.m_mu[i].clone()
                    } else {
                        st.m_mu[i]
                            .zip_map(&st.v_mu[i], |mv, vv| (mv / correct1) / ((vv / correct2).sqrt() + cfg.adam_eps))
                    }
                } else {
                    g.clone()
                };
                self.mu[i] -= dir * lr;
            }
        }

        let mut halvings = 0;
        if cfg.updates.scatter {
            for i in 0..self.sigma.len() {
                let eg = &grad.g_sigma[i];
                let rg = riem_grad_sigma(self.sigma[i].sigma(), eg);
                let dir = match method {
                    Method::Vanilla => rg,
                    Method::Dadam => {
                        let st = &mut self.state;
                        st.u[i] = &st.u[i] * b1 + &rg * (1.0 - b1);
                        st.v[i] = &st.v[i] * b2 + (eg * eg.transpose()) * (1.0 - b2);
                        let along = dirs.iter().map(|p| p.dot(&(&st.v[i] * p))).sum::<f64>() / dirs.len() as f64;
                        st.adp[i] = st.adp[i].max(along);
                        &st.u[i] * (1.0 / (correct1 * (st.adp[i] / correct2 + cfg.eps_adp).sqrt()))
                    }
                    Method::Radam => {
                        let st = &mut self.state;
                        st.u[i] = &st.u[i] * b1 + &rg * (1.0 - b1);
                        st.v[i] = &st.v[i] * b2 + eg.component_mul(eg) * (1.0 - b2);
                        if cfg.adaptive {
                            let d = st.u[i]
                                .zip_map(&st.v[i], |uv, vv| (uv / correct1) / ((vv / correct2).sqrt() + cfg.adam_eps));
                            linalg::symmetrize(&d)
                        } else {
                            st.u[i].clone()
                        }
                    }
                    Method::Em => unreachable!("rejected in new"),
                };
                let mut scale = lr;
                let mut next = None;
                for attempt in 0..=cfg.retries {
                    match exp_sigma(&self.sigma[i], &(&dir * -scale)) {
                        Ok(p) => {
                            next = Some(p);
                            break;
                        }
                        Err(Error::StepTooLarge) if attempt < cfg.retries => {
                            scale *= 0.5;
                            halvings += 1;
                            self.report.event(h, EventKind::StepHalved, Some(i));
                        }
                        Err(Error::StepTooLarge) => {}
                        Err(e) => return Err(e),
                    }
                }
                match next {
                    Some(p) => {
                        if matches!(method, Method::Dadam | Method::Radam) {
                            self.state.u[i] = transport_sigma(&self.sigma[i], p.sigma(), &self.state.u[i]);
                        }
                        self.sigma[i] = p;
                    }
                    None => {
                        self.report.safeguard_exhaustions += 1;
                        self.report.event(h, EventKind::SafeguardExhausted, Some(i));
                    }
                }
            }
        }

        if !self.constraints_hold() {
            self.report.constraint_violations += 1;
            self.report.event(h, EventKind::ConstraintViolation, None);
        }
        Ok(StepOutcome { cost, halvings })
    }

    /// Weights sum to one and every scatter matrix is positive definite.
    pub fn constraints_hold(&self) -> bool {
        let norm2 = self.s.norm_squared();
        let total: f64 = self.s.iter().map(|v| v * v / norm2).sum();
        (total - 1.0).abs() <= 1e-10 && self.sigma.iter().all(|p| linalg::is_spd(p.sigma()))
    }

    /// Runs up to `max_iters` iterations and finalises the report.
    pub fn run<R: Rng + ?Sized>(mut self, rng: &mut R) -> Result<FitReport> {
        let cfg = self.cfg;
        let evaluator =
            SlicedEvaluator::new(self.samples, &random_projections(rng, self.samples.ncols(), cfg.eval_projections))?;
        self.report.initial_eval_cost = Some(evaluator.cost(&self.model0)?);
        let density = self.model0.family().has_density();
        let mut costs = Vec::with_capacity(cfg.max_iters);
        for h in 1..=cfg.max_iters {
            let start = Instant::now();
            let outcome = match self.step(rng) {
                Ok(o) => o,
                Err(e) => {
                    self.report.fail(e.to_string());
                    break;
                }
            };
            costs.push(outcome.cost);
            let want_eval = cfg.eval_every > 0 && h % cfg.eval_every == 0;
            let want_nll = density && cfg.nll_every > 0 && h % cfg.nll_every == 0;
            let (mut eval_cost, mut nll) = (None, None);
            if want_eval || want_nll {
                let model = self.model()?;
                if want_eval {
                    eval_cost = Some(evaluator.cost(&model)?);
                }
                if want_nll {
                    nll = Some(model.nll(self.samples)?);
                }
            }
            self.report.trace.push(TraceRow {
                iteration: h,
                cost: Some(outcome.cost),
                eval_cost,
                nll,
                halvings: outcome.halvings,
            });
            self.report.wall_ms.push(start.elapsed().as_secs_f64() * 1e3);
            self.report.iterations = h;
            if let Some(tol) = cfg.early_stop {
                if h >= 2 * EARLY_STOP_WINDOW && h % EARLY_STOP_WINDOW == 0 {
                    let mean = |r: std::ops::Range<usize>| costs[r].iter().sum::<f64>() / EARLY_STOP_WINDOW as f64;
                    let prev = mean(h - 2 * EARLY_STOP_WINDOW..h - EARLY_STOP_WINDOW);
                    let cur = mean(h - EARLY_STOP_WINDOW..h);
                    if prev - cur < tol {
                        self.report.event(h, EventKind::EarlyStop, None);
                        break;
                    }
                }
            }
        }
        if self.report.safeguard_exhaustions > 0 {
            self.report.fail("positive definite safeguard exhausted");
        }
        let model = self.model()?;
        let final_eval = evaluator.cost(&model)?;
        if !final_eval.is_finite() {
            self.report.fail("non-finite final cost");
        }
        self.report.final_eval_cost = Some(final_eval);
        if density {
            self.report.final_nll = Some(model.nll(self.samples)?);
        }
        debug_assert!((model.pi().iter().sum::<f64>() - 1.0).abs() <= WEIGHT_TOL);
        self.report.model = model;
        Ok(self.report)
    }
}

fn run_method<R: Rng + ?Sized>(
    method: Method,
    model0: &MixtureModel,
    samples: &DMatrix<f64>,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<FitReport> {
    if cfg.method != method {
        return Err(Error::Config(format!("configuration is for {}, not {method}", cfg.method)));
    }
    RiemannianFit::new(model0, samples, cfg)?.run(rng)
}

/// Riemannian gradient descent with exponential-map steps.
pub fn fit_vanilla<R: Rng + ?Sized>(
    model0: &MixtureModel,
    samples: &DMatrix<f64>,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<FitReport> {
    run_method(Method::Vanilla, model0, samples, cfg, rng)
}

/// Riemannian Adam with element-wise second moments on every block.
pub fn fit_radam<R: Rng + ?Sized>(
    model0: &MixtureModel,
    samples: &DMatrix<f64>,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<FitReport> {
    run_method(Method::Radam, model0, samples, cfg, rng)
}

/// Direction-wise adaptive method: scatter second moments are read along the
/// current projection and accumulated with a running maximum.
pub fn fit_dadam<R: Rng + ?Sized>(
    model0: &MixtureModel,
    samples: &DMatrix<f64>,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<FitReport> {
    run_method(Method::Dadam, model0, samples, cfg, rng)
}
