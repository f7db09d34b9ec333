use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::mixture::MixtureModel;
use crate::special::log_sum_exp;
use crate::transport::{random_projections, SlicedEvaluator};

use super::config::{Method, OptimizerConfig};
use super::report::{EventKind, FitReport, TraceRow};

/// Components whose weight falls below this are re-seeded.
pub const COLLAPSE_MASS: f64 = 1e-8;
/// Eigenvalue floor relative to `trace(data covariance) / m`.
pub const COVARIANCE_FLOOR: f64 = 1e-6;

/// Responsibilities (`n x k`) and average NLL of `model` on `samples`.
fn e_step(model: &MixtureModel, samples: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let eval = model.evaluator()?;
    let (n, k) = (samples.nrows(), model.k());
    let mut resp = DMatrix::zeros(n, k);
    let mut x = vec![0.0; samples.ncols()];
    let mut nll = 0.0;
    for (r, row) in samples.row_iter().enumerate() {
        x.iter_mut().zip(row.iter()).for_each(|(d, s)| *d = *s);
        let terms = eval.component_log_terms(&x);
        let total = log_sum_exp(&terms);
        nll -= total;
        for (i, t) in terms.iter().enumerate() {
            resp[(r, i)] = (t - total).exp();
        }
    }
    Ok((resp, nll / n as f64))
}

/// Expectation–maximisation for Gaussian mixtures with an eigenvalue floor and
/// re-seeding of collapsed components.
pub fn fit_em_gmm<R: Rng + ?Sized>(
    model0: &MixtureModel,
    samples: &DMatrix<f64>,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<FitReport> {
    cfg.validate()?;
    if cfg.method != Method::Em {
        return Err(Error::Config(format!("configuration is for {}, not em", cfg.method)));
    }
    if !model0.family().kind().is_gaussian() {
        return Err(Error::Config(format!("EM requires the Gaussian family, got {}", model0.family().kind().name())));
    }
    let (n, m) = samples.shape();
    if m != model0.dim() {
        return Err(Error::DimensionMismatch(format!("model has dimension {}, data has {m} columns", model0.dim())));
    }
    let k = model0.k();
    let (_, data_cov) = linalg::mean_and_cov(samples);
    let floor = COVARIANCE_FLOOR * data_cov.trace() / m as f64;
    let reseed_scatter = DMatrix::identity(m, m) * (data_cov.trace() / m as f64);

    let evaluator = SlicedEvaluator::new(samples, &random_projections(rng, m, cfg.eval_projections))?;
    let mut report = FitReport::new(Method::Em, model0.clone());
    report.initial_eval_cost = Some(evaluator.cost(model0)?);

    let mut model = model0.clone();
    let mut prev_nll = f64::INFINITY;
    let mut last_nll = None;
    for h in 1..=cfg.max_iters {
        let start = Instant::now();
        let (resp, nll) = e_step(&model, samples)?;
        if let Some(row) = report.trace.last_mut() {
            row.nll = Some(nll);
        }
        if !nll.is_finite() {
            report.event(h, EventKind::NonFiniteCost, None);
            report.fail("non-finite likelihood");
            last_nll = Some(nll);
            break;
        }
        if (prev_nll - nll).abs() < cfg.em_tol {
            last_nll = Some(nll);
            break;
        }
        prev_nll = nll;

        let mut pi = Vec::with_capacity(k);
        let mut mu = Vec::with_capacity(k);
        let mut sigma = Vec::with_capacity(k);
        for i in 0..k {
            let r = resp.column(i);
            let mass: f64 = r.sum();
            if mass / (n as f64) < COLLAPSE_MASS {
                report.event(h, EventKind::ComponentReseeded, Some(i));
                pi.push(1.0 / k as f64);
                mu.push(samples.row(rng.random_range(0..n)).transpose());
                sigma.push(reseed_scatter.clone());
                continue;
            }
            let mean: DVector<f64> = samples.tr_mul(&r) / mass;
            let mut cov = DMatrix::zeros(m, m);
            for (row, w) in samples.row_iter().zip(r.iter()) {
                let d = row.transpose() - &mean;
                cov.ger(*w, &d, &d, 1.0);
            }
            cov /= mass;
            let eig = linalg::sym_eigen(&cov);
            if eig.eigenvalues.min() < floor {
                report.event(h, EventKind::CovarianceFloored, Some(i));
                cov = linalg::sym_map(&cov, |v| v.max(floor));
            }
            pi.push(mass / n as f64);
            mu.push(mean);
            sigma.push(linalg::symmetrize(&cov));
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= total);
        model = MixtureModel::new(model.family(), pi, mu, sigma)?;
        report.trace.push(TraceRow { iteration: h, cost: None, eval_cost: None, nll: None, halvings: 0 });
        report.wall_ms.push(start.elapsed().as_secs_f64() * 1e3);
        report.iterations = h;
    }
    let final_nll = match last_nll {
        Some(v) => v,
        None => {
            let v = model.nll(samples)?;
            if let Some(row) = report.trace.last_mut() {
                row.nll = Some(v);
            }
            v
        }
    };
    report.final_nll = Some(final_nll);
    report.final_eval_cost = Some(evaluator.cost(&model)?);
    report.model = model;
    Ok(report)
}
