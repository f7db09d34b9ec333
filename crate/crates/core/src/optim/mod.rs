//! Fitting loops: Riemannian gradient descent, element-wise Riemannian Adam,
//! the direction-wise adaptive method, and EM for Gaussian mixtures.
//!
//! Each manifold iteration draws one random projection shared by all
//! components (or a batch of them), solves the 1-D semi-discrete problem,
//! converts the Euclidean gradients to Riemannian ones and retracts with the
//! exponential maps of the sphere, Euclidean and Bures–Wasserstein factors.

mod config;
mod em;
mod init;
mod report;
mod riemannian;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::Result;
use crate::mixture::MixtureModel;

pub use config::{Method, OptimizerConfig, Schedule, Updates, EARLY_STOP_WINDOW, STEPSIZE_GRID};
pub use em::{fit_em_gmm, COLLAPSE_MASS, COVARIANCE_FLOOR};
pub use init::{initialize, InitStrategy};
pub use report::{EventKind, FitEvent, FitReport, TraceRow, REPORT_SCHEMA_VERSION};
pub use riemannian::{fit_dadam, fit_radam, fit_vanilla, OptimizerState, RiemannianFit, StepOutcome};

/// Runs the method named in `cfg`.
pub fn fit<R: Rng + ?Sized>(
    model0: &MixtureModel,
    samples: &DMatrix<f64>,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<FitReport> {
    match cfg.method {
        Method::Vanilla => fit_vanilla(model0, samples, cfg, rng),
        Method::Radam => fit_radam(model0, samples, cfg, rng),
        Method::Dadam => fit_dadam(model0, samples, cfg, rng),
        Method::Em => fit_em_gmm(model0, samples, cfg, rng),
    }
}
