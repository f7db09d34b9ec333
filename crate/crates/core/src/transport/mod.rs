//! Distances between elliptical laws and mixtures, and the sliced
//! semi-discrete transport cost used for fitting.

mod elliptical;
mod empirical;
pub mod hungarian;
mod mixture_distance;
pub mod semidiscrete;
pub mod sliced;

pub use elliptical::{bures_term, w2_elliptical, ScatterWeight};
pub use empirical::{
    empirical_w2, mc_mixture_w2, EmpiricalW2, Reference, W2Method, ASSIGNMENT_CUTOFF, SLICED_PROJECTIONS,
};
pub use mixture_distance::{d_u, d_u_weighted, TransportPlan, K_EXACT};
pub use semidiscrete::{kantorovich_potential, w2_1d_semidiscrete, Grid, ProjectionContext, SemiDiscreteSolution};
pub use sliced::{random_projection, random_projections, sliced_cost, sliced_cost_raw, RawParams, SlicedEvaluator};
