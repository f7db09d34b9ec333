//! Elliptical mixture models fitted by Riemannian stochastic optimisation of a
//! sliced semi-discrete Wasserstein cost.
//!
//! The crate is organised bottom-up: [`elliptical`] families and samplers,
//! [`mixture`] models and synthetic data, [`transport`] distances and 1-D
//! optimal transport, [`manifold`] operations on the sphere × Euclidean ×
//! Bures–Wasserstein product, [`gradients`] of the sliced cost, and the
//! [`optim`] fitting loops. [`bench`] runs seeded benchmark suites.

pub mod bench;
pub mod elliptical;
pub mod error;
pub mod gradients;
pub mod io;
pub mod linalg;
pub mod manifold;
pub mod mixture;
pub mod optim;
pub mod rng;
pub mod special;
pub mod transport;

pub use elliptical::{EllipticalComponent, EllipticalFamily, FamilyKind};
pub use error::{Error, Result};
