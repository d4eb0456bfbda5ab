//! Point processes on the unit sphere.
//!
//! Simulation of Poisson processes, isotropic determinantal point processes
//! (DPPs), Gaussian fields, dependent and independent thinnings and
//! log-Gaussian Cox processes; non-parametric F, G, J, K and inhomogeneous K
//! estimators with their theoretical counterparts; and Monte Carlo envelope
//! tests.

// Negated float comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod envelopes;
pub mod error;
pub mod harmonics;
pub mod io;
pub mod models;
pub mod quadrature;
pub mod rng;
pub mod simulate;
pub mod sphere;
pub mod summaries;

pub use error::{Error, Result};
pub use models::{Model, ModelSpec, Spectrum};
pub use summaries::SummaryTable;
pub use sphere::{PointPattern, Rotation, UnitVector, Window};

