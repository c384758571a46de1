//! Viscous thin-film coating flow on fiber networks.
//!
//! Solves `u_t + (f(u) u_sss)_s = 0` on every edge of a metric graph, with
//! continuity and Kirchhoff flux balance at interior vertices and no-flux
//! closure at boundary vertices, using a conservative vertex-centered finite
//! volume discretization and a linearly implicit time stepper.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod grid;
pub mod operators;
pub mod output;
pub mod profile;
pub mod spectral;
pub mod stepper;

pub use error::{Error, Result};
pub use graph::{GraphSpec, MetricGraph};
pub use grid::GraphGrid;
pub use operators::{FaceAverage, Mobility};
