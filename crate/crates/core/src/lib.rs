//! Identification of temperature-dependent heat conductivities `a(u)` from a
//! single boundary temperature trace.
//!
//! The quasilinear operator `-div(a(u) grad u)` becomes the Laplacian of the
//! Kirchhoff variable `U = A(u)`, `A(s) = ∫₀ˢ a`. Forward problems are solved
//! in that variable on the unit square; the inverse problem reads `a` off the
//! ratio of tangential derivatives of `U` and of the measured trace along a
//! boundary segment.
//!
//! Module map:
//! - [`kirchhoff`]: tabulated conduction laws, principal and inverse transform.
//! - [`grid`]: unit-square grid, boundary curves, traces, tangential derivatives.
//! - [`poisson`]: Neumann problem for the Poisson equation with zero-mean gauge.
//! - [`elliptic`]: stationary quasilinear forward solver.
//! - [`parabolic`]: implicit Euler / Newton forward solver.
//! - [`inverse`]: direct reconstruction of `a` from traces.
//! - [`harness`]: ramp design, stability and convergence studies.
//! - [`io`]: CSV / JSON file formats.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cg;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod harness;
pub mod inverse;
pub mod io;
pub mod kirchhoff;
pub mod parabolic;
pub mod poisson;

pub use error::{HeatError, Result};
pub use grid::{BoundaryCurve, Edge, NodalField, StructuredGrid, TraceMeasurement};
pub use kirchhoff::{BuiltinLaw, ConductionLaw, KirchhoffTransform, LawBounds};
pub use poisson::{FluxData, LinearSolverOptions, SourceField};
