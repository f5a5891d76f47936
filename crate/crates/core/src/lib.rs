//! Domain decomposition solvers for total-variation regularized inversion.
//!
//! The crate minimizes
//!
//! ```text
//! J(u) = ||T u - g||^2 + 2 alpha TV(u)
//! ```
//!
//! over signals on a regular grid, where `T` is a linear measurement
//! operator (masking, partial Fourier sampling, ...) and `TV` is the
//! isotropic discrete total variation. Besides a single-domain reference
//! solver, three subspace-correction schemes are provided:
//!
//! * sequential (Gauss–Seidel) nonoverlapping decomposition,
//! * parallel (Jacobi with averaging) nonoverlapping decomposition,
//! * sequential overlapping decomposition with internal-boundary trace
//!   constraints and a partition-of-unity recombination.
//!
//! Each local problem is a surrogate functional minimization, solved by a
//! constrained total-variation proximity step built on the dual projection
//! iteration in [`prox`].

// `!(x > 0.0)` also rejects NaN; index loops mirror the stencil formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod decomposition;
pub mod error;
pub mod grid;
pub mod harness;
pub mod io;
pub mod operators;
pub mod prox;
pub mod solver;

pub use decomposition::Decomposition;
pub use error::{Result, TvError};
pub use grid::{DualField, GridShape, Signal};
pub use operators::{IdentityOperator, MaskOperator, MeasurementOperator, PartialFourierOperator};
pub use prox::ProjectionConfig;
pub use solver::{SolverConfig, SolverState};
