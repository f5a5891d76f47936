//! Surrogate-functional subspace correction solvers and reference oracles.

mod local;
mod oracle;
mod schemes;
mod taut_string;
mod trace;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TvError};
use crate::prox::ProjectionConfig;

pub use local::{surrogate_energy, surrogate_inner_step, InnerStep, InnerStepReport, MultiplierField};
pub use oracle::{check_optimality, oracle_minimize, OracleConfig, OracleResult};
pub use schemes::{
    solve, solve_parallel_nonoverlapping, solve_sequential_nonoverlapping, solve_sequential_overlapping,
    Algorithm,
};
pub use taut_string::taut_string_1d;
pub use trace::{Diagnostics, SolverState, TraceEntry};

/// How the Lagrange multiplier enforcing the local constraints is found.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MultiplierMethod {
    /// Restricted-residual fixed point `eta <- eta + (prox(y - eta) - v)|_C`,
    /// each prox evaluated by the unconstrained dual iteration.
    FixedPoint,
    /// Dual iteration run directly on the constrained local problem; the
    /// multiplier is recovered from the final dual field.
    PinnedDual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Inner surrogate steps on odd subdomains (1st, 3rd, ...).
    pub inner_iters_odd: usize,
    /// Inner surrogate steps on even subdomains (2nd, 4th, ...).
    pub inner_iters_even: usize,
    pub outer_iters: usize,
    /// Stop once `||u^(n+1) - u^(n)||_2` is at most this.
    pub outer_tol: f64,
    pub multiplier_method: MultiplierMethod,
    pub multiplier_iters: usize,
    pub multiplier_tol: f64,
    /// Step size and iteration budget of the dual projection.
    pub projection: ProjectionConfig,
    /// Dual-increment tolerance at the first outer iteration; it shrinks
    /// by `projection_tol_decay` per iteration down to `projection_tol_floor`.
    pub projection_tol_start: f64,
    pub projection_tol_floor: f64,
    pub projection_tol_decay: f64,
    /// Re-split the iterate with the partition of unity after each
    /// overlapping sweep.
    pub use_partition_correction: bool,
    /// Worker threads for the parallel scheme; 0 uses the rayon default.
    pub threads: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::for_dim(2)
    }
}

impl SolverConfig {
    pub fn for_dim(d: usize) -> Self {
        SolverConfig {
            inner_iters_odd: 1,
            inner_iters_even: 1,
            outer_iters: 500,
            outer_tol: 1e-6,
            multiplier_method: MultiplierMethod::PinnedDual,
            multiplier_iters: 2000,
            multiplier_tol: 1e-9,
            projection: ProjectionConfig::for_dim(d),
            projection_tol_start: 1e-4,
            projection_tol_floor: 1e-7,
            projection_tol_decay: 0.9,
            use_partition_correction: true,
            threads: 0,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.inner_iters_odd == 0 || self.inner_iters_even == 0 {
            return Err(TvError::invalid("inner iteration counts must be at least 1"));
        }
        if self.outer_iters == 0 {
            return Err(TvError::invalid("outer_iters must be at least 1"));
        }
        if !(self.outer_tol >= 0.0) || !(self.multiplier_tol >= 0.0) {
            return Err(TvError::invalid("tolerances must be nonnegative"));
        }
        if self.multiplier_iters == 0 {
            return Err(TvError::invalid("multiplier_iters must be at least 1"));
        }
        if !(self.projection_tol_floor >= 0.0 && self.projection_tol_start >= self.projection_tol_floor) {
            return Err(TvError::invalid("projection tolerance schedule must satisfy start >= floor >= 0"));
        }
        if !(self.projection_tol_decay > 0.0 && self.projection_tol_decay <= 1.0) {
            return Err(TvError::invalid("projection_tol_decay must lie in (0, 1]"));
        }
        self.projection.validate(d)
    }

    /// Inner iterations for the 0-based subdomain index `j`.
    pub fn inner_iters(&self, j: usize) -> usize {
        if j.is_multiple_of(2) {
            self.inner_iters_odd
        } else {
            self.inner_iters_even
        }
    }

    /// Projection settings used during outer iteration `n`.
    pub fn projection_at(&self, n: usize) -> ProjectionConfig {
        let tol = self.projection_tol_start * self.projection_tol_decay.powi(n.min(100_000) as i32);
        self.projection.with_tol(tol.max(self.projection_tol_floor))
    }
}
