//! Projection onto `alpha K` by the semi-implicit dual iteration, and the
//! total-variation proximity operator built from it.
//!
//! `K` is the set of divergences of vector fields bounded by one at every
//! grid point. Starting from `p = 0`, the iteration
//!
//! ```text
//! p <- (p + tau grad(div p - g/alpha)) / (1 + tau |grad(div p - g/alpha)|)
//! ```
//!
//! keeps `|p_i| <= 1` and `alpha div p` converges to the projection of `g`.
//! The minimizer of `||u - g||^2 + 2 alpha TV(u)` is `g - alpha div p`.
//!
//! [`DualSolver`] also handles the constrained variant used by the
//! subdomain solvers, where the primal variable is pinned to given
//! values on a set of coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TvError};
use crate::grid::{divergence_into, gradient_into, DualField, GridShape, Signal};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub tau: f64,
    pub max_iters: usize,
    /// Stop once the sup-norm of successive dual iterates differs by at most this.
    pub tol: f64,
}

impl ProjectionConfig {
    /// Defaults for a `d`-dimensional grid: `tau = 1/(4d)`, 2000 iterations, `tol = 1e-6`.
    pub fn for_dim(d: usize) -> Self {
        ProjectionConfig {
            tau: 1.0 / (4.0 * d as f64),
            max_iters: 2000,
            tol: 1e-6,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let bound = 1.0 / (4.0 * d as f64);
        if !(self.tau > 0.0 && self.tau <= bound * (1.0 + 1e-12)) {
            return Err(TvError::invalid(format!(
                "step size tau = {} outside (0, {bound}]",
                self.tau
            )));
        }
        if self.max_iters == 0 {
            return Err(TvError::invalid("max_iters must be positive"));
        }
        if !(self.tol >= 0.0) {
            return Err(TvError::invalid("tol must be nonnegative"));
        }
        Ok(())
    }
}

/// Outcome of a dual iteration. Non-convergence is reported here, not as an error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub iterations: usize,
    /// Sup-norm of the last dual increment.
    pub last_increment: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct Projection {
    /// `alpha div p`, the approximate projection onto `alpha K`.
    pub value: Signal,
    pub dual: DualField,
    pub report: ProjectionReport,
}

#[derive(Clone, Debug)]
pub struct Denoised {
    pub value: Signal,
    pub report: ProjectionReport,
}

/// Approximates the orthogonal projection of `g` onto `alpha K`, starting from `p = 0`.
pub fn project_onto_alpha_k(g: &Signal, alpha: f64, cfg: &ProjectionConfig) -> Result<Projection> {
    check_alpha(alpha)?;
    let shape = g.shape();
    cfg.validate(shape.ndim())?;
    let mut solver = DualSolver::new(shape);
    let report = solver.solve(g.values(), alpha, cfg);
    let value = solver.divergence().iter().map(|d| alpha * d).collect();
    Ok(Projection {
        value: Signal::from_raw(shape, value),
        dual: solver.dual_field(),
        report,
    })
}

/// Minimizer of `||u - g||^2 + 2 alpha TV(u)`, computed as `g - proj_{alpha K}(g)`.
pub fn tv_denoise(g: &Signal, alpha: f64, cfg: &ProjectionConfig) -> Result<Denoised> {
    let proj = project_onto_alpha_k(g, alpha, cfg)?;
    Ok(Denoised {
        value: g.sub(&proj.value),
        report: proj.report,
    })
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(TvError::invalid(format!("alpha must be positive and finite, got {alpha}")))
    }
}

/// Points whose forward edges touch at least one free coordinate.
pub(crate) fn active_mask(shape: &GridShape, free: &[bool]) -> Vec<bool> {
    let mut active = free.to_vec();
    for axis in 0..shape.ndim() {
        let stride = shape.stride(axis);
        let len = shape.dims()[axis];
        for i in 0..shape.len() {
            if (i / stride) % len + 1 < len && free[i + stride] {
                active[i] = true;
            }
        }
    }
    active
}

/// Reusable state for the dual iteration on one grid.
///
/// The dual variable persists between calls so consecutive, nearby
/// problems are warm-started.
#[derive(Clone, Debug)]
pub(crate) struct DualSolver {
    shape: GridShape,
    p: Vec<Vec<f64>>,
    grad: Vec<Vec<f64>>,
    div: Vec<f64>,
    primal: Vec<f64>,
    constraint: Option<Constraint>,
}

#[derive(Clone, Debug)]
struct Constraint {
    free: Vec<bool>,
    /// Points whose dual vector touches at least one free coordinate.
    active: Vec<bool>,
}

impl DualSolver {
    pub(crate) fn new(shape: &GridShape) -> Self {
        let n = shape.len();
        let d = shape.ndim();
        DualSolver {
            shape: shape.clone(),
            p: vec![vec![0.0; n]; d],
            grad: vec![vec![0.0; n]; d],
            div: vec![0.0; n],
            primal: vec![0.0; n],
            constraint: None,
        }
    }

    /// Pins the primal variable on every coordinate where `free` is false.
    ///
    /// Dual vectors at points whose edges all join pinned coordinates do
    /// not influence the free values; they are held at zero.
    pub(crate) fn with_constraint(shape: &GridShape, free: Vec<bool>) -> Self {
        let mut solver = Self::new(shape);
        let active = active_mask(shape, &free);
        solver.constraint = Some(Constraint { free, active });
        solver
    }

    pub(crate) fn dual(&self) -> &[Vec<f64>] {
        &self.p
    }

    pub(crate) fn dual_field(&self) -> DualField {
        DualField::from_raw(&self.shape, self.p.clone())
    }

    /// `div p` for the current dual variable.
    pub(crate) fn divergence(&self) -> &[f64] {
        &self.div
    }

    /// Primal iterate for the current dual variable.
    pub(crate) fn primal(&self) -> &[f64] {
        &self.primal
    }

    pub(crate) fn is_active(&self, i: usize) -> bool {
        self.constraint.as_ref().is_none_or(|c| c.active[i])
    }

    /// Unconstrained run: minimizes `||w - y||^2 + 2 alpha TV(w)`.
    pub(crate) fn solve(&mut self, y: &[f64], alpha: f64, cfg: &ProjectionConfig) -> ProjectionReport {
        self.run(y, None, alpha, cfg)
    }

    /// Constrained run: minimizes `||w - y||^2 + 2 alpha TV(w)` subject to
    /// `w = pinned` off the free set.
    pub(crate) fn solve_pinned(
        &mut self,
        y: &[f64],
        pinned: &[f64],
        alpha: f64,
        cfg: &ProjectionConfig,
    ) -> ProjectionReport {
        self.run(y, Some(pinned), alpha, cfg)
    }

    fn update_primal(&mut self, y: &[f64], pinned: Option<&[f64]>, alpha: f64) {
        divergence_into(&self.shape, &self.p, &mut self.div);
        match (&self.constraint, pinned) {
            (Some(c), Some(v)) => {
                for i in 0..y.len() {
                    self.primal[i] = if c.free[i] { y[i] - alpha * self.div[i] } else { v[i] };
                }
            }
            _ => {
                for ((w, &yi), &di) in self.primal.iter_mut().zip(y).zip(&self.div) {
                    *w = yi - alpha * di;
                }
            }
        }
    }

    fn run(
        &mut self,
        y: &[f64],
        pinned: Option<&[f64]>,
        alpha: f64,
        cfg: &ProjectionConfig,
    ) -> ProjectionReport {
        debug_assert_eq!(y.len(), self.shape.len());
        let n = self.shape.len();
        let d = self.shape.ndim();
        let step = cfg.tau / alpha;
        let mut report = ProjectionReport::default();
        for it in 1..=cfg.max_iters {
            self.update_primal(y, pinned, alpha);
            gradient_into(&self.shape, &self.primal, &mut self.grad);
            let mut max_inc: f64 = 0.0;
            for i in 0..n {
                if !self.is_active(i) {
                    continue;
                }
                let mut sq = 0.0;
                for k in 0..d {
                    sq += self.grad[k][i] * self.grad[k][i];
                }
                let denom = 1.0 + step * sq.sqrt();
                let mut nsq = 0.0;
                for k in 0..d {
                    let old = self.p[k][i];
                    let new = (old - step * self.grad[k][i]) / denom;
                    max_inc = max_inc.max((new - old).abs());
                    nsq += new * new;
                    self.p[k][i] = new;
                }
                debug_assert!(nsq <= 1.0 + 1e-12, "dual iterate left the unit ball: {nsq}");
            }
            report.iterations = it;
            report.last_increment = max_inc;
            if max_inc <= cfg.tol {
                report.converged = true;
                break;
            }
        }
        self.update_primal(y, pinned, alpha);
        report
    }
}
