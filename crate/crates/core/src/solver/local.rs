//! Local surrogate minimization on one subdomain.
//!
//! For `a, u_j` supported in subdomain `j` and `v` the sum of the other
//! components, the surrogate functional
//!
//! ```text
//! J^s(u_j + v, a) = J(u_j + v) + ||u_j - a||^2 - ||T (u_j - a)||^2
//! ```
//!
//! equals `||u_j - z||^2 + 2 alpha TV(u_j + v)` up to a constant, with
//! `z = a + P_j T*(g - T v - T a)`. Writing `w = u_j + v`, one inner step
//! is therefore a total-variation proximity step for `z + v` with `w`
//! pinned to `v` on the constrained set `C` (outside the subdomain, plus
//! its internal boundary when overlapping). The minimizer has the form
//! `w = (I - proj_{alpha K})(z + v - eta)` for a multiplier `eta`
//! supported on `C`.
//!
//! Only edges touching a free coordinate matter, so the local problem is
//! solved on the subdomain slab widened by one grid line on each side.

use crate::decomposition::Decomposition;
use crate::error::{Result, TvError};
use crate::grid::{divergence_into, gradient_into, norm, total_variation_raw, GridShape, Signal};
use crate::operators::MeasurementOperator;
use crate::prox::{active_mask, check_alpha, DualSolver, ProjectionConfig, ProjectionReport};

use super::{MultiplierMethod, SolverConfig};

/// Lagrange multiplier of one inner step; zero on every free coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierField {
    values: Signal,
}

impl MultiplierField {
    pub fn values(&self) -> &Signal {
        &self.values
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InnerStepReport {
    pub projection: ProjectionReport,
    /// Total dual iterations spent, across multiplier updates.
    pub projection_iterations: usize,
    pub multiplier_iterations: usize,
    /// Sup-norm of the constraint violation before the output was zeroed on `C`.
    pub multiplier_residual: f64,
    pub multiplier_converged: bool,
    /// The computed step did not lower the surrogate and the previous iterate was kept.
    pub rejected: bool,
    /// `J(u_j + v)` after the step.
    pub energy: f64,
}

#[derive(Clone, Debug)]
pub struct InnerStep {
    pub u_j: Signal,
    pub multiplier: MultiplierField,
    pub report: InnerStepReport,
}

/// `J(u_j + v) + ||u_j - a||^2 - ||T(u_j - a)||^2`.
pub fn surrogate_energy(
    u_j: &Signal,
    u_other: &Signal,
    a: &Signal,
    op: &dyn MeasurementOperator,
    g: &[f64],
    alpha: f64,
) -> Result<f64> {
    let total = u_j.add(u_other);
    let base = crate::grid::energy(&total, op, g, alpha)?;
    let diff = u_j.sub(a);
    let t_diff = op.apply(&diff);
    Ok(base + diff.norm().powi(2) - norm(&t_diff).powi(2))
}

/// One inner iteration on subdomain `j`: minimizes the surrogate
/// `J^s_j(u_j + u_other, u_j_prev)` over signals supported in subdomain
/// `j` that vanish on its internal boundary.
///
/// The dual iteration starts from zero and uses `cfg.projection` as is.
#[allow(clippy::too_many_arguments)]
pub fn surrogate_inner_step(
    u_j_prev: &Signal,
    u_other: &Signal,
    j: usize,
    dec: &Decomposition,
    op: &dyn MeasurementOperator,
    g: &[f64],
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<InnerStep> {
    check_alpha(alpha)?;
    let shape = dec.shape();
    cfg.validate(shape.ndim())?;
    if j >= dec.len() {
        return Err(TvError::invalid(format!("subdomain {j} out of range")));
    }
    if u_j_prev.shape() != shape || u_other.shape() != shape || op.domain_shape() != shape {
        return Err(TvError::invalid("signal, operator and decomposition shapes differ"));
    }
    if g.len() != op.range_dim() {
        return Err(TvError::DimensionMismatch {
            expected: op.range_dim(),
            found: g.len(),
        });
    }
    let mut local = LocalSolver::new(dec, j, cfg.multiplier_method);
    let out = local.step(op, g, alpha, u_j_prev.values(), u_other.values(), cfg, &cfg.projection, true);
    Ok(InnerStep {
        u_j: Signal::from_raw(shape, out.u_j),
        multiplier: MultiplierField {
            values: Signal::from_raw(shape, out.multiplier.unwrap_or_else(|| vec![0.0; shape.len()])),
        },
        report: out.report,
    })
}

/// Slab of the grid along the split axis, `[lo, hi)`.
#[derive(Clone, Debug)]
struct Window {
    shape: GridShape,
    outer: usize,
    inner: usize,
    full_len: usize,
    lo: usize,
    hi: usize,
}

impl Window {
    fn new(global: &GridShape, axis: usize, lo: usize, hi: usize) -> Self {
        let mut dims = global.dims().to_vec();
        let full_len = dims[axis];
        dims[axis] = hi - lo;
        Window {
            shape: GridShape::new(dims).expect("nonempty window"),
            outer: global.dims()[..axis].iter().product(),
            inner: global.stride(axis),
            full_len,
            lo,
            hi,
        }
    }

    fn block(&self) -> usize {
        (self.hi - self.lo) * self.inner
    }

    fn global_start(&self, o: usize) -> usize {
        (o * self.full_len + self.lo) * self.inner
    }

    fn gather(&self, global: &[f64], local: &mut [f64]) {
        let b = self.block();
        for o in 0..self.outer {
            let g0 = self.global_start(o);
            local[o * b..(o + 1) * b].copy_from_slice(&global[g0..g0 + b]);
        }
    }

    fn gather_mask(&self, global: &[bool]) -> Vec<bool> {
        let b = self.block();
        let mut out = Vec::with_capacity(self.outer * b);
        for o in 0..self.outer {
            let g0 = self.global_start(o);
            out.extend_from_slice(&global[g0..g0 + b]);
        }
        out
    }

    fn to_global(&self, local: usize) -> usize {
        let b = self.block();
        self.global_start(local / b) + local % b
    }
}

pub(crate) struct StepOutput {
    pub u_j: Vec<f64>,
    pub multiplier: Option<Vec<f64>>,
    pub report: InnerStepReport,
}

/// Per-subdomain workspace; keeps the dual variable between calls.
pub(crate) struct LocalSolver {
    shape: GridShape,
    in_subdomain: Vec<bool>,
    window: Window,
    free_local: Vec<bool>,
    active_local: Vec<bool>,
    free_count: usize,
    method: MultiplierMethod,
    dual: DualSolver,
    y: Vec<f64>,
    pinned: Vec<f64>,
    eta: Vec<f64>,
    shifted: Vec<f64>,
}

impl LocalSolver {
    pub(crate) fn new(dec: &Decomposition, j: usize, method: MultiplierMethod) -> Self {
        let shape = dec.shape().clone();
        let axis = dec.axis();
        let (lo, hi) = dec.range(j);
        let window = Window::new(&shape, axis, lo.saturating_sub(1), (hi + 1).min(shape.dims()[axis]));
        let free_local = window.gather_mask(&dec.free_mask(j));
        let active_local = active_mask(&window.shape, &free_local);
        let free_count = free_local.iter().filter(|&&f| f).count();
        let dual = match method {
            MultiplierMethod::PinnedDual => DualSolver::with_constraint(&window.shape, free_local.clone()),
            MultiplierMethod::FixedPoint => DualSolver::new(&window.shape),
        };
        let n = window.shape.len();
        LocalSolver {
            in_subdomain: (0..shape.len()).map(|i| dec.contains(j, i)).collect(),
            shape,
            window,
            free_local,
            active_local,
            free_count,
            method,
            dual,
            y: vec![0.0; n],
            pinned: vec![0.0; n],
            eta: vec![0.0; n],
            shifted: vec![0.0; n],
        }
    }

    /// One surrogate step from `prev` with the other components summing to `other`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn step(
        &mut self,
        op: &dyn MeasurementOperator,
        g: &[f64],
        alpha: f64,
        prev: &[f64],
        other: &[f64],
        cfg: &SolverConfig,
        projection: &ProjectionConfig,
        want_multiplier: bool,
    ) -> StepOutput {
        let n = self.shape.len();
        let sum_prev: Vec<f64> = prev.iter().zip(other).map(|(a, b)| a + b).collect();
        let t_prev = op.apply_raw(&sum_prev);
        let misfit_prev: f64 = t_prev.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum();
        let energy_prev = misfit_prev + 2.0 * alpha * total_variation_raw(&self.shape, &sum_prev);

        let mut report = InnerStepReport {
            energy: energy_prev,
            multiplier_converged: true,
            ..Default::default()
        };
        if self.free_count == 0 {
            report.energy = energy_at(op, g, alpha, &self.shape, other);
            return StepOutput {
                u_j: vec![0.0; n],
                multiplier: None,
                report,
            };
        }

        let resid: Vec<f64> = g.iter().zip(&t_prev).map(|(a, b)| a - b).collect();
        let back = op.adjoint_raw(&resid);
        // z + v, with the data correction restricted to the subdomain
        let y_global: Vec<f64> = (0..n)
            .map(|i| {
                let corr = if self.in_subdomain[i] { back[i] } else { 0.0 };
                prev[i] + corr + other[i]
            })
            .collect();
        self.window.gather(&y_global, &mut self.y);
        self.window.gather(other, &mut self.pinned);

        // a candidate that fails to lower the surrogate is retried once with a tighter projection
        let retry = projection
            .with_tol((projection.tol * 1e-3).max(1e-13))
            .with_max_iters(projection.max_iters.saturating_mul(10));
        let mut out = vec![0.0; n];
        let mut accepted = None;
        for attempt in [*projection, retry] {
            match self.method {
                MultiplierMethod::PinnedDual => {
                    let r = self.dual.solve_pinned(&self.y, &self.pinned, alpha, &attempt);
                    report.projection = r;
                    report.projection_iterations += r.iterations;
                }
                MultiplierMethod::FixedPoint => self.fixed_point(alpha, cfg, &attempt, &mut report),
            }

            let w = self.dual.primal();
            out.iter_mut().for_each(|x| *x = 0.0);
            let mut violation: f64 = 0.0;
            for (i, (&wi, &vi)) in w.iter().zip(&self.pinned).enumerate() {
                if self.free_local[i] {
                    out[self.window.to_global(i)] = wi - vi;
                } else {
                    violation = violation.max((wi - vi).abs());
                }
            }
            if self.method == MultiplierMethod::FixedPoint {
                report.multiplier_residual = violation;
            }

            let sum_new: Vec<f64> = out.iter().zip(other).map(|(a, b)| a + b).collect();
            let t_new = op.apply_raw(&sum_new);
            let misfit_new: f64 = t_new.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum();
            let energy_new = misfit_new + 2.0 * alpha * total_variation_raw(&self.shape, &sum_new);
            let step_sq: f64 = out.iter().zip(prev).map(|(a, b)| (a - b) * (a - b)).sum();
            let t_step_sq: f64 = t_new.iter().zip(&t_prev).map(|(a, b)| (a - b) * (a - b)).sum();
            if energy_new + step_sq - t_step_sq <= energy_prev {
                accepted = Some((sum_new, energy_new));
                break;
            }
        }

        let Some((sum_new, energy_new)) = accepted else {
            report.rejected = true;
            let multiplier = want_multiplier.then(|| self.multiplier(&y_global, &sum_prev, alpha));
            return StepOutput {
                u_j: prev.to_vec(),
                multiplier,
                report,
            };
        };
        let multiplier = want_multiplier.then(|| self.multiplier(&y_global, &sum_new, alpha));
        report.energy = energy_new;
        StepOutput {
            u_j: out,
            multiplier,
            report,
        }
    }

    fn fixed_point(
        &mut self,
        alpha: f64,
        cfg: &SolverConfig,
        projection: &ProjectionConfig,
        report: &mut InnerStepReport,
    ) {
        self.eta.iter_mut().for_each(|e| *e = 0.0);
        report.multiplier_converged = false;
        for m in 1..=cfg.multiplier_iters {
            for ((s, &y), &e) in self.shifted.iter_mut().zip(&self.y).zip(&self.eta) {
                *s = y - e;
            }
            let r = self.dual.solve(&self.shifted, alpha, projection);
            report.projection = r;
            report.projection_iterations += r.iterations;
            report.multiplier_iterations = m;
            let w = self.dual.primal();
            let mut worst: f64 = 0.0;
            for i in 0..w.len() {
                if !self.free_local[i] {
                    worst = worst.max((w[i] - self.pinned[i]).abs());
                }
            }
            if worst <= cfg.multiplier_tol {
                report.multiplier_converged = true;
                break;
            }
            for i in 0..w.len() {
                if !self.free_local[i] {
                    self.eta[i] += w[i] - self.pinned[i];
                }
            }
        }
    }

    /// `eta = y - w - alpha div p` on the constrained set, with `p` the
    /// local dual field inside the window and the unit normal of `grad w`
    /// wherever the dual vector only touches pinned coordinates.
    fn multiplier(&self, y: &[f64], w: &[f64], alpha: f64) -> Vec<f64> {
        let n = self.shape.len();
        let d = self.shape.ndim();
        let mut grad = vec![vec![0.0; n]; d];
        gradient_into(&self.shape, w, &mut grad);
        let mut p = vec![vec![0.0; n]; d];
        for i in 0..n {
            let len = grad.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt();
            if len > 0.0 {
                for k in 0..d {
                    p[k][i] = -grad[k][i] / len;
                }
            }
        }
        let local_dual = self.dual.dual();
        for li in 0..self.window.shape.len() {
            if self.active_local[li] {
                let gi = self.window.to_global(li);
                for k in 0..d {
                    p[k][gi] = local_dual[k][li];
                }
            }
        }
        let mut div = vec![0.0; n];
        divergence_into(&self.shape, &p, &mut div);
        let mut free_global = vec![false; n];
        for (li, &f) in self.free_local.iter().enumerate() {
            if f {
                free_global[self.window.to_global(li)] = true;
            }
        }
        (0..n)
            .map(|i| if free_global[i] { 0.0 } else { y[i] - w[i] - alpha * div[i] })
            .collect()
    }
}

fn energy_at(op: &dyn MeasurementOperator, g: &[f64], alpha: f64, shape: &GridShape, u: &[f64]) -> f64 {
    crate::grid::energy_raw(shape, u, op, g, alpha)
}
