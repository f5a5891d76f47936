//! Outer subspace-correction loops.
//!
//! All schemes start from `u^(0) = 0`. Local components are carried
//! between sweeps; each local update performs a fixed number of surrogate
//! steps (see [`SolverConfig::inner_iters`]).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::Decomposition;
use crate::error::{Result, TvError};
use crate::grid::{energy_raw, norm, GridShape, Signal};
use crate::operators::{check_kernel_condition, estimate_norm, MeasurementOperator};
use crate::prox::{check_alpha, ProjectionConfig};

use super::local::{LocalSolver, StepOutput};
use super::trace::{Diagnostics, SolverState, TraceEntry};
use super::SolverConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Gauss–Seidel sweep over disjoint subdomains.
    SequentialNonoverlapping,
    /// Jacobi sweep over disjoint subdomains, averaged with the previous iterate.
    ParallelNonoverlapping,
    /// Gauss–Seidel sweep over overlapping subdomains with trace constraints.
    SequentialOverlapping,
}

pub fn solve_sequential_nonoverlapping(
    op: &dyn MeasurementOperator,
    g: &[f64],
    alpha: f64,
    dec: &Decomposition,
    cfg: &SolverConfig,
) -> Result<SolverState> {
    solve(Algorithm::SequentialNonoverlapping, op, g, alpha, dec, cfg, &mut |_, _| {})
}

pub fn solve_parallel_nonoverlapping(
    op: &dyn MeasurementOperator,
    g: &[f64],
    alpha: f64,
    dec: &Decomposition,
    cfg: &SolverConfig,
) -> Result<SolverState> {
    solve(Algorithm::ParallelNonoverlapping, op, g, alpha, dec, cfg, &mut |_, _| {})
}

pub fn solve_sequential_overlapping(
    op: &dyn MeasurementOperator,
    g: &[f64],
    alpha: f64,
    dec: &Decomposition,
    cfg: &SolverConfig,
) -> Result<SolverState> {
    solve(Algorithm::SequentialOverlapping, op, g, alpha, dec, cfg, &mut |_, _| {})
}

fn validate(
    alg: Algorithm,
    op: &dyn MeasurementOperator,
    g: &[f64],
    alpha: f64,
    dec: &Decomposition,
    cfg: &SolverConfig,
) -> Result<()> {
    check_alpha(alpha)?;
    let shape = dec.shape();
    cfg.validate(shape.ndim())?;
    if op.domain_shape() != shape {
        return Err(TvError::invalid("operator domain does not match the decomposition grid"));
    }
    if g.len() != op.range_dim() {
        return Err(TvError::DimensionMismatch {
            expected: op.range_dim(),
            found: g.len(),
        });
    }
    let wants_overlap = alg == Algorithm::SequentialOverlapping;
    if dec.is_overlapping() != wants_overlap {
        return Err(TvError::invalid(format!(
            "{alg:?} needs an {} decomposition",
            if wants_overlap { "overlapping" } else { "nonoverlapping" }
        )));
    }
    if !check_kernel_condition(op) {
        return Err(TvError::KernelCondition);
    }
    let est = estimate_norm(op, 50)?;
    if est >= 1.0 {
        return Err(TvError::NotNormalized(est));
    }
    Ok(())
}

/// Runs `alg`, calling `observer(n, u^(n))` after every outer iteration.
pub fn solve(
    alg: Algorithm,
    op: &dyn MeasurementOperator,
    g: &[f64],
    alpha: f64,
    dec: &Decomposition,
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(usize, &Signal),
) -> Result<SolverState> {
    validate(alg, op, g, alpha, dec, cfg)?;
    let shape = dec.shape().clone();
    let n = shape.len();
    let parts = dec.len();
    let mut locals: Vec<LocalSolver> = (0..parts)
        .map(|j| LocalSolver::new(dec, j, cfg.multiplier_method))
        .collect();
    let mut components = vec![vec![0.0; n]; parts];
    let mut u = vec![0.0; n];
    let mut diagnostics = Diagnostics::default();
    let mut trace = vec![entry(0, &shape, op, g, alpha, &u, &components, 0.0, 0.0)];
    let pool = if alg == Algorithm::ParallelNonoverlapping && cfg.threads > 0 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| TvError::invalid(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let mut converged = false;

    for iter in 1..=cfg.outer_iters {
        let projection = cfg.projection_at(iter - 1);
        let mut sweep_residual: f64 = 0.0;
        let u_next = match alg {
            Algorithm::SequentialNonoverlapping | Algorithm::SequentialOverlapping => {
                for j in 0..parts {
                    let other = sum_except(&components, j, n);
                    let (new_j, res) = run_local(
                        &mut locals[j],
                        op,
                        g,
                        alpha,
                        &components[j],
                        &other,
                        cfg,
                        &projection,
                        cfg.inner_iters(j),
                        &mut diagnostics,
                    );
                    sweep_residual = sweep_residual.max(res);
                    components[j] = new_j;
                }
                let next = sum_all(&components, n);
                if alg == Algorithm::SequentialOverlapping && cfg.use_partition_correction {
                    for (j, c) in components.iter_mut().enumerate() {
                        let chi = dec.weight(j).values();
                        for ((ci, &w), &x) in c.iter_mut().zip(chi).zip(&next) {
                            *ci = w * x;
                        }
                    }
                }
                next
            }
            Algorithm::ParallelNonoverlapping => {
                let frozen = &components;
                let work = |(j, local): (usize, &mut LocalSolver)| {
                    let other = sum_except(frozen, j, n);
                    let mut diag = Diagnostics::default();
                    let (new_j, res) = run_local(
                        local,
                        op,
                        g,
                        alpha,
                        &frozen[j],
                        &other,
                        cfg,
                        &projection,
                        cfg.inner_iters(j),
                        &mut diag,
                    );
                    (new_j, res, diag)
                };
                let results: Vec<(Vec<f64>, f64, Diagnostics)> = match &pool {
                    Some(p) => p.install(|| locals.par_iter_mut().enumerate().map(work).collect()),
                    None => locals.par_iter_mut().enumerate().map(work).collect(),
                };
                let weight = 1.0 / parts as f64;
                let mut next: Vec<f64> = u.iter().map(|&x| (parts - 1) as f64 * x).collect();
                for (new_j, res, diag) in &results {
                    for (a, b) in next.iter_mut().zip(new_j) {
                        *a += b;
                    }
                    sweep_residual = sweep_residual.max(*res);
                    merge(&mut diagnostics, diag);
                }
                next.iter_mut().for_each(|x| *x *= weight);
                for (j, c) in components.iter_mut().enumerate() {
                    for (i, ci) in c.iter_mut().enumerate() {
                        *ci = if dec.contains(j, i) { next[i] } else { 0.0 };
                    }
                }
                next
            }
        };
        let increment = norm(&u.iter().zip(&u_next).map(|(a, b)| a - b).collect::<Vec<_>>());
        u = u_next;
        trace.push(entry(iter, &shape, op, g, alpha, &u, &components, increment, sweep_residual));
        observer(iter, &Signal::from_raw(&shape, u.clone()));
        if increment <= cfg.outer_tol {
            converged = true;
            break;
        }
    }

    Ok(SolverState {
        u: Signal::from_raw(&shape, u),
        components: components.into_iter().map(|c| Signal::from_raw(&shape, c)).collect(),
        trace,
        diagnostics,
        converged,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_local(
    local: &mut LocalSolver,
    op: &dyn MeasurementOperator,
    g: &[f64],
    alpha: f64,
    start: &[f64],
    other: &[f64],
    cfg: &SolverConfig,
    projection: &ProjectionConfig,
    steps: usize,
    diag: &mut Diagnostics,
) -> (Vec<f64>, f64) {
    let mut cur = start.to_vec();
    let mut residual: f64 = 0.0;
    for _ in 0..steps {
        let StepOutput { u_j, report, .. } = local.step(op, g, alpha, &cur, other, cfg, projection, false);
        diag.inner_steps += 1;
        diag.rejected_steps += usize::from(report.rejected);
        diag.projection_iterations += report.projection_iterations;
        diag.projections_unconverged += usize::from(!report.projection.converged);
        diag.multipliers_unconverged += usize::from(!report.multiplier_converged);
        diag.max_multiplier_residual = diag.max_multiplier_residual.max(report.multiplier_residual);
        residual = residual.max(report.projection.last_increment);
        cur = u_j;
    }
    (cur, residual)
}

fn merge(into: &mut Diagnostics, from: &Diagnostics) {
    into.inner_steps += from.inner_steps;
    into.rejected_steps += from.rejected_steps;
    into.projection_iterations += from.projection_iterations;
    into.projections_unconverged += from.projections_unconverged;
    into.multipliers_unconverged += from.multipliers_unconverged;
    into.max_multiplier_residual = into.max_multiplier_residual.max(from.max_multiplier_residual);
}

fn sum_except(components: &[Vec<f64>], skip: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (k, c) in components.iter().enumerate() {
        if k != skip {
            for (a, b) in out.iter_mut().zip(c) {
                *a += b;
            }
        }
    }
    out
}

fn sum_all(components: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for c in components {
        for (a, b) in out.iter_mut().zip(c) {
            *a += b;
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn entry(
    iter: usize,
    shape: &GridShape,
    op: &dyn MeasurementOperator,
    g: &[f64],
    alpha: f64,
    u: &[f64],
    components: &[Vec<f64>],
    increment: f64,
    residual: f64,
) -> TraceEntry {
    let component_norms: Vec<f64> = components.iter().map(|c| norm(c)).collect();
    TraceEntry {
        iter,
        energy: energy_raw(shape, u, op, g, alpha),
        increment_norm: increment,
        max_component_norm: component_norms.iter().copied().fold(0.0, f64::max),
        projection_residual: residual,
        solution_norm: norm(u),
        component_norms,
    }
}
