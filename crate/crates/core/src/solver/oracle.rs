//! Single-domain reference solver and a convexity-based optimality probe.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TvError};
use crate::grid::{energy_raw, norm, Signal};
use crate::operators::MeasurementOperator;
use crate::prox::{check_alpha, DualSolver, ProjectionConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub max_iters: usize,
    /// Stop once `||u^(k+1) - u^(k)||_2` is at most this.
    pub tol: f64,
    pub projection: ProjectionConfig,
}

impl OracleConfig {
    pub fn for_dim(d: usize) -> Self {
        OracleConfig {
            max_iters: 50_000,
            tol: 1e-10,
            projection: ProjectionConfig::for_dim(d).with_tol(1e-11).with_max_iters(20_000),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub u: Signal,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Reference minimizer of `||Tu - g||^2 + 2 alpha TV(u)` on the whole grid.
///
/// Iterates `u <- denoise(u + T*(g - T u), alpha)` from `u = 0`, the
/// one-subdomain case of the surrogate scheme. The dual variable of the
/// denoising step is carried over between iterations. Requires `||T|| <= 1`.
pub fn oracle_minimize(
    op: &dyn MeasurementOperator,
    g: &[f64],
    alpha: f64,
    cfg: &OracleConfig,
) -> Result<OracleResult> {
    check_alpha(alpha)?;
    let shape = op.domain_shape().clone();
    cfg.projection.validate(shape.ndim())?;
    if g.len() != op.range_dim() {
        return Err(TvError::DimensionMismatch {
            expected: op.range_dim(),
            found: g.len(),
        });
    }
    let n = shape.len();
    let mut dual = DualSolver::new(&shape);
    let mut u = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=cfg.max_iters {
        let tu = op.apply_raw(&u);
        let resid: Vec<f64> = g.iter().zip(&tu).map(|(a, b)| a - b).collect();
        let back = op.adjoint_raw(&resid);
        let z: Vec<f64> = u.iter().zip(&back).map(|(a, b)| a + b).collect();
        dual.solve(&z, alpha, &cfg.projection);
        let next = dual.primal().to_vec();
        let inc = norm(&next.iter().zip(&u).map(|(a, b)| a - b).collect::<Vec<_>>());
        u = next;
        iterations = k;
        if inc <= cfg.tol {
            converged = true;
            break;
        }
    }
    let energy = energy_raw(&shape, &u, op, g, alpha);
    Ok(OracleResult {
        u: Signal::from_raw(&shape, u),
        energy,
        iterations,
        converged,
    })
}

/// Largest `(J(u) - J(u + eps v)) / eps` over `trials` random unit
/// directions `v` and `eps` in `{1e-3, 1e-2}`.
///
/// For a minimizer every term is nonpositive; a clearly positive value
/// exposes a descent direction.
pub fn check_optimality(
    u: &Signal,
    op: &dyn MeasurementOperator,
    g: &[f64],
    alpha: f64,
    trials: usize,
) -> f64 {
    let shape = u.shape();
    let base = energy_raw(shape, u.values(), op, g, alpha);
    let mut rng = ChaCha8Rng::seed_from_u64(0x0b7);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let mut v: Vec<f64> = (0..u.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let vn = norm(&v);
        v.iter_mut().for_each(|x| *x /= vn);
        for eps in [1e-3, 1e-2] {
            let moved: Vec<f64> = u.values().iter().zip(&v).map(|(a, b)| a + eps * b).collect();
            let e = energy_raw(shape, &moved, op, g, alpha);
            worst = worst.max((base - e) / eps);
        }
    }
    worst
}
