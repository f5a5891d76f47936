use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decomposition::{split_nonoverlapping, split_overlapping};
use crate::error::Result;
use crate::grid::{divergence, gradient, DualField, GridShape, Signal};
use crate::operators::{normalize_problem, MaskOperator, MeasurementOperator};
use crate::prox::{tv_denoise, ProjectionConfig};
use crate::solver::{
    oracle_minimize, solve_parallel_nonoverlapping, solve_sequential_nonoverlapping, solve_sequential_overlapping,
    taut_string_1d, OracleConfig, SolverConfig,
};

/// Outcome of one quick internal consistency check.
#[derive(Clone, Debug)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, limit: f64) -> SelfCheck {
    SelfCheck {
        name,
        passed: value <= limit,
        detail: format!("{value:.3e} (limit {limit:.0e})"),
    }
}

/// Runs a handful of fast checks of the numerical building blocks.
pub fn selftest() -> Result<Vec<SelfCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = Vec::new();

    let shape = GridShape::d2(5, 6)?;
    let u = Signal::from_fn(&shape, |_| rng.gen_range(-1.0..1.0));
    let comps = (0..2)
        .map(|_| (0..shape.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let p = DualField::with_boundary_zeroed(shape.clone(), comps)?;
    let gap = (gradient(&u).dot(&p) + u.dot(&divergence(&p)?)).abs() / (u.norm() * p.norm());
    out.push(check("adjoint identity", gap, 1e-12));

    let g = Signal::from_vec((0..32).map(|_| rng.gen_range(0.0..1.0)).collect())?;
    let cfg = ProjectionConfig::for_dim(1).with_tol(1e-12).with_max_iters(200_000);
    let den = tv_denoise(&g, 0.1, &cfg)?;
    let exact = taut_string_1d(&g, 0.1)?;
    out.push(check("1D prox vs taut string", den.value.max_abs_diff(&exact), 1e-6));

    let line = GridShape::d1(40)?;
    let truth = Signal::from_fn(&line, |ix| if ix[0] < 20 { 0.0 } else { 1.0 });
    let observed: Vec<bool> = (0..40).map(|i| !(15..25).contains(&i)).collect();
    let op = MaskOperator::from_mask(line.clone(), &observed, 1.0)?;
    let problem = normalize_problem(&op, &op.apply(&truth), 0.05)?;
    let oracle = oracle_minimize(&problem.op, &problem.data, problem.alpha, &OracleConfig::for_dim(1))?;
    let dec = split_overlapping(&line, 0, 2, 14)?;
    let state = solve_sequential_overlapping(&problem.op, &problem.data, problem.alpha, &dec, &SolverConfig::for_dim(1))?;
    out.push(check(
        "overlapping scheme vs oracle",
        (state.final_energy() - oracle.energy).abs() / oracle.energy,
        1e-3,
    ));
    out.push(check("overlapping energy monotone", state.max_energy_increase().max(0.0), 1e-10));

    let dec = split_nonoverlapping(&line, 0, 2)?;
    let full: Vec<bool> = vec![true; 40];
    let op = MaskOperator::from_mask(line, &full, 1.0)?;
    let noisy: Vec<f64> = truth.values().iter().map(|v| v + rng.gen_range(-0.1..0.1)).collect();
    let problem = normalize_problem(&op, &noisy, 0.05)?;
    let cfg = SolverConfig::for_dim(1);
    let seq = solve_sequential_nonoverlapping(&problem.op, &problem.data, problem.alpha, &dec, &cfg)?;
    let par = solve_parallel_nonoverlapping(&problem.op, &problem.data, problem.alpha, &dec, &cfg)?;
    out.push(check(
        "sequential vs parallel energy",
        (seq.final_energy() - par.final_energy()).abs() / seq.final_energy(),
        1e-3,
    ));
    Ok(out)
}
