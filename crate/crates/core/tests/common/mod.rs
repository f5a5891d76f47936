//! Shared fixtures and independent reference computations for the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tvdd::decomposition::{split_nonoverlapping, split_overlapping};
use tvdd::operators::{normalize_problem, sampling_pattern, NormalizedProblem};
use tvdd::solver::Algorithm;
use tvdd::{Decomposition, GridShape, MaskOperator, MeasurementOperator, PartialFourierOperator, Signal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Forward-difference matrix: one row per existing edge, grouped by point.
/// Returns the matrix and, per point, the row indices of its gradient vector.
pub fn difference_matrix(shape: &GridShape) -> (DMatrix<f64>, Vec<Vec<usize>>) {
    let n = shape.len();
    let mut rows: Vec<(usize, usize)> = Vec::new();
    let mut groups = vec![Vec::new(); n];
    for (i, group) in groups.iter_mut().enumerate() {
        let multi = shape.multi_index(i);
        for (axis, &len) in shape.dims().iter().enumerate() {
            if multi[axis] + 1 < len {
                let mut next = multi.clone();
                next[axis] += 1;
                group.push(rows.len());
                rows.push((i, shape.flat_index(&next).unwrap()));
            }
        }
    }
    let mut d = DMatrix::zeros(rows.len(), n);
    for (r, &(i, k)) in rows.iter().enumerate() {
        d[(r, i)] = -1.0;
        d[(r, k)] = 1.0;
    }
    (d, groups)
}

/// Isotropic TV computed from the explicit difference matrix.
pub fn tv_reference(shape: &GridShape, u: &[f64]) -> f64 {
    let (d, groups) = difference_matrix(shape);
    let du = &d * DVector::from_column_slice(u);
    groups
        .iter()
        .map(|g| g.iter().map(|&r| du[r] * du[r]).sum::<f64>().sqrt())
        .sum()
}

/// Minimizes `||x - b||^2 + 2 alpha TV(E x + v)` over the coordinates in
/// `free` (all others are zero) by ADMM on the splitting `z = D(E x + v)`.
pub fn admm_constrained_denoise(
    shape: &GridShape,
    b: &[f64],
    v: &[f64],
    free: &[bool],
    alpha: f64,
    iters: usize,
) -> Vec<f64> {
    let n = shape.len();
    let (d, groups) = difference_matrix(shape);
    let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
    let m = d.nrows();
    let mut df = DMatrix::zeros(m, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        df.set_column(c, &d.column(i));
    }
    let c = &d * DVector::from_column_slice(v);
    let bf = DVector::from_iterator(idx.len(), idx.iter().map(|&i| b[i]));
    let rho = 2.0;
    let system = DMatrix::identity(idx.len(), idx.len()) * 2.0 + df.transpose() * &df * rho;
    let chol = system.cholesky().expect("positive definite");
    let mut x = bf.clone();
    let mut z = &df * &x + &c;
    let mut y = DVector::zeros(m);
    let kappa = 2.0 * alpha / rho;
    for _ in 0..iters {
        let rhs = &bf * 2.0 + df.transpose() * ((&z - &c - &y) * rho);
        x = chol.solve(&rhs);
        let dx = &df * &x + &c;
        let t = &dx + &y;
        for g in &groups {
            let len = g.iter().map(|&r| t[r] * t[r]).sum::<f64>().sqrt();
            let s = if len > kappa { 1.0 - kappa / len } else { 0.0 };
            for &r in g {
                z[r] = s * t[r];
            }
        }
        y += &dx - &z;
    }
    let mut out = vec![0.0; n];
    for (c, &i) in idx.iter().enumerate() {
        out[i] = x[c];
    }
    out
}

/// Exact minimizer of `||w - g||^2 + 2 alpha |w_1 - w_0|` for two samples.
pub fn two_point_denoise(g: [f64; 2], alpha: f64) -> [f64; 2] {
    let d = g[1] - g[0];
    if d.abs() <= 2.0 * alpha {
        let m = 0.5 * (g[0] + g[1]);
        [m, m]
    } else {
        let s = alpha * d.signum();
        [g[0] + s, g[1] - s]
    }
}

/// Piecewise-constant signal with a few random jumps plus uniform noise.
pub fn piecewise_signal(shape: &GridShape, rng: &mut ChaCha8Rng, noise: f64) -> Signal {
    let levels: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
    let cuts: Vec<f64> = (0..3).map(|_| rng.gen_range(0.2..0.8)).collect();
    let dims = shape.dims().to_vec();
    let mut noise_rng = ChaCha8Rng::seed_from_u64(rng.gen());
    Signal::from_fn(shape, |ix| {
        let t = ix[0] as f64 / dims[0] as f64;
        let s = ix.get(1).map_or(0.5, |&c| c as f64 / dims[1] as f64);
        let k = usize::from(t > cuts[0]) + usize::from(s > cuts[1]) + usize::from(t + s > 2.0 * cuts[2]);
        levels[k] + noise * noise_rng.gen_range(-1.0..1.0)
    })
}

pub enum AnyOperator {
    Mask(MaskOperator),
    Fourier(PartialFourierOperator),
}

impl AnyOperator {
    pub fn as_dyn(&self) -> &dyn MeasurementOperator {
        match self {
            AnyOperator::Mask(m) => m,
            AnyOperator::Fourier(f) => f,
        }
    }
}

/// A normalized random problem together with a decomposition for `alg`.
pub struct RandomProblem {
    pub label: String,
    pub op: AnyOperator,
    pub data: Vec<f64>,
    pub alpha: f64,
    pub dec: Decomposition,
}

fn normalized<T: MeasurementOperator>(op: &T, truth: &Signal, alpha: f64) -> NormalizedProblem<T> {
    normalize_problem(op, &op.apply(truth), alpha).unwrap()
}

pub fn random_problem(seed: u64, two_d: bool, fourier: bool, alg: Algorithm) -> RandomProblem {
    let mut r = rng(seed);
    let shape = if two_d {
        GridShape::d2(r.gen_range(8..13), r.gen_range(8..13)).unwrap()
    } else {
        GridShape::d1(r.gen_range(24..49)).unwrap()
    };
    let truth = piecewise_signal(&shape, &mut r, 0.05);
    let range = {
        let v = truth.values();
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let alpha = r.gen_range(0.02..0.1) * range.max(0.1);
    let axis = if two_d { r.gen_range(0..2) } else { 0 };
    let parts = r.gen_range(2..4);
    let dec = if alg == Algorithm::SequentialOverlapping {
        let wanted = r.gen_range(2..5);
        (2..=wanted)
            .rev()
            .find_map(|ov| split_overlapping(&shape, axis, parts, ov).ok())
            .unwrap()
    } else {
        split_nonoverlapping(&shape, axis, parts).unwrap()
    };
    let (op, data, alpha) = if fourier {
        let freqs = sampling_pattern(&shape, 0.5, 2, seed).unwrap();
        let op = PartialFourierOperator::new(shape.clone(), freqs, 1.0).unwrap();
        let p = normalized(&op, &truth, alpha);
        (AnyOperator::Fourier(p.op), p.data, p.alpha)
    } else {
        let mut observed: Vec<bool> = (0..shape.len()).map(|_| r.gen_bool(0.7)).collect();
        observed[0] = true;
        let op = MaskOperator::from_mask(shape.clone(), &observed, 1.0).unwrap();
        let p = normalized(&op, &truth, alpha);
        (AnyOperator::Mask(p.op), p.data, p.alpha)
    };
    RandomProblem {
        label: format!(
            "{:?} {:?} {} J={}",
            shape.dims(),
            alg,
            if fourier { "fourier" } else { "mask" },
            parts
        ),
        op,
        data,
        alpha,
        dec,
    }
}
