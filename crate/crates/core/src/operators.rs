//! Linear measurement operators `T: H -> R^K` with their adjoints.
//!
//! All operators are real-valued. Complex Fourier samples are returned as
//! stacked real parts followed by imaginary parts, so the adjoint of a
//! partial Fourier operator takes the real part of the inverse transform
//! of the zero-filled spectrum.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, TvError};
use crate::grid::{dot, norm, GridShape, Signal};

/// A linear map from signals on a grid to `R^K`.
pub trait MeasurementOperator: Send + Sync {
    fn domain_shape(&self) -> &GridShape;

    fn range_dim(&self) -> usize;

    /// Multiplicative factor applied on top of the unscaled operator.
    fn scale(&self) -> f64;

    fn apply_raw(&self, u: &[f64]) -> Vec<f64>;

    fn adjoint_raw(&self, y: &[f64]) -> Vec<f64>;

    fn apply(&self, u: &Signal) -> Vec<f64> {
        self.apply_raw(u.values())
    }

    fn adjoint(&self, y: &[f64]) -> Signal {
        Signal::from_raw(self.domain_shape(), self.adjoint_raw(y))
    }

    /// The same operator with its scale multiplied by `factor`.
    fn rescaled(&self, factor: f64) -> Self
    where
        Self: Sized;
}

/// `c * I`.
#[derive(Clone, Debug)]
pub struct IdentityOperator {
    shape: GridShape,
    scale: f64,
}

impl IdentityOperator {
    pub fn new(shape: GridShape, scale: f64) -> Self {
        IdentityOperator { shape, scale }
    }
}

impl MeasurementOperator for IdentityOperator {
    fn domain_shape(&self) -> &GridShape {
        &self.shape
    }

    fn range_dim(&self) -> usize {
        self.shape.len()
    }

    fn scale(&self) -> f64 {
        self.scale
    }

    fn apply_raw(&self, u: &[f64]) -> Vec<f64> {
        u.iter().map(|v| self.scale * v).collect()
    }

    fn adjoint_raw(&self, y: &[f64]) -> Vec<f64> {
        self.apply_raw(y)
    }

    fn rescaled(&self, factor: f64) -> Self {
        IdentityOperator::new(self.shape.clone(), self.scale * factor)
    }
}

/// Restriction to a set of observed grid points, times `c`.
#[derive(Clone, Debug)]
pub struct MaskOperator {
    shape: GridShape,
    samples: Vec<usize>,
    scale: f64,
}

impl MaskOperator {
    /// `samples` are flat indices; they are sorted and deduplicated.
    pub fn new(shape: GridShape, mut samples: Vec<usize>, scale: f64) -> Result<Self> {
        samples.sort_unstable();
        samples.dedup();
        if let Some(&last) = samples.last() {
            if last >= shape.len() {
                return Err(TvError::invalid(format!("sample index {last} outside the grid")));
            }
        }
        Ok(MaskOperator { shape, samples, scale })
    }

    /// Observes every point where `observed` is true.
    pub fn from_mask(shape: GridShape, observed: &[bool], scale: f64) -> Result<Self> {
        if observed.len() != shape.len() {
            return Err(TvError::DimensionMismatch {
                expected: shape.len(),
                found: observed.len(),
            });
        }
        let samples = (0..observed.len()).filter(|&i| observed[i]).collect();
        Self::new(shape, samples, scale)
    }

    pub fn samples(&self) -> &[usize] {
        &self.samples
    }

    pub fn observed_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.shape.len()];
        for &i in &self.samples {
            mask[i] = true;
        }
        mask
    }
}

impl MeasurementOperator for MaskOperator {
    fn domain_shape(&self) -> &GridShape {
        &self.shape
    }

    fn range_dim(&self) -> usize {
        self.samples.len()
    }

    fn scale(&self) -> f64 {
        self.scale
    }

    fn apply_raw(&self, u: &[f64]) -> Vec<f64> {
        self.samples.iter().map(|&i| self.scale * u[i]).collect()
    }

    fn adjoint_raw(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.shape.len()];
        for (&i, &v) in self.samples.iter().zip(y) {
            out[i] = self.scale * v;
        }
        out
    }

    fn rescaled(&self, factor: f64) -> Self {
        MaskOperator {
            shape: self.shape.clone(),
            samples: self.samples.clone(),
            scale: self.scale * factor,
        }
    }
}

/// Unitary DFT sampled on a set of frequencies, times `c`.
///
/// The output is `[Re F_k for k in set] ++ [Im F_k for k in set]`. The
/// frequency set is not symmetrized: sampling `k` and `-k` both is
/// allowed and simply repeats conjugate information.
#[derive(Clone)]
pub struct PartialFourierOperator {
    shape: GridShape,
    frequencies: Vec<usize>,
    scale: f64,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl fmt::Debug for PartialFourierOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PartialFourierOperator")
            .field("shape", &self.shape)
            .field("frequencies", &self.frequencies.len())
            .field("scale", &self.scale)
            .finish()
    }
}

impl PartialFourierOperator {
    /// `frequencies` are flat indices into the (unshifted) spectrum grid.
    pub fn new(shape: GridShape, mut frequencies: Vec<usize>, scale: f64) -> Result<Self> {
        frequencies.sort_unstable();
        frequencies.dedup();
        if let Some(&last) = frequencies.last() {
            if last >= shape.len() {
                return Err(TvError::invalid(format!("frequency index {last} outside the grid")));
            }
        }
        let mut planner = FftPlanner::new();
        let forward = shape.dims().iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = shape.dims().iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Ok(PartialFourierOperator {
            shape,
            frequencies,
            scale,
            forward,
            inverse,
        })
    }

    pub fn full(shape: GridShape, scale: f64) -> Result<Self> {
        let all = (0..shape.len()).collect();
        Self::new(shape, all, scale)
    }

    pub fn frequencies(&self) -> &[usize] {
        &self.frequencies
    }

    pub fn contains_zero_frequency(&self) -> bool {
        self.frequencies.first() == Some(&0)
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let dims = self.shape.dims();
        let mut line = Vec::new();
        for (axis, plan) in plans.iter().enumerate() {
            let len = dims[axis];
            if len == 1 {
                continue;
            }
            let inner: usize = dims[axis + 1..].iter().product();
            let outer: usize = dims[..axis].iter().product();
            line.resize(len, Complex64::new(0.0, 0.0));
            for o in 0..outer {
                for r in 0..inner {
                    let base = o * len * inner + r;
                    for (i, c) in line.iter_mut().enumerate() {
                        *c = data[base + i * inner];
                    }
                    plan.process(&mut line);
                    for (i, c) in line.iter().enumerate() {
                        data[base + i * inner] = *c;
                    }
                }
            }
        }
        let norm = 1.0 / (self.shape.len() as f64).sqrt();
        data.iter_mut().for_each(|c| *c *= norm);
    }

    /// Unitary forward DFT of a real signal.
    pub fn spectrum(&self, u: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    /// Unitary inverse DFT.
    pub fn inverse_spectrum(&self, spec: &mut [Complex64]) {
        self.transform(spec, &self.inverse);
    }
}

impl MeasurementOperator for PartialFourierOperator {
    fn domain_shape(&self) -> &GridShape {
        &self.shape
    }

    fn range_dim(&self) -> usize {
        2 * self.frequencies.len()
    }

    fn scale(&self) -> f64 {
        self.scale
    }

    fn apply_raw(&self, u: &[f64]) -> Vec<f64> {
        let spec = self.spectrum(u);
        let m = self.frequencies.len();
        let mut out = vec![0.0; 2 * m];
        for (j, &k) in self.frequencies.iter().enumerate() {
            out[j] = self.scale * spec[k].re;
            out[m + j] = self.scale * spec[k].im;
        }
        out
    }

    fn adjoint_raw(&self, y: &[f64]) -> Vec<f64> {
        let m = self.frequencies.len();
        let mut spec = vec![Complex64::new(0.0, 0.0); self.shape.len()];
        for (j, &k) in self.frequencies.iter().enumerate() {
            spec[k] = Complex64::new(y[j], y[m + j]);
        }
        self.inverse_spectrum(&mut spec);
        spec.iter().map(|c| self.scale * c.re).collect()
    }

    fn rescaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.scale *= factor;
        out
    }
}

/// Power-iteration estimate of the largest singular value of `op`.
///
/// Iterates `u <- T*T u / ||T*T u||` from a fixed pseudo-random start and
/// returns the square root of the final Rayleigh quotient.
pub fn estimate_norm(op: &dyn MeasurementOperator, iters: usize) -> Result<f64> {
    if iters < 10 {
        return Err(TvError::invalid("power iteration needs at least 10 steps"));
    }
    let n = op.domain_shape().len();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let un = norm(&u);
    u.iter_mut().for_each(|v| *v /= un);
    let mut rayleigh = 0.0;
    for _ in 0..iters {
        let w = op.adjoint_raw(&op.apply_raw(&u));
        rayleigh = dot(&u, &w);
        let wn = norm(&w);
        if wn == 0.0 {
            return Ok(0.0);
        }
        u = w.into_iter().map(|v| v / wn).collect();
    }
    Ok(rayleigh.max(0.0).sqrt())
}

/// A measurement operator with its data and regularization weight.
#[derive(Clone, Debug)]
pub struct NormalizedProblem<T> {
    pub op: T,
    pub data: Vec<f64>,
    pub alpha: f64,
    /// Factor `c` applied: `T' = cT`, `g' = cg`, `alpha' = c^2 alpha`.
    pub factor: f64,
}

/// Rescales `(T, g, alpha)` so the operator norm is 0.9.
///
/// The energy of the rescaled problem is `c^2` times the original one,
/// so both have the same minimizers.
pub fn normalize_problem<T: MeasurementOperator>(
    op: &T,
    data: &[f64],
    alpha: f64,
) -> Result<NormalizedProblem<T>> {
    if data.len() != op.range_dim() {
        return Err(TvError::DimensionMismatch {
            expected: op.range_dim(),
            found: data.len(),
        });
    }
    let est = estimate_norm(op, 100)?;
    if est == 0.0 {
        return Err(TvError::DegenerateOperator);
    }
    let c = 0.9 / est;
    Ok(NormalizedProblem {
        op: op.rescaled(c),
        data: data.iter().map(|v| c * v).collect(),
        alpha: c * c * alpha,
        factor: c,
    })
}

/// True unless the constant signal is (numerically) annihilated by `op`.
pub fn check_kernel_condition(op: &dyn MeasurementOperator) -> bool {
    let ones = vec![1.0; op.domain_shape().len()];
    norm(&op.apply_raw(&ones)) > 1e-12 * norm(&ones)
}

/// Partial Fourier sampling pattern: the zero frequency, a centered
/// low-frequency block, then uniformly drawn frequencies until `fraction`
/// of the spectrum is covered. Deterministic for a given seed.
pub fn sampling_pattern(shape: &GridShape, fraction: f64, low_block: usize, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(TvError::invalid(format!("sampling fraction {fraction} outside (0, 1]")));
    }
    let n = shape.len();
    let target = ((fraction * n as f64).round() as usize).clamp(1, n);
    let mut chosen = vec![false; n];
    chosen[0] = true;
    let mut count = 1;
    if low_block > 0 {
        let half = (low_block / 2) as isize;
        let lo = -half;
        let hi = low_block as isize - half;
        for flat in 0..n {
            let multi = shape.multi_index(flat);
            let inside = multi.iter().zip(shape.dims()).all(|(&i, &len)| {
                let signed = if i as isize > len as isize / 2 { i as isize - len as isize } else { i as isize };
                signed >= lo && signed < hi
            });
            if inside && !chosen[flat] && count < target {
                chosen[flat] = true;
                count += 1;
            }
        }
    }
    let mut rest: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // partial Fisher-Yates
    let need = target.saturating_sub(count).min(rest.len());
    for k in 0..need {
        let j = rng.gen_range(k..rest.len());
        rest.swap(k, j);
        chosen[rest[k]] = true;
    }
    Ok((0..n).filter(|&i| chosen[i]).collect())
}

/// Writes flat indices as one multi-index per line.
pub fn write_index_set(path: &Path, shape: &GridShape, indices: &[usize]) -> Result<()> {
    let mut text = format!("# dims {}\n", join(shape.dims()));
    for &i in indices {
        text.push_str(&join(&shape.multi_index(i)));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| TvError::io(path, e))
}

/// Reads a list written by [`write_index_set`]; `#` starts a comment.
pub fn read_index_set(path: &Path, shape: &GridShape) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| TvError::io(path, e))?;
    parse_index_set(&text, shape, &path.display().to_string())
}

pub fn parse_index_set(text: &str, shape: &GridShape, origin: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let multi: std::result::Result<Vec<usize>, _> = line.split_whitespace().map(str::parse).collect();
        let multi = multi.map_err(|e| TvError::parse(origin, lineno + 1, format!("bad index: {e}")))?;
        let flat = shape.flat_index(&multi).ok_or_else(|| {
            TvError::parse(origin, lineno + 1, format!("index {multi:?} does not fit grid {:?}", shape.dims()))
        })?;
        out.push(flat);
    }
    Ok(out)
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn check_adjoint(op: &dyn MeasurementOperator, seed: u64) {
        let u = random(op.domain_shape().len(), seed);
        let y = random(op.range_dim(), seed + 1);
        let lhs = dot(&op.apply_raw(&u), &y);
        let rhs = dot(&u, &op.adjoint_raw(&y));
        assert!((lhs - rhs).abs() <= 1e-10 * norm(&u) * norm(&y), "{lhs} vs {rhs}");
    }

    #[test]
    fn mask_round_trip() {
        let shape = GridShape::d1(6).unwrap();
        let op = MaskOperator::new(shape, vec![4, 1, 1, 2], 1.5).unwrap();
        assert_eq!(op.samples(), &[1, 2, 4]);
        let u = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let back = op.adjoint_raw(&op.apply_raw(&u));
        assert_eq!(back, vec![0.0, 2.25 * 2.0, 2.25 * 3.0, 0.0, 2.25 * 5.0, 0.0]);
        check_adjoint(&op, 3);
        assert!(MaskOperator::new(GridShape::d1(3).unwrap(), vec![3], 1.0).is_err());
    }

    #[test]
    fn fourier_parseval_and_adjoint() {
        for dims in [vec![8], vec![6, 5], vec![4, 3, 2]] {
            let shape = GridShape::new(dims).unwrap();
            let full = PartialFourierOperator::full(shape.clone(), 0.7).unwrap();
            let u = random(shape.len(), 9);
            let ratio = norm(&full.apply_raw(&u)) / norm(&u);
            assert!((ratio - 0.7).abs() < 1e-10);
            check_adjoint(&full, 4);
            let part = PartialFourierOperator::new(shape.clone(), vec![0, 2, 3], 1.0).unwrap();
            check_adjoint(&part, 5);
        }
    }

    #[test]
    fn norm_estimates() {
        let shape = GridShape::d2(8, 8).unwrap();
        let mask = MaskOperator::new(shape.clone(), vec![0, 5, 9, 63], 1.0).unwrap();
        assert!((estimate_norm(&mask, 50).unwrap() - 1.0).abs() < 1e-6);
        let full = PartialFourierOperator::full(shape.clone(), 1.0).unwrap();
        assert!((estimate_norm(&full, 50).unwrap() - 1.0).abs() < 1e-6);
        let half = IdentityOperator::new(shape.clone(), 0.5);
        assert!((estimate_norm(&half, 50).unwrap() - 0.5).abs() < 1e-6);
        let empty = MaskOperator::new(shape, vec![], 1.0).unwrap();
        assert_eq!(estimate_norm(&empty, 20).unwrap(), 0.0);
        assert!(estimate_norm(&half, 5).is_err());
    }

    #[test]
    fn normalization() {
        let shape = GridShape::d1(5).unwrap();
        let op = MaskOperator::new(shape.clone(), vec![0, 2], 1.0).unwrap();
        let p = normalize_problem(&op, &[1.0, 2.0], 0.5).unwrap();
        assert!((p.op.scale() - 0.9).abs() < 1e-9);
        assert!((p.alpha - 0.81 * 0.5).abs() < 1e-9);
        assert!((p.data[1] - 1.8).abs() < 1e-9);

        let already = IdentityOperator::new(shape.clone(), 0.9);
        let p = normalize_problem(&already, &[1.0; 5], 0.3).unwrap();
        assert!((p.factor - 1.0).abs() < 1e-6);
        assert!((p.alpha - 0.3).abs() < 1e-6);

        let empty = MaskOperator::new(shape, vec![], 1.0).unwrap();
        assert!(matches!(normalize_problem(&empty, &[], 1.0), Err(TvError::DegenerateOperator)));
    }

    #[test]
    fn kernel_condition() {
        let shape = GridShape::d2(4, 4).unwrap();
        assert!(check_kernel_condition(&MaskOperator::new(shape.clone(), vec![3], 1.0).unwrap()));
        assert!(!check_kernel_condition(&MaskOperator::new(shape.clone(), vec![], 1.0).unwrap()));
        let with_dc = PartialFourierOperator::new(shape.clone(), vec![0, 5], 1.0).unwrap();
        assert!(with_dc.contains_zero_frequency());
        assert!(check_kernel_condition(&with_dc));
        let no_dc = PartialFourierOperator::new(shape, vec![1, 5], 1.0).unwrap();
        assert!(!check_kernel_condition(&no_dc));
    }

    #[test]
    fn sampling_pattern_is_seeded() {
        let shape = GridShape::d2(16, 16).unwrap();
        let a = sampling_pattern(&shape, 0.3, 4, 7).unwrap();
        let b = sampling_pattern(&shape, 0.3, 4, 7).unwrap();
        let c = sampling_pattern(&shape, 0.3, 4, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), (0.3f64 * 256.0).round() as usize);
        assert_eq!(a[0], 0);
        // low block covers signed frequencies -2..2 on both axes
        for multi in [[0, 1], [1, 0], [15, 15], [14, 1]] {
            assert!(a.contains(&shape.flat_index(&multi).unwrap()));
        }
        assert!(sampling_pattern(&shape, 0.0, 4, 7).is_err());
        assert!(sampling_pattern(&shape, 1.2, 4, 7).is_err());
    }

    #[test]
    fn index_set_text_round_trip() {
        let shape = GridShape::d2(5, 7).unwrap();
        let idx = vec![0, 3, 17, 34];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.txt");
        write_index_set(&path, &shape, &idx).unwrap();
        assert_eq!(read_index_set(&path, &shape).unwrap(), idx);
        let err = parse_index_set("0 1\n9 9\n", &shape, "x").unwrap_err();
        assert!(matches!(err, TvError::Parse { line: 2, .. }));
    }
}
