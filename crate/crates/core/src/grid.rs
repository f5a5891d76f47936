//! Discrete signal space and the finite-difference calculus on it.
//!
//! Signals are stored row-major: the last axis varies fastest. Axis `k`
//! of the array is the `k`-th component of the gradient, so for a 2D
//! image `(row, col)` component 0 holds vertical differences and
//! component 1 horizontal ones. Grid spacing is taken as one along
//! every axis.
//!
//! The gradient uses forward differences with a zero component on the
//! last slice of each axis. The divergence is defined as the negative
//! adjoint of the gradient, which fixes its boundary behavior.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TvError};
use crate::operators::MeasurementOperator;

/// Extents `(N_1, ..., N_d)` of a regular grid.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    dims: Vec<usize>,
}

impl GridShape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(TvError::invalid("grid must have at least one axis"));
        }
        if dims.contains(&0) {
            return Err(TvError::invalid(format!("grid extents must be positive, got {dims:?}")));
        }
        Ok(GridShape { dims })
    }

    pub fn d1(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn d2(rows: usize, cols: usize) -> Result<Self> {
        Self::new(vec![rows, cols])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Distance in the flat buffer between neighbors along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.dims[axis + 1..].iter().product()
    }

    pub fn flat_index(&self, multi: &[usize]) -> Option<usize> {
        if multi.len() != self.dims.len() {
            return None;
        }
        let mut idx = 0;
        for (&i, &n) in multi.iter().zip(&self.dims) {
            if i >= n {
                return None;
            }
            idx = idx * n + i;
        }
        Some(idx)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (k, &n) in self.dims.iter().enumerate().rev() {
            out[k] = flat % n;
            flat /= n;
        }
        out
    }

    /// Coordinate of a flat index along one axis.
    pub fn coord(&self, flat: usize, axis: usize) -> usize {
        (flat / self.stride(axis)) % self.dims[axis]
    }
}

/// A real-valued function on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    shape: GridShape,
    values: Vec<f64>,
}

impl Signal {
    pub fn new(shape: GridShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(TvError::DimensionMismatch {
                expected: shape.len(),
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(TvError::invalid(format!("non-finite value at index {pos}")));
        }
        Ok(Signal { shape, values })
    }

    pub fn zeros(shape: &GridShape) -> Self {
        Signal {
            shape: shape.clone(),
            values: vec![0.0; shape.len()],
        }
    }

    pub fn constant(shape: &GridShape, c: f64) -> Self {
        Signal {
            shape: shape.clone(),
            values: vec![c; shape.len()],
        }
    }

    pub fn from_fn(shape: &GridShape, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let values = (0..shape.len()).map(|i| f(&shape.multi_index(i))).collect();
        Signal {
            shape: shape.clone(),
            values,
        }
    }

    /// 1D convenience constructor.
    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        let shape = GridShape::d1(values.len())?;
        Self::new(shape, values)
    }

    pub(crate) fn from_raw(shape: &GridShape, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), shape.len());
        Signal {
            shape: shape.clone(),
            values,
        }
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, multi: &[usize]) -> Option<f64> {
        self.shape.flat_index(multi).map(|i| self.values[i])
    }

    pub fn dot(&self, other: &Signal) -> f64 {
        dot(&self.values, &other.values)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn scaled(&self, c: f64) -> Signal {
        Signal::from_raw(&self.shape, self.values.iter().map(|v| c * v).collect())
    }

    pub fn add(&self, other: &Signal) -> Signal {
        Signal::from_raw(&self.shape, zip_map(&self.values, &other.values, |a, b| a + b))
    }

    pub fn sub(&self, other: &Signal) -> Signal {
        Signal::from_raw(&self.shape, zip_map(&self.values, &other.values, |a, b| a - b))
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Signal) -> Signal {
        Signal::from_raw(&self.shape, zip_map(&self.values, &other.values, |a, b| a * b))
    }

    pub fn max_abs_diff(&self, other: &Signal) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl AsRef<[f64]> for Signal {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// One `d`-vector per grid point, stored as `d` component planes.
///
/// Component `k` vanishes on the last slice of axis `k`, as the gradient does.
#[derive(Clone, Debug, PartialEq)]
pub struct DualField {
    shape: GridShape,
    components: Vec<Vec<f64>>,
}

impl DualField {
    pub fn new(shape: GridShape, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != shape.ndim() {
            return Err(TvError::invalid(format!(
                "dual field needs {} components, got {}",
                shape.ndim(),
                components.len()
            )));
        }
        for c in &components {
            if c.len() != shape.len() {
                return Err(TvError::DimensionMismatch {
                    expected: shape.len(),
                    found: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(TvError::invalid("non-finite dual field entry"));
            }
        }
        for (axis, c) in components.iter().enumerate() {
            let mut bad = false;
            for_each_last_slice(&shape, axis, |i| bad |= c[i] != 0.0);
            if bad {
                return Err(TvError::invalid(format!(
                    "component {axis} must vanish on the last slice of its axis"
                )));
            }
        }
        Ok(DualField { shape, components })
    }

    /// Like [`DualField::new`] but zeroes the last-slice entries instead of rejecting them.
    pub fn with_boundary_zeroed(shape: GridShape, mut components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() == shape.ndim() {
            for (axis, c) in components.iter_mut().enumerate() {
                if c.len() == shape.len() {
                    for_each_last_slice(&shape, axis, |i| c[i] = 0.0);
                }
            }
        }
        Self::new(shape, components)
    }

    pub fn zeros(shape: &GridShape) -> Self {
        DualField {
            shape: shape.clone(),
            components: vec![vec![0.0; shape.len()]; shape.ndim()],
        }
    }

    pub(crate) fn from_raw(shape: &GridShape, components: Vec<Vec<f64>>) -> Self {
        DualField {
            shape: shape.clone(),
            components,
        }
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    /// The `d`-vector at a flat index.
    pub fn at(&self, flat: usize) -> Vec<f64> {
        self.components.iter().map(|c| c[flat]).collect()
    }

    /// Euclidean length of the vector at each grid point.
    pub fn pointwise_norms(&self) -> Vec<f64> {
        pointwise_norms(&self.components)
    }

    pub fn dot(&self, other: &DualField) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| dot(a, b))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Forward-difference gradient.
pub fn gradient(u: &Signal) -> DualField {
    let shape = u.shape();
    let mut comps = vec![vec![0.0; shape.len()]; shape.ndim()];
    gradient_into(shape, u.values(), &mut comps);
    DualField::from_raw(shape, comps)
}

/// Discrete divergence, the negative adjoint of [`gradient`].
pub fn divergence(p: &DualField) -> Result<Signal> {
    let shape = p.shape();
    if p.components.len() != shape.ndim() || p.components.iter().any(|c| c.len() != shape.len()) {
        return Err(TvError::invalid("dual field components do not match its grid"));
    }
    let mut out = vec![0.0; shape.len()];
    divergence_into(shape, &p.components, &mut out);
    Ok(Signal::from_raw(shape, out))
}

/// Isotropic total variation: sum of the pointwise gradient norms.
pub fn total_variation(u: &Signal) -> f64 {
    total_variation_raw(u.shape(), u.values())
}

/// `||T u - g||^2 + 2 alpha TV(u)`.
pub fn energy(u: &Signal, op: &dyn MeasurementOperator, g: &[f64], alpha: f64) -> Result<f64> {
    if g.len() != op.range_dim() {
        return Err(TvError::DimensionMismatch {
            expected: op.range_dim(),
            found: g.len(),
        });
    }
    if op.domain_shape() != u.shape() {
        return Err(TvError::invalid("signal shape does not match the operator domain"));
    }
    if !(alpha > 0.0) {
        return Err(TvError::invalid(format!("alpha must be positive, got {alpha}")));
    }
    Ok(energy_raw(u.shape(), u.values(), op, g, alpha))
}

pub(crate) fn energy_raw(
    shape: &GridShape,
    u: &[f64],
    op: &dyn MeasurementOperator,
    g: &[f64],
    alpha: f64,
) -> f64 {
    let tu = op.apply_raw(u);
    let fidelity: f64 = tu.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum();
    fidelity + 2.0 * alpha * total_variation_raw(shape, u)
}

pub(crate) fn total_variation_raw(shape: &GridShape, u: &[f64]) -> f64 {
    let mut comps = vec![vec![0.0; shape.len()]; shape.ndim()];
    gradient_into(shape, u, &mut comps);
    pointwise_norms(&comps).iter().sum()
}

/// `(outer, len, inner)` block layout of the flat buffer around `axis`.
#[inline]
fn axis_layout(shape: &GridShape, axis: usize) -> (usize, usize, usize) {
    let dims = shape.dims();
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    (outer, dims[axis], inner)
}

fn for_each_last_slice(shape: &GridShape, axis: usize, mut f: impl FnMut(usize)) {
    let (outer, len, inner) = axis_layout(shape, axis);
    for o in 0..outer {
        let base = (o * len + len - 1) * inner;
        for r in 0..inner {
            f(base + r);
        }
    }
}

pub(crate) fn gradient_into(shape: &GridShape, u: &[f64], out: &mut [Vec<f64>]) {
    for (axis, comp) in out.iter_mut().enumerate() {
        let (outer, len, inner) = axis_layout(shape, axis);
        for o in 0..outer {
            let block = o * len * inner;
            for i in 0..len - 1 {
                let row = block + i * inner;
                let (cur, next) = (&u[row..row + inner], &u[row + inner..row + 2 * inner]);
                for ((g, a), b) in comp[row..row + inner].iter_mut().zip(cur).zip(next) {
                    *g = b - a;
                }
            }
            let last = block + (len - 1) * inner;
            comp[last..last + inner].iter_mut().for_each(|g| *g = 0.0);
        }
    }
}

pub(crate) fn divergence_into(shape: &GridShape, p: &[Vec<f64>], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (axis, comp) in p.iter().enumerate() {
        let (outer, len, inner) = axis_layout(shape, axis);
        for o in 0..outer {
            let block = o * len * inner;
            for i in 0..len {
                let row = block + i * inner;
                if i + 1 < len {
                    for (d, q) in out[row..row + inner].iter_mut().zip(&comp[row..row + inner]) {
                        *d += q;
                    }
                }
                if i > 0 {
                    let prev = row - inner;
                    for (d, q) in out[row..row + inner].iter_mut().zip(&comp[prev..prev + inner]) {
                        *d -= q;
                    }
                }
            }
        }
    }
}

pub(crate) fn pointwise_norms(comps: &[Vec<f64>]) -> Vec<f64> {
    let n = comps.first().map_or(0, Vec::len);
    (0..n)
        .map(|i| comps.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
        .collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub(crate) fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}
