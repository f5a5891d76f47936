//! Stripe decompositions of the grid into subdomains.
//!
//! Subdomains are contiguous slabs along one axis. In the overlapping case
//! neighboring slabs share `overlap` grid lines; the internal boundary of a
//! slab is its end line lying inside the neighbor, and the partition of
//! unity ramps linearly across each shared band, vanishing on the internal
//! boundaries.

use std::fmt::Write as _;

use crate::error::{Result, TvError};
use crate::grid::{GridShape, Signal};

#[derive(Clone, Debug)]
pub struct Decomposition {
    shape: GridShape,
    axis: usize,
    overlapping: bool,
    /// Half-open coordinate range of each subdomain along `axis`.
    ranges: Vec<(usize, usize)>,
    /// Coordinates along `axis` of the internal boundary lines.
    boundary_lines: Vec<Vec<usize>>,
    weights: Vec<Signal>,
}

fn balanced_slabs(n: usize, parts: usize) -> Vec<(usize, usize)> {
    let base = n / parts;
    let extra = n % parts;
    let mut start = 0;
    (0..parts)
        .map(|j| {
            let len = base + usize::from(j < extra);
            let r = (start, start + len);
            start += len;
            r
        })
        .collect()
}

fn check_axis(shape: &GridShape, axis: usize, parts: usize) -> Result<()> {
    if axis >= shape.ndim() {
        return Err(TvError::invalid(format!("axis {axis} out of range for a {}-d grid", shape.ndim())));
    }
    if parts < 2 {
        return Err(TvError::invalid("a decomposition needs at least two subdomains"));
    }
    if parts > shape.dims()[axis] {
        return Err(TvError::invalid(format!(
            "cannot split {} grid lines into {parts} subdomains",
            shape.dims()[axis]
        )));
    }
    Ok(())
}

/// Broadcasts a per-line profile along the other axes.
fn line_profile_signal(shape: &GridShape, axis: usize, profile: &[f64]) -> Signal {
    Signal::from_fn(shape, |ix| profile[ix[axis]])
}

/// Disjoint slabs along `axis` with sizes differing by at most one.
pub fn split_nonoverlapping(shape: &GridShape, axis: usize, parts: usize) -> Result<Decomposition> {
    check_axis(shape, axis, parts)?;
    let n = shape.dims()[axis];
    let ranges = balanced_slabs(n, parts);
    let weights = ranges
        .iter()
        .map(|&(s, e)| {
            let profile: Vec<f64> = (0..n).map(|c| if (s..e).contains(&c) { 1.0 } else { 0.0 }).collect();
            line_profile_signal(shape, axis, &profile)
        })
        .collect();
    Ok(Decomposition {
        shape: shape.clone(),
        axis,
        overlapping: false,
        boundary_lines: vec![Vec::new(); parts],
        ranges,
        weights,
    })
}

/// Balanced slabs along `axis`, each pair of neighbors sharing `overlap` lines.
///
/// Slab `j` is extended by `overlap / 2` lines toward its lower neighbor
/// and by the remaining `overlap - overlap / 2` lines toward its upper one.
/// Interior base slabs must be at least `overlap` lines long so that their
/// two shared bands do not meet.
pub fn split_overlapping(shape: &GridShape, axis: usize, parts: usize, overlap: usize) -> Result<Decomposition> {
    check_axis(shape, axis, parts)?;
    if overlap < 2 {
        return Err(TvError::invalid(format!("overlap must be at least 2 grid lines, got {overlap}")));
    }
    let n = shape.dims()[axis];
    let base = balanced_slabs(n, parts);
    let down = overlap / 2;
    let up = overlap - down;
    let last = parts - 1;
    // slab j gives its first `up` lines to the band below and its last `down` to the band above
    let fits = base.iter().enumerate().all(|(j, &(s, e))| {
        let need = if j > 0 { up } else { 0 } + if j < last { down } else { 0 };
        e - s >= need.max(1)
    });
    if !fits {
        return Err(TvError::invalid(format!(
            "overlap {overlap} does not fit: {parts} slabs of {} to {} lines",
            n / parts,
            n.div_ceil(parts)
        )));
    }
    let ranges: Vec<(usize, usize)> = base
        .iter()
        .enumerate()
        .map(|(j, &(s, e))| {
            let lo = if j > 0 { s - down } else { s };
            let hi = if j < last { e + up } else { e };
            (lo, hi)
        })
        .collect();
    let boundary_lines = ranges
        .iter()
        .enumerate()
        .map(|(j, &(lo, hi))| {
            let mut lines = Vec::new();
            if j > 0 {
                lines.push(lo);
            }
            if j < last {
                lines.push(hi - 1);
            }
            lines
        })
        .collect();

    // ramp across the band shared by slabs j and j + 1
    let mut profiles = vec![vec![0.0; n]; parts];
    for (j, &(s, e)) in base.iter().enumerate() {
        let private_lo = if j > 0 { s + up } else { s };
        let private_hi = if j < last { e - down } else { e };
        for c in private_lo..private_hi {
            profiles[j][c] = 1.0;
        }
        if j < last {
            let band = e - down;
            for t in 0..overlap {
                let rise = t as f64 / (overlap - 1) as f64;
                profiles[j + 1][band + t] = rise;
                profiles[j][band + t] = 1.0 - rise;
            }
        }
    }
    let weights = profiles.iter().map(|p| line_profile_signal(shape, axis, p)).collect();
    Ok(Decomposition {
        shape: shape.clone(),
        axis,
        overlapping: true,
        ranges,
        boundary_lines,
        weights,
    })
}

impl Decomposition {
    /// The trivial single-subdomain decomposition.
    pub fn whole(shape: &GridShape) -> Decomposition {
        Decomposition {
            shape: shape.clone(),
            axis: 0,
            overlapping: false,
            ranges: vec![(0, shape.dims()[0])],
            boundary_lines: vec![Vec::new()],
            weights: vec![Signal::constant(shape, 1.0)],
        }
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn is_overlapping(&self) -> bool {
        self.overlapping
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Half-open range of subdomain `j` along the split axis.
    pub fn range(&self, j: usize) -> (usize, usize) {
        self.ranges[j]
    }

    pub fn boundary_lines(&self, j: usize) -> &[usize] {
        &self.boundary_lines[j]
    }

    /// Partition-of-unity weight `chi_j` (an indicator when nonoverlapping).
    pub fn weight(&self, j: usize) -> &Signal {
        &self.weights[j]
    }

    pub fn contains(&self, j: usize, flat: usize) -> bool {
        let c = self.shape.coord(flat, self.axis);
        let (lo, hi) = self.ranges[j];
        (lo..hi).contains(&c)
    }

    pub fn on_boundary(&self, j: usize, flat: usize) -> bool {
        let c = self.shape.coord(flat, self.axis);
        self.boundary_lines[j].contains(&c)
    }

    /// Flat indices of subdomain `j`.
    pub fn subdomain(&self, j: usize) -> Vec<usize> {
        (0..self.shape.len()).filter(|&i| self.contains(j, i)).collect()
    }

    /// Flat indices of the internal boundary of subdomain `j`.
    pub fn boundary(&self, j: usize) -> Vec<usize> {
        (0..self.shape.len()).filter(|&i| self.on_boundary(j, i)).collect()
    }

    /// Coordinates a local solve on subdomain `j` may change.
    pub fn free_mask(&self, j: usize) -> Vec<bool> {
        (0..self.shape.len())
            .map(|i| self.contains(j, i) && !self.on_boundary(j, i))
            .collect()
    }

    /// Orthogonal projection onto signals supported in subdomain `j`.
    pub fn project_onto_subspace(&self, u: &Signal, j: usize) -> Signal {
        let mut out = u.clone();
        for (i, v) in out.values_mut().iter_mut().enumerate() {
            if !self.contains(j, i) {
                *v = 0.0;
            }
        }
        out
    }

    /// Plain-text description for experiment logs.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let kind = if self.overlapping { "overlapping" } else { "nonoverlapping" };
        let _ = writeln!(
            s,
            "# {kind} decomposition of {:?} along axis {} into {} subdomains",
            self.shape.dims(),
            self.axis,
            self.len()
        );
        for (j, &(lo, hi)) in self.ranges.iter().enumerate() {
            let lines: Vec<String> = self.boundary_lines[j].iter().map(|c| c.to_string()).collect();
            let _ = writeln!(s, "subdomain {j}: lines [{lo}, {hi}) boundary [{}]", lines.join(", "));
        }
        s
    }
}

pub fn project_onto_subspace(u: &Signal, j: usize, dec: &Decomposition) -> Signal {
    dec.project_onto_subspace(u, j)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones_positions(dec: &Decomposition, j: usize) -> Vec<usize> {
        dec.subdomain(j)
    }

    #[test]
    fn nonoverlapping_examples() {
        let shape = GridShape::d1(6).unwrap();
        let dec = split_nonoverlapping(&shape, 0, 2).unwrap();
        assert_eq!(ones_positions(&dec, 0), vec![0, 1, 2]);
        assert_eq!(ones_positions(&dec, 1), vec![3, 4, 5]);
        assert!(dec.boundary(0).is_empty());

        let dec = split_nonoverlapping(&GridShape::d1(5).unwrap(), 0, 2).unwrap();
        assert_eq!((dec.range(0), dec.range(1)), ((0, 3), (3, 5)));

        let dec = split_nonoverlapping(&GridShape::d2(4, 4).unwrap(), 0, 4).unwrap();
        for j in 0..4 {
            assert_eq!(dec.subdomain(j), (4 * j..4 * j + 4).collect::<Vec<_>>());
        }
        assert!(split_nonoverlapping(&GridShape::d1(3).unwrap(), 0, 4).is_err());
        assert!(split_nonoverlapping(&GridShape::d1(3).unwrap(), 1, 2).is_err());
    }

    #[test]
    fn overlapping_ten_points() {
        let shape = GridShape::d1(10).unwrap();
        let dec = split_overlapping(&shape, 0, 2, 4).unwrap();
        // 1-based {1..7} and {4..10}
        assert_eq!(dec.range(0), (0, 7));
        assert_eq!(dec.range(1), (3, 10));
        assert_eq!(dec.boundary(0), vec![6]);
        assert_eq!(dec.boundary(1), vec![3]);
        let (c1, c2) = (dec.weight(0).values(), dec.weight(1).values());
        for i in 0..10 {
            assert_eq!(c1[i] + c2[i], 1.0);
        }
        assert_eq!(c1[6], 0.0);
        assert_eq!(c2[3], 0.0);
        assert_eq!(dec.free_mask(0), vec![true, true, true, true, true, true, false, false, false, false]);
    }

    #[test]
    fn overlapping_rejects_bad_geometry() {
        let shape = GridShape::d1(10).unwrap();
        assert!(split_overlapping(&shape, 0, 2, 1).is_err());
        assert!(split_overlapping(&shape, 0, 2, 11).is_err());
        assert!(split_overlapping(&shape, 0, 4, 3).is_err());
        // outer slabs only give lines to one band
        assert!(split_overlapping(&shape, 0, 2, 10).is_ok());
        let dec = split_overlapping(&GridShape::d2(3, 3).unwrap(), 0, 2, 2).unwrap();
        assert_eq!((dec.range(0), dec.range(1)), ((0, 3), (1, 3)));
        assert_eq!((dec.boundary_lines(0), dec.boundary_lines(1)), (&[2][..], &[1][..]));
    }

    #[test]
    fn four_stripes_on_64() {
        let shape = GridShape::d2(64, 64).unwrap();
        let dec = split_overlapping(&shape, 0, 4, 8).unwrap();
        assert_eq!(dec.len(), 4);
        let counts: Vec<usize> = (0..4).map(|j| dec.boundary_lines(j).len()).collect();
        assert_eq!(counts, vec![1, 2, 2, 1]);
        assert_eq!(dec.boundary(1).len(), 2 * 64);
    }

    #[test]
    fn subspace_projection() {
        let shape = GridShape::d1(6).unwrap();
        let dec = split_nonoverlapping(&shape, 0, 2).unwrap();
        let u = Signal::from_vec(vec![1.0, 2.0, 3.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(dec.project_onto_subspace(&u, 0), u);
        assert_eq!(dec.project_onto_subspace(&u, 1), Signal::zeros(&shape));
        let v = Signal::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let once = project_onto_subspace(&v, 1, &dec);
        assert_eq!(project_onto_subspace(&once, 1, &dec), once);
    }

    #[test]
    fn summary_lists_ranges() {
        let dec = split_overlapping(&GridShape::d1(10).unwrap(), 0, 2, 4).unwrap();
        let s = dec.summary();
        assert!(s.contains("subdomain 0: lines [0, 7) boundary [6]"));
        assert!(s.contains("subdomain 1: lines [3, 10) boundary [3]"));
    }
}
