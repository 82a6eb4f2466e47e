//! Point sets, box domains, and the mesh quantities the estimators consume.
//!
//! The two numbers that drive everything downstream are the *fill distance*
//!
//! ```text
//!     h = sup_{x in domain} min_i |x - x_i|
//! ```
//!
//! (how far the worst point of the domain is from the sample set) and the
//! *separation distance* q, the smallest pairwise gap. Their ratio h/q is a
//! scale-free uniformity measure: 1/2 for an equispaced grid with endpoints,
//! growing without bound as points clump.
//!
//! Schedules are sequences of point sets with geometrically shrinking fill.
//! The dyadic constructors produce levels that are *nested bit-for-bit*: every
//! coordinate of a coarse level reappears, as the identical f64, in all finer
//! levels. Downstream code exploits this to locate coarse points inside fine
//! factorizations by exact comparison, so the constructors are careful to
//! evaluate every coordinate with the same formula at every level.

use crate::error::{Error, Result};

/// A finite set of points in `dim` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    /// Wraps flat row-major coordinates. Length must be a multiple of `dim`.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("point dimension must be positive".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "coordinate buffer of length {} is not a multiple of dim {}",
                coords.len(),
                dim
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("point coordinates must be finite".into()));
        }
        Ok(Self { dim, coords })
    }

    /// Convenience constructor for one-dimensional sets.
    pub fn from_1d(xs: &[f64]) -> Self {
        Self { dim: 1, coords: xs.to_vec() }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn push(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.dim, "point has wrong dimension");
        self.coords.extend_from_slice(p);
    }

    /// Index of `p` in the set under exact f64 equality, if present.
    pub fn position_exact(&self, p: &[f64]) -> Option<usize> {
        self.iter().position(|q| q == p)
    }

    /// True when every point of `self` occurs in `fine` bit-for-bit.
    ///
    /// Quadratic scan would be too slow for the tensor grids, so `fine` is
    /// indexed by coordinate bit patterns first.
    pub fn is_exact_subset_of(&self, fine: &PointSet) -> bool {
        if self.dim != fine.dim {
            return false;
        }
        let mut index: std::collections::HashSet<Vec<u64>> =
            std::collections::HashSet::with_capacity(fine.len());
        for q in fine.iter() {
            index.insert(q.iter().map(|c| c.to_bits()).collect());
        }
        self.iter()
            .all(|p| index.contains(&p.iter().map(|c| c.to_bits()).collect::<Vec<u64>>()))
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// An axis-aligned box, the domain over which fill distances are measured.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidInput("domain bounds have mismatched lengths".into()));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::InvalidInput(format!(
                    "domain axis [{a}, {b}] is not a proper interval"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The interval [a, b] as a one-dimensional domain.
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a], vec![b])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (a, b))| *a <= *x && *x <= *b)
    }

    /// Tensor grid with `per_axis` points per axis, endpoints included.
    pub fn grid(&self, per_axis: usize) -> PointSet {
        assert!(per_axis >= 2, "need at least two points per axis");
        let axes: Vec<Vec<f64>> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| {
                (0..per_axis)
                    .map(|i| a + (b - a) * i as f64 / (per_axis - 1) as f64)
                    .collect()
            })
            .collect();
        tensor_product(&axes)
    }

    /// Tensor grid with `per_axis` interior points per axis; the boundary is
    /// excluded, so the spacing is (b-a)/(per_axis+1).
    pub fn interior_grid(&self, per_axis: usize) -> PointSet {
        assert!(per_axis >= 1, "need at least one point per axis");
        let axes: Vec<Vec<f64>> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| {
                (1..=per_axis)
                    .map(|i| a + (b - a) * i as f64 / (per_axis + 1) as f64)
                    .collect()
            })
            .collect();
        tensor_product(&axes)
    }
}

/// Cartesian product of per-axis coordinate lists, last axis fastest.
fn tensor_product(axes: &[Vec<f64>]) -> PointSet {
    let dim = axes.len();
    let total: usize = axes.iter().map(Vec::len).product();
    let mut coords = Vec::with_capacity(total * dim);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        for (k, ax) in axes.iter().enumerate() {
            coords.push(ax[idx[k]]);
        }
        for k in (0..dim).rev() {
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
    PointSet { dim, coords }
}

/// Smallest pairwise distance in the set. Plain O(n^2) scan; the sets this
/// crate produces stay small enough that anything cleverer is not worth it.
pub fn separation_distance(points: &PointSet) -> f64 {
    let n = points.len();
    assert!(n >= 2, "separation distance needs at least two points");
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = dist2(points.point(i), points.point(j));
            if d2 < best {
                best = d2;
            }
        }
    }
    best.sqrt()
}

/// Uniform bucket grid for nearest-point queries. Cuts the fill-distance
/// evaluation on tensor grids from quadratic to roughly linear.
struct BucketIndex<'a> {
    points: &'a PointSet,
    lo: Vec<f64>,
    edge: Vec<f64>,
    cells: Vec<usize>,
    min_edge: f64,
    buckets: Vec<Vec<u32>>,
}

impl<'a> BucketIndex<'a> {
    fn build(points: &'a PointSet, domain: &BoxDomain) -> Self {
        let dim = points.dim();
        let per_axis = (points.len() as f64).powf(1.0 / dim as f64).ceil().max(1.0) as usize;
        let cells: Vec<usize> = vec![per_axis.max(1); dim];
        let edge: Vec<f64> = domain
            .lo
            .iter()
            .zip(&domain.hi)
            .zip(&cells)
            .map(|((&a, &b), &c)| (b - a) / c as f64)
            .collect();
        let min_edge = edge.iter().cloned().fold(f64::INFINITY, f64::min);
        let total: usize = cells.iter().product();
        let mut buckets = vec![Vec::new(); total];
        let lo = domain.lo.clone();
        for (i, p) in points.iter().enumerate() {
            let c = Self::cell_of_raw(p, &lo, &edge, &cells);
            buckets[Self::flatten(&c, &cells)].push(i as u32);
        }
        Self { points, lo, edge, cells, min_edge, buckets }
    }

    fn cell_of_raw(p: &[f64], lo: &[f64], edge: &[f64], cells: &[usize]) -> Vec<usize> {
        p.iter()
            .zip(lo.iter().zip(edge.iter().zip(cells)))
            .map(|(&x, (&a, (&e, &c)))| {
                let raw = ((x - a) / e).floor();
                (raw.max(0.0) as usize).min(c - 1)
            })
            .collect()
    }

    fn flatten(c: &[usize], cells: &[usize]) -> usize {
        let mut idx = 0;
        for (k, &ck) in c.iter().enumerate() {
            idx = idx * cells[k] + ck;
        }
        idx
    }

    /// Distance from `x` to the nearest stored point, via expanding rings of
    /// cells. A point in a cell at Chebyshev ring r is at least (r-1) cell
    /// edges away, which gives the termination test.
    fn nearest_distance(&self, x: &[f64]) -> f64 {
        let dim = self.points.dim();
        let center = Self::cell_of_raw(x, &self.lo, &self.edge, &self.cells);
        let max_ring = *self.cells.iter().max().unwrap();
        let mut best = f64::INFINITY;
        for r in 0..=max_ring {
            if r >= 1 {
                let lower = (r as f64 - 1.0) * self.min_edge;
                if lower * lower > best {
                    break;
                }
            }
            self.visit_ring(&center, r, dim, &mut best, x);
        }
        best.sqrt()
    }

    fn visit_ring(&self, center: &[usize], r: usize, dim: usize, best: &mut f64, x: &[f64]) {
        // Enumerate cells whose Chebyshev index distance from center is exactly r.
        let mut offset = vec![0isize; dim];
        self.visit_ring_rec(center, r, 0, dim, &mut offset, false, best, x);
    }

    #[allow(clippy::too_many_arguments)]
    fn visit_ring_rec(
        &self,
        center: &[usize],
        r: usize,
        axis: usize,
        dim: usize,
        offset: &mut Vec<isize>,
        pinned: bool,
        best: &mut f64,
        x: &[f64],
    ) {
        if axis == dim {
            if !pinned && r > 0 {
                return;
            }
            let mut cell = Vec::with_capacity(dim);
            for k in 0..dim {
                let c = center[k] as isize + offset[k];
                if c < 0 || c >= self.cells[k] as isize {
                    return;
                }
                cell.push(c as usize);
            }
            for &i in &self.buckets[Self::flatten(&cell, &self.cells)] {
                let d2 = dist2(self.points.point(i as usize), x);
                if d2 < *best {
                    *best = d2;
                }
            }
            return;
        }
        let ri = r as isize;
        for o in -ri..=ri {
            offset[axis] = o;
            self.visit_ring_rec(center, r, axis + 1, dim, offset, pinned || o.abs() == ri, best, x);
        }
    }
}

/// Fill distance of `points` with respect to `domain`:
/// the largest distance from any domain point to the sample set.
///
/// The supremum is located on a dense tensor grid roughly ten times finer per
/// axis than the sample spacing, then sharpened by shrinking-box refinement
/// around the best candidate. On equispaced sets this resolves the exact
/// midpoint value to machine precision.
pub fn fill_distance(points: &PointSet, domain: &BoxDomain) -> f64 {
    assert!(!points.is_empty(), "fill distance of an empty set is the domain radius");
    assert_eq!(points.dim(), domain.dim(), "points and domain dimension mismatch");
    let dim = domain.dim();
    let per_axis_pts = (points.len() as f64).powf(1.0 / dim as f64).ceil() as usize;
    let resolution = (10 * per_axis_pts + 1).max(51);
    let index = BucketIndex::build(points, domain);

    // Dense scan.
    let mut best_x = vec![0.0; dim];
    let mut best = -1.0;
    let mut idx = vec![0usize; dim];
    let total = resolution.pow(dim as u32);
    let mut x = vec![0.0; dim];
    for _ in 0..total {
        for k in 0..dim {
            x[k] = domain.lo[k]
                + (domain.hi[k] - domain.lo[k]) * idx[k] as f64 / (resolution - 1) as f64;
        }
        let d = index.nearest_distance(&x);
        if d > best {
            best = d;
            best_x.copy_from_slice(&x);
        }
        for k in (0..dim).rev() {
            idx[k] += 1;
            if idx[k] < resolution {
                break;
            }
            idx[k] = 0;
        }
    }

    // Shrinking-box refinement: 5 candidates per axis, halve the box each
    // round. 80 rounds drive the box width far below f64 resolution.
    let mut half: Vec<f64> = domain
        .lo
        .iter()
        .zip(&domain.hi)
        .map(|(&a, &b)| 1.5 * (b - a) / (resolution - 1) as f64)
        .collect();
    let mut center = best_x.clone();
    for _ in 0..80 {
        let mut local_best = best;
        let mut local_x = center.clone();
        let mut cand_idx = vec![0usize; dim];
        let candidates = 5usize.pow(dim as u32);
        for _ in 0..candidates {
            for k in 0..dim {
                let t = cand_idx[k] as f64 / 4.0;
                let raw = center[k] - half[k] + 2.0 * half[k] * t;
                x[k] = raw.clamp(domain.lo[k], domain.hi[k]);
            }
            let d = index.nearest_distance(&x);
            if d > local_best {
                local_best = d;
                local_x.copy_from_slice(&x);
            }
            for k in (0..dim).rev() {
                cand_idx[k] += 1;
                if cand_idx[k] < 5 {
                    break;
                }
                cand_idx[k] = 0;
            }
        }
        best = local_best;
        center = local_x;
        for hk in half.iter_mut() {
            *hk *= 0.5;
        }
    }
    best
}

/// Mesh ratio h/q. Equals 1/2 for an equispaced endpoint grid and grows as
/// the set becomes less uniform.
pub fn uniformity(points: &PointSet, domain: &BoxDomain) -> f64 {
    fill_distance(points, domain) / separation_distance(points)
}

/// A refinement sequence over one domain. `nested` records whether every
/// level is an exact subset of the next; the increment computation downstream
/// picks its strategy based on this flag.
#[derive(Debug, Clone)]
pub struct NestedSchedule {
    pub domain: BoxDomain,
    pub levels: Vec<PointSet>,
    pub nested: bool,
}

impl NestedSchedule {
    /// Wraps externally supplied levels, detecting nestedness.
    pub fn from_levels(domain: BoxDomain, levels: Vec<PointSet>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidInput("schedule has no levels".into()));
        }
        for (i, l) in levels.iter().enumerate() {
            if l.dim() != domain.dim() {
                return Err(Error::InvalidInput(format!(
                    "level {i} dimension {} does not match domain dimension {}",
                    l.dim(),
                    domain.dim()
                )));
            }
            if l.is_empty() {
                return Err(Error::InvalidInput(format!("level {i} is empty")));
            }
            if let Some(p) = l.iter().find(|p| !domain.contains(p)) {
                return Err(Error::InvalidInput(format!(
                    "level {i} contains point {p:?} outside the domain"
                )));
            }
        }
        let nested = levels.windows(2).all(|w| w[0].is_exact_subset_of(&w[1]));
        Ok(Self { domain, levels, nested })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Per-axis point count of the endpoint dyadic family at `level`:
/// base points at level 0, gaps halved at each step.
pub fn dyadic_size(base: usize, level: usize) -> usize {
    (base - 1) * (1usize << level) + 1
}

/// Endpoint-including dyadic schedule: level l has (base-1)*2^l + 1 points
/// per axis, so the fill halves exactly from level to level.
///
/// All coordinates are computed against the finest denominator, which makes
/// the nesting exact in floating point, not just mathematically.
pub fn make_dyadic_schedule(
    domain: &BoxDomain,
    base: usize,
    levels: usize,
    max_points: usize,
) -> Result<NestedSchedule> {
    if base < 2 {
        return Err(Error::InvalidInput("dyadic schedule needs base >= 2".into()));
    }
    if levels == 0 {
        return Err(Error::InvalidInput("schedule needs at least one level".into()));
    }
    let dim = domain.dim();
    let finest_gaps = (base - 1)
        .checked_shl((levels - 1) as u32)
        .ok_or_else(|| Error::InvalidInput("schedule too deep".into()))?;
    let finest_per_axis = finest_gaps + 1;
    let finest_total = finest_per_axis.pow(dim as u32);
    if finest_total > max_points {
        return Err(Error::InvalidInput(format!(
            "finest level would have {finest_total} points, exceeding the cap of {max_points}"
        )));
    }
    let mut out = Vec::with_capacity(levels);
    for l in 0..levels {
        let stride = 1usize << (levels - 1 - l);
        let per_axis = dyadic_size(base, l);
        let axes: Vec<Vec<f64>> = (0..dim)
            .map(|k| {
                let (a, b) = (domain.lo[k], domain.hi[k]);
                (0..per_axis)
                    .map(|i| a + (b - a) * (i * stride) as f64 / finest_gaps as f64)
                    .collect()
            })
            .collect();
        out.push(tensor_product(&axes));
    }
    NestedSchedule::from_levels(domain.clone(), out)
}

/// Per-axis point count of the interior dyadic family at `level`.
pub fn interior_size(base: usize, level: usize) -> usize {
    (base + 1) * (1usize << level) - 1
}

/// Boundary-free dyadic schedule: level l has (base+1)*2^l - 1 interior
/// points per axis. Gaps between neighbors equal the gap to the boundary, so
/// the fill distance equals the spacing itself (times sqrt(dim) at the
/// corners in higher dimension) and again halves exactly per level.
pub fn make_interior_schedule(
    domain: &BoxDomain,
    base: usize,
    levels: usize,
    max_points: usize,
) -> Result<NestedSchedule> {
    if base < 2 {
        return Err(Error::InvalidInput("interior schedule needs base >= 2".into()));
    }
    if levels == 0 {
        return Err(Error::InvalidInput("schedule needs at least one level".into()));
    }
    let dim = domain.dim();
    let finest_gaps = (base + 1)
        .checked_shl((levels - 1) as u32)
        .ok_or_else(|| Error::InvalidInput("schedule too deep".into()))?;
    let finest_per_axis = finest_gaps - 1;
    let finest_total = finest_per_axis.pow(dim as u32);
    if finest_total > max_points {
        return Err(Error::InvalidInput(format!(
            "finest level would have {finest_total} points, exceeding the cap of {max_points}"
        )));
    }
    let mut out = Vec::with_capacity(levels);
    for l in 0..levels {
        let stride = 1usize << (levels - 1 - l);
        let per_axis = interior_size(base, l);
        let axes: Vec<Vec<f64>> = (0..dim)
            .map(|k| {
                let (a, b) = (domain.lo[k], domain.hi[k]);
                (1..=per_axis)
                    .map(|i| a + (b - a) * (i * stride) as f64 / finest_gaps as f64)
                    .collect()
            })
            .collect();
        out.push(tensor_product(&axes));
    }
    NestedSchedule::from_levels(domain.clone(), out)
}

/// One equispaced endpoint level per fill target: the coarsest grid whose
/// fill distance does not exceed the target. The resulting levels are
/// generally not nested.
pub fn make_quasi_uniform_schedule(
    domain: &BoxDomain,
    fill_targets: &[f64],
) -> Result<NestedSchedule> {
    if fill_targets.is_empty() {
        return Err(Error::InvalidInput("no fill targets given".into()));
    }
    if fill_targets.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidInput("fill targets must be positive".into()));
    }
    let dim = domain.dim();
    let mut levels = Vec::with_capacity(fill_targets.len());
    for &t in fill_targets {
        // Equispaced endpoint grid: per-axis fill (b-a)/(2(n-1)); in d
        // dimensions the corner of a cell is sqrt(d) times that.
        let mut per_axis = 2usize;
        for k in 0..dim {
            let extent = domain.hi[k] - domain.lo[k];
            let needed = (extent * (dim as f64).sqrt() / (2.0 * t) + 1.0).ceil() as usize;
            per_axis = per_axis.max(needed.max(2));
        }
        levels.push(domain.grid(per_axis));
    }
    NestedSchedule::from_levels(domain.clone(), levels)
}
