//! Low-dimensional convex geometry: boxes, vertex and halfspace polytopes,
//! rectangular partitions and the predicates the abstraction is built on.
//!
//! All sets are closed. Touching a boundary counts as intersecting.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Absolute tolerance on halfspace residuals.
pub const CONTAINMENT_TOL: f64 = 1e-9;

/// Largest dimension accepted by [`vhull_to_hrep`].
pub const MAX_HULL_DIM: usize = 6;

/// Singular value ratios below this are treated as exactly flat directions.
const FLAT_RATIO: f64 = 1e-12;
/// Ratios between `FLAT_RATIO` and this are numerically ambiguous.
const DEGENERATE_RATIO: f64 = 1e-9;
/// Upper limit on the number of candidate facet subsets.
const MAX_FACET_CANDIDATES: f64 = 2e7;

/// Axis-aligned box `[lower, upper]`. Flat boxes are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperRectangle {
    pub(crate) lower: Vec<f64>,
    pub(crate) upper: Vec<f64>,
}

impl HyperRectangle {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument(format!(
                "box bounds out of order: {lower:?} > {upper:?}"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// A box with both corners at `p`.
    pub fn point(p: &[f64]) -> Self {
        Self {
            lower: p.to_vec(),
            upper: p.to_vec(),
        }
    }

    pub(crate) fn new_unchecked(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        debug_assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// All `2^n` corners, first dimension varying fastest.
    pub fn vertices(&self) -> Vec<DVector<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                DVector::from_iterator(
                    n,
                    (0..n).map(|d| {
                        if mask >> d & 1 == 1 {
                            self.upper[d]
                        } else {
                            self.lower[d]
                        }
                    }),
                )
            })
            .collect()
    }

    /// Minkowski sum with another box.
    pub fn minkowski_sum(&self, other: &HyperRectangle) -> Result<HyperRectangle> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self {
            lower: add(&self.lower, &other.lower),
            upper: add(&self.upper, &other.upper),
        })
    }

    pub fn translate(&self, offset: &[f64]) -> HyperRectangle {
        Self {
            lower: add(&self.lower, offset),
            upper: add(&self.upper, offset),
        }
    }

    /// Smallest box enclosing both.
    pub fn hull(&self, other: &HyperRectangle) -> HyperRectangle {
        Self {
            lower: self
                .lower
                .iter()
                .zip(&other.lower)
                .map(|(a, b)| a.min(*b))
                .collect(),
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(a, b)| a.max(*b))
                .collect(),
        }
    }

    /// Halfspace representation with `2n` axis-aligned rows.
    pub fn to_hpolytope(&self) -> HPolytope {
        let n = self.dim();
        let mut normals = DMatrix::zeros(2 * n, n);
        let mut offsets = DVector::zeros(2 * n);
        for d in 0..n {
            normals[(2 * d, d)] = 1.0;
            offsets[2 * d] = self.upper[d];
            normals[(2 * d + 1, d)] = -1.0;
            offsets[2 * d + 1] = -self.lower[d];
        }
        HPolytope { normals, offsets }
    }

    pub fn to_vpolytope(&self) -> VPolytope {
        VPolytope {
            vertices: self.vertices(),
        }
    }
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Componentwise envelope of a point set.
pub fn bounding_box<'a, I>(points: I) -> Result<HyperRectangle>
where
    I: IntoIterator<Item = &'a DVector<f64>>,
{
    let mut iter = points.into_iter();
    let first = iter.next().ok_or(Error::NoPoints)?;
    let mut lower: Vec<f64> = first.iter().copied().collect();
    let mut upper = lower.clone();
    for p in iter {
        check_dim(lower.len(), p.len())?;
        for (d, v) in p.iter().enumerate() {
            lower[d] = lower[d].min(*v);
            upper[d] = upper[d].max(*v);
        }
    }
    Ok(HyperRectangle { lower, upper })
}

/// How box `a` sits relative to box `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxRelation {
    Disjoint,
    Intersects,
    Contained,
}

/// Relation of `a` to `b`: `Contained` if `a ⊆ b`, `Intersects` if the closed
/// boxes overlap otherwise, `Disjoint` if not.
pub fn box_relation(a: &HyperRectangle, b: &HyperRectangle) -> BoxRelation {
    debug_assert_eq!(a.dim(), b.dim());
    let mut contained = true;
    for d in 0..a.dim() {
        if a.upper[d] < b.lower[d] || a.lower[d] > b.upper[d] {
            return BoxRelation::Disjoint;
        }
        if a.lower[d] < b.lower[d] || a.upper[d] > b.upper[d] {
            contained = false;
        }
    }
    if contained {
        BoxRelation::Contained
    } else {
        BoxRelation::Intersects
    }
}

/// Convex hull of a finite vertex list.
#[derive(Debug, Clone, PartialEq)]
pub struct VPolytope {
    vertices: Vec<DVector<f64>>,
}

impl VPolytope {
    pub fn new(vertices: Vec<DVector<f64>>) -> Result<Self> {
        let first = vertices.first().ok_or(Error::NoPoints)?;
        let n = first.len();
        for v in &vertices {
            check_dim(n, v.len())?;
        }
        Ok(Self { vertices })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows.iter().map(|r| DVector::from_column_slice(r)).collect())
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    /// Removes exact duplicate vertices, keeping first occurrences in order.
    pub fn canonicalize(&self) -> VPolytope {
        let mut out: Vec<DVector<f64>> = Vec::with_capacity(self.vertices.len());
        for v in &self.vertices {
            if !out.iter().any(|w| w == v) {
                out.push(v.clone());
            }
        }
        VPolytope { vertices: out }
    }

    /// Arithmetic mean of the vertices.
    pub fn vertex_mean(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.dim());
        for v in &self.vertices {
            c += v;
        }
        c / self.vertices.len() as f64
    }

    pub fn bounding_box(&self) -> HyperRectangle {
        bounding_box(&self.vertices).expect("nonempty by construction")
    }
}

/// `{x : normals · x ≤ offsets}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HPolytope {
    normals: DMatrix<f64>,
    offsets: DVector<f64>,
}

impl HPolytope {
    pub fn new(normals: DMatrix<f64>, offsets: DVector<f64>) -> Result<Self> {
        check_dim(normals.nrows(), offsets.len())?;
        for row in normals.row_iter() {
            if row.iter().all(|v| *v == 0.0) {
                return Err(Error::InvalidArgument("zero halfspace normal".into()));
            }
        }
        Ok(Self { normals, offsets })
    }

    pub fn dim(&self) -> usize {
        self.normals.ncols()
    }

    pub fn num_halfspaces(&self) -> usize {
        self.normals.nrows()
    }

    pub fn normals(&self) -> &DMatrix<f64> {
        &self.normals
    }

    pub fn offsets(&self) -> &DVector<f64> {
        &self.offsets
    }

    /// Largest violation `max_i (H_i x - h_i)`; nonpositive means inside.
    pub fn max_residual(&self, x: &DVector<f64>) -> f64 {
        (&self.normals * x - &self.offsets).max()
    }

    pub fn contains_point(&self, x: &DVector<f64>) -> bool {
        self.max_residual(x) <= CONTAINMENT_TOL
    }
}

/// Halfspace form of the convex hull of `poly`, for dimensions up to
/// [`MAX_HULL_DIM`]. Lower-dimensional hulls get pairs of opposing rows for
/// each flat direction.
pub fn vhull_to_hrep(poly: &VPolytope) -> Result<HPolytope> {
    let n = poly.dim();
    if n > MAX_HULL_DIM {
        return Err(Error::DimensionTooLarge {
            dim: n,
            max: MAX_HULL_DIM,
        });
    }
    let pts = poly.canonicalize().vertices;
    let count = pts.len();
    let centroid = VPolytope {
        vertices: pts.clone(),
    }
    .vertex_mean();

    // Affine basis from the SVD of the centered point matrix.
    let mut centered = DMatrix::zeros(count.max(n), n);
    for (i, p) in pts.iter().enumerate() {
        centered.set_row(i, &(p - &centroid).transpose());
    }
    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let s_max = svd.singular_values.max();

    let mut spanning = Vec::new();
    let mut flat = Vec::new();
    for &k in &order {
        let s = svd.singular_values[k];
        let dir: DVector<f64> = v_t.row(k).transpose();
        if s_max == 0.0 || s / s_max < FLAT_RATIO {
            flat.push(dir);
        } else if s / s_max < DEGENERATE_RATIO {
            return Err(Error::DegenerateHull { ratio: s / s_max });
        } else {
            spanning.push(dir);
        }
    }

    let mut rows: Vec<DVector<f64>> = Vec::new();
    for w in flat {
        rows.push(w.clone());
        rows.push(-w);
    }

    let k = spanning.len();
    if k == 1 {
        rows.push(spanning[0].clone());
        rows.push(-spanning[0].clone());
    } else if k >= 2 {
        let basis = DMatrix::from_columns(&spanning);
        let projected: Vec<DVector<f64>> = pts
            .iter()
            .map(|p| basis.transpose() * (p - &centroid))
            .collect();
        for normal in facet_normals(&projected, k)? {
            rows.push(&basis * normal);
        }
    }

    // Offsets come from the original points so every vertex satisfies every row.
    let mut normals = DMatrix::zeros(rows.len(), n);
    let mut offsets = DVector::zeros(rows.len());
    for (i, a) in rows.iter().enumerate() {
        let a = a.normalize();
        offsets[i] = pts.iter().map(|p| a.dot(p)).fold(f64::NEG_INFINITY, f64::max);
        normals.set_row(i, &a.transpose());
    }
    Ok(HPolytope { normals, offsets })
}

/// Unit outward normals of the facets of a full-dimensional point set in `R^k`.
fn facet_normals(points: &[DVector<f64>], k: usize) -> Result<Vec<DVector<f64>>> {
    let count = points.len();
    let candidates = binomial(count, k);
    if candidates > MAX_FACET_CANDIDATES {
        return Err(Error::HullTooLarge(format!(
            "{count} points in dimension {k} give {candidates:.3e} facet candidates"
        )));
    }
    let scale = points
        .iter()
        .map(|p| p.amax())
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let tol = 1e-9 * scale;

    let mut found: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        if let Some(normal) = subset_normal(points, &subset) {
            let b = normal.dot(&points[subset[0]]);
            let (mut above, mut below) = (false, false);
            for p in points {
                let r = normal.dot(p) - b;
                above |= r > tol;
                below |= r < -tol;
                if above && below {
                    break;
                }
            }
            if !(above && below) {
                let (normal, b) = if above { (-normal, -b) } else { (normal, b) };
                let duplicate = found
                    .iter()
                    .any(|(m, c)| (m - &normal).amax() < 1e-9 && (c - b).abs() <= tol);
                if !duplicate {
                    found.push((normal, b));
                }
            }
        }
        if !next_subset(&mut subset, count) {
            break;
        }
    }
    Ok(found.into_iter().map(|(n, _)| n).collect())
}

/// Normal of the hyperplane through `k` points in `R^k`, if they are affinely independent.
fn subset_normal(points: &[DVector<f64>], subset: &[usize]) -> Option<DVector<f64>> {
    let k = subset.len();
    let base = &points[subset[0]];
    let mut diffs = DMatrix::zeros(k, k);
    for (r, &i) in subset[1..].iter().enumerate() {
        diffs.set_row(r, &(&points[i] - base).transpose());
    }
    // Pad with a zero row so the SVD exposes the full right null space.
    let svd = diffs.svd(false, true);
    let v_t = svd.v_t?;
    let s = &svd.singular_values;
    let s_max = s.max();
    if s_max == 0.0 {
        return None;
    }
    let mut small = (0..k).filter(|&i| s[i] <= 1e-10 * s_max);
    let null = small.next()?;
    if small.next().is_some() {
        return None;
    }
    Some(v_t.row(null).transpose().normalize())
}

fn next_subset(subset: &mut [usize], count: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < count - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// True iff every corner of `b` satisfies every halfspace of `poly` within
/// [`CONTAINMENT_TOL`]. Evaluated per row through the box support function.
pub fn polytope_contains_box(poly: &HPolytope, b: &HyperRectangle) -> Result<bool> {
    check_dim(poly.dim(), b.dim())?;
    for (row, h) in poly.normals.row_iter().zip(poly.offsets.iter()) {
        let support: f64 = row
            .iter()
            .enumerate()
            .map(|(d, a)| if *a > 0.0 { a * b.upper[d] } else { a * b.lower[d] })
            .sum();
        if support > h + CONTAINMENT_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Rectangular regions covering a box-shaped domain. Region `i` is abstract
/// state `i + 1`; state 0 stands for everything outside the domain.
#[derive(Debug, Clone)]
pub struct Partition {
    regions: Vec<HyperRectangle>,
    domain: HyperRectangle,
    goal_mask: Vec<bool>,
    unsafe_mask: Vec<bool>,
    safe_domain: Option<HyperRectangle>,
    grid: Option<Grid>,
}

#[derive(Debug, Clone)]
struct Grid {
    counts: Vec<usize>,
    /// Per dimension, `counts[d] + 1` cell boundaries; neighbours share them exactly.
    edges: Vec<Vec<f64>>,
    /// Row-major strides, last dimension fastest.
    strides: Vec<usize>,
}

impl Grid {
    fn cell_of(&self, d: usize, v: f64) -> Option<usize> {
        let e = &self.edges[d];
        if v < e[0] || v > e[e.len() - 1] {
            return None;
        }
        let n = self.counts[d];
        let w = (e[n] - e[0]) / n as f64;
        let mut k = (((v - e[0]) / w).floor().max(0.0) as usize).min(n - 1);
        // Correct floating-point drift against the stored edges.
        while k > 0 && v < e[k] {
            k -= 1;
        }
        while k + 1 < n && v >= e[k + 1] {
            k += 1;
        }
        Some(k)
    }

    /// Cell index range along `d` whose closed intervals may meet `[lo, hi]`.
    fn candidate_range(&self, d: usize, lo: f64, hi: f64) -> (usize, usize) {
        let e = &self.edges[d];
        let n = self.counts[d];
        let w = (e[n] - e[0]) / n as f64;
        let a = ((lo - e[0]) / w).floor() - 1.0;
        let b = ((hi - e[0]) / w).floor() + 1.0;
        let a = a.clamp(0.0, (n - 1) as f64) as usize;
        let b = b.clamp(0.0, (n - 1) as f64) as usize;
        (a, b)
    }
}

impl Partition {
    /// Uniform grid over `domain`. A cell is a goal region iff it lies inside
    /// `goal`; it is unsafe iff its interior meets an exclusion box.
    pub fn grid(
        domain: HyperRectangle,
        counts: &[usize],
        goal: Option<&HyperRectangle>,
        unsafe_exclusions: &[HyperRectangle],
    ) -> Result<Self> {
        let n = domain.dim();
        check_dim(n, counts.len())?;
        if n > MAX_HULL_DIM {
            return Err(Error::DimensionTooLarge {
                dim: n,
                max: MAX_HULL_DIM,
            });
        }
        if counts.iter().any(|c| *c == 0) {
            return Err(Error::InvalidPartition("cell count must be at least 1".into()));
        }
        if domain.widths().iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidPartition("zero-width domain dimension".into()));
        }
        if let Some(g) = goal {
            check_dim(n, g.dim())?;
        }
        for ex in unsafe_exclusions {
            check_dim(n, ex.dim())?;
        }

        let edges: Vec<Vec<f64>> = (0..n)
            .map(|d| {
                let (lo, hi, c) = (domain.lower[d], domain.upper[d], counts[d]);
                (0..=c)
                    .map(|k| {
                        if k == c {
                            hi
                        } else {
                            lo + (hi - lo) * k as f64 / c as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let mut strides = vec![1usize; n];
        for d in (0..n.saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * counts[d + 1];
        }
        let total: usize = counts.iter().product();

        let mut regions = Vec::with_capacity(total);
        let mut idx = vec![0usize; n];
        for flat in 0..total {
            let mut rem = flat;
            for d in 0..n {
                idx[d] = rem / strides[d];
                rem %= strides[d];
            }
            regions.push(HyperRectangle {
                lower: (0..n).map(|d| edges[d][idx[d]]).collect(),
                upper: (0..n).map(|d| edges[d][idx[d] + 1]).collect(),
            });
        }

        let unsafe_mask: Vec<bool> = regions
            .iter()
            .map(|r| unsafe_exclusions.iter().any(|ex| interiors_meet(r, ex)))
            .collect();
        let goal_mask = regions
            .iter()
            .zip(&unsafe_mask)
            .map(|(r, bad)| {
                !bad && goal.is_some_and(|g| box_relation(r, g) == BoxRelation::Contained)
            })
            .collect();

        Ok(Self {
            regions,
            domain,
            goal_mask,
            unsafe_mask,
            safe_domain: None,
            grid: Some(Grid {
                counts: counts.to_vec(),
                edges,
                strides,
            }),
        })
    }

    /// Partition from explicit regions. Regions must lie inside the domain and
    /// have pairwise disjoint interiors; coverage is checked by volume.
    pub fn from_regions(
        domain: HyperRectangle,
        regions: Vec<HyperRectangle>,
        goal: Option<&HyperRectangle>,
    ) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::InvalidPartition("no regions".into()));
        }
        for r in &regions {
            check_dim(domain.dim(), r.dim())?;
            if box_relation(r, &domain) != BoxRelation::Contained {
                return Err(Error::InvalidPartition("region outside domain".into()));
            }
        }
        for i in 0..regions.len() {
            for j in i + 1..regions.len() {
                if interiors_meet(&regions[i], &regions[j]) {
                    return Err(Error::InvalidPartition(format!(
                        "regions {i} and {j} overlap"
                    )));
                }
            }
        }
        let covered: f64 = regions.iter().map(HyperRectangle::volume).sum();
        let whole = domain.volume();
        if (covered - whole).abs() > 1e-12 * whole.max(1.0) {
            return Err(Error::InvalidPartition(format!(
                "regions cover volume {covered}, domain has {whole}"
            )));
        }
        let goal_mask = regions
            .iter()
            .map(|r| goal.is_some_and(|g| box_relation(r, g) == BoxRelation::Contained))
            .collect();
        let unsafe_mask = vec![false; regions.len()];
        Ok(Self {
            regions,
            domain,
            goal_mask,
            unsafe_mask,
            safe_domain: None,
            grid: None,
        })
    }

    /// Records the safe set the domain was carved from (informational).
    pub fn with_safe_domain(mut self, safe: HyperRectangle) -> Self {
        self.safe_domain = Some(safe);
        self
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Number of regions `L`.
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn regions(&self) -> &[HyperRectangle] {
        &self.regions
    }

    /// Region of abstract state `s >= 1`.
    pub fn region_of_state(&self, s: usize) -> &HyperRectangle {
        &self.regions[s - 1]
    }

    pub fn domain(&self) -> &HyperRectangle {
        &self.domain
    }

    pub fn safe_domain(&self) -> Option<&HyperRectangle> {
        self.safe_domain.as_ref()
    }

    pub fn goal_mask(&self) -> &[bool] {
        &self.goal_mask
    }

    pub fn unsafe_mask(&self) -> &[bool] {
        &self.unsafe_mask
    }

    pub fn grid_shape(&self) -> Option<&[usize]> {
        self.grid.as_ref().map(|g| g.counts.as_slice())
    }

    /// Abstract state of `x`: 0 outside the domain, otherwise region index + 1.
    /// Points on shared faces go to the cell with the larger index.
    pub fn state_of(&self, x: &[f64]) -> usize {
        if !self.domain.contains_point(x) {
            return 0;
        }
        match &self.grid {
            Some(g) => {
                let mut flat = 0;
                for (d, v) in x.iter().enumerate() {
                    match g.cell_of(d, *v) {
                        Some(k) => flat += k * g.strides[d],
                        None => return 0,
                    }
                }
                flat + 1
            }
            None => self
                .regions
                .iter()
                .position(|r| r.contains_point(x))
                .map_or(0, |i| i + 1),
        }
    }

    /// Calls `f(state, contained)` for every region the closed box `b` meets,
    /// where `contained` tells whether `b` lies inside that region.
    pub fn for_each_overlap<F: FnMut(usize, bool)>(&self, b: &HyperRectangle, mut f: F) {
        let n = self.dim();
        let Some(g) = &self.grid else {
            for (i, r) in self.regions.iter().enumerate() {
                match box_relation(b, r) {
                    BoxRelation::Disjoint => {}
                    rel => f(i + 1, rel == BoxRelation::Contained),
                }
            }
            return;
        };
        // Per dimension, the contiguous range of cells whose closed interval meets the box.
        let mut first = [0usize; MAX_HULL_DIM];
        let mut last = [0usize; MAX_HULL_DIM];
        for d in 0..n {
            let (lo, hi) = (b.lower[d], b.upper[d]);
            let e = &g.edges[d];
            if hi < e[0] || lo > e[e.len() - 1] {
                return;
            }
            let (mut a, mut z) = g.candidate_range(d, lo, hi);
            while a < z && e[a + 1] < lo {
                a += 1;
            }
            while z > a && e[z] > hi {
                z -= 1;
            }
            first[d] = a;
            last[d] = z;
        }
        let mut idx = first;
        loop {
            let mut flat = 0;
            let mut contained = true;
            for d in 0..n {
                let k = idx[d];
                flat += k * g.strides[d];
                let e = &g.edges[d];
                contained &= e[k] <= b.lower[d] && b.upper[d] <= e[k + 1];
            }
            f(flat + 1, contained);
            let mut d = n;
            loop {
                if d == 0 {
                    return;
                }
                d -= 1;
                if idx[d] < last[d] {
                    idx[d] += 1;
                    break;
                }
                idx[d] = first[d];
            }
        }
    }
}

fn interiors_meet(a: &HyperRectangle, b: &HyperRectangle) -> bool {
    (0..a.dim()).all(|d| a.lower[d] < b.upper[d] && b.lower[d] < a.upper[d])
}
