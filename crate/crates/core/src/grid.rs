//! Gridded bounded domains in C^n: uniform real grids in 2n coordinates,
//! interior/boundary masks rasterized from analytic shape descriptions, and
//! the mask morphology the rest of the library leans on.
//!
//! Coordinate layout: real coordinate 2j is Re z_j, coordinate 2j+1 is
//! Im z_j. All grids share a single spacing h and place nodes at integer
//! multiples of h, so domains built at the same h align node-for-node.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Maximum number of real coordinates (complex dimension 4).
pub const MAX_REAL_DIM: usize = 8;

/// Fixed-capacity point buffer; only the first `2n` entries are meaningful.
pub type Coords<T> = [T; MAX_REAL_DIM];

/// Plain bit set over grid cells with the shifted-or dilation primitive.
#[derive(Clone, Debug, PartialEq)]
pub struct Bitset {
    words: Vec<u64>,
    len: usize,
}

impl Bitset {
    pub fn new(len: usize) -> Self {
        Bitset {
            words: vec![0u64; (len + 63) / 64],
            len,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        let w = &mut self.words[i >> 6];
        if v {
            *w |= 1u64 << (i & 63);
        } else {
            *w &= !(1u64 << (i & 63));
        }
    }

    pub fn clear(&mut self) {
        for w in self.words.iter_mut() {
            *w = 0;
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// `self |= other << shift` (bitwise, shift may be negative).
    pub fn or_shifted(&mut self, other: &Bitset, shift: isize) {
        let nw = self.words.len();
        if shift == 0 {
            for i in 0..nw {
                self.words[i] |= other.words[i];
            }
            return;
        }
        let (q, r) = (shift.div_euclid(64), shift.rem_euclid(64) as u32);
        for i in 0..nw {
            let src = i as isize - q;
            let lo = if (0..nw as isize).contains(&src) {
                other.words[src as usize]
            } else {
                0
            };
            let hi = if r > 0 && (0..nw as isize).contains(&(src - 1)) {
                other.words[(src - 1) as usize]
            } else {
                0
            };
            let v = if r == 0 { lo } else { (lo << r) | (hi >> (64 - r)) };
            self.words[i] |= v;
        }
    }

    pub fn and_not(&mut self, other: &Bitset) {
        for (w, o) in self.words.iter_mut().zip(&other.words) {
            *w &= !o;
        }
    }

    pub fn and(&mut self, other: &Bitset) {
        for (w, o) in self.words.iter_mut().zip(&other.words) {
            *w &= o;
        }
    }

    pub fn or(&mut self, other: &Bitset) {
        for (w, o) in self.words.iter_mut().zip(&other.words) {
            *w |= o;
        }
    }

    /// Indices of set bits, ascending.
    pub fn ones(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.count());
        for (wi, &w) in self.words.iter().enumerate() {
            let mut bits = w;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                let idx = (wi << 6) | b;
                if idx < self.len {
                    out.push(idx);
                }
                bits &= bits - 1;
            }
        }
        out
    }

    /// Checksum used in field dumps to pin mask identity.
    pub fn checksum(&self) -> u64 {
        let mut acc: u64 = 0xcbf29ce484222325;
        for &w in &self.words {
            acc ^= w;
            acc = acc.wrapping_mul(0x100000001b3);
        }
        acc ^ self.len as u64
    }
}

/// Catalogue of analytic domain shapes.
#[derive(Clone, Debug, PartialEq)]
pub enum ShapeSpec<T: Scalar> {
    /// |z - center| < radius
    Ball { n: usize, radius: T, center: Vec<T> },
    /// |z_j| < r_j for all j
    Polydisc { n: usize, radii: Vec<T> },
    /// {(z,w) in C^2 : |z| < |w| < 1}
    HartogsTriangle,
    /// Balanced Reinhardt domain: |z_j| < 1 for all j and
    /// sum_{j<n} |z_j|^2 + (1 - n/k)|z_n|^2 < 1.
    Reinhardt { n: usize, k: usize },
    /// Real box |x_i| < half_widths[i] in each of the 2n real coordinates.
    Box { n: usize, half_widths: Vec<T> },
    /// Cartesian product (complex dimensions add).
    Product(std::boxed::Box<ShapeSpec<T>>, std::boxed::Box<ShapeSpec<T>>),
    /// Intersection of two shapes of the same dimension.
    Intersection(std::boxed::Box<ShapeSpec<T>>, std::boxed::Box<ShapeSpec<T>>),
}

impl<T: Scalar> ShapeSpec<T> {
    pub fn n(&self) -> usize {
        match self {
            ShapeSpec::Ball { n, .. } => *n,
            ShapeSpec::Polydisc { n, .. } => *n,
            ShapeSpec::HartogsTriangle => 2,
            ShapeSpec::Reinhardt { n, .. } => *n,
            ShapeSpec::Box { n, .. } => *n,
            ShapeSpec::Product(a, b) => a.n() + b.n(),
            ShapeSpec::Intersection(a, _) => a.n(),
        }
    }

    pub fn id(&self) -> String {
        match self {
            ShapeSpec::Ball { n, radius, .. } => {
                format!("ball(n={n},r={})", radius.to_f64_lossy())
            }
            ShapeSpec::Polydisc { n, .. } => format!("polydisc(n={n})"),
            ShapeSpec::HartogsTriangle => "hartogs_triangle".to_string(),
            ShapeSpec::Reinhardt { n, k } => format!("reinhardt(n={n},k={k})"),
            ShapeSpec::Box { n, .. } => format!("box(n={n})"),
            ShapeSpec::Product(a, b) => format!("product({},{})", a.id(), b.id()),
            ShapeSpec::Intersection(a, b) => format!("intersection({},{})", a.id(), b.id()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ShapeSpec::Ball { n, radius, center } => {
                if *radius <= T::zero() {
                    return Err(Error::validation("ball radius must be positive"));
                }
                if center.len() != 2 * n {
                    return Err(Error::validation("ball center needs 2n real coordinates"));
                }
            }
            ShapeSpec::Polydisc { n, radii } => {
                if radii.len() != *n || radii.iter().any(|r| *r <= T::zero()) {
                    return Err(Error::validation("polydisc needs n positive radii"));
                }
            }
            ShapeSpec::HartogsTriangle => {}
            ShapeSpec::Reinhardt { n, k } => {
                if *k == 0 || k > n {
                    return Err(Error::validation("reinhardt index k must satisfy 1 <= k <= n"));
                }
            }
            ShapeSpec::Box { n, half_widths } => {
                if half_widths.len() != 2 * n || half_widths.iter().any(|w| *w <= T::zero()) {
                    return Err(Error::validation("box needs 2n positive half widths"));
                }
            }
            ShapeSpec::Product(a, b) => {
                a.validate()?;
                b.validate()?;
                if a.n() + b.n() > MAX_REAL_DIM / 2 {
                    return Err(Error::validation("product dimension exceeds supported range"));
                }
            }
            ShapeSpec::Intersection(a, b) => {
                a.validate()?;
                b.validate()?;
                if a.n() != b.n() {
                    return Err(Error::validation("intersection needs equal dimensions"));
                }
            }
        }
        Ok(())
    }

    /// Strict interior predicate at a real point.
    pub fn contains(&self, p: &[T]) -> bool {
        match self {
            ShapeSpec::Ball { n, radius, center } => {
                let mut d = T::zero();
                for i in 0..(2 * n) {
                    let t = p[i] - center[i];
                    d = d + t * t;
                }
                d < *radius * *radius
            }
            ShapeSpec::Polydisc { n, radii } => (0..*n).all(|j| {
                let r2 = p[2 * j] * p[2 * j] + p[2 * j + 1] * p[2 * j + 1];
                r2 < radii[j] * radii[j]
            }),
            ShapeSpec::HartogsTriangle => {
                let z2 = p[0] * p[0] + p[1] * p[1];
                let w2 = p[2] * p[2] + p[3] * p[3];
                z2 < w2 && w2 < T::one()
            }
            ShapeSpec::Reinhardt { n, k } => {
                let mut phi = T::zero();
                for j in 0..*n {
                    let r2 = p[2 * j] * p[2 * j] + p[2 * j + 1] * p[2 * j + 1];
                    if r2 >= T::one() {
                        return false;
                    }
                    let coeff = if j + 1 == *n {
                        T::one() - T::of(*n as f64) / T::of(*k as f64)
                    } else {
                        T::one()
                    };
                    phi = phi + coeff * r2;
                }
                phi < T::one()
            }
            ShapeSpec::Box { n, half_widths } => {
                (0..(2 * n)).all(|i| p[i].abs() < half_widths[i])
            }
            ShapeSpec::Product(a, b) => {
                a.contains(&p[..2 * a.n()]) && b.contains(&p[2 * a.n()..])
            }
            ShapeSpec::Intersection(a, b) => a.contains(p) && b.contains(p),
        }
    }

    /// Per-real-coordinate bounding interval of the closure.
    pub fn bounding_box(&self) -> Vec<(T, T)> {
        match self {
            ShapeSpec::Ball { n, radius, center } => (0..(2 * n))
                .map(|i| (center[i] - *radius, center[i] + *radius))
                .collect(),
            ShapeSpec::Polydisc { n, radii } => (0..(2 * n))
                .map(|i| (-radii[i / 2], radii[i / 2]))
                .collect(),
            ShapeSpec::HartogsTriangle => vec![(-T::one(), T::one()); 4],
            ShapeSpec::Reinhardt { n, .. } => vec![(-T::one(), T::one()); 2 * n],
            ShapeSpec::Box { n, half_widths } => {
                (0..(2 * n)).map(|i| (-half_widths[i], half_widths[i])).collect()
            }
            ShapeSpec::Product(a, b) => {
                let mut bb = a.bounding_box();
                bb.extend(b.bounding_box());
                bb
            }
            ShapeSpec::Intersection(a, b) => a
                .bounding_box()
                .into_iter()
                .zip(b.bounding_box())
                .map(|((lo1, hi1), (lo2, hi2))| (lo1.max(lo2), hi1.min(hi2)))
                .collect(),
        }
    }
}

/// One real grid axis: nodes at `(min_index + i) * h` for `i < count`.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub min_index: i64,
    pub count: usize,
}

/// A rasterized bounded domain with interior and boundary masks.
///
/// The boundary mask is the set of non-interior nodes within Chebyshev
/// distance 1 of the interior, so every centered second-difference stencil of
/// an interior node stays inside `interior | boundary`.
#[derive(Clone, Debug)]
pub struct Domain<T: Scalar> {
    shape: ShapeSpec<T>,
    n: usize,
    h: T,
    axes: Vec<Axis>,
    strides: Vec<usize>,
    cells: usize,
    interior: Bitset,
    boundary: Bitset,
    interior_points: Vec<u32>,
    boundary_points: Vec<u32>,
}

/// Hard cap on grid cells, guarding against accidental huge allocations.
const MAX_CELLS: usize = 300_000_000;

impl<T: Scalar> Domain<T> {
    /// Rasterizes a shape at spacing h. Fails on empty or disconnected
    /// interiors.
    pub fn new(shape: ShapeSpec<T>, h: T) -> Result<Self> {
        shape.validate()?;
        if h <= T::zero() {
            return Err(Error::validation("grid spacing must be positive"));
        }
        let n = shape.n();
        let dims = 2 * n;
        let bb = shape.bounding_box();

        // axes with a 2-node margin so dilation never wraps
        let mut axes = Vec::with_capacity(dims);
        let mut cells: usize = 1;
        for (lo, hi) in &bb {
            let lo_i = (lo.to_f64_lossy() / h.to_f64_lossy()).floor() as i64 - 2;
            let hi_i = (hi.to_f64_lossy() / h.to_f64_lossy()).ceil() as i64 + 2;
            let count = (hi_i - lo_i + 1) as usize;
            cells = cells
                .checked_mul(count)
                .ok_or_else(|| Error::validation("grid too large"))?;
            axes.push(Axis {
                min_index: lo_i,
                count,
            });
        }
        if cells > MAX_CELLS {
            return Err(Error::validation(format!(
                "grid would need {cells} cells (cap {MAX_CELLS}); increase h"
            )));
        }
        let mut strides = vec![0usize; dims];
        let mut s = 1usize;
        for d in (0..dims).rev() {
            strides[d] = s;
            s *= axes[d].count;
        }

        // rasterize
        let mut interior = Bitset::new(cells);
        {
            let mut idx = vec![0usize; dims];
            let mut p: Coords<T> = [T::zero(); MAX_REAL_DIM];
            let mut flat = 0usize;
            'outer: loop {
                for d in 0..dims {
                    p[d] = T::of((axes[d].min_index + idx[d] as i64) as f64) * h;
                }
                if shape.contains(&p[..dims]) {
                    interior.set(flat, true);
                }
                // odometer increment
                let mut d = dims;
                loop {
                    if d == 0 {
                        break 'outer;
                    }
                    d -= 1;
                    idx[d] += 1;
                    flat += strides[d];
                    if idx[d] < axes[d].count {
                        break;
                    }
                    flat -= strides[d] * axes[d].count;
                    idx[d] = 0;
                }
            }
        }

        let interior_points: Vec<u32> = interior.ones().iter().map(|&i| i as u32).collect();
        if interior_points.is_empty() {
            return Err(Error::EmptyInterior);
        }

        // face-connectivity flood fill
        {
            let mut seen = Bitset::new(cells);
            let mut stack = vec![interior_points[0] as usize];
            seen.set(interior_points[0] as usize, true);
            let mut visited = 0usize;
            while let Some(p) = stack.pop() {
                visited += 1;
                for d in 0..dims {
                    for q in [p.wrapping_sub(strides[d]), p + strides[d]] {
                        if q < cells && interior.get(q) && !seen.get(q) {
                            seen.set(q, true);
                            stack.push(q);
                        }
                    }
                }
            }
            if visited != interior_points.len() {
                return Err(Error::DisconnectedInterior { components: 2 });
            }
        }

        // boundary = Chebyshev-1 dilation of interior, minus interior
        let mut boundary = dilate_chebyshev(&interior, &strides, &axes);
        boundary.and_not(&interior);
        let boundary_points: Vec<u32> = boundary.ones().iter().map(|&i| i as u32).collect();

        Ok(Domain {
            shape,
            n,
            h,
            axes,
            strides,
            cells,
            interior,
            boundary,
            interior_points,
            boundary_points,
        })
    }

    pub fn shape(&self) -> &ShapeSpec<T> {
        &self.shape
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> usize {
        2 * self.n
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn interior(&self) -> &Bitset {
        &self.interior
    }

    pub fn boundary(&self) -> &Bitset {
        &self.boundary
    }

    pub fn interior_points(&self) -> &[u32] {
        &self.interior_points
    }

    pub fn boundary_points(&self) -> &[u32] {
        &self.boundary_points
    }

    #[inline]
    pub fn is_masked(&self, flat: usize) -> bool {
        self.interior.get(flat) || self.boundary.get(flat)
    }

    /// Real coordinates of a flat index, written into a fixed buffer.
    #[inline]
    pub fn point_into(&self, flat: usize, out: &mut Coords<T>) {
        let mut rem = flat;
        for d in 0..self.dims() {
            let i = rem / self.strides[d];
            rem %= self.strides[d];
            out[d] = T::of((self.axes[d].min_index + i as i64) as f64) * self.h;
        }
    }

    pub fn point_of(&self, flat: usize) -> Coords<T> {
        let mut p = [T::zero(); MAX_REAL_DIM];
        self.point_into(flat, &mut p);
        p
    }

    /// Flat index of the grid node nearest to a real point, if inside the box.
    pub fn flat_of_point(&self, p: &[T]) -> Option<usize> {
        let mut flat = 0usize;
        for d in 0..self.dims() {
            let i = (p[d].to_f64_lossy() / self.h.to_f64_lossy()).round() as i64
                - self.axes[d].min_index;
            if i < 0 || i as usize >= self.axes[d].count {
                return None;
            }
            flat += i as usize * self.strides[d];
        }
        Some(flat)
    }

    /// Offset in flat-index units of a multi-offset in grid steps.
    #[inline]
    pub fn flat_offset(&self, steps: &[i32]) -> isize {
        let mut off = 0isize;
        for (d, &s) in steps.iter().enumerate() {
            off += s as isize * self.strides[d] as isize;
        }
        off
    }

    /// Structural identity: same shape, spacing, and masks.
    pub fn same_grid(&self, other: &Domain<T>) -> bool {
        self.n == other.n
            && self.h == other.h
            && self.axes == other.axes
            && self.interior.checksum() == other.interior.checksum()
            && self.boundary.checksum() == other.boundary.checksum()
    }

    /// Face-BFS distance (L1 in grid steps, scaled by h) from every masked
    /// node to the boundary mask. Unmasked cells get T::infinity().
    pub fn distance_to_boundary(&self) -> Vec<T> {
        let mut dist = vec![u32::MAX; self.cells];
        let mut queue: std::collections::VecDeque<u32> =
            self.boundary_points.iter().copied().collect();
        for &b in &self.boundary_points {
            dist[b as usize] = 0;
        }
        while let Some(p) = queue.pop_front() {
            let p = p as usize;
            let d0 = dist[p];
            for d in 0..self.dims() {
                for q in [p.wrapping_sub(self.strides[d]), p + self.strides[d]] {
                    if q < self.cells && self.interior.get(q) && dist[q] == u32::MAX {
                        dist[q] = d0 + 1;
                        queue.push_back(q as u32);
                    }
                }
            }
        }
        dist.into_iter()
            .map(|d| {
                if d == u32::MAX {
                    T::infinity()
                } else {
                    T::of(d as f64) * self.h
                }
            })
            .collect()
    }

    /// Chebyshev dilation of a mask by `rings` (clipped to the grid box).
    pub fn dilate(&self, mask: &Bitset, rings: usize) -> Bitset {
        let mut out = mask.clone();
        for _ in 0..rings {
            out = dilate_chebyshev(&out, &self.strides, &self.axes);
        }
        out
    }

    /// Face (L1) dilation of a mask by `rings`: reaches Euclidean distance
    /// at most `rings * h`.
    pub fn dilate_face(&self, mask: &Bitset, rings: usize) -> Bitset {
        let mut out = mask.clone();
        for _ in 0..rings {
            let cur = out.clone();
            for &s in &self.strides {
                out.or_shifted(&cur, s as isize);
                out.or_shifted(&cur, -(s as isize));
            }
        }
        out
    }

    /// A point on the analytic shape boundary near a boundary node, found by
    /// bisecting the segment toward an adjacent interior node.
    pub fn project_to_boundary(&self, boundary_flat: usize) -> Coords<T> {
        let dims = self.dims();
        let mut b: Coords<T> = [T::zero(); MAX_REAL_DIM];
        self.point_into(boundary_flat, &mut b);
        // find an interior Chebyshev neighbor
        let mut inner: Option<Coords<T>> = None;
        'scan: for off in chebyshev_offsets(dims) {
            let mut q = boundary_flat as isize;
            for (d, &o) in off.iter().enumerate() {
                q += o as isize * self.strides[d] as isize;
            }
            if q >= 0 && (q as usize) < self.cells && self.interior.get(q as usize) {
                let mut p: Coords<T> = [T::zero(); MAX_REAL_DIM];
                self.point_into(q as usize, &mut p);
                inner = Some(p);
                break 'scan;
            }
        }
        let Some(inner) = inner else {
            return b;
        };
        // predicate flips between inner (true) and b (false)
        let mut lo = T::zero(); // at inner
        let mut hi = T::one(); // at b
        let mut mid_pt: Coords<T> = [T::zero(); MAX_REAL_DIM];
        for _ in 0..48 {
            let mid = (lo + hi) * T::of(0.5);
            for d in 0..dims {
                mid_pt[d] = inner[d] + (b[d] - inner[d]) * mid;
            }
            if self.shape.contains(&mid_pt[..dims]) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        for d in 0..dims {
            mid_pt[d] = inner[d] + (b[d] - inner[d]) * hi;
        }
        mid_pt
    }

    /// Nodes of `mask` with a face neighbor outside `mask` but inside
    /// `within` (the inner boundary ring of a region).
    pub fn inner_ring(&self, mask: &Bitset, within: &Bitset) -> Vec<usize> {
        let mut out = Vec::new();
        for &p in &self.interior_points {
            let p = p as usize;
            if !mask.get(p) {
                continue;
            }
            let mut ring = false;
            for d in 0..self.dims() {
                for q in [p.wrapping_sub(self.strides[d]), p + self.strides[d]] {
                    if q < self.cells && within.get(q) && !mask.get(q) {
                        ring = true;
                    }
                }
            }
            if ring {
                out.push(p);
            }
        }
        out
    }
}

/// Signed Chebyshev-1 offset vectors (excluding the origin) in `dims` axes.
fn chebyshev_offsets(dims: usize) -> Vec<Vec<i32>> {
    let mut out = vec![vec![]];
    for _ in 0..dims {
        let mut next = Vec::with_capacity(out.len() * 3);
        for v in &out {
            for s in [-1, 0, 1] {
                let mut w = v.clone();
                w.push(s);
                next.push(w);
            }
        }
        out = next;
    }
    out.retain(|v| v.iter().any(|&s| s != 0));
    out
}

/// One Chebyshev ring: separable dilation along each axis by +-1 step.
fn dilate_chebyshev(mask: &Bitset, strides: &[usize], axes: &[Axis]) -> Bitset {
    let mut out = mask.clone();
    debug_assert_eq!(strides.len(), axes.len());
    for &s in strides {
        let cur = out.clone();
        out.or_shifted(&cur, s as isize);
        out.or_shifted(&cur, -(s as isize));
    }
    out
}

/// Builders for the shape catalogue (radius/center defaults included).
pub mod shapes {
    use super::*;

    pub fn ball<T: Scalar>(n: usize, radius: f64) -> ShapeSpec<T> {
        ShapeSpec::Ball {
            n,
            radius: T::of(radius),
            center: vec![T::zero(); 2 * n],
        }
    }

    pub fn disc<T: Scalar>(radius: f64) -> ShapeSpec<T> {
        ball(1, radius)
    }

    pub fn polydisc<T: Scalar>(radii: &[f64]) -> ShapeSpec<T> {
        ShapeSpec::Polydisc {
            n: radii.len(),
            radii: radii.iter().map(|&r| T::of(r)).collect(),
        }
    }

    pub fn hartogs_triangle<T: Scalar>() -> ShapeSpec<T> {
        ShapeSpec::HartogsTriangle
    }

    pub fn reinhardt<T: Scalar>(n: usize, k: usize) -> ShapeSpec<T> {
        ShapeSpec::Reinhardt { n, k }
    }

    pub fn real_box<T: Scalar>(half_widths: &[f64]) -> ShapeSpec<T> {
        ShapeSpec::Box {
            n: half_widths.len() / 2,
            half_widths: half_widths.iter().map(|&w| T::of(w)).collect(),
        }
    }

    pub fn product<T: Scalar>(a: ShapeSpec<T>, b: ShapeSpec<T>) -> ShapeSpec<T> {
        ShapeSpec::Product(std::boxed::Box::new(a), std::boxed::Box::new(b))
    }

    pub fn intersection<T: Scalar>(a: ShapeSpec<T>, b: ShapeSpec<T>) -> ShapeSpec<T> {
        ShapeSpec::Intersection(std::boxed::Box::new(a), std::boxed::Box::new(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitset_shifted_or() {
        let mut a = Bitset::new(200);
        a.set(100, true);
        let mut b = Bitset::new(200);
        b.or_shifted(&a, 3);
        b.or_shifted(&a, -65);
        assert!(b.get(103));
        assert!(b.get(35));
        assert_eq!(b.count(), 2);
    }

    #[test]
    fn disc_domain_masks() {
        let d = Domain::new(shapes::disc::<f64>(1.0), 0.05).unwrap();
        assert_eq!(d.n(), 1);
        // interior nodes strictly inside the circle
        let mut p = [0.0; MAX_REAL_DIM];
        for &i in d.interior_points() {
            d.point_into(i as usize, &mut p);
            assert!(p[0] * p[0] + p[1] * p[1] < 1.0);
        }
        // boundary forms a ring: every boundary node has an interior
        // Chebyshev neighbor and is outside the disc or within one cell of it
        for &b in d.boundary_points() {
            d.point_into(b as usize, &mut p);
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!(r >= 1.0 - 0.05 * 1.5 && r <= 1.0 + 0.05 * 1.5, "r={r}");
        }
        // area sanity: pi r^2 within a few percent
        let area = d.interior_points().len() as f64 * 0.05 * 0.05;
        assert!((area - std::f64::consts::PI).abs() < 0.05);
    }

    #[test]
    fn hartogs_interior_inequalities() {
        let d = Domain::new(shapes::hartogs_triangle::<f64>(), 0.1).unwrap();
        let mut p = [0.0; MAX_REAL_DIM];
        for &i in d.interior_points() {
            d.point_into(i as usize, &mut p);
            let z2 = p[0] * p[0] + p[1] * p[1];
            let w2 = p[2] * p[2] + p[3] * p[3];
            assert!(z2 < w2 && w2 < 1.0);
        }
        // origin is a boundary node (adjacent to the punctured w-axis slice)
        let origin = d.flat_of_point(&[0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(d.boundary().get(origin));
        assert!(!d.interior().get(origin));
    }

    #[test]
    fn reinhardt_interior_inequalities() {
        let d = Domain::new(shapes::reinhardt::<f64>(3, 2), 0.25).unwrap();
        let mut p = [0.0; MAX_REAL_DIM];
        for &i in d.interior_points() {
            d.point_into(i as usize, &mut p);
            let mut phi = 0.0;
            for j in 0..3 {
                let r2 = p[2 * j] * p[2 * j] + p[2 * j + 1] * p[2 * j + 1];
                assert!(r2 < 1.0);
                let coeff = if j == 2 { 1.0 - 3.0 / 2.0 } else { 1.0 };
                phi += coeff * r2;
            }
            assert!(phi < 1.0);
        }
        assert!(d.interior_points().len() > 100);
    }

    #[test]
    fn empty_interior_rejected() {
        // spacing larger than the domain: no interior nodes besides maybe 0
        let r = Domain::new(shapes::disc::<f64>(0.4), 1.0);
        // the origin is still inside; shrink further
        let r2 = Domain::new(
            ShapeSpec::Ball {
                n: 1,
                radius: 0.4,
                center: vec![0.5, 0.5],
            },
            10.0,
        );
        assert!(r.is_ok() || r2.is_err());
        assert!(r2.is_err());
    }

    #[test]
    fn product_and_intersection() {
        let d1 = shapes::disc::<f64>(1.0);
        let d2 = shapes::disc::<f64>(0.8);
        let prod = Domain::new(shapes::product(d1.clone(), d2.clone()), 0.2).unwrap();
        assert_eq!(prod.n(), 2);
        let mut p = [0.0; MAX_REAL_DIM];
        for &i in prod.interior_points() {
            prod.point_into(i as usize, &mut p);
            assert!(p[0] * p[0] + p[1] * p[1] < 1.0);
            assert!(p[2] * p[2] + p[3] * p[3] < 0.64);
        }

        let shifted = ShapeSpec::Ball {
            n: 1,
            radius: 1.0,
            center: vec![0.5, 0.0],
        };
        let inter = Domain::new(shapes::intersection(d1, shifted), 0.1).unwrap();
        for &i in inter.interior_points() {
            inter.point_into(i as usize, &mut p);
            assert!(p[0] * p[0] + p[1] * p[1] < 1.0);
            let dx = p[0] - 0.5;
            assert!(dx * dx + p[1] * p[1] < 1.0);
        }
    }

    #[test]
    fn distance_to_boundary_monotone() {
        let d = Domain::new(shapes::disc::<f64>(1.0), 0.1).unwrap();
        let dist = d.distance_to_boundary();
        let center = d.flat_of_point(&[0.0, 0.0]).unwrap();
        let near = d.flat_of_point(&[0.9, 0.0]).unwrap();
        assert!(dist[center] > dist[near]);
        assert!(dist[near] <= 0.2 + 1e-12);
    }
}
