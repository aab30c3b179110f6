//! Discrete envelope solves: obstacle, boundary, and relative extremal
//! problems for m-subharmonic functions, by monotone Gauss--Seidel sweeps.
//!
//! The discrete cone membership used by the solver is `L_A u >= 0` for every
//! sampled dual form `A`. Each sample is pinched onto the best-aligned member
//! of a catalogue of orthonormal complex frames whose columns are
//! Gaussian-integer lattice directions. Pinching is an average over a torus
//! of unitaries, so it maps the dual cone into itself: the pinched constraint
//! is still satisfied by every genuinely m-subharmonic function, while its
//! line Laplacians hit exact lattice points. That keeps every update a
//! nonnegative average of neighbor values, so sweeps are monotone from the
//! obstacle initialization and the solve converges to the unique fixed point:
//! the supremum of discrete subsolutions, an outer approximation that can
//! only decrease as the sample family grows.

use crate::cone::{dual_cone_sample, eigenvalues_hermitian, HermitianForm};
use crate::error::{Error, Result};
use crate::field::{
    exhaustion_report, is_sentinel, msh_report, ExhaustionOptions, ExhaustionReport, GridField,
    MshOptions, MshReport,
};
use crate::grid::{Bitset, Coords, Domain, ShapeSpec, MAX_REAL_DIM};
use crate::measure::{e0_membership, hessian_density, total_mass, E0Report, MassReport};
use crate::scalar::Scalar;
use num_complex::Complex;
use std::sync::Arc;

// ---------------------------------------------------------------------------
// lattice frames
// ---------------------------------------------------------------------------

/// One column of a lattice frame: a complex direction with Gaussian-integer
/// entries together with the two real step vectors of the direction and its
/// i-rotation.
#[derive(Clone, Debug)]
struct FrameColumn {
    /// Gaussian-integer entries (re, im) per complex coordinate.
    gauss: Vec<(i32, i32)>,
    /// |a|^2 of the lattice vector.
    norm_sq: i64,
}

impl FrameColumn {
    fn new(gauss: Vec<(i32, i32)>) -> Self {
        let norm_sq = gauss
            .iter()
            .map(|&(re, im)| (re as i64) * (re as i64) + (im as i64) * (im as i64))
            .sum();
        FrameColumn { gauss, norm_sq }
    }

    /// Real embedding of the direction (steps in the 2n real axes).
    fn steps(&self) -> Vec<i32> {
        let mut v = Vec::with_capacity(2 * self.gauss.len());
        for &(re, im) in &self.gauss {
            v.push(re);
            v.push(im);
        }
        v
    }

    /// Real embedding of i times the direction.
    fn steps_rot(&self) -> Vec<i32> {
        let mut v = Vec::with_capacity(2 * self.gauss.len());
        for &(re, im) in &self.gauss {
            v.push(-im);
            v.push(re);
        }
        v
    }

    fn unit<T: Scalar>(&self) -> Vec<Complex<T>> {
        let inv = T::one() / T::of(self.norm_sq as f64).sqrt();
        self.gauss
            .iter()
            .map(|&(re, im)| Complex::new(T::of(re as f64) * inv, T::of(im as f64) * inv))
            .collect()
    }
}

#[derive(Clone, Debug)]
struct Frame {
    columns: Vec<FrameColumn>,
}

fn g(re: i32, im: i32) -> (i32, i32) {
    (re, im)
}

/// Orthogonal lattice pairs in C^2 (directions up to phase; pairwise
/// Hermitian-orthogonal). Slopes cover 0, inf, +-1, +-i, the 1+-i family,
/// and the +-2, +-i/2 family.
fn c2_pairs() -> Vec<[Vec<(i32, i32)>; 2]> {
    vec![
        [vec![g(1, 0), g(0, 0)], vec![g(0, 0), g(1, 0)]],
        [vec![g(1, 0), g(1, 0)], vec![g(1, 0), g(-1, 0)]],
        [vec![g(1, 0), g(0, 1)], vec![g(1, 0), g(0, -1)]],
        [vec![g(1, 0), g(1, 1)], vec![g(1, -1), g(-1, 0)]],
        [vec![g(1, 1), g(1, 0)], vec![g(-1, 0), g(1, -1)]],
        [vec![g(1, 0), g(1, -1)], vec![g(1, 1), g(-1, 0)]],
        [vec![g(1, -1), g(1, 0)], vec![g(-1, 0), g(1, 1)]],
        [vec![g(1, 0), g(2, 0)], vec![g(2, 0), g(-1, 0)]],
        [vec![g(2, 0), g(1, 0)], vec![g(1, 0), g(-2, 0)]],
        [vec![g(1, 0), g(0, 2)], vec![g(0, 2), g(1, 0)]],
        [vec![g(1, 0), g(0, -2)], vec![g(0, 2), g(-1, 0)]],
    ]
}

/// Frame catalogue per complex dimension. Every frame is an orthonormal
/// complex basis realizable over the Gaussian integers (up to scaling).
fn frame_catalog(n: usize) -> Vec<Frame> {
    let mut frames = Vec::new();
    // the standard axis frame always comes first
    let mut std_cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut gv = vec![g(0, 0); n];
        gv[j] = g(1, 0);
        std_cols.push(FrameColumn::new(gv));
    }
    frames.push(Frame { columns: std_cols });
    if n == 1 {
        return frames;
    }
    let pairs = c2_pairs();
    // embed each nontrivial C^2 pair into every coordinate pair
    for a in 0..n {
        for b in (a + 1)..n {
            for pair in pairs.iter().skip(1) {
                let mut cols = Vec::with_capacity(n);
                for j in 0..n {
                    if j == a || j == b {
                        continue;
                    }
                    let mut gv = vec![g(0, 0); n];
                    gv[j] = g(1, 0);
                    cols.push(FrameColumn::new(gv));
                }
                for half in pair {
                    let mut gv = vec![g(0, 0); n];
                    gv[a] = half[0];
                    gv[b] = half[1];
                    cols.push(FrameColumn::new(gv));
                }
                frames.push(Frame { columns: cols });
                if frames.len() == 32 {
                    return frames;
                }
            }
        }
    }
    frames
}

/// Verifies orthogonality of a frame (debug aid for the catalogue).
#[cfg(test)]
fn frame_is_unitary(f: &Frame) -> bool {
    let n = f.columns[0].gauss.len();
    for (i, a) in f.columns.iter().enumerate() {
        for (j, b) in f.columns.iter().enumerate() {
            let mut acc = (0i64, 0i64);
            for k in 0..n {
                let (ar, ai) = a.gauss[k];
                let (br, bi) = b.gauss[k];
                // a_k * conj(b_k)
                acc.0 += (ar * br + ai * bi) as i64;
                acc.1 += (ai * br - ar * bi) as i64;
            }
            if i != j && (acc.0 != 0 || acc.1 != 0) {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// pinched constraints
// ---------------------------------------------------------------------------

/// A dual sample pinched onto a frame: nonnegative weights on the frame's
/// line Laplacians, pre-normalized so the update is a weighted average of
/// the 4-point neighbor sums.
#[derive(Clone, Debug)]
struct PinchedConstraint<T: Scalar> {
    frame: usize,
    /// (column index, weight); weights sum to 1/4 so that weight times the
    /// 4-point neighbor sum averages to 1.
    weights: Vec<(usize, T)>,
}

fn pinch_sample<T: Scalar>(
    a: &HermitianForm<T>,
    frames: &[Frame],
) -> (PinchedConstraint<T>, T) {
    let norm2 = a.frobenius_norm_sqr();
    // ties go to the earliest frame (the axis frame), which has the smallest
    // stencil and is usable everywhere
    let tie = T::of(1e-12) * (norm2 + T::one());
    let mut best: Option<(usize, Vec<T>, T)> = None;
    for (fi, frame) in frames.iter().enumerate() {
        let mut mus = Vec::with_capacity(frame.columns.len());
        let mut captured = T::zero();
        for col in &frame.columns {
            let u = col.unit::<T>();
            let mu = a.quad(&u).max(T::zero());
            captured = captured + mu * mu;
            mus.push(mu);
        }
        let err2 = (norm2 - captured).max(T::zero());
        if best.as_ref().map(|(_, _, e)| err2 + tie < *e).unwrap_or(true) {
            best = Some((fi, mus, err2));
        }
    }
    let (frame, mus, err2) = best.expect("catalogue is nonempty");
    // convert eigen-weights to line-Laplacian coefficients mu_i / |a_i|^2
    let mut coeffs: Vec<(usize, T)> = mus
        .iter()
        .enumerate()
        .filter(|(_, &mu)| mu > T::of(1e-14))
        .map(|(ci, &mu)| {
            (
                ci,
                mu / T::of(frames[frame].columns[ci].norm_sq as f64),
            )
        })
        .collect();
    let total: T = coeffs.iter().map(|&(_, c)| c).sum();
    let quarter = T::of(0.25);
    for c in coeffs.iter_mut() {
        c.1 = c.1 / total * quarter;
    }
    (
        PinchedConstraint {
            frame,
            weights: coeffs,
        },
        err2.sqrt(),
    )
}

// ---------------------------------------------------------------------------
// problem types
// ---------------------------------------------------------------------------

/// What is being enveloped.
pub enum EnvelopeMode<T: Scalar> {
    /// Largest subsolution below `f` on the closure; boundary values pinned
    /// to `f`.
    Obstacle { f: GridField<T> },
    /// Largest subsolution with boundary values `f` (aligned with
    /// `domain.boundary_points()`).
    Boundary { f: Vec<T> },
    /// Relative extremal problem: u <= 0, u <= -1 on `e`, boundary pinned 0.
    Extremal { e: Bitset },
}

pub struct EnvelopeProblem<T: Scalar> {
    pub domain: Arc<Domain<T>>,
    pub m: usize,
    pub mode: EnvelopeMode<T>,
    pub dual_samples: Vec<HermitianForm<T>>,
    pub seed: u64,
}

impl<T: Scalar> EnvelopeProblem<T> {
    /// Samples with the library defaults: the Laplacian direction alone for
    /// order 1, otherwise `count` random dual-cone linearizations led by the
    /// Laplacian.
    pub fn standard_samples(
        n: usize,
        m: usize,
        count: usize,
        seed: u64,
    ) -> Result<Vec<HermitianForm<T>>> {
        dual_cone_sample(n, m, if m == 1 { 1 } else { count }, seed)
    }

    pub fn new(
        domain: Arc<Domain<T>>,
        m: usize,
        mode: EnvelopeMode<T>,
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let dual_samples = Self::standard_samples(domain.n(), m, samples, seed)?;
        Ok(EnvelopeProblem {
            domain,
            m,
            mode,
            dual_samples,
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.domain.n();
        if self.m == 0 || self.m > n {
            return Err(Error::validation(format!(
                "cone order {} outside range 1..={n}",
                self.m
            )));
        }
        if self.dual_samples.is_empty() {
            return Err(Error::validation("dual sample list is empty"));
        }
        for (i, a) in self.dual_samples.iter().enumerate() {
            if a.n() != n {
                return Err(Error::validation(format!("sample {i} dimension mismatch")));
            }
            if (a.trace() - T::one()).abs() > T::of(1e-6) {
                return Err(Error::validation(format!(
                    "sample {i} is not unit-trace (trace {})",
                    a.trace().to_f64_lossy()
                )));
            }
            let spec = eigenvalues_hermitian(a)?;
            if spec.min() < -T::of(1e-8) {
                return Err(Error::validation(format!(
                    "sample {i} is not positive semidefinite"
                )));
            }
        }
        match &self.mode {
            EnvelopeMode::Obstacle { f } => f.check_same_domain(&GridField::constant(
                Arc::clone(&self.domain),
                T::zero(),
            ))?,
            EnvelopeMode::Boundary { f } => {
                if f.len() != self.domain.boundary_points().len() {
                    return Err(Error::validation(
                        "boundary data does not match the boundary mask",
                    ));
                }
                if f.iter().any(|v| !v.is_finite()) {
                    return Err(Error::validation("non-finite boundary data"));
                }
            }
            EnvelopeMode::Extremal { e } => {
                if e.len() != self.domain.cells() {
                    return Err(Error::validation("extremal mask does not match grid"));
                }
                let mut outside = e.clone();
                outside.and_not(self.domain.interior());
                if outside.count() > 0 {
                    return Err(Error::validation("extremal set must be interior"));
                }
                if e.count() == 0 {
                    return Err(Error::validation("extremal set is empty"));
                }
                let mut near = self.domain.dilate_face(self.domain.boundary(), 2);
                near.and(e);
                if near.count() > 0 {
                    return Err(Error::validation(
                        "extremal set must keep two rings of distance from the boundary",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepOrder {
    Forward,
    Alternating,
}

#[derive(Clone, Debug)]
pub struct SolverConfig<T: Scalar> {
    /// Sweep-to-sweep sup-change threshold.
    pub tol: T,
    pub max_iters: usize,
    pub order: SweepOrder,
    /// Under-relaxation in (0, 1].
    pub damping: T,
    /// Run the m-subharmonicity certificate on the result.
    pub certify: bool,
    pub record_residuals: bool,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            tol: T::of(1e-7),
            max_iters: 20_000,
            order: SweepOrder::Alternating,
            damping: T::one(),
            certify: true,
            record_residuals: false,
        }
    }
}

/// Per-boundary-node attainment gaps |f - u_limit|, where u_limit is the
/// largest value of u over the node's interior Chebyshev neighbors.
#[derive(Clone, Debug)]
pub struct BoundaryReport<T: Scalar> {
    pub gaps: Vec<T>,
    pub max_gap: T,
    pub worst_node: Option<u32>,
}

pub struct EnvelopeResult<T: Scalar> {
    pub u: GridField<T>,
    pub iterations: usize,
    pub final_residual: T,
    pub converged: bool,
    pub msh_certificate: Option<MshReport<T>>,
    pub boundary_report: BoundaryReport<T>,
    /// Largest Frobenius distance moved by the frame pinching.
    pub pinch_error: T,
    pub seed: u64,
    pub residual_history: Vec<T>,
}

// ---------------------------------------------------------------------------
// the solver
// ---------------------------------------------------------------------------

enum ObstacleRef<'a, T: Scalar> {
    Values(&'a [T]),
    Extremal(&'a Bitset),
    None,
}

impl<'a, T: Scalar> ObstacleRef<'a, T> {
    #[inline]
    fn get(&self, p: usize) -> T {
        match self {
            ObstacleRef::Values(v) => v[p],
            ObstacleRef::Extremal(e) => {
                if e.get(p) {
                    -T::one()
                } else {
                    T::zero()
                }
            }
            ObstacleRef::None => T::infinity(),
        }
    }
}

struct CompiledFrame<T: Scalar> {
    /// Per column: the two +-offset pairs in flat-index units.
    offsets: Vec<[isize; 2]>,
    /// Chebyshev reach of the frame stencil.
    _reach: i32,
    phantom: std::marker::PhantomData<T>,
}

/// Boundary attainment gaps of a field against boundary data.
fn boundary_gaps<T: Scalar>(
    domain: &Domain<T>,
    u: &GridField<T>,
    f_at: impl Fn(usize, usize) -> T,
) -> BoundaryReport<T> {
    let dims = domain.dims();
    let strides = domain.strides();
    let mut gaps = Vec::with_capacity(domain.boundary_points().len());
    let mut max_gap = T::zero();
    let mut worst = None;
    // Chebyshev-1 neighbor offsets
    let mut offsets = vec![0isize];
    for d in 0..dims {
        let s = strides[d] as isize;
        let mut next = Vec::with_capacity(offsets.len() * 3);
        for &o in &offsets {
            next.push(o - s);
            next.push(o);
            next.push(o + s);
        }
        offsets = next;
    }
    for (bi, &b) in domain.boundary_points().iter().enumerate() {
        let b = b as usize;
        let mut lim = T::neg_infinity();
        for &o in &offsets {
            let q = b as isize + o;
            if q >= 0 && (q as usize) < domain.cells() && domain.interior().get(q as usize) {
                let v = u.get(q as usize);
                if !v.is_nan() && !is_sentinel(v) {
                    lim = lim.max(v);
                }
            }
        }
        let gap = if lim.is_finite() {
            (f_at(bi, b) - lim).abs()
        } else {
            T::zero()
        };
        gaps.push(gap);
        if gap > max_gap {
            max_gap = gap;
            worst = Some(b as u32);
        }
    }
    BoundaryReport {
        gaps,
        max_gap,
        worst_node: worst,
    }
}

/// Solves the envelope problem by monotone sweeps from above, optionally
/// warm-started from `init` (values on the interior; clamped to the
/// obstacle).
pub fn solve_envelope_with_init<T: Scalar>(
    problem: &EnvelopeProblem<T>,
    cfg: &SolverConfig<T>,
    init: Option<&GridField<T>>,
) -> Result<EnvelopeResult<T>> {
    problem.validate()?;
    if cfg.damping <= T::zero() || cfg.damping > T::one() {
        return Err(Error::validation("damping must lie in (0, 1]"));
    }
    let domain = problem.domain.as_ref();
    let n = domain.n();
    let frames = frame_catalog(n);

    // pinch the samples and group them by frame
    let mut pinch_error = T::zero();
    let mut constraints: Vec<PinchedConstraint<T>> = Vec::new();
    for a in &problem.dual_samples {
        let (c, err) = pinch_sample(a, &frames);
        pinch_error = pinch_error.max(err);
        constraints.push(c);
    }
    // deduplicate identical pinched constraints
    constraints.sort_by(|a, b| {
        a.frame.cmp(&b.frame).then_with(|| {
            format!("{:?}", a.weights)
                .partial_cmp(&format!("{:?}", b.weights))
                .unwrap()
                .then(std::cmp::Ordering::Equal)
        })
    });
    constraints.dedup_by(|a, b| {
        a.frame == b.frame
            && a.weights.len() == b.weights.len()
            && a.weights
                .iter()
                .zip(&b.weights)
                .all(|(x, y)| x.0 == y.0 && (x.1 - y.1).abs() < T::of(1e-13))
    });
    // Weight vectors of one frame share their total, so for n = 2 they live
    // on a segment and the pointwise minimum over a frame's constraints is
    // attained at an extreme mixing ratio: dropping the interior ones is
    // exact.
    if n == 2 {
        let mut pruned: Vec<PinchedConstraint<T>> = Vec::new();
        let mut i = 0;
        while i < constraints.len() {
            let mut j = i;
            while j < constraints.len() && constraints[j].frame == constraints[i].frame {
                j += 1;
            }
            let group = &constraints[i..j];
            if group.len() <= 2 {
                pruned.extend_from_slice(group);
            } else {
                let ratio = |c: &PinchedConstraint<T>| -> T {
                    let w0 = c
                        .weights
                        .iter()
                        .find(|&&(col, _)| col == 0)
                        .map(|&(_, w)| w)
                        .unwrap_or(T::zero());
                    let total: T = c.weights.iter().map(|&(_, w)| w).sum();
                    w0 / total
                };
                let lo = group
                    .iter()
                    .min_by(|a, b| ratio(a).partial_cmp(&ratio(b)).unwrap())
                    .unwrap();
                let hi = group
                    .iter()
                    .max_by(|a, b| ratio(a).partial_cmp(&ratio(b)).unwrap())
                    .unwrap();
                pruned.push(lo.clone());
                if ratio(hi) > ratio(lo) {
                    pruned.push(hi.clone());
                }
            }
            i = j;
        }
        constraints = pruned;
    }

    let frames_used: Vec<usize> = {
        let mut f: Vec<usize> = constraints.iter().map(|c| c.frame).collect();
        f.sort_unstable();
        f.dedup();
        f
    };
    if frames_used.len() > 32 {
        return Err(Error::validation("too many distinct frames"));
    }
    // compile frames: per column the two offset pairs
    let compiled: Vec<CompiledFrame<T>> = frames_used
        .iter()
        .map(|&fi| {
            let frame = &frames[fi];
            let mut offsets = Vec::with_capacity(frame.columns.len());
            let mut reach = 0i32;
            for col in &frame.columns {
                let v = col.steps();
                let w = col.steps_rot();
                reach = reach
                    .max(v.iter().map(|x| x.abs()).max().unwrap_or(0))
                    .max(w.iter().map(|x| x.abs()).max().unwrap_or(0));
                offsets.push([domain.flat_offset(&v), domain.flat_offset(&w)]);
            }
            CompiledFrame {
                offsets,
                _reach: reach,
                phantom: std::marker::PhantomData,
            }
        })
        .collect();
    // remap constraint frame ids to the compiled list
    let frame_slot: Vec<usize> = constraints
        .iter()
        .map(|c| frames_used.iter().position(|&f| f == c.frame).unwrap())
        .collect();

    // usability: bit per compiled frame, per interior node
    let interior = domain.interior_points();
    let cells = domain.cells();
    let usable: Vec<u32> = {
        use rayon::prelude::*;
        interior
            .par_iter()
            .map(|&p| {
                let p = p as usize;
                let mut bits = 0u32;
                'frames: for (s, cf) in compiled.iter().enumerate() {
                    for offs in &cf.offsets {
                        for &o in offs {
                            for q in [p as isize + o, p as isize - o] {
                                if q < 0 || q as usize >= cells || !domain.is_masked(q as usize) {
                                    continue 'frames;
                                }
                            }
                        }
                    }
                    bits |= 1 << s;
                }
                bits
            })
            .collect()
    };

    // initial values and obstacle
    let mut u = match &problem.mode {
        EnvelopeMode::Obstacle { f } => f.clone(),
        EnvelopeMode::Boundary { f } => {
            let top = f.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            let mut u = GridField::constant(Arc::clone(&problem.domain), top);
            for (bi, &b) in domain.boundary_points().iter().enumerate() {
                u.set(b as usize, f[bi]);
            }
            u
        }
        EnvelopeMode::Extremal { e } => {
            let mut u = GridField::constant(Arc::clone(&problem.domain), T::zero());
            for &p in interior {
                if e.get(p as usize) {
                    u.set(p as usize, -T::one());
                }
            }
            u
        }
    };
    let obstacle_values: Option<Vec<T>> = match &problem.mode {
        EnvelopeMode::Obstacle { f } => Some(f.values().to_vec()),
        _ => None,
    };
    let obst: ObstacleRef<T> = match &problem.mode {
        EnvelopeMode::Obstacle { .. } => ObstacleRef::Values(obstacle_values.as_ref().unwrap()),
        EnvelopeMode::Extremal { e } => ObstacleRef::Extremal(e),
        EnvelopeMode::Boundary { .. } => ObstacleRef::None,
    };
    if let Some(init) = init {
        init.check_same_domain(&u)?;
        for &p in interior {
            let p = p as usize;
            let v = init.get(p);
            if v.is_finite() {
                u.set(p, v.min(obst.get(p)));
            }
        }
    }
    u.set_provenance("computed");

    // sweeps; once changes localize, only points whose stencil inputs moved
    // are revisited (a full sweep confirms convergence)
    let values = u.values_mut();
    let mut residual = T::infinity();
    let mut history = Vec::new();
    let mut iterations = 0usize;
    let damping = cfg.damping;
    let exact_damping = damping == T::one();
    let act_tol = cfg.tol * T::of(0.01);
    let mut active: Option<Bitset> = None;
    let mut changed = Bitset::new(cells);
    while iterations < cfg.max_iters {
        iterations += 1;
        let backward = cfg.order == SweepOrder::Alternating && iterations % 2 == 0;
        let full_sweep = active.is_none();
        changed.clear();
        let mut sweep_res = T::zero();
        let npts = interior.len();
        for k in 0..npts {
            let idx = if backward { npts - 1 - k } else { k };
            let p = interior[idx] as usize;
            if let Some(act) = &active {
                if !act.get(p) {
                    continue;
                }
            }
            let bits = usable[idx];
            let mut best = obst.get(p);
            for (ci, c) in constraints.iter().enumerate() {
                let slot = frame_slot[ci];
                if bits & (1 << slot) == 0 {
                    continue;
                }
                let cf = &compiled[slot];
                let mut avg = T::zero();
                for &(col, wgt) in &c.weights {
                    let [ov, ow] = cf.offsets[col];
                    let s = unsafe {
                        *values.get_unchecked((p as isize + ov) as usize)
                            + *values.get_unchecked((p as isize - ov) as usize)
                            + *values.get_unchecked((p as isize + ow) as usize)
                            + *values.get_unchecked((p as isize - ow) as usize)
                    };
                    avg = avg + wgt * s;
                }
                best = best.min(avg);
            }
            let old = values[p];
            let new = if exact_damping {
                best
            } else {
                old + damping * (best - old)
            };
            let change = (new - old).abs();
            if change > sweep_res {
                sweep_res = change;
            }
            if change > act_tol {
                changed.set(p, true);
            }
            values[p] = new;
        }
        residual = sweep_res;
        if cfg.record_residuals {
            history.push(residual);
        }
        if residual < cfg.tol {
            if full_sweep {
                break;
            }
            // confirm on a full sweep before declaring convergence
            active = None;
            continue;
        }
        active = if changed.count() * 4 < interior.len() {
            Some(domain.dilate(&changed, 2))
        } else {
            None
        };
    }
    let converged = residual < cfg.tol;

    // boundary attainment
    let boundary_report = match &problem.mode {
        EnvelopeMode::Obstacle { f } => {
            let fv: Vec<T> = domain
                .boundary_points()
                .iter()
                .map(|&b| f.get(b as usize))
                .collect();
            boundary_gaps(domain, &u, |bi, _| fv[bi])
        }
        EnvelopeMode::Boundary { f } => {
            let fv = f.clone();
            boundary_gaps(domain, &u, |bi, _| fv[bi])
        }
        EnvelopeMode::Extremal { .. } => boundary_gaps(domain, &u, |_, _| T::zero()),
    };

    // certificate on non-contact points
    let msh_certificate = if cfg.certify {
        let h = domain.h();
        let mut opts = MshOptions::default();
        opts.tol = T::of(10.0) * cfg.tol / (h * h);
        let region = {
            let mut mask = Bitset::new(cells);
            let slack = cfg.tol * T::of(10.0);
            for &p in interior {
                let p = p as usize;
                if u.get(p) < obst.get(p) - slack {
                    mask.set(p, true);
                }
            }
            mask
        };
        if region.count() > 0 {
            opts.region = Some(region);
            Some(msh_report(&u, problem.m, &opts)?)
        } else {
            None
        }
    } else {
        None
    };

    Ok(EnvelopeResult {
        u,
        iterations,
        final_residual: residual,
        converged,
        msh_certificate,
        boundary_report,
        pinch_error,
        seed: problem.seed,
        residual_history: history,
    })
}

pub fn solve_envelope<T: Scalar>(
    problem: &EnvelopeProblem<T>,
    cfg: &SolverConfig<T>,
) -> Result<EnvelopeResult<T>> {
    solve_envelope_with_init(problem, cfg, None)
}

// ---------------------------------------------------------------------------
// Walsh-type boundary check
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct WalshReport<T: Scalar> {
    pub max_gap: T,
    pub worst_node: Option<u32>,
    pub pass: bool,
}

/// Maximum boundary attainment gap of a converged envelope against boundary
/// data; a pass certifies the discrete continuity hypothesis that licenses
/// treating the envelope as continuous up to the boundary at grid scale.
pub fn walsh_boundary_check<T: Scalar>(
    result: &EnvelopeResult<T>,
    f: &[T],
    tol: T,
) -> Result<WalshReport<T>> {
    let domain = result.u.domain().as_ref();
    if f.len() != domain.boundary_points().len() {
        return Err(Error::validation("boundary data does not match mask"));
    }
    let rep = boundary_gaps(domain, &result.u, |bi, _| f[bi]);
    Ok(WalshReport {
        max_gap: rep.max_gap,
        worst_node: rep.worst_node,
        pass: rep.max_gap <= tol,
    })
}

// ---------------------------------------------------------------------------
// hyperconvexity tester
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    FailPersistent,
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct GapProfile<T: Scalar> {
    pub h: T,
    pub max_gap: T,
    /// (boundary node coordinates, gap) for every boundary node.
    pub gaps: Vec<(Coords<T>, T)>,
    pub converged: bool,
    pub iterations: usize,
    pub negative_ok: bool,
}

#[derive(Clone, Debug)]
pub struct HyperconvexityOutcome<T: Scalar> {
    pub verdict: Verdict,
    pub coarse: GapProfile<T>,
    pub fine: GapProfile<T>,
    /// Worst persistent gap location (coarse grid coordinates).
    pub witness: Option<Coords<T>>,
    pub fail_floor: T,
}

#[derive(Clone, Debug)]
pub struct TesterConfig<T: Scalar> {
    pub samples: usize,
    pub seed: u64,
    pub solver: SolverConfig<T>,
    /// Gap floor that (persistently) certifies failure.
    pub fail_floor: T,
    /// Radius for matching gap regions across refinements.
    pub region_radius: T,
    /// Pass when max gap <= pass_factor * lipschitz_estimate * h.
    pub pass_factor: T,
    /// Sweeps per settling stage on the reporting grids.
    pub stage_sweeps: usize,
    pub max_stages: usize,
    /// Gap profiles are settled when a stage moves them less than this.
    pub settle_tol: T,
}

impl<T: Scalar> Default for TesterConfig<T> {
    fn default() -> Self {
        TesterConfig {
            samples: 64,
            seed: 7,
            solver: SolverConfig {
                certify: false,
                tol: T::of(1e-6),
                ..SolverConfig::default()
            },
            fail_floor: T::of(0.1),
            region_radius: T::of(0.12),
            pass_factor: T::of(4.0),
            stage_sweeps: 36,
            max_stages: 5,
            settle_tol: T::of(0.01),
        }
    }
}

fn make_extremal_problem<T: Scalar>(
    shape: &ShapeSpec<T>,
    m: usize,
    h: T,
    center: &[T],
    radius: T,
    cfg: &TesterConfig<T>,
) -> Result<(EnvelopeProblem<T>, Arc<Domain<T>>)> {
    let domain = Arc::new(Domain::new(shape.clone(), h)?);
    let mut e = Bitset::new(domain.cells());
    let mut pt: Coords<T> = [T::zero(); MAX_REAL_DIM];
    for &p in domain.interior_points() {
        domain.point_into(p as usize, &mut pt);
        let mut d2 = T::zero();
        for i in 0..domain.dims() {
            let t = pt[i] - center[i];
            d2 = d2 + t * t;
        }
        if d2 < radius * radius {
            e.set(p as usize, true);
        }
    }
    let problem = EnvelopeProblem::new(
        Arc::clone(&domain),
        m,
        EnvelopeMode::Extremal { e },
        cfg.samples,
        cfg.seed,
    )?;
    Ok((problem, domain))
}

/// Nearest-node prolongation between aligned grids.
fn prolong<T: Scalar>(coarse: &GridField<T>, domain: &Arc<Domain<T>>) -> GridField<T> {
    let coarse_domain = coarse.domain();
    let mut f = GridField::constant(Arc::clone(domain), T::zero());
    let mut pt: Coords<T> = [T::zero(); MAX_REAL_DIM];
    for &p in domain.interior_points() {
        domain.point_into(p as usize, &mut pt);
        if let Some(q) = coarse_domain.flat_of_point(&pt[..domain.dims()]) {
            let v = coarse.get(q);
            if v.is_finite() {
                f.set(p as usize, v);
            }
        }
    }
    f
}

/// Relative extremal solve at one resolution: cold starts run a coarse
/// cascade first, then sweep stages repeat until the boundary gap profile
/// stops moving (the observable the verdict depends on).
fn extremal_profile<T: Scalar>(
    shape: &ShapeSpec<T>,
    m: usize,
    h: T,
    center: &[T],
    radius: T,
    cfg: &TesterConfig<T>,
    init: Option<(&GridField<T>,)>,
) -> Result<(GapProfile<T>, EnvelopeResult<T>, Arc<Domain<T>>)> {
    let (problem, domain) = make_extremal_problem(shape, m, h, center, radius, cfg)?;

    // warm start: provided field, else an internal coarse cascade
    let mut warm: Option<GridField<T>> = init.map(|(c,)| prolong(c, &domain));
    if warm.is_none() {
        for factor in [4.0, 2.0] {
            let hc = h * T::of(factor);
            let Ok((cp, cd)) = make_extremal_problem(shape, m, hc, center, radius, cfg) else {
                continue;
            };
            if cp.validate().is_err() {
                continue; // ball too close to the boundary at this coarse h
            }
            let init_field = warm.as_ref().map(|w| prolong(w, &cd));
            let r = solve_envelope_with_init(&cp, &cfg.solver, init_field.as_ref())?;
            warm = Some(prolong(&r.u, &domain));
        }
    }

    // settle the gap profile in capped stages
    let mut stage_cfg = cfg.solver.clone();
    stage_cfg.max_iters = cfg.stage_sweeps.max(4);
    stage_cfg.certify = false;
    let mut result = solve_envelope_with_init(&problem, &stage_cfg, warm.as_ref())?;
    let mut settled = result.converged;
    let mut iterations = result.iterations;
    for _ in 1..cfg.max_stages.max(1) {
        if settled {
            break;
        }
        let prev_gaps = result.boundary_report.gaps.clone();
        let next = solve_envelope_with_init(&problem, &stage_cfg, Some(&result.u))?;
        iterations += next.iterations;
        let moved = prev_gaps
            .iter()
            .zip(&next.boundary_report.gaps)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), |x, y| x.max(y));
        result = next;
        if result.converged || moved < cfg.settle_tol {
            settled = true;
        }
    }

    let exh = exhaustion_report(
        &result.u,
        &ExhaustionOptions {
            with_ladder: false,
            ladder_levels: 0,
        },
    );
    let mut gaps = Vec::with_capacity(domain.boundary_points().len());
    for (bi, &b) in domain.boundary_points().iter().enumerate() {
        let mut c: Coords<T> = [T::zero(); MAX_REAL_DIM];
        domain.point_into(b as usize, &mut c);
        gaps.push((c, result.boundary_report.gaps[bi]));
    }
    let profile = GapProfile {
        h,
        max_gap: result.boundary_report.max_gap,
        gaps,
        converged: settled,
        iterations,
        negative_ok: exh.positive_count == 0,
    };
    Ok((profile, result, domain))
}

fn dist2<T: Scalar>(a: &Coords<T>, b: &Coords<T>, dims: usize) -> T {
    let mut acc = T::zero();
    for i in 0..dims {
        let t = a[i] - b[i];
        acc = acc + t * t;
    }
    acc
}

/// Tests m-hyperconvexity of a shape by solving the relative extremal
/// problem of an interior ball at h and h/2 and inspecting the boundary
/// attainment. A persistent gap above the floor in a matching boundary
/// region certifies failure; gaps that scale down with h certify a pass.
pub fn hyperconvexity_test<T: Scalar>(
    shape: &ShapeSpec<T>,
    m: usize,
    h: T,
    ball_center: &[T],
    ball_radius: T,
    cfg: &TesterConfig<T>,
) -> Result<HyperconvexityOutcome<T>> {
    let dims = 2 * shape.n();
    let (coarse, coarse_result, _) =
        extremal_profile(shape, m, h, ball_center, ball_radius, cfg, None)?;
    let (fine, fine_result, fine_domain) = extremal_profile(
        shape,
        m,
        h * T::of(0.5),
        ball_center,
        ball_radius,
        cfg,
        Some((&coarse_result.u,)),
    )?;

    if !coarse.converged || !fine.converged {
        return Ok(HyperconvexityOutcome {
            verdict: Verdict::Inconclusive,
            coarse,
            fine,
            witness: None,
            fail_floor: cfg.fail_floor,
        });
    }

    // persistence: a coarse gap above the floor whose region still carries a
    // gap above the floor at the finer resolution
    let r2 = cfg.region_radius * cfg.region_radius;
    let mut witness: Option<(Coords<T>, T)> = None;
    for (c_pt, c_gap) in &coarse.gaps {
        if *c_gap <= cfg.fail_floor {
            continue;
        }
        let fine_max = fine
            .gaps
            .iter()
            .filter(|(f_pt, _)| dist2(c_pt, f_pt, dims) <= r2)
            .map(|&(_, gp)| gp)
            .fold(T::neg_infinity(), |a, b| a.max(b));
        if fine_max > cfg.fail_floor {
            let score = c_gap.min(fine_max);
            if witness.as_ref().map(|(_, s)| score > *s).unwrap_or(true) {
                witness = Some((*c_pt, score));
            }
        }
    }
    if let Some((pt, _)) = witness {
        return Ok(HyperconvexityOutcome {
            verdict: Verdict::FailPersistent,
            coarse,
            fine,
            witness: Some(pt),
            fail_floor: cfg.fail_floor,
        });
    }

    // pass: fine gaps within pass_factor * Lip * h_fine, Lip estimated as
    // the extremal range over the separation between the ball and boundary
    let lip = {
        let dist = fine_domain.distance_to_boundary();
        let mut dmin = T::infinity();
        let mut pt: Coords<T> = [T::zero(); MAX_REAL_DIM];
        for &p in fine_domain.interior_points() {
            fine_domain.point_into(p as usize, &mut pt);
            let d2 = dist2(&pt, &{
                let mut c: Coords<T> = [T::zero(); MAX_REAL_DIM];
                c[..dims].copy_from_slice(&ball_center[..dims]);
                c
            }, dims);
            if d2 < ball_radius * ball_radius {
                dmin = dmin.min(dist[p as usize]);
            }
        }
        (T::one() / dmin.max(T::of(1e-6))).max(T::one())
    };
    let threshold = cfg.pass_factor * lip * fine.h;
    let pass = fine.max_gap <= threshold && fine.negative_ok && coarse.negative_ok;
    let _ = fine_result;
    Ok(HyperconvexityOutcome {
        verdict: if pass { Verdict::Pass } else { Verdict::Inconclusive },
        coarse,
        fine,
        witness: None,
        fail_floor: cfg.fail_floor,
    })
}

// ---------------------------------------------------------------------------
// boundary regularity tester
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct BmRegularityOutcome<T: Scalar> {
    pub verdict: Verdict,
    /// Attainment gap of the barrier at the tested boundary point.
    pub gap_at_point: T,
    /// Worst barrier value over boundary nodes at distance >= rho (must stay
    /// below -separation).
    pub far_field_sup: T,
    pub rho: T,
    pub separation: T,
    pub converged: bool,
}

/// Builds the candidate strong barrier at a boundary point: the envelope of
/// the boundary data -|xi - z0|, which must vanish at z0 and stay negative
/// away from it.
pub fn bm_regularity_test<T: Scalar>(
    domain: &Arc<Domain<T>>,
    m: usize,
    z0: &[T],
    cfg: &TesterConfig<T>,
) -> Result<BmRegularityOutcome<T>> {
    let dims = domain.dims();
    // snap to the nearest boundary node
    let mut best: Option<(usize, T)> = None;
    let mut pt: Coords<T> = [T::zero(); MAX_REAL_DIM];
    for &b in domain.boundary_points() {
        domain.point_into(b as usize, &mut pt);
        let mut d2 = T::zero();
        for i in 0..dims {
            let t = pt[i] - z0[i];
            d2 = d2 + t * t;
        }
        if best.map(|(_, bd)| d2 < bd).unwrap_or(true) {
            best = Some((b as usize, d2));
        }
    }
    let (z0_flat, _) = best.ok_or_else(|| Error::validation("no boundary nodes"))?;
    let mut z0_pt: Coords<T> = [T::zero(); MAX_REAL_DIM];
    domain.point_into(z0_flat, &mut z0_pt);

    let f: Vec<T> = domain
        .boundary_points()
        .iter()
        .map(|&b| {
            domain.point_into(b as usize, &mut pt);
            -dist2(&pt, &z0_pt, dims).sqrt()
        })
        .collect();
    let problem = EnvelopeProblem::new(
        Arc::clone(domain),
        m,
        EnvelopeMode::Boundary { f: f.clone() },
        cfg.samples,
        cfg.seed,
    )?;
    let result = solve_envelope(&problem, &cfg.solver)?;
    if !result.converged {
        return Ok(BmRegularityOutcome {
            verdict: Verdict::Inconclusive,
            gap_at_point: T::nan(),
            far_field_sup: T::nan(),
            rho: T::zero(),
            separation: T::zero(),
            converged: false,
        });
    }

    // domain size scale for the far-field radius
    let mut diam2 = T::zero();
    for (i, &b) in domain.boundary_points().iter().enumerate() {
        if i % 7 != 0 {
            continue;
        }
        domain.point_into(b as usize, &mut pt);
        diam2 = diam2.max(dist2(&pt, &z0_pt, dims));
    }
    let rho = T::of(0.4) * diam2.sqrt();
    let separation = T::of(0.5) * rho;

    // gap at z0: the barrier limit must reach f(z0) = 0
    let bi0 = domain
        .boundary_points()
        .iter()
        .position(|&b| b as usize == z0_flat)
        .unwrap();
    let gap_at_point = result.boundary_report.gaps[bi0];

    // u_limit at far boundary nodes must stay below -separation
    let mut far_sup = T::neg_infinity();
    for (bi, &b) in domain.boundary_points().iter().enumerate() {
        domain.point_into(b as usize, &mut pt);
        if dist2(&pt, &z0_pt, dims).sqrt() >= rho {
            // u_limit = f - gap_signed; recompute from gaps and data:
            // the gap is |f - u_limit|, and u_limit <= f + gap
            let lim_upper = f[bi] + result.boundary_report.gaps[bi];
            far_sup = far_sup.max(lim_upper);
        }
    }
    let h = domain.h();
    let barrier_tol = cfg.pass_factor * h;
    let pass = gap_at_point <= barrier_tol && far_sup <= -separation;
    Ok(BmRegularityOutcome {
        verdict: if pass { Verdict::Pass } else { Verdict::Inconclusive },
        gap_at_point,
        far_field_sup: far_sup,
        rho,
        separation,
        converged: true,
    })
}

// ---------------------------------------------------------------------------
// exhaustion builders
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExhaustionRecipe {
    /// Weighted series of max(u, (|z|^2 - M)/j): strictly m-subharmonic on
    /// compacts.
    StrictSum,
    /// Same pieces, weights divided by the Hessian-mass scale: total mass of
    /// the sum stays below 1.
    BoundedMass,
    /// Envelope of -2|z|^2 plus 2|z|^2: uniformly strictly m-subharmonic.
    Uniform,
}

#[derive(Clone, Debug)]
pub struct ExhaustionConfig<T: Scalar> {
    /// Extremal base ball (center, radius); defaults to the deepest node.
    pub ball: Option<(Vec<T>, T)>,
    pub tail_tol: T,
    pub max_terms: usize,
    pub mass_tol: T,
    pub samples: usize,
    pub seed: u64,
    pub solver: SolverConfig<T>,
    /// Verify the hyperconvexity prerequisite on the base solve (boundary
    /// gaps and negativity) before building.
    pub check_prereq: bool,
    /// Pieces are smoothed maxima with width smoothing_steps * h, shifted to
    /// stay nonpositive; the series then has locally bounded Hessians.
    pub smoothing_steps: T,
}

impl<T: Scalar> Default for ExhaustionConfig<T> {
    fn default() -> Self {
        ExhaustionConfig {
            ball: None,
            tail_tol: T::of(1e-6),
            max_terms: 40,
            mass_tol: T::of(0.05),
            samples: 64,
            seed: 11,
            solver: SolverConfig {
                certify: false,
                ..SolverConfig::default()
            },
            check_prereq: true,
            smoothing_steps: T::of(6.0),
        }
    }
}

pub struct ExhaustionBuild<T: Scalar> {
    pub field: GridField<T>,
    pub recipe: ExhaustionRecipe,
    pub coefficients: Vec<T>,
    pub negative_ok: bool,
    pub exhaustion: ExhaustionReport<T>,
    pub msh: MshReport<T>,
    /// Strictness margin and its certificate on the deep-interior shell
    /// (strict_sum only).
    pub strictness: Option<(T, MshReport<T>)>,
    /// Sup norm of the output (bounded_mass certifies <= 1).
    pub sup_norm: T,
    /// Total Hessian mass of the output (bounded_mass only).
    pub mass: Option<MassReport<T>>,
    pub e0: Option<E0Report<T>>,
}

/// Builds a negative exhaustion function with certificates, from the chosen
/// recipe.
pub fn build_exhaustion<T: Scalar>(
    domain: &Arc<Domain<T>>,
    m: usize,
    recipe: ExhaustionRecipe,
    cfg: &ExhaustionConfig<T>,
) -> Result<ExhaustionBuild<T>> {
    let dims = domain.dims();
    let h = domain.h();
    let sq_norm = crate::field::eval_closed_form(&crate::field::ClosedForm::SqNorm, domain);

    if recipe == ExhaustionRecipe::Uniform {
        // envelope of -2|z|^2 on the boundary (sampled at the analytic
        // boundary, not at the ring nodes), lifted by 2|z|^2
        let f: Vec<T> = domain
            .boundary_points()
            .iter()
            .map(|&b| {
                let pt = domain.project_to_boundary(b as usize);
                let mut s = T::zero();
                for i in 0..dims {
                    s = s + pt[i] * pt[i];
                }
                -T::of(2.0) * s
            })
            .collect();
        let problem = EnvelopeProblem::new(
            Arc::clone(domain),
            m,
            EnvelopeMode::Boundary { f },
            cfg.samples,
            cfg.seed,
        )?;
        let result = solve_envelope(&problem, &cfg.solver)?;
        if !result.converged {
            return Err(Error::Truncation("envelope solve did not converge".into()));
        }
        let psi = result
            .u
            .zip(&sq_norm, "uniform_exhaustion", |pb, q| pb + T::of(2.0) * q)?;
        let mut opts = MshOptions::default();
        opts.tol = T::of(10.0) * cfg.solver.tol / (h * h);
        // strictness c = 1: psi - |z|^2 must itself pass
        opts.strict_c = Some(T::one());
        let msh = msh_report(&psi, m, &opts)?;
        let exh = exhaustion_report(&psi, &ExhaustionOptions::default());
        let negative_ok = exh.positive_count == 0;
        let sup = psi.sup_norm();
        return Ok(ExhaustionBuild {
            field: psi,
            recipe,
            coefficients: Vec::new(),
            negative_ok,
            exhaustion: exh,
            msh,
            strictness: None,
            sup_norm: sup,
            mass: None,
            e0: None,
        });
    }

    // base: relative extremal of an interior ball
    let dist = domain.distance_to_boundary();
    let (center, radius) = match &cfg.ball {
        Some((c, r)) => (c.clone(), *r),
        None => {
            let mut best = (domain.interior_points()[0] as usize, T::zero());
            for &p in domain.interior_points() {
                if dist[p as usize] > best.1 {
                    best = (p as usize, dist[p as usize]);
                }
            }
            let mut pt: Coords<T> = [T::zero(); MAX_REAL_DIM];
            domain.point_into(best.0, &mut pt);
            (pt[..dims].to_vec(), best.1 * T::of(0.4))
        }
    };
    let mut e = Bitset::new(domain.cells());
    {
        let mut pt: Coords<T> = [T::zero(); MAX_REAL_DIM];
        for &p in domain.interior_points() {
            domain.point_into(p as usize, &mut pt);
            let mut d2 = T::zero();
            for i in 0..dims {
                let t = pt[i] - center[i];
                d2 = d2 + t * t;
            }
            if d2 < radius * radius {
                e.set(p as usize, true);
            }
        }
    }
    let problem = EnvelopeProblem::new(
        Arc::clone(domain),
        m,
        EnvelopeMode::Extremal { e },
        cfg.samples,
        cfg.seed,
    )?;
    let base = solve_envelope(&problem, &cfg.solver)?;
    if !base.converged {
        return Err(Error::Truncation("base extremal solve did not converge".into()));
    }
    if cfg.check_prereq {
        let exh = exhaustion_report(
            &base.u,
            &ExhaustionOptions {
                with_ladder: false,
                ladder_levels: 0,
            },
        );
        let lip = T::one() / dist[domain.flat_of_point(&center).unwrap()].max(h);
        let gate = T::of(4.0) * lip.max(T::one()) * h;
        if base.boundary_report.max_gap > gate || exh.positive_count > 0 {
            return Err(Error::Prerequisite(format!(
                "base extremal boundary gap {:.3e} exceeds {:.3e}; domain may not be hyperconvex at this order",
                base.boundary_report.max_gap.to_f64_lossy(),
                gate.to_f64_lossy()
            )));
        }
    }

    // pieces: smoothed max(u, (|z|^2 - M)/j), shifted so they stay below the
    // plain max (and hence nonpositive)
    let big_m = sq_norm.sup_norm() + T::one();
    let eta = cfg.smoothing_steps * h;
    let piece = |j: usize| -> Result<GridField<T>> {
        let quad = sq_norm.map("piece", move |q| (q - big_m) / T::of(j as f64));
        let smoothed = crate::field::regularized_max(&base.u, &quad, eta)?;
        let shift = eta / T::of(6.0);
        Ok(smoothed.map("exhaustion_piece", move |v| v - shift))
    };

    let two = T::of(2.0);
    match recipe {
        ExhaustionRecipe::StrictSum => {
            // a_j = 2^-j / max(sup(-psi_j), 1): the tail is geometric
            let terms = ((T::one() / cfg.tail_tol).log2().ceil().to_f64_lossy() as usize)
                .clamp(8, cfg.max_terms);
            let mut coefficients = Vec::with_capacity(terms);
            let mut sum = GridField::constant(Arc::clone(domain), T::zero());
            let mut pieces = Vec::with_capacity(terms);
            for j in 1..=terms {
                let pj = piece(j)?;
                let sup_neg = (-pj.interior_min()).max(T::one());
                let a_j = two.powi(-(j as i32)) / sup_neg;
                coefficients.push(a_j);
                sum = sum.zip(&pj, "strict_sum", move |acc, v| acc + a_j * v)?;
                pieces.push(pj);
            }
            // strictness on the deep shell: beyond the crossover index the
            // pieces are pure quadratics with coefficient a_j / j
            let shell_floor = {
                let mut dmax = T::zero();
                for &p in domain.interior_points() {
                    dmax = dmax.max(dist[p as usize]);
                }
                dmax * T::of(0.5)
            };
            let mut shell = Bitset::new(domain.cells());
            let mut j_shell = 0usize;
            for &p in domain.interior_points() {
                let p = p as usize;
                if dist[p] >= shell_floor {
                    shell.set(p, true);
                    let denom = -(base.u.get(p) + eta);
                    if denom > T::zero() {
                        let j_p = ((big_m - sq_norm.get(p)) / denom)
                            .ceil()
                            .to_f64_lossy() as usize;
                        j_shell = j_shell.max(j_p);
                    } else {
                        // the smoothing band swallows the quadratic tail here
                        j_shell = usize::MAX / 2;
                    }
                }
            }
            if j_shell + 2 >= terms {
                return Err(Error::Truncation(format!(
                    "strictness crossover index {j_shell} leaves no quadratic tail below {terms} terms"
                )));
            }
            let mut c_shell = T::zero();
            for (j, &a_j) in coefficients.iter().enumerate().skip(j_shell) {
                c_shell = c_shell + a_j / T::of((j + 1) as f64);
            }
            let mut opts = MshOptions::default();
            opts.tol = T::of(10.0) * cfg.solver.tol / (h * h);
            let msh = msh_report(&sum, m, &opts)?;
            let mut sopts = MshOptions::default();
            sopts.tol = opts.tol;
            sopts.strict_c = Some(c_shell);
            sopts.region = Some(shell);
            let strict_rep = msh_report(&sum, m, &sopts)?;
            let exh = exhaustion_report(&sum, &ExhaustionOptions::default());
            let negative_ok = exh.positive_count == 0;
            let sup = sum.sup_norm();
            Ok(ExhaustionBuild {
                field: sum,
                recipe,
                coefficients,
                negative_ok,
                exhaustion: exh,
                msh,
                strictness: Some((c_shell, strict_rep)),
                sup_norm: sup,
                mass: None,
                e0: None,
            })
        }
        ExhaustionRecipe::BoundedMass => {
            let terms = ((T::one() / cfg.tail_tol).log2().ceil().to_f64_lossy() as usize)
                .clamp(8, cfg.max_terms);
            let mut coefficients = Vec::with_capacity(terms);
            let mut sum = GridField::constant(Arc::clone(domain), T::zero());
            for j in 1..=terms {
                let pj = piece(j)?;
                let sup_pj = pj.sup_norm().max(T::one());
                let dj = hessian_density(&pj, m)?;
                let mass_j = total_mass(&dj, &pj, None)?.mass.max(T::zero());
                let scale = sup_pj
                    .max(mass_j.powf(T::one() / T::of(m as f64)))
                    .max(T::one());
                let a_j = two.powi(-(j as i32)) / scale;
                coefficients.push(a_j);
                sum = sum.zip(&pj, "bounded_mass", move |acc, v| acc + a_j * v)?;
            }
            let sup = sum.sup_norm();
            let density = hessian_density(&sum, m)?;
            let mass = total_mass(&density, &sum, None)?;
            let mut opts = MshOptions::default();
            opts.tol = T::of(10.0) * cfg.solver.tol / (h * h);
            let msh = msh_report(&sum, m, &opts)?;
            let exh = exhaustion_report(&sum, &ExhaustionOptions::default());
            let negative_ok = exh.positive_count == 0;
            let e0 = e0_membership(
                &sum,
                m,
                opts.tol,
                T::of(4.0) * h * (T::one() + sup) + eta / T::of(6.0),
            )?;
            Ok(ExhaustionBuild {
                field: sum,
                recipe,
                coefficients,
                negative_ok,
                exhaustion: exh,
                msh,
                strictness: None,
                sup_norm: sup,
                mass: Some(mass),
                e0: Some(e0),
            })
        }
        ExhaustionRecipe::Uniform => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{eval_closed_form, ClosedForm};
    use crate::grid::shapes;

    #[test]
    fn frames_are_unitary_lattice_bases() {
        for n in 1..=4 {
            let frames = frame_catalog(n);
            assert!(!frames.is_empty());
            assert!(frames.len() <= 32);
            for f in &frames {
                assert_eq!(f.columns.len(), n);
                assert!(frame_is_unitary(f), "frame {f:?}");
            }
        }
    }

    #[test]
    fn pinch_keeps_identity_exact() {
        let a = HermitianForm::<f64>::identity(2).scale(0.5);
        let frames = frame_catalog(2);
        let (c, err) = pinch_sample(&a, &frames);
        assert!(err < 1e-12);
        assert_eq!(c.frame, 0);
        let total: f64 = c.weights.iter().map(|&(_, w)| w).sum();
        assert!((total - 0.25).abs() < 1e-12);
    }

    #[test]
    fn constant_obstacle_is_fixed() {
        let dom = Arc::new(Domain::new(shapes::disc::<f64>(1.0), 0.1).unwrap());
        let f = GridField::constant(Arc::clone(&dom), 2.0);
        let problem = EnvelopeProblem::new(
            Arc::clone(&dom),
            1,
            EnvelopeMode::Obstacle { f: f.clone() },
            1,
            0,
        )
        .unwrap();
        let r = solve_envelope(&problem, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        for &p in dom.interior_points() {
            assert!((r.u.get(p as usize) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn msh_obstacle_is_its_own_envelope() {
        // an обstacle that is already m-subharmonic is returned unchanged
        let dom = Arc::new(Domain::new(shapes::ball::<f64>(2, 1.0), 0.1).unwrap());
        let a = HermitianForm::diagonal(&[1.2, 0.4]);
        let f = eval_closed_form(
            &ClosedForm::HermitianQuadratic { form: a, shift: -2.0 },
            &dom,
        );
        let problem = EnvelopeProblem::new(
            Arc::clone(&dom),
            2,
            EnvelopeMode::Obstacle { f: f.clone() },
            48,
            3,
        )
        .unwrap();
        let cfg = SolverConfig {
            tol: 1e-9,
            certify: false,
            ..SolverConfig::default()
        };
        let r = solve_envelope(&problem, &cfg).unwrap();
        assert!(r.converged);
        let mut worst = 0.0f64;
        for &p in dom.interior_points() {
            worst = worst.max((f.get(p as usize) - r.u.get(p as usize)).abs());
        }
        assert!(worst < 1e-5, "envelope moved an m-sh obstacle by {worst}");
    }

    #[test]
    fn disc_extremal_matches_harmonic_oracle() {
        // E = disc(0, 1/4) inside the unit disc: the harmonic solution is
        // log|z| / log 4 on the annulus
        let h = 0.02;
        let dom = Arc::new(Domain::new(shapes::disc::<f64>(1.0), h).unwrap());
        let mut e = Bitset::new(dom.cells());
        let mut pt = [0.0; MAX_REAL_DIM];
        for &p in dom.interior_points() {
            dom.point_into(p as usize, &mut pt);
            if pt[0] * pt[0] + pt[1] * pt[1] < 0.25 * 0.25 {
                e.set(p as usize, true);
            }
        }
        let problem =
            EnvelopeProblem::new(Arc::clone(&dom), 1, EnvelopeMode::Extremal { e }, 1, 0).unwrap();
        let cfg = SolverConfig {
            tol: 1e-8,
            certify: false,
            ..SolverConfig::default()
        };
        let r = solve_envelope(&problem, &cfg).unwrap();
        assert!(r.converged);
        let oracle = |x: f64, y: f64| {
            let rr = (x * x + y * y).sqrt();
            if rr <= 0.25 {
                -1.0
            } else {
                (rr.ln() / 4.0f64.ln()).min(0.0)
            }
        };
        let mut worst = 0.0f64;
        for &p in dom.interior_points() {
            dom.point_into(p as usize, &mut pt);
            let want = oracle(pt[0], pt[1]);
            worst = worst.max((r.u.get(p as usize) - want).abs());
        }
        assert!(worst <= 0.04, "sup error {worst} at h={h}");
        // spot value at |z| = 0.5
        let q = dom.flat_of_point(&[0.5, 0.0]).unwrap();
        assert!((r.u.get(q) - (-0.5)).abs() <= 0.02, "{}", r.u.get(q));
    }

    #[test]
    fn sweep_monotonicity_and_idempotence() {
        let dom = Arc::new(Domain::new(shapes::disc::<f64>(1.0), 0.05).unwrap());
        // a non-subharmonic obstacle: concave bump
        let f = eval_closed_form(
            &ClosedForm::Affine {
                terms: vec![(-1.0, ClosedForm::SqNorm)],
                offset: 0.5,
            },
            &dom,
        );
        let problem = EnvelopeProblem::new(
            Arc::clone(&dom),
            1,
            EnvelopeMode::Obstacle { f: f.clone() },
            1,
            0,
        )
        .unwrap();
        let cfg = SolverConfig {
            tol: 1e-9,
            certify: false,
            record_residuals: true,
            ..SolverConfig::default()
        };
        let r = solve_envelope(&problem, &cfg).unwrap();
        assert!(r.converged);
        // u <= f and nontrivial contact set
        for &p in dom.interior_points() {
            assert!(r.u.get(p as usize) <= f.get(p as usize) + 1e-12);
        }
        // residuals nonincreasing after the first couple of sweeps
        let hist = &r.residual_history;
        for w in hist.windows(2).skip(2) {
            assert!(w[1] <= w[0] * 1.5 + 1e-12, "residual spike {w:?}");
        }
        // idempotence: re-solving with the envelope as obstacle returns it
        let problem2 = EnvelopeProblem::new(
            Arc::clone(&dom),
            1,
            EnvelopeMode::Obstacle { f: r.u.clone() },
            1,
            0,
        )
        .unwrap();
        let r2 = solve_envelope(&problem2, &cfg).unwrap();
        let mut worst = 0.0f64;
        for &p in dom.interior_points() {
            worst = worst.max((r2.u.get(p as usize) - r.u.get(p as usize)).abs());
        }
        assert!(worst < 1e-6, "idempotence violated by {worst}");
    }

    #[test]
    fn envelope_monotone_in_obstacle_and_samples() {
        let dom = Arc::new(Domain::new(shapes::ball::<f64>(2, 1.0), 0.2).unwrap());
        let f = eval_closed_form(
            &ClosedForm::Affine {
                terms: vec![(-1.0, ClosedForm::SqNorm)],
                offset: 0.3,
            },
            &dom,
        );
        let g = f.map("higher", |v| v + 0.2);
        let cfg = SolverConfig {
            tol: 1e-8,
            certify: false,
            ..SolverConfig::default()
        };
        let solve = |obst: &GridField<f64>, samples: usize| {
            let problem = EnvelopeProblem::new(
                Arc::clone(&dom),
                2,
                EnvelopeMode::Obstacle { f: obst.clone() },
                samples,
                5,
            )
            .unwrap();
            solve_envelope(&problem, &cfg).unwrap()
        };
        let rf = solve(&f, 24);
        let rg = solve(&g, 24);
        for &p in dom.interior_points() {
            assert!(rf.u.get(p as usize) <= rg.u.get(p as usize) + 1e-7);
        }
        // enlarging the sample family can only lower the envelope
        let r24 = rf;
        let r48 = {
            let mut samples = EnvelopeProblem::<f64>::standard_samples(2, 2, 24, 5).unwrap();
            samples.extend(EnvelopeProblem::<f64>::standard_samples(2, 2, 24, 99).unwrap());
            let problem = EnvelopeProblem {
                domain: Arc::clone(&dom),
                m: 2,
                mode: EnvelopeMode::Obstacle { f: f.clone() },
                dual_samples: samples,
                seed: 5,
            };
            solve_envelope(&problem, &cfg).unwrap()
        };
        for &p in dom.interior_points() {
            assert!(r48.u.get(p as usize) <= r24.u.get(p as usize) + 1e-6);
        }
    }

    #[test]
    fn hyperconvexity_ball_passes() {
        let cfg = TesterConfig::<f64> {
            samples: 24,
            ..TesterConfig::default()
        };
        for m in 1..=2 {
            let out = hyperconvexity_test(
                &shapes::ball::<f64>(2, 1.0),
                m,
                0.2,
                &[0.0, 0.0, 0.0, 0.0],
                0.3,
                &cfg,
            )
            .unwrap();
            assert_eq!(out.verdict, Verdict::Pass, "m={m}: {:?}", out.fine.max_gap);
        }
    }

    #[test]
    fn bm_regularity_disc_passes() {
        let dom = Arc::new(Domain::new(shapes::disc::<f64>(1.0), 0.05).unwrap());
        let cfg = TesterConfig::<f64>::default();
        let out = bm_regularity_test(&dom, 1, &[1.0, 0.0], &cfg).unwrap();
        assert_eq!(out.verdict, Verdict::Pass, "{out:?}");
    }

    #[test]
    fn uniform_exhaustion_on_ball_is_twice_quadratic() {
        // boundary data -2|xi|^2 is constant -2 on the unit sphere, so the
        // envelope is -2 and the output must be 2(|z|^2 - 1)
        let dom = Arc::new(Domain::new(shapes::ball::<f64>(2, 1.0), 0.15).unwrap());
        let cfg = ExhaustionConfig::<f64> {
            samples: 32,
            ..ExhaustionConfig::default()
        };
        let b = build_exhaustion(&dom, 2, ExhaustionRecipe::Uniform, &cfg).unwrap();
        assert!(b.negative_ok);
        assert!(b.msh.all_passed(), "worst {}", b.msh.worst_margin);
        let mut pt = [0.0; MAX_REAL_DIM];
        let mut worst = 0.0f64;
        for &p in dom.interior_points() {
            dom.point_into(p as usize, &mut pt);
            let q: f64 = pt[..4].iter().map(|x| x * x).sum();
            worst = worst.max((b.field.get(p as usize) - 2.0 * (q - 1.0)).abs());
        }
        assert!(worst < 0.1, "deviation {worst}");
    }
}
