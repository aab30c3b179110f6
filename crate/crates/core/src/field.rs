//! Function fields on gridded domains: closed-form catalogue evaluation,
//! finite-difference complex Hessians, m-subharmonicity certification with a
//! viscosity rule at max-creases, combination operations, smoothed max,
//! mollification, and exhaustion diagnostics.

use crate::cone::{
    gamma_membership_of_spectrum, linearization_form, sample_gamma_form, ConeReport,
    HermitianForm, CONE_TOL,
};
use crate::error::{Error, Result};
use crate::grid::{Bitset, Coords, Domain, MAX_REAL_DIM};
use crate::scalar::Scalar;
use num_complex::Complex;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::Arc;

/// Values at or below this are treated as log-singularity sentinels and
/// excluded from difference stencils.
pub const SENTINEL_THRESHOLD: f64 = -1e6;

/// Value written for log singularities.
pub const SENTINEL_VALUE: f64 = -1e9;

#[inline]
pub fn is_sentinel<T: Scalar>(v: T) -> bool {
    v <= T::of(SENTINEL_THRESHOLD)
}

/// A real-valued sample on the masked nodes of a domain. Values off the
/// masks are NaN.
#[derive(Clone, Debug)]
pub struct GridField<T: Scalar> {
    domain: Arc<Domain<T>>,
    values: Vec<T>,
    provenance: String,
}

impl<T: Scalar> GridField<T> {
    pub fn from_values(domain: Arc<Domain<T>>, values: Vec<T>, provenance: &str) -> Result<Self> {
        if values.len() != domain.cells() {
            return Err(Error::validation("value array does not match grid size"));
        }
        for &p in domain.interior_points().iter().chain(domain.boundary_points()) {
            if !values[p as usize].is_finite() && !is_sentinel(values[p as usize]) {
                return Err(Error::validation(format!(
                    "non-finite value at masked node {p}"
                )));
            }
        }
        Ok(GridField {
            domain,
            values,
            provenance: provenance.to_string(),
        })
    }

    pub fn constant(domain: Arc<Domain<T>>, c: T) -> Self {
        let mut values = vec![T::nan(); domain.cells()];
        for &p in domain.interior_points().iter().chain(domain.boundary_points()) {
            values[p as usize] = c;
        }
        GridField {
            domain,
            values,
            provenance: format!("constant({})", c.to_f64_lossy()),
        }
    }

    pub fn domain(&self) -> &Arc<Domain<T>> {
        &self.domain
    }

    #[inline]
    pub fn get(&self, flat: usize) -> T {
        self.values[flat]
    }

    pub fn set(&mut self, flat: usize, v: T) {
        self.values[flat] = v;
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn set_provenance(&mut self, p: &str) {
        self.provenance = p.to_string();
    }

    /// Pointwise map over masked nodes.
    pub fn map(&self, provenance: &str, f: impl Fn(T) -> T) -> Self {
        let mut out = self.clone();
        for &p in self
            .domain
            .interior_points()
            .iter()
            .chain(self.domain.boundary_points())
        {
            out.values[p as usize] = f(self.values[p as usize]);
        }
        out.provenance = provenance.to_string();
        out
    }

    /// Pointwise combination with a second field on the same grid.
    pub fn zip(&self, other: &Self, provenance: &str, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_domain(other)?;
        let mut out = self.clone();
        for &p in self
            .domain
            .interior_points()
            .iter()
            .chain(self.domain.boundary_points())
        {
            out.values[p as usize] = f(self.values[p as usize], other.values[p as usize]);
        }
        out.provenance = provenance.to_string();
        Ok(out)
    }

    pub fn check_same_domain(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.domain, &other.domain) || self.domain.same_grid(&other.domain) {
            Ok(())
        } else {
            Err(Error::validation("fields live on different grids"))
        }
    }

    /// Max over interior nodes (sentinels ignored).
    pub fn interior_max(&self) -> T {
        self.domain
            .interior_points()
            .iter()
            .map(|&p| self.values[p as usize])
            .filter(|v| !is_sentinel(*v))
            .fold(T::neg_infinity(), |a, b| a.max(b))
    }

    pub fn interior_min(&self) -> T {
        self.domain
            .interior_points()
            .iter()
            .map(|&p| self.values[p as usize])
            .filter(|v| !is_sentinel(*v))
            .fold(T::infinity(), |a, b| a.min(b))
    }

    /// Sup-norm over all masked nodes (sentinels ignored).
    pub fn sup_norm(&self) -> T {
        self.domain
            .interior_points()
            .iter()
            .chain(self.domain.boundary_points())
            .map(|&p| self.values[p as usize])
            .filter(|v| !is_sentinel(*v))
            .fold(T::zero(), |a, b| a.max(b.abs()))
    }
}

/// Closed-form function catalogue, evaluable anywhere in C^n.
#[derive(Clone, Debug)]
pub enum ClosedForm<T: Scalar> {
    /// |z|^2
    SqNorm,
    /// max(log|w|, |z|^2 - |w|^2) on C^2, the Hartogs-triangle exhaustion
    HartogsExh,
    /// sum_{j<n} |z_j|^2 + (1 - n/k)|z_n|^2
    PhiK { k: usize },
    /// log|z_j|
    LogAbsCoord { j: usize },
    /// |z_j|
    AbsCoord { j: usize },
    /// sum_{jk} A_{jk} z_j conj(z_k) + shift (complex Hessian is exactly A)
    HermitianQuadratic { form: HermitianForm<T>, shift: T },
    Constant(T),
    /// Re sum_j c_j z_j (pluriharmonic)
    ReLinear { coeffs: Vec<Complex<T>> },
    /// Re z_j^2 (pluriharmonic)
    ReCoordSq { j: usize },
    /// sum_i scale_i * form_i + offset
    Affine {
        terms: Vec<(T, ClosedForm<T>)>,
        offset: T,
    },
    Max(Box<ClosedForm<T>>, Box<ClosedForm<T>>),
}

impl<T: Scalar> ClosedForm<T> {
    pub fn eval(&self, p: &[T], n: usize) -> T {
        match self {
            ClosedForm::SqNorm => (0..2 * n).map(|i| p[i] * p[i]).sum(),
            ClosedForm::HartogsExh => {
                let w2 = p[2] * p[2] + p[3] * p[3];
                let z2 = p[0] * p[0] + p[1] * p[1];
                let logw = if w2 > T::zero() {
                    w2.ln() * T::of(0.5)
                } else {
                    T::of(SENTINEL_VALUE)
                };
                logw.max(z2 - w2)
            }
            ClosedForm::PhiK { k } => {
                let mut acc = T::zero();
                for j in 0..n {
                    let r2 = p[2 * j] * p[2 * j] + p[2 * j + 1] * p[2 * j + 1];
                    let coeff = if j + 1 == n {
                        T::one() - T::of(n as f64) / T::of(*k as f64)
                    } else {
                        T::one()
                    };
                    acc = acc + coeff * r2;
                }
                acc
            }
            ClosedForm::LogAbsCoord { j } => {
                let r2 = p[2 * j] * p[2 * j] + p[2 * j + 1] * p[2 * j + 1];
                if r2 > T::zero() {
                    r2.ln() * T::of(0.5)
                } else {
                    T::of(SENTINEL_VALUE)
                }
            }
            ClosedForm::AbsCoord { j } => {
                (p[2 * j] * p[2 * j] + p[2 * j + 1] * p[2 * j + 1]).sqrt()
            }
            ClosedForm::HermitianQuadratic { form, shift } => {
                let mut acc = *shift;
                for j in 0..n {
                    let zj = Complex::new(p[2 * j], p[2 * j + 1]);
                    acc = acc + form.get(j, j).re * zj.norm_sqr();
                    for k in (j + 1)..n {
                        let zk = Complex::new(p[2 * k], p[2 * k + 1]);
                        let cross = form.get(j, k) * zj * zk.conj();
                        acc = acc + T::of(2.0) * cross.re;
                    }
                }
                acc
            }
            ClosedForm::Constant(c) => *c,
            ClosedForm::ReLinear { coeffs } => {
                let mut acc = Complex::new(T::zero(), T::zero());
                for (j, c) in coeffs.iter().enumerate() {
                    let zj = Complex::new(p[2 * j], p[2 * j + 1]);
                    acc = acc + *c * zj;
                }
                acc.re
            }
            ClosedForm::ReCoordSq { j } => p[2 * j] * p[2 * j] - p[2 * j + 1] * p[2 * j + 1],
            ClosedForm::Affine { terms, offset } => {
                let mut acc = *offset;
                for (s, cf) in terms {
                    let v = cf.eval(p, n);
                    if is_sentinel(v) && *s != T::zero() {
                        return T::of(SENTINEL_VALUE);
                    }
                    acc = acc + *s * v;
                }
                acc
            }
            ClosedForm::Max(a, b) => a.eval(p, n).max(b.eval(p, n)),
        }
    }

    pub fn id(&self) -> String {
        match self {
            ClosedForm::SqNorm => "sq_norm".into(),
            ClosedForm::HartogsExh => "hartogs_exh".into(),
            ClosedForm::PhiK { k } => format!("phi_{k}"),
            ClosedForm::LogAbsCoord { j } => format!("log_abs_coord({j})"),
            ClosedForm::AbsCoord { j } => format!("abs_coord({j})"),
            ClosedForm::HermitianQuadratic { .. } => "hermitian_quadratic".into(),
            ClosedForm::Constant(c) => format!("constant({})", c.to_f64_lossy()),
            ClosedForm::ReLinear { .. } => "re_linear".into(),
            ClosedForm::ReCoordSq { j } => format!("re_coord_sq({j})"),
            ClosedForm::Affine { .. } => "affine".into(),
            ClosedForm::Max(a, b) => format!("max({},{})", a.id(), b.id()),
        }
    }
}

/// Samples a closed form on the masked nodes of a domain.
pub fn eval_closed_form<T: Scalar>(cf: &ClosedForm<T>, domain: &Arc<Domain<T>>) -> GridField<T> {
    let n = domain.n();
    let mut values = vec![T::nan(); domain.cells()];
    let mut p: Coords<T> = [T::zero(); MAX_REAL_DIM];
    for &flat in domain
        .interior_points()
        .iter()
        .chain(domain.boundary_points())
    {
        domain.point_into(flat as usize, &mut p);
        values[flat as usize] = cf.eval(&p[..2 * n], n);
    }
    GridField {
        domain: Arc::clone(domain),
        values,
        provenance: cf.id(),
    }
}

// ---------------------------------------------------------------------------
// finite-difference complex Hessians
// ---------------------------------------------------------------------------

#[inline]
fn value_at<T: Scalar>(field: &GridField<T>, domain: &Domain<T>, flat: isize) -> Option<T> {
    if flat < 0 || flat as usize >= domain.cells() {
        return None;
    }
    let flat = flat as usize;
    if !domain.is_masked(flat) {
        return None;
    }
    let v = field.values[flat];
    if is_sentinel(v) || v.is_nan() {
        None
    } else {
        Some(v)
    }
}

/// Centered-difference complex Hessian (d^2 u / dz_j dconj(z_k)) at an
/// interior node. Exact on quadratics, O(h^2) otherwise.
pub fn complex_hessian_fd<T: Scalar>(field: &GridField<T>, flat: usize) -> Result<HermitianForm<T>> {
    let domain = field.domain.as_ref();
    let n = domain.n();
    let strides = domain.strides();
    let h2 = domain.h() * domain.h();
    let stencil_err = || Error::Stencil { index: flat };

    let center = value_at(field, domain, flat as isize).ok_or_else(stencil_err)?;
    let two = T::of(2.0);
    let quarter = T::of(0.25);

    // pure second differences per real axis
    let mut pure = [T::zero(); MAX_REAL_DIM];
    for d in 0..2 * n {
        let s = strides[d] as isize;
        let up = value_at(field, domain, flat as isize + s).ok_or_else(stencil_err)?;
        let dn = value_at(field, domain, flat as isize - s).ok_or_else(stencil_err)?;
        pure[d] = (up - two * center + dn) / h2;
    }

    let mixed = |a: usize, b: usize| -> Result<T> {
        let sa = strides[a] as isize;
        let sb = strides[b] as isize;
        let pp = value_at(field, domain, flat as isize + sa + sb).ok_or_else(stencil_err)?;
        let pm = value_at(field, domain, flat as isize + sa - sb).ok_or_else(stencil_err)?;
        let mp = value_at(field, domain, flat as isize - sa + sb).ok_or_else(stencil_err)?;
        let mm = value_at(field, domain, flat as isize - sa - sb).ok_or_else(stencil_err)?;
        Ok((pp - pm - mp + mm) / (T::of(4.0) * h2))
    };

    let mut entries = vec![Complex::new(T::zero(), T::zero()); n * n];
    for j in 0..n {
        entries[j * n + j] = Complex::new(quarter * (pure[2 * j] + pure[2 * j + 1]), T::zero());
        for k in (j + 1)..n {
            let dxx = mixed(2 * j, 2 * k)?;
            let dyy = mixed(2 * j + 1, 2 * k + 1)?;
            let dxy = mixed(2 * j, 2 * k + 1)?;
            let dyx = mixed(2 * j + 1, 2 * k)?;
            let v = Complex::new(quarter * (dxx + dyy), quarter * (dxy - dyx));
            entries[j * n + k] = v;
            entries[k * n + j] = v.conj();
        }
    }
    HermitianForm::new(n, entries)
}

/// One-sided Hessian over the corner box in direction `signs` (one sign per
/// real axis). Exact on quadratics restricted to that orthant.
fn corner_hessian<T: Scalar>(
    field: &GridField<T>,
    flat: usize,
    signs: &[i8],
) -> Result<HermitianForm<T>> {
    let domain = field.domain.as_ref();
    let n = domain.n();
    let strides = domain.strides();
    let h2 = domain.h() * domain.h();
    let stencil_err = || Error::Stencil { index: flat };
    let center = value_at(field, domain, flat as isize).ok_or_else(stencil_err)?;
    let two = T::of(2.0);
    let quarter = T::of(0.25);

    let step = |d: usize| signs[d] as isize * strides[d] as isize;

    let mut pure = [T::zero(); MAX_REAL_DIM];
    for d in 0..2 * n {
        let s = step(d);
        let v1 = value_at(field, domain, flat as isize + s).ok_or_else(stencil_err)?;
        let v2 = value_at(field, domain, flat as isize + 2 * s).ok_or_else(stencil_err)?;
        pure[d] = (center - two * v1 + v2) / h2;
    }
    let mixed = |a: usize, b: usize| -> Result<T> {
        let sa = step(a);
        let sb = step(b);
        let vab = value_at(field, domain, flat as isize + sa + sb).ok_or_else(stencil_err)?;
        let va = value_at(field, domain, flat as isize + sa).ok_or_else(stencil_err)?;
        let vb = value_at(field, domain, flat as isize + sb).ok_or_else(stencil_err)?;
        let sgn = T::of((signs[a] * signs[b]) as f64);
        Ok(sgn * (vab - va - vb + center) / h2)
    };

    let mut entries = vec![Complex::new(T::zero(), T::zero()); n * n];
    for j in 0..n {
        entries[j * n + j] = Complex::new(quarter * (pure[2 * j] + pure[2 * j + 1]), T::zero());
        for k in (j + 1)..n {
            let dxx = mixed(2 * j, 2 * k)?;
            let dyy = mixed(2 * j + 1, 2 * k + 1)?;
            let dxy = mixed(2 * j, 2 * k + 1)?;
            let dyx = mixed(2 * j + 1, 2 * k)?;
            let v = Complex::new(quarter * (dxx + dyy), quarter * (dxy - dyx));
            entries[j * n + k] = v;
            entries[k * n + j] = v.conj();
        }
    }
    HermitianForm::new(n, entries)
}

pub(crate) fn crease_probe<T: Scalar>(field: &GridField<T>, flat: usize, slope_tol: T) -> bool {
    crease_suspect(field, flat, slope_tol)
}

pub(crate) fn corner_hessian_probe<T: Scalar>(
    field: &GridField<T>,
    flat: usize,
    signs: &[i8],
) -> Result<HermitianForm<T>> {
    corner_hessian(field, flat, signs)
}

/// Detects a gradient kink near `flat`: per axis, the left- and right-sided
/// second differences of a crease differ by O(jump/h).
fn crease_suspect<T: Scalar>(field: &GridField<T>, flat: usize, slope_tol: T) -> bool {
    let domain = field.domain.as_ref();
    let h = domain.h();
    let h2 = h * h;
    let two = T::of(2.0);
    let center = match value_at(field, domain, flat as isize) {
        Some(v) => v,
        None => return false,
    };
    for d in 0..domain.dims() {
        let s = domain.strides()[d] as isize;
        let l = (
            value_at(field, domain, flat as isize - s),
            value_at(field, domain, flat as isize - 2 * s),
        );
        let r = (
            value_at(field, domain, flat as isize + s),
            value_at(field, domain, flat as isize + 2 * s),
        );
        if let ((Some(l1), Some(l2)), (Some(r1), Some(r2))) = (l, r) {
            let left = (center - two * l1 + l2) / h2;
            let right = (r2 - two * r1 + center) / h2;
            if (right - left).abs() * h > slope_tol {
                return true;
            }
        }
    }
    false
}

/// Options for [`msh_report`].
#[derive(Clone, Debug)]
pub struct MshOptions<T: Scalar> {
    /// Cone-membership tolerance on sigma values.
    pub tol: T,
    /// Certify u - c|z|^2 instead of u (strictness test).
    pub strict_c: Option<T>,
    /// Extra positivity pairings against this many random cone tuples.
    pub random_alpha_count: usize,
    pub alpha_seed: u64,
    /// Restrict evaluation to interior nodes in this mask.
    pub region: Option<Bitset>,
    /// Gradient-jump threshold that flags a max-crease.
    pub crease_slope_tol: T,
    /// Keep per-point verdicts (costly on large grids).
    pub collect_points: bool,
}

impl<T: Scalar> Default for MshOptions<T> {
    fn default() -> Self {
        MshOptions {
            tol: T::of(CONE_TOL),
            strict_c: None,
            random_alpha_count: 0,
            alpha_seed: 0,
            region: None,
            crease_slope_tol: T::of(0.02),
            collect_points: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PointVerdict<T: Scalar> {
    pub flat: u32,
    pub margin: T,
    pub sigma: Vec<T>,
    pub crease: bool,
    pub passed: bool,
}

/// Summary of a per-point m-subharmonicity certification sweep.
#[derive(Clone, Debug)]
pub struct MshReport<T: Scalar> {
    pub m: usize,
    pub evaluated: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub crease_points: usize,
    pub worst_margin: T,
    pub worst_point: Option<u32>,
    pub worst_sigma: Vec<T>,
    /// Most negative positivity pairing over the sampled cone tuples, if
    /// requested.
    pub alpha_worst: Option<T>,
    pub per_point: Option<Vec<PointVerdict<T>>>,
}

impl<T: Scalar> MshReport<T> {
    pub fn all_passed(&self) -> bool {
        self.failed == 0 && self.evaluated > 0
    }

    pub fn fraction_passing(&self) -> f64 {
        if self.evaluated == 0 {
            0.0
        } else {
            self.passed as f64 / self.evaluated as f64
        }
    }
}

struct PointOutcome<T: Scalar> {
    verdict: Option<PointVerdict<T>>,
    skipped: bool,
    crease: bool,
    alpha_worst: Option<T>,
}

/// Quarter of the FD Laplacian (= sigma_1 of the FD complex Hessian).
fn fd_trace<T: Scalar>(field: &GridField<T>, flat: usize, signs: Option<&[i8]>) -> Result<T> {
    let domain = field.domain.as_ref();
    let strides = domain.strides();
    let h2 = domain.h() * domain.h();
    let stencil_err = || Error::Stencil { index: flat };
    let center = value_at(field, domain, flat as isize).ok_or_else(stencil_err)?;
    let two = T::of(2.0);
    let mut acc = T::zero();
    for d in 0..domain.dims() {
        let s = strides[d] as isize;
        let dd = match signs {
            None => {
                let up = value_at(field, domain, flat as isize + s).ok_or_else(stencil_err)?;
                let dn = value_at(field, domain, flat as isize - s).ok_or_else(stencil_err)?;
                (up - two * center + dn) / h2
            }
            Some(sg) => {
                let step = sg[d] as isize * s;
                let v1 = value_at(field, domain, flat as isize + step).ok_or_else(stencil_err)?;
                let v2 =
                    value_at(field, domain, flat as isize + 2 * step).ok_or_else(stencil_err)?;
                (center - two * v1 + v2) / h2
            }
        };
        acc = acc + dd;
    }
    Ok(acc * T::of(0.25))
}

/// Trace-only evaluation: for order 1 the cone test reduces to sigma_1 >= 0,
/// so the mixed differences and the eigensolve can be skipped.
///
/// When the centered stencil fails, the point is retried with the viscosity
/// freedom of equivalent monotone stencils: per real axis the best of the
/// centered and one-sided second differences (rescues max-creases), and per
/// complex coordinate the pi/4-rotated diagonal Laplacian (its truncation
/// error has the opposite angular sign, so one orientation is always
/// favorable on smooth radial functions like log|z_j|). All variants are
/// exact on quadratics, so genuine cone violations keep their margins.
fn evaluate_point_trace<T: Scalar>(
    field: &GridField<T>,
    opts: &MshOptions<T>,
    flat: usize,
) -> PointOutcome<T> {
    let n = field.domain.n();
    let shift = opts.strict_c.unwrap_or(T::zero()) * T::of(n as f64);
    let centered = match fd_trace(field, flat, None) {
        Ok(t) => t - shift,
        Err(_) => {
            return PointOutcome {
                verdict: None,
                skipped: true,
                crease: false,
                alpha_worst: None,
            };
        }
    };
    let mut margin = centered;
    let mut crease = false;
    if margin < -opts.tol {
        crease = crease_suspect(field, flat, opts.crease_slope_tol);
        let domain = field.domain.as_ref();
        let strides = domain.strides();
        let h2 = domain.h() * domain.h();
        let two = T::of(2.0);
        if let Some(center) = value_at(field, domain, flat as isize) {
            let one_sided_best = |axis: usize| -> Option<T> {
                let s = strides[axis] as isize;
                let mut best: Option<T> = None;
                for sgn in [-1isize, 1] {
                    let v1 = value_at(field, domain, flat as isize + sgn * s);
                    let v2 = value_at(field, domain, flat as isize + 2 * sgn * s);
                    if let (Some(v1), Some(v2)) = (v1, v2) {
                        let dd = (center - two * v1 + v2) / h2;
                        best = Some(best.map_or(dd, |b: T| b.max(dd)));
                    }
                }
                best
            };
            let centered_axis = |axis: usize| -> Option<T> {
                let s = strides[axis] as isize;
                let up = value_at(field, domain, flat as isize + s)?;
                let dn = value_at(field, domain, flat as isize - s)?;
                Some((up - two * center + dn) / h2)
            };
            let mut acc = T::zero();
            let mut ok = true;
            for j in 0..n {
                let (a, b) = (2 * j, 2 * j + 1);
                let axis_part = match (centered_axis(a), centered_axis(b)) {
                    (Some(ca), Some(cb)) => {
                        let ba = one_sided_best(a).map_or(ca, |v| v.max(ca));
                        let bb = one_sided_best(b).map_or(cb, |v| v.max(cb));
                        Some(ba + bb)
                    }
                    _ => None,
                };
                // diagonal 4-point Laplacian on the (Re z_j, Im z_j) plane
                let sa = strides[a] as isize;
                let sb = strides[b] as isize;
                let diag_part = (|| {
                    let pp = value_at(field, domain, flat as isize + sa + sb)?;
                    let mm = value_at(field, domain, flat as isize - sa - sb)?;
                    let pm = value_at(field, domain, flat as isize + sa - sb)?;
                    let mp = value_at(field, domain, flat as isize - sa + sb)?;
                    Some((pp + mm + pm + mp - T::of(4.0) * center) / (two * h2))
                })();
                let best = match (axis_part, diag_part) {
                    (Some(x), Some(y)) => x.max(y),
                    (Some(x), None) => x,
                    (None, Some(y)) => y,
                    (None, None) => {
                        ok = false;
                        break;
                    }
                };
                acc = acc + best;
            }
            if ok {
                margin = margin.max(acc * T::of(0.25) - shift);
            }
        }
    }
    PointOutcome {
        verdict: Some(PointVerdict {
            flat: flat as u32,
            margin,
            sigma: vec![margin],
            crease,
            passed: margin >= -opts.tol,
        }),
        skipped: false,
        crease,
        alpha_worst: None,
    }
}

fn evaluate_point<T: Scalar>(
    field: &GridField<T>,
    m: usize,
    opts: &MshOptions<T>,
    alphas: &[HermitianForm<T>],
    flat: usize,
) -> PointOutcome<T> {
    if m == 1 && alphas.is_empty() {
        return evaluate_point_trace(field, opts, flat);
    }
    let n = field.domain.n();
    let shift = opts.strict_c.unwrap_or(T::zero());
    let adjust = |h: &HermitianForm<T>| -> HermitianForm<T> {
        if shift == T::zero() {
            h.clone()
        } else {
            let mut a = h.clone();
            for j in 0..n {
                let v = a.get(j, j) - Complex::new(shift, T::zero());
                a.set(j, j, v);
            }
            a
        }
    };

    let report_of = |h: &HermitianForm<T>| -> Option<(ConeReport<T>, crate::cone::Spectrum<T>)> {
        let spec = crate::cone::eigenvalues_hermitian(h).ok()?;
        let rep = gamma_membership_of_spectrum(&spec, m, opts.tol).ok()?;
        Some((rep, spec))
    };

    let centered = complex_hessian_fd(field, flat).map(|h| adjust(&h));
    let mut crease = false;
    let (best_rep, chosen_h) = match centered {
        Ok(h) => {
            let Some((rep, _)) = report_of(&h) else {
                return PointOutcome {
                    verdict: None,
                    skipped: true,
                    crease: false,
                    alpha_worst: None,
                };
            };
            if rep.member {
                (rep, h)
            } else {
                // viscosity rule: retry with the one-sided corner Hessians
                // (exact on one-sided quadratics), which rescues max-creases
                // and kink bands of smoothed maxima; genuine cone violations
                // keep their margins
                crease = crease_suspect(field, flat, opts.crease_slope_tol);
                let mut best = (rep, h);
                let dims = field.domain.dims();
                let mut signs = vec![1i8; dims];
                'combos: for combo in 0..(1u32 << dims) {
                    for (d, s) in signs.iter_mut().enumerate() {
                        *s = if combo & (1 << d) != 0 { 1 } else { -1 };
                    }
                    if let Ok(oh) = corner_hessian(field, flat, &signs) {
                        let oh = adjust(&oh);
                        if let Some((orep, _)) = report_of(&oh) {
                            if orep.margin > best.0.margin {
                                best = (orep, oh);
                            }
                            if best.0.member {
                                break 'combos;
                            }
                        }
                    }
                }
                best
            }
        }
        Err(_) => {
            return PointOutcome {
                verdict: None,
                skipped: true,
                crease: false,
                alpha_worst: None,
            };
        }
    };

    let alpha_worst = if alphas.is_empty() {
        None
    } else {
        let mut worst = T::infinity();
        for a in alphas {
            // pairing tr(A H)
            let mut tr = T::zero();
            for j in 0..n {
                for k in 0..n {
                    tr = tr + (a.get(j, k) * chosen_h.get(k, j)).re;
                }
            }
            worst = worst.min(tr);
        }
        Some(worst)
    };

    PointOutcome {
        verdict: Some(PointVerdict {
            flat: flat as u32,
            margin: best_rep.margin,
            sigma: best_rep.sigma_values.clone(),
            crease,
            passed: best_rep.member,
        }),
        skipped: false,
        crease,
        alpha_worst,
    }
}

/// Certifies m-subharmonicity of a field pointwise on the interior: cone
/// membership of the finite-difference complex Hessian, with one-sided
/// Hessians at detected creases.
pub fn msh_report<T: Scalar>(
    field: &GridField<T>,
    m: usize,
    opts: &MshOptions<T>,
) -> Result<MshReport<T>> {
    let domain = field.domain.as_ref();
    let n = domain.n();
    if m == 0 || m > n {
        return Err(Error::validation(format!(
            "cone order {m} outside range 1..={n}"
        )));
    }

    // precomputed linearizations for the optional pairing check
    let alphas: Vec<HermitianForm<T>> = if opts.random_alpha_count > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.alpha_seed);
        (0..opts.random_alpha_count)
            .map(|_| {
                let tuple: Vec<HermitianForm<T>> = (0..(m - 1))
                    .map(|_| sample_gamma_form(n, m, &mut rng, opts.tol))
                    .collect();
                linearization_form(n, m, &tuple)
            })
            .collect()
    } else {
        Vec::new()
    };

    let points: Vec<u32> = match &opts.region {
        Some(mask) => domain
            .interior_points()
            .iter()
            .copied()
            .filter(|&p| mask.get(p as usize))
            .collect(),
        None => domain.interior_points().to_vec(),
    };

    #[derive(Clone)]
    struct Acc<T: Scalar> {
        evaluated: usize,
        passed: usize,
        failed: usize,
        skipped: usize,
        crease: usize,
        worst: (T, Option<u32>, Vec<T>),
        alpha_worst: Option<T>,
        verdicts: Vec<PointVerdict<T>>,
    }
    impl<T: Scalar> Acc<T> {
        fn new() -> Self {
            Acc {
                evaluated: 0,
                passed: 0,
                failed: 0,
                skipped: 0,
                crease: 0,
                worst: (T::infinity(), None, Vec::new()),
                alpha_worst: None,
                verdicts: Vec::new(),
            }
        }
        fn merge(mut self, other: Self) -> Self {
            self.evaluated += other.evaluated;
            self.passed += other.passed;
            self.failed += other.failed;
            self.skipped += other.skipped;
            self.crease += other.crease;
            // deterministic tie-break on flat index
            let better = other.worst.0 < self.worst.0
                || (other.worst.0 == self.worst.0
                    && other.worst.1.unwrap_or(u32::MAX) < self.worst.1.unwrap_or(u32::MAX));
            if better {
                self.worst = other.worst;
            }
            self.alpha_worst = match (self.alpha_worst, other.alpha_worst) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            self.verdicts.extend(other.verdicts);
            self
        }
        fn absorb(
            &mut self,
            out: PointOutcome<T>,
            collect: bool,
        ) {
            if out.skipped {
                self.skipped += 1;
                return;
            }
            let v = out.verdict.expect("non-skipped point has a verdict");
            self.evaluated += 1;
            if v.passed {
                self.passed += 1;
            } else {
                self.failed += 1;
            }
            if out.crease {
                self.crease += 1;
            }
            let better = v.margin < self.worst.0
                || (v.margin == self.worst.0 && v.flat < self.worst.1.unwrap_or(u32::MAX));
            if better {
                self.worst = (v.margin, Some(v.flat), v.sigma.clone());
            }
            self.alpha_worst = match (self.alpha_worst, out.alpha_worst) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            if collect {
                self.verdicts.push(v);
            }
        }
    }

    let collect = opts.collect_points;
    let acc = points
        .par_chunks(8192)
        .map(|chunk| {
            let mut acc = Acc::new();
            for &flat in chunk {
                let out = evaluate_point(field, m, opts, &alphas, flat as usize);
                acc.absorb(out, collect);
            }
            acc
        })
        .reduce(Acc::new, Acc::merge);

    let mut verdicts = acc.verdicts;
    if collect {
        verdicts.sort_by_key(|v| v.flat);
    }

    Ok(MshReport {
        m,
        evaluated: acc.evaluated,
        passed: acc.passed,
        failed: acc.failed,
        skipped: acc.skipped,
        crease_points: acc.crease,
        worst_margin: acc.worst.0,
        worst_point: acc.worst.1,
        worst_sigma: acc.worst.2,
        alpha_worst: acc.alpha_worst,
        per_point: if collect { Some(verdicts) } else { None },
    })
}

// ---------------------------------------------------------------------------
// combination operations
// ---------------------------------------------------------------------------

/// Pointwise combination of two fields on the same grid.
pub enum CombineOp<T: Scalar> {
    /// Pointwise maximum.
    Max,
    /// s*u + t*v with nonnegative constants.
    Affine { s: T, t: T },
    /// u outside omega, max(u, v) on omega; requires v <= u (within tol) on
    /// the inner ring of omega so the result has no jump.
    Glue { omega: Bitset, tol: T },
}

pub fn combine<T: Scalar>(
    op: CombineOp<T>,
    u: &GridField<T>,
    v: &GridField<T>,
) -> Result<GridField<T>> {
    u.check_same_domain(v)?;
    match op {
        CombineOp::Max => u.zip(v, "max", |a, b| a.max(b)),
        CombineOp::Affine { s, t } => {
            if s < T::zero() || t < T::zero() {
                return Err(Error::validation("affine combination needs s,t >= 0"));
            }
            u.zip(v, "affine", move |a, b| {
                if is_sentinel(a) || is_sentinel(b) {
                    T::of(SENTINEL_VALUE)
                } else {
                    s * a + t * b
                }
            })
        }
        CombineOp::Glue { omega, tol } => {
            let domain = u.domain().as_ref();
            if omega.len() != domain.cells() {
                return Err(Error::validation("glue mask does not match grid"));
            }
            for &p in domain.boundary_points() {
                if omega.get(p as usize) {
                    return Err(Error::validation("glue mask must lie in the interior"));
                }
            }
            let mut in_interior = omega.clone();
            in_interior.and(domain.interior());
            if in_interior != omega {
                return Err(Error::validation("glue mask must lie in the interior"));
            }
            // the ring faces the interior only; boundary-side neighbors are
            // irrelevant to the gluing condition
            let ring = domain.inner_ring(&omega, domain.interior());
            let mut worst: Option<(usize, T)> = None;
            for p in ring {
                let excess = v.get(p) - u.get(p);
                if excess > tol && worst.map(|(_, e)| excess > e).unwrap_or(true) {
                    worst = Some((p, excess));
                }
            }
            if let Some((index, excess)) = worst {
                return Err(Error::GlueBoundary {
                    index,
                    excess: excess.to_f64_lossy(),
                });
            }
            let mut out = u.clone();
            for &p in domain.interior_points() {
                let p = p as usize;
                if omega.get(p) {
                    out.values[p] = u.get(p).max(v.get(p));
                }
            }
            out.provenance = "glue".to_string();
            Ok(out)
        }
    }
}

// ---------------------------------------------------------------------------
// regularized max
// ---------------------------------------------------------------------------

/// Smoothed maximum: the average of max(u+s, v+t) over s,t uniform in
/// [-eta/2, eta/2]. Dominates max(u,v), agrees with it where |u-v| > eta,
/// and is symmetric; averaging preserves m-subharmonicity.
pub fn regularized_max<T: Scalar>(
    u: &GridField<T>,
    v: &GridField<T>,
    eta: T,
) -> Result<GridField<T>> {
    if eta <= T::zero() {
        return Err(Error::validation("eta must be positive"));
    }
    let w = eta * T::of(0.5);
    // antiderivative of the inner average r(tau) = avg_s max(s, tau)
    let inner_int = move |tau: T| -> T {
        if tau <= -w {
            T::zero()
        } else if tau <= w {
            let t = tau + w;
            t * t * t / (T::of(12.0) * w)
        } else {
            T::of(2.0) / T::of(3.0) * w * w + (tau * tau - w * w) * T::of(0.5)
        }
    };
    u.zip(v, "regularized_max", move |a, b| {
        if is_sentinel(a) || is_sentinel(b) {
            return a.max(b);
        }
        let d = b - a;
        if d.abs() >= eta {
            a.max(b)
        } else {
            a + (inner_int(d + w) - inner_int(d - w)) / (T::of(2.0) * w)
        }
    })
}

// ---------------------------------------------------------------------------
// mollification
// ---------------------------------------------------------------------------

/// Radial smoothing kernel: profile C/(1-t)^2 exp(1/(t-1)) in t = |z|^2
/// normalized to unit total mass, scaled to radius epsilon.
#[derive(Clone, Debug)]
pub struct MollifierSpec<T: Scalar> {
    pub epsilon: T,
    /// Normalization constant for the dimension (unit total integral).
    pub c_n: T,
    n: usize,
}

/// Kernel profile without the normalization constant.
fn kernel_profile(t: f64) -> f64 {
    if !(0.0..1.0).contains(&t) {
        return 0.0;
    }
    (1.0 - t).powi(-2) * (1.0 / (t - 1.0)).exp()
}

/// Unit-sphere surface area in R^{2n}.
fn sphere_area(n: usize) -> f64 {
    let mut gamma_n = 1.0; // (n-1)!
    for i in 2..n {
        gamma_n *= i as f64;
    }
    2.0 * std::f64::consts::PI.powi(n as i32) / gamma_n
}

/// Simpson quadrature of the radial kernel mass in R^{2n} (C = 1).
fn kernel_mass_unnormalized(n: usize) -> f64 {
    let nodes = 10_000usize;
    let h = 1.0 / nodes as f64;
    let f = |r: f64| kernel_profile(r * r) * r.powi((2 * n - 1) as i32);
    let mut acc = f(0.0) + f(1.0);
    for i in 1..nodes {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0 * sphere_area(n)
}

impl<T: Scalar> MollifierSpec<T> {
    pub fn new(n: usize, epsilon: T) -> Result<Self> {
        if epsilon <= T::zero() {
            return Err(Error::validation("mollifier radius must be positive"));
        }
        let mass = kernel_mass_unnormalized(n);
        Ok(MollifierSpec {
            epsilon,
            c_n: T::of(1.0 / mass),
            n,
        })
    }

    /// Discretized total mass of the kernel at spacing h (should be 1 up to
    /// quadrature error; the invariant check used by tests).
    pub fn discrete_mass(&self, h: T) -> T {
        let n = self.n;
        let eps = self.epsilon.to_f64_lossy();
        let hh = h.to_f64_lossy();
        let reach = (eps / hh).ceil() as i64;
        let dims = 2 * n;
        let mut idx = vec![-reach; dims];
        let mut acc = 0.0f64;
        loop {
            let mut r2 = 0.0;
            for &i in &idx {
                let x = i as f64 * hh;
                r2 += x * x;
            }
            let t = r2 / (eps * eps);
            acc += self.c_n.to_f64_lossy() * kernel_profile(t);
            let mut d = dims;
            loop {
                if d == 0 {
                    return T::of(acc * (hh / eps).powi(dims as i32));
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] <= reach {
                    break;
                }
                idx[d] = -reach;
            }
        }
    }
}

/// Result of a mollification: the smoothed field on the epsilon-shrunken
/// interior (original values elsewhere) and the mask of smoothed nodes.
pub struct MollifyResult<T: Scalar> {
    pub field: GridField<T>,
    pub valid: Bitset,
    pub skipped_sentinel: usize,
}

/// Discrete convolution with the radial kernel; weights renormalized to sum
/// exactly 1 so constants are fixed points.
pub fn mollify<T: Scalar>(field: &GridField<T>, spec: &MollifierSpec<T>) -> Result<MollifyResult<T>> {
    let domain = field.domain().clone();
    let h = domain.h();
    if spec.epsilon < T::of(2.0) * h {
        return Err(Error::validation("mollifier radius must be at least 2h"));
    }
    if spec.n != domain.n() {
        return Err(Error::validation("mollifier dimension mismatch"));
    }
    let eps = spec.epsilon.to_f64_lossy();
    let hh = h.to_f64_lossy();
    let reach = (eps / hh).ceil() as i64;
    let dims = domain.dims();

    // kernel offsets and weights
    let mut offsets: Vec<(isize, T)> = Vec::new();
    let mut idx = vec![-reach; dims];
    'outer: loop {
        let mut r2 = 0.0;
        for &i in &idx {
            let x = i as f64 * hh;
            r2 += x * x;
        }
        let t = r2 / (eps * eps);
        let wgt = kernel_profile(t);
        if wgt > 0.0 {
            let steps: Vec<i32> = idx.iter().map(|&i| i as i32).collect();
            offsets.push((domain.flat_offset(&steps), T::of(wgt)));
        }
        let mut d = dims;
        loop {
            if d == 0 {
                break 'outer;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] <= reach {
                break;
            }
            idx[d] = -reach;
        }
    }
    let total: T = offsets.iter().map(|&(_, w)| w).sum();
    if total <= T::zero() {
        return Err(Error::validation("empty mollifier kernel"));
    }
    for o in offsets.iter_mut() {
        o.1 = o.1 / total;
    }

    let mut out = field.clone();
    let mut valid = Bitset::new(domain.cells());
    let mut skipped_sentinel = 0usize;
    let mut any = false;
    for &p in domain.interior_points() {
        let p = p as usize;
        let mut acc = T::zero();
        let mut ok = true;
        let mut sentinel = false;
        for &(off, w) in &offsets {
            match value_at(field, domain.as_ref(), p as isize + off) {
                Some(v) => acc = acc + w * v,
                None => {
                    let q = p as isize + off;
                    if q >= 0
                        && (q as usize) < domain.cells()
                        && domain.is_masked(q as usize)
                        && is_sentinel(field.values[q as usize])
                    {
                        sentinel = true;
                    }
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            out.values[p] = acc;
            valid.set(p, true);
            any = true;
        } else if sentinel {
            skipped_sentinel += 1;
        }
    }
    if !any {
        return Err(Error::MollifierTooWide {
            epsilon: eps,
        });
    }
    out.provenance = format!("mollify({}, eps={eps})", field.provenance);
    Ok(MollifyResult {
        field: out,
        valid,
        skipped_sentinel,
    })
}

// ---------------------------------------------------------------------------
// exhaustion diagnostics
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct LadderRung<T: Scalar> {
    pub level: T,
    /// L1 grid distance (scaled by h) from the sublevel set to the boundary.
    pub distance: T,
    pub sublevel_count: usize,
}

/// Diagnostics for "negative exhaustion function" candidates.
#[derive(Clone, Debug)]
pub struct ExhaustionReport<T: Scalar> {
    /// Sup of the field over interior nodes within two face-rings of the
    /// boundary (Euclidean distance <= 2h).
    pub boundary_band_sup: T,
    pub band_count: usize,
    /// Interior nodes with positive values and the worst offender.
    pub positive_count: usize,
    pub max_positive: T,
    /// Sublevel-set distances for a ladder of levels (decreasing levels must
    /// move away from the boundary).
    pub ladder: Option<Vec<LadderRung<T>>>,
    pub ladder_monotone: bool,
}

#[derive(Clone, Debug)]
pub struct ExhaustionOptions {
    pub with_ladder: bool,
    pub ladder_levels: usize,
}

impl Default for ExhaustionOptions {
    fn default() -> Self {
        ExhaustionOptions {
            with_ladder: true,
            ladder_levels: 6,
        }
    }
}

pub fn exhaustion_report<T: Scalar>(
    field: &GridField<T>,
    opts: &ExhaustionOptions,
) -> ExhaustionReport<T> {
    let domain = field.domain().as_ref();

    // two face-dilations of the boundary intersected with the interior
    let mut band = domain.boundary().clone();
    for _ in 0..2 {
        let cur = band.clone();
        for d in 0..domain.dims() {
            let s = domain.strides()[d] as isize;
            band.or_shifted(&cur, s);
            band.or_shifted(&cur, -s);
        }
    }
    band.and(domain.interior());

    let mut band_sup = T::neg_infinity();
    let mut band_count = 0usize;
    for p in band.ones() {
        let v = field.get(p);
        if !is_sentinel(v) && !v.is_nan() {
            band_sup = band_sup.max(v);
            band_count += 1;
        }
    }

    let mut positive_count = 0usize;
    let mut max_positive = T::zero();
    for &p in domain.interior_points() {
        let v = field.get(p as usize);
        if v > T::zero() && !v.is_nan() {
            positive_count += 1;
            max_positive = max_positive.max(v);
        }
    }

    let (ladder, ladder_monotone) = if opts.with_ladder {
        let dist = domain.distance_to_boundary();
        let min_v = field.interior_min();
        let levels = opts.ladder_levels.max(2);
        let mut rungs = Vec::with_capacity(levels);
        for i in 0..levels {
            // levels sweep from near 0 down toward the minimum
            let frac = T::of((i + 1) as f64 / (levels + 1) as f64);
            let level = min_v * frac;
            let mut d_min = T::infinity();
            let mut count = 0usize;
            for &p in domain.interior_points() {
                let v = field.get(p as usize);
                if !v.is_nan() && v < level {
                    count += 1;
                    d_min = d_min.min(dist[p as usize]);
                }
            }
            rungs.push(LadderRung {
                level,
                distance: d_min,
                sublevel_count: count,
            });
        }
        // deeper levels must pull strictly away from the boundary
        let occupied: Vec<&LadderRung<T>> =
            rungs.iter().filter(|r| r.sublevel_count > 0).collect();
        let mut monotone = occupied.len() >= 2;
        for w in occupied.windows(2) {
            if w[1].distance < w[0].distance {
                monotone = false;
            }
        }
        if let (Some(first), Some(last)) = (occupied.first(), occupied.last()) {
            if last.distance <= first.distance {
                monotone = false;
            }
        }
        (Some(rungs), monotone)
    } else {
        (None, true)
    };

    ExhaustionReport {
        boundary_band_sup: band_sup,
        band_count,
        positive_count,
        max_positive,
        ladder,
        ladder_monotone,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::gamma_membership;
    use crate::grid::shapes;

    fn disc_domain(r: f64, h: f64) -> Arc<Domain<f64>> {
        Arc::new(Domain::new(shapes::disc::<f64>(r), h).unwrap())
    }

    fn ball2_domain(r: f64, h: f64) -> Arc<Domain<f64>> {
        Arc::new(Domain::new(shapes::ball::<f64>(2, r), h).unwrap())
    }

    #[test]
    fn closed_form_point_values() {
        // |z|^2 at (0.3, 0.4) in C^2 (real parts only)
        let v = ClosedForm::<f64>::SqNorm.eval(&[0.3, 0.0, 0.4, 0.0], 2);
        assert!((v - 0.25).abs() < 1e-15);

        // hartogs exhaustion at |z|=0.3, |w|=0.6
        let v = ClosedForm::<f64>::HartogsExh.eval(&[0.3, 0.0, 0.6, 0.0], 2);
        let oracle = (0.6f64.ln()).max(0.09 - 0.36);
        assert!((v - oracle).abs() < 1e-15);
        assert!((v + 0.27).abs() < 1e-15);

        // phi_2 in C^3 at (0,0,1)
        let v = ClosedForm::<f64>::PhiK { k: 2 }.eval(&[0.0, 0.0, 0.0, 0.0, 1.0, 0.0], 3);
        assert!((v + 0.5).abs() < 1e-15);

        // log singularity becomes a sentinel
        let v = ClosedForm::<f64>::LogAbsCoord { j: 0 }.eval(&[0.0, 0.0], 1);
        assert!(is_sentinel(v));
    }

    #[test]
    fn hessian_exact_on_quadratics() {
        let dom = ball2_domain(1.0, 0.2);
        let f = eval_closed_form(&ClosedForm::SqNorm, &dom);
        let p = dom.flat_of_point(&[0.2, 0.0, -0.2, 0.2]).unwrap();
        let h = complex_hessian_fd(&f, p).unwrap();
        let id = HermitianForm::<f64>::identity(2);
        assert!(h.sub(&id).frobenius_norm() < 1e-11);

        // pluriharmonic Re z1^2: zero form
        let g = eval_closed_form(&ClosedForm::ReCoordSq { j: 0 }, &dom);
        let h = complex_hessian_fd(&g, p).unwrap();
        assert!(h.frobenius_norm() < 1e-11);

        // corner Hessians agree on quadratics for every sign choice
        let q = eval_closed_form(
            &ClosedForm::HermitianQuadratic {
                form: HermitianForm::diagonal(&[2.0, 0.5]),
                shift: -1.0,
            },
            &dom,
        );
        let want = HermitianForm::diagonal(&[2.0, 0.5]);
        for combo in 0..16u32 {
            let signs: Vec<i8> = (0..4)
                .map(|d| if combo & (1 << d) != 0 { 1 } else { -1 })
                .collect();
            let h = corner_hessian(&q, p, &signs).unwrap();
            assert!(h.sub(&want).frobenius_norm() < 1e-10);
        }
    }

    #[test]
    fn hessian_of_phi_k() {
        let dom = Arc::new(Domain::new(shapes::reinhardt::<f64>(3, 2), 0.25).unwrap());
        let f = eval_closed_form(&ClosedForm::PhiK { k: 2 }, &dom);
        let p = dom.flat_of_point(&[0.25, 0.0, 0.0, 0.25, 0.0, 0.0]).unwrap();
        assert!(dom.interior().get(p));
        let h = complex_hessian_fd(&f, p).unwrap();
        let want = HermitianForm::diagonal(&[1.0, 1.0, -0.5]);
        assert!(h.sub(&want).frobenius_norm() < 1e-10);
    }

    #[test]
    fn msh_dichotomy_for_phi_2() {
        let dom = Arc::new(Domain::new(shapes::reinhardt::<f64>(3, 2), 0.35).unwrap());
        let f = eval_closed_form(&ClosedForm::PhiK { k: 2 }, &dom);
        let opts = MshOptions::default();
        let r1 = msh_report(&f, 1, &opts).unwrap();
        let r2 = msh_report(&f, 2, &opts).unwrap();
        let r3 = msh_report(&f, 3, &opts).unwrap();
        assert!(r1.all_passed(), "m=1 worst {:?}", r1.worst_margin);
        assert!(r2.all_passed(), "m=2 worst {:?}", r2.worst_margin);
        assert!(r1.worst_margin >= -1e-9);
        assert!(r2.worst_margin >= -1e-9);
        assert_eq!(r3.failed, r3.evaluated);
        assert!((r3.worst_margin + 0.5).abs() < 1e-9);
    }

    #[test]
    fn msh_constant_passes() {
        let dom = disc_domain(1.0, 0.1);
        let f = GridField::constant(dom, -3.0);
        let r = msh_report(&f, 1, &MshOptions::default()).unwrap();
        assert!(r.all_passed());
        assert!(r.worst_margin.abs() < 1e-12);
    }

    #[test]
    fn msh_quadratic_matches_cone_membership() {
        // grid-free consistency: quadratic passes iff its matrix is in the cone
        let dom = ball2_domain(1.0, 0.25);
        for (diag, expect) in [
            ([1.0, 1.0], [true, true]),
            ([1.0, -0.6], [true, false]),
            ([-1.0, -1.0], [false, false]),
        ] {
            let a = HermitianForm::diagonal(&diag);
            let f = eval_closed_form(
                &ClosedForm::HermitianQuadratic {
                    form: a.clone(),
                    shift: 0.0,
                },
                &dom,
            );
            for (mi, want) in expect.iter().enumerate() {
                let m = mi + 1;
                let rep = msh_report(&f, m, &MshOptions::default()).unwrap();
                let cone = gamma_membership(&a, m, 1e-9).unwrap();
                assert_eq!(rep.all_passed(), cone.member, "diag {diag:?} m={m}");
                assert_eq!(rep.all_passed(), *want);
            }
        }
    }

    #[test]
    fn msh_hartogs_exhaustion_subharmonic() {
        let dom = Arc::new(Domain::new(shapes::hartogs_triangle::<f64>(), 0.05).unwrap());
        let f = eval_closed_form(&ClosedForm::HartogsExh, &dom);
        let r = msh_report(&f, 1, &MshOptions::default()).unwrap();
        assert!(
            r.worst_margin >= -1e-6,
            "worst margin {} at {:?}",
            r.worst_margin,
            r.worst_point
        );
        assert!(r.all_passed());
    }

    #[test]
    fn msh_skips_log_sentinel_stencils() {
        // log|w| alone: stencils touching the w = 0 sentinel axis are skipped
        let dom = Arc::new(Domain::new(shapes::hartogs_triangle::<f64>(), 0.1).unwrap());
        let f = eval_closed_form(&ClosedForm::LogAbsCoord { j: 1 }, &dom);
        let r = msh_report(&f, 1, &MshOptions::default()).unwrap();
        assert!(r.skipped > 0, "points near the singular axis must be skipped");
        assert!(r.all_passed(), "worst {}", r.worst_margin);
    }

    #[test]
    fn msh_crease_viscosity_rule() {
        // max of two order-2 quadratics: centered Hessians are garbage at the
        // crease, one-sided ones are exact
        let dom = ball2_domain(1.0, 0.1);
        let a1 = HermitianForm::diagonal(&[2.0, 0.5]);
        let a2 = HermitianForm::diagonal(&[0.5, 2.0]);
        let u = eval_closed_form(
            &ClosedForm::HermitianQuadratic { form: a1, shift: 0.0 },
            &dom,
        );
        let v = eval_closed_form(
            &ClosedForm::HermitianQuadratic { form: a2, shift: -0.05 },
            &dom,
        );
        let w = combine(CombineOp::Max, &u, &v).unwrap();
        let r = msh_report(&w, 2, &MshOptions::default()).unwrap();
        assert!(r.all_passed(), "worst {} at {:?}", r.worst_margin, r.worst_point);
        assert!(r.crease_points > 0, "crease rule should have been exercised");
    }

    #[test]
    fn msh_nesting_on_fields() {
        let dom = ball2_domain(1.0, 0.2);
        let a = HermitianForm::diagonal(&[1.5, 0.25]);
        let f = eval_closed_form(
            &ClosedForm::HermitianQuadratic { form: a, shift: 0.0 },
            &dom,
        );
        let r2 = msh_report(&f, 2, &MshOptions::default()).unwrap();
        let r1 = msh_report(&f, 1, &MshOptions::default()).unwrap();
        assert!(r2.all_passed());
        assert!(r1.all_passed(), "order-2 pass must imply order-1 pass");
    }

    #[test]
    fn msh_alpha_pairing_consistent() {
        let dom = ball2_domain(1.0, 0.25);
        let f = eval_closed_form(&ClosedForm::SqNorm, &dom);
        let mut opts = MshOptions::default();
        opts.random_alpha_count = 8;
        opts.alpha_seed = 3;
        let r = msh_report(&f, 2, &opts).unwrap();
        assert!(r.all_passed());
        assert!(r.alpha_worst.unwrap() >= -1e-9);
    }

    #[test]
    fn combine_max_and_affine() {
        let dom = disc_domain(1.0, 0.1);
        let u = eval_closed_form(&ClosedForm::SqNorm, &dom);
        let same = combine(CombineOp::Max, &u, &u).unwrap();
        for &p in dom.interior_points() {
            assert_eq!(same.get(p as usize), u.get(p as usize));
        }
        let v = GridField::constant(Arc::clone(&dom), 0.3);
        let aff = combine(CombineOp::Affine { s: 1.0, t: 1.0 }, &u, &v).unwrap();
        let r = msh_report(&aff, 1, &MshOptions::default()).unwrap();
        assert!(r.all_passed());
        assert!(combine(CombineOp::Affine { s: -1.0, t: 1.0 }, &u, &v).is_err());
    }

    #[test]
    fn glue_reconstructs_hartogs_exhaustion() {
        let dom = Arc::new(Domain::new(shapes::hartogs_triangle::<f64>(), 0.08).unwrap());
        let u = eval_closed_form(&ClosedForm::LogAbsCoord { j: 1 }, &dom);
        let v = eval_closed_form(
            &ClosedForm::Affine {
                terms: vec![
                    (1.0, ClosedForm::HermitianQuadratic {
                        form: HermitianForm::diagonal(&[1.0, -1.0]),
                        shift: 0.0,
                    }),
                ],
                offset: 0.0,
            },
            &dom,
        );
        // omega: one-ring dilation of {v > u}, clipped to the interior
        let mut core = Bitset::new(dom.cells());
        for &p in dom.interior_points() {
            let p = p as usize;
            if v.get(p) > u.get(p) {
                core.set(p, true);
            }
        }
        let mut omega = dom.dilate(&core, 1);
        omega.and(dom.interior());
        let glued = combine(
            CombineOp::Glue { omega, tol: 1e-12 },
            &u,
            &v,
        )
        .unwrap();
        let reference = eval_closed_form(&ClosedForm::HartogsExh, &dom);
        for &p in dom.interior_points() {
            let got = glued.get(p as usize);
            let want = reference.get(p as usize);
            if is_sentinel(want) {
                assert!(is_sentinel(got) || got <= want + 1e-12);
            } else {
                assert!((got - want).abs() < 1e-12, "mismatch at {p}");
            }
        }
    }

    #[test]
    fn glue_rejects_jump() {
        let dom = disc_domain(1.0, 0.1);
        let u = GridField::constant(Arc::clone(&dom), 0.0);
        let v = GridField::constant(Arc::clone(&dom), 1.0); // v > u everywhere
        let mut omega = Bitset::new(dom.cells());
        let c = dom.flat_of_point(&[0.0, 0.0]).unwrap();
        omega.set(c, true);
        let r = combine(CombineOp::Glue { omega, tol: 1e-9 }, &u, &v);
        assert!(matches!(r, Err(Error::GlueBoundary { .. })));
    }

    #[test]
    fn regularized_max_properties() {
        let dom = disc_domain(1.0, 0.1);
        let eta = 0.2;
        let v = eval_closed_form(&ClosedForm::SqNorm, &dom);

        // far apart: exact max
        let u = v.map("shifted", |x| x + 10.0 * eta);
        let m = regularized_max(&u, &v, eta).unwrap();
        for &p in dom.interior_points() {
            assert_eq!(m.get(p as usize), u.get(p as usize));
        }

        // equal inputs: offset given by the double average of max(s,t),
        // computed here by an independent midpoint quadrature
        let m = regularized_max(&v, &v, eta).unwrap();
        let k = 400usize;
        let w = eta / 2.0;
        let mut oracle = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let s = -w + (i as f64 + 0.5) * eta / k as f64;
                let t = -w + (j as f64 + 0.5) * eta / k as f64;
                oracle += s.max(t);
            }
        }
        oracle /= (k * k) as f64;
        for &p in dom.interior_points() {
            let got = m.get(p as usize) - v.get(p as usize);
            assert!((got - oracle).abs() < 1e-5, "offset {got} vs oracle {oracle}");
            assert!(got >= 0.0);
            assert!((got - eta / 6.0).abs() < 1e-12); // closed form of the oracle
        }

        // symmetry and domination in a genuinely mixed configuration
        let u = eval_closed_form(
            &ClosedForm::ReLinear {
                coeffs: vec![Complex::new(0.5, 0.0)],
            },
            &dom,
        );
        let m1 = regularized_max(&u, &v, eta).unwrap();
        let m2 = regularized_max(&v, &u, eta).unwrap();
        for &p in dom.interior_points() {
            let p = p as usize;
            assert!((m1.get(p) - m2.get(p)).abs() < 1e-14);
            assert!(m1.get(p) >= u.get(p).max(v.get(p)) - 1e-14);
        }
    }

    #[test]
    fn regularized_max_preserves_msh() {
        let dom = ball2_domain(1.0, 0.05);
        let a1 = HermitianForm::diagonal(&[2.0, 0.5]);
        let a2 = HermitianForm::diagonal(&[0.5, 2.0]);
        let u = eval_closed_form(
            &ClosedForm::HermitianQuadratic { form: a1, shift: 0.0 },
            &dom,
        );
        let v = eval_closed_form(
            &ClosedForm::HermitianQuadratic { form: a2, shift: -0.02 },
            &dom,
        );
        let eta = 8.0 * 0.05;
        let m = regularized_max(&u, &v, eta).unwrap();
        let mut opts = MshOptions::<f64>::default();
        // smoothing is C^1 with curvature O(1/eta): allow the FD kernel-mixing
        // error h/eta * curvature as tolerance
        opts.tol = 0.05 / eta * 4.0;
        let r = msh_report(&m, 2, &opts).unwrap();
        assert!(
            r.all_passed(),
            "worst {} at {:?} ({} failed)",
            r.worst_margin,
            r.worst_point,
            r.failed
        );
    }

    #[test]
    fn mollifier_normalization_and_fixed_points() {
        // the quadrature constant is validated on a fine lattice; the kernel
        // tail is Gevrey-flat, so the lattice sum converges to 1 only once
        // epsilon/h is large (24+)
        for (n, ratio) in [(1usize, 32.0), (2, 24.0)] {
            let spec = MollifierSpec::<f64>::new(n, 1.0).unwrap();
            assert!(spec.c_n > 0.0);
            let mass = spec.discrete_mass(1.0 / ratio);
            assert!(
                (mass - 1.0).abs() < 1e-6,
                "n={n}: discrete kernel mass {mass}"
            );
        }

        let dom = disc_domain(1.0, 0.05);
        let spec = MollifierSpec::<f64>::new(1, 0.2).unwrap();
        let c = GridField::constant(Arc::clone(&dom), 2.5);
        let r = mollify(&c, &spec).unwrap();
        for p in r.valid.ones() {
            assert!((r.field.get(p) - 2.5).abs() < 1e-12);
        }
        assert!(r.valid.count() > 0);

        // commutes with adding constants and nonnegative scaling
        let f = eval_closed_form(&ClosedForm::SqNorm, &dom);
        let mf = mollify(&f, &spec).unwrap();
        let g = f.map("shifted", |x| 3.0 * x + 1.0);
        let mg = mollify(&g, &spec).unwrap();
        for p in mf.valid.ones() {
            assert!((mg.field.get(p) - (3.0 * mf.field.get(p) + 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn mollify_preserves_msh() {
        let dom = ball2_domain(1.0, 0.1);
        let a = HermitianForm::diagonal(&[1.5, 0.2]);
        let u = eval_closed_form(
            &ClosedForm::HermitianQuadratic { form: a, shift: 0.0 },
            &dom,
        );
        let spec = MollifierSpec::<f64>::new(2, 0.25).unwrap();
        let r = mollify(&u, &spec).unwrap();
        let mut opts = MshOptions::<f64>::default();
        opts.region = Some({
            // stay one ring inside the valid mask so stencils read smoothed values
            let mut eroded = Bitset::new(dom.cells());
            for p in r.valid.ones() {
                let mut all = true;
                for d in 0..dom.dims() {
                    for q in [p.wrapping_sub(dom.strides()[d]), p + dom.strides()[d]] {
                        if q >= dom.cells() || !r.valid.get(q) {
                            all = false;
                        }
                    }
                }
                if all {
                    eroded.set(p, true);
                }
            }
            eroded
        });
        opts.tol = 1e-8;
        let rep = msh_report(&r.field, 2, &opts).unwrap();
        assert!(rep.evaluated > 0);
        assert!(rep.all_passed(), "worst {}", rep.worst_margin);
        assert!(mollify(&u, &MollifierSpec::new(2, 5.0).unwrap()).is_err());
    }

    #[test]
    fn exhaustion_report_cases() {
        let h = 0.05;
        let dom = disc_domain(1.0, h);
        // exact exhaustion |z|^2 - 1
        let f = eval_closed_form(
            &ClosedForm::Affine {
                terms: vec![(1.0, ClosedForm::SqNorm)],
                offset: -1.0,
            },
            &dom,
        );
        let rep = exhaustion_report(&f, &ExhaustionOptions::default());
        assert!(rep.boundary_band_sup <= 0.0);
        assert!(rep.boundary_band_sup >= -2.0 * h * 2.0); // 2h band, diameter 2
        assert_eq!(rep.positive_count, 0);
        assert!(rep.ladder_monotone);

        // constant -1 is not an exhaustion
        let c = GridField::constant(Arc::clone(&dom), -1.0);
        let rep = exhaustion_report(&c, &ExhaustionOptions::default());
        assert!((rep.boundary_band_sup + 1.0).abs() < 1e-12);
        assert!(!rep.ladder_monotone);
    }

    #[test]
    fn exhaustion_report_hartogs() {
        let h = 0.05;
        let dom = Arc::new(Domain::new(shapes::hartogs_triangle::<f64>(), h).unwrap());
        let f = eval_closed_form(&ClosedForm::HartogsExh, &dom);
        let rep = exhaustion_report(&f, &ExhaustionOptions { with_ladder: false, ladder_levels: 0 });
        assert!(rep.boundary_band_sup <= 1e-12);
        assert!(rep.boundary_band_sup >= -4.0 * h, "band sup {}", rep.boundary_band_sup);
        assert_eq!(rep.positive_count, 0);
    }
}
