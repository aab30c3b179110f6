//! Discrete Jensen measures as linear-programming feasible sets over a
//! certified family of m-subharmonic test functions, with the duality,
//! boundary-support, and boundary-extension checks built on them.
//!
//! A discrete Jensen measure with barycenter z is a probability vector mu on
//! the grid nodes with sum mu(p) u(p) >= u(z) for every family member u. The
//! envelope value inf { integral g dmu } and the cone-side value
//! sup { v(z) : v a nonnegative family combination below g } are a primal
//! and dual pair, so their gap must vanish to solver accuracy.

use crate::envelope::{solve_envelope, EnvelopeMode, EnvelopeProblem, SolverConfig};
use crate::error::{Error, Result};
use crate::field::{eval_closed_form, is_sentinel, msh_report, ClosedForm, GridField, MshOptions};
use crate::grid::{Coords, Domain, MAX_REAL_DIM};
use crate::scalar::Scalar;
use crate::simplex::{solve_lp, ConstraintOp, LinearProgram};
use num_complex::Complex;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// A probability measure on grid nodes.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure<T: Scalar> {
    pub support: Vec<u32>,
    pub weights: Vec<T>,
}

impl<T: Scalar> DiscreteMeasure<T> {
    pub fn total(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub fn validate(&self, domain: &Domain<T>) -> Result<()> {
        if self.support.len() != self.weights.len() {
            return Err(Error::validation("measure support/weight length mismatch"));
        }
        if self.weights.iter().any(|w| *w < -T::of(1e-12)) {
            return Err(Error::validation("negative measure weight"));
        }
        if (self.total() - T::one()).abs() > T::of(1e-12) {
            return Err(Error::validation("measure mass is not 1"));
        }
        if self
            .support
            .iter()
            .any(|&p| !domain.is_masked(p as usize))
        {
            return Err(Error::validation("measure supported off the grid masks"));
        }
        Ok(())
    }

    /// Integral of a field against the measure.
    pub fn integrate(&self, g: &GridField<T>) -> T {
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * g.get(p as usize))
            .sum()
    }
}

/// Generation recipe for a test family.
#[derive(Clone)]
pub struct FamilySpec<T: Scalar> {
    pub quadratic_count: usize,
    pub seed: u64,
    pub extras: Vec<GridField<T>>,
    pub certification_tol: T,
}

impl<T: Scalar> Default for FamilySpec<T> {
    fn default() -> Self {
        FamilySpec {
            quadratic_count: 8,
            seed: 17,
            extras: Vec::new(),
            certification_tol: T::of(1e-9),
        }
    }
}

/// A finite certified cone of continuous m-subharmonic test functions:
/// constants, pluriharmonic coordinates (both signs), cone quadratics, and
/// caller extras.
pub struct TestFamily<T: Scalar> {
    pub m: usize,
    pub members: Vec<GridField<T>>,
    pub ids: Vec<String>,
    /// Worst certification margin per member.
    pub margins: Vec<T>,
    pub seed: u64,
}

impl<T: Scalar> TestFamily<T> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

pub fn build_test_family<T: Scalar>(
    domain: &Arc<Domain<T>>,
    m: usize,
    spec: &FamilySpec<T>,
) -> Result<TestFamily<T>> {
    let n = domain.n();
    let mut members: Vec<(String, GridField<T>)> = Vec::new();

    for c in [T::one(), -T::one()] {
        members.push((
            format!("constant({})", c.to_f64_lossy()),
            GridField::constant(Arc::clone(domain), c),
        ));
    }
    for j in 0..n {
        for sign in [T::one(), -T::one()] {
            let mut re = vec![Complex::new(T::zero(), T::zero()); n];
            re[j] = Complex::new(sign, T::zero());
            members.push((
                format!("re_linear({j},{})", sign.to_f64_lossy()),
                eval_closed_form(&ClosedForm::ReLinear { coeffs: re }, domain),
            ));
            let mut im = vec![Complex::new(T::zero(), T::zero()); n];
            im[j] = Complex::new(T::zero(), -sign);
            members.push((
                format!("im_linear({j},{})", sign.to_f64_lossy()),
                eval_closed_form(&ClosedForm::ReLinear { coeffs: im }, domain),
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for k in 0..spec.quadratic_count {
        let a = crate::cone::sample_gamma_form(n, m, &mut rng, spec.certification_tol);
        members.push((
            format!("quadratic({k})"),
            eval_closed_form(
                &ClosedForm::HermitianQuadratic {
                    form: a,
                    shift: T::zero(),
                },
                domain,
            ),
        ));
    }
    for (i, extra) in spec.extras.iter().enumerate() {
        extra.check_same_domain(&members[0].1)?;
        members.push((format!("extra({i})"), extra.clone()));
    }

    // re-certify every member before inclusion
    let mut opts = MshOptions::default();
    opts.tol = spec.certification_tol.max(T::of(crate::cone::CONE_TOL));
    let mut margins = Vec::with_capacity(members.len());
    for (i, (_, f)) in members.iter().enumerate() {
        // continuity up to the boundary: no sentinels on the masks
        for &p in domain
            .interior_points()
            .iter()
            .chain(domain.boundary_points())
        {
            if is_sentinel(f.get(p as usize)) {
                return Err(Error::FamilyMember {
                    index: i,
                    margin: f64::NEG_INFINITY,
                });
            }
        }
        let rep = msh_report(f, m, &opts)?;
        if !rep.all_passed() {
            return Err(Error::FamilyMember {
                index: i,
                margin: rep.worst_margin.to_f64_lossy(),
            });
        }
        margins.push(rep.worst_margin);
    }

    let (ids, fields): (Vec<String>, Vec<GridField<T>>) = members.into_iter().unzip();
    Ok(TestFamily {
        m,
        members: fields,
        ids,
        margins,
        seed: spec.seed,
    })
}

#[derive(Clone, Debug)]
pub struct JensenConfig<T: Scalar> {
    pub max_lp_iters: usize,
    pub duality_tol: T,
    /// Largest grid size the dense LP accepts.
    pub max_support: usize,
}

impl<T: Scalar> Default for JensenConfig<T> {
    fn default() -> Self {
        JensenConfig {
            max_lp_iters: 400_000,
            duality_tol: T::of(1e-8),
            max_support: 20_000,
        }
    }
}

fn support_nodes<T: Scalar>(domain: &Domain<T>, cap: usize) -> Result<Vec<u32>> {
    let mut nodes: Vec<u32> = domain
        .interior_points()
        .iter()
        .chain(domain.boundary_points())
        .copied()
        .collect();
    nodes.sort_unstable();
    if nodes.len() > cap {
        return Err(Error::Lp(format!(
            "grid has {} nodes; the dense simplex is capped at {cap}",
            nodes.len()
        )));
    }
    Ok(nodes)
}

/// Minimal integral of `g` over the discrete Jensen measures with barycenter
/// `z`. The point mass at z is always feasible, so the value never exceeds
/// g(z).
pub fn jensen_lp_min<T: Scalar>(
    z: usize,
    g: &GridField<T>,
    fam: &TestFamily<T>,
    cfg: &JensenConfig<T>,
) -> Result<(T, DiscreteMeasure<T>)> {
    let domain = g.domain().as_ref();
    if !domain.is_masked(z) {
        return Err(Error::validation("barycenter must be a masked node"));
    }
    let nodes = support_nodes(domain, cfg.max_support)?;
    let objective: Vec<T> = nodes.iter().map(|&p| g.get(p as usize)).collect();
    let mut rows = Vec::with_capacity(1 + fam.len());
    rows.push((vec![T::one(); nodes.len()], ConstraintOp::Eq, T::one()));
    for u in &fam.members {
        u.check_same_domain(g)?;
        let row: Vec<T> = nodes.iter().map(|&p| u.get(p as usize)).collect();
        rows.push((row, ConstraintOp::Ge, u.get(z)));
    }
    let lp = LinearProgram { objective, rows };
    let sol = solve_lp(&lp, cfg.max_lp_iters)?;
    let mut support = Vec::new();
    let mut weights = Vec::new();
    for (i, &w) in sol.x.iter().enumerate() {
        if w > T::of(1e-13) {
            support.push(nodes[i]);
            weights.push(w);
        }
    }
    Ok((
        sol.value,
        DiscreteMeasure { support, weights },
    ))
}

/// Value of the cone side: the largest v(z) over nonnegative family
/// combinations (plus a free constant) dominated by g. By finite duality it
/// must agree with [`jensen_lp_min`].
pub fn cone_side_sup<T: Scalar>(
    z: usize,
    g: &GridField<T>,
    fam: &TestFamily<T>,
    cfg: &JensenConfig<T>,
) -> Result<T> {
    let domain = g.domain().as_ref();
    let nodes = support_nodes(domain, cfg.max_support)?;
    let k = fam.len();
    // variables: y0+ , y0-, y_1..y_k >= 0; maximize y0 + sum y_i u_i(z)
    let mut objective = vec![T::zero(); 2 + k];
    objective[0] = -T::one();
    objective[1] = T::one();
    for (i, u) in fam.members.iter().enumerate() {
        objective[2 + i] = -u.get(z);
    }
    let mut rows = Vec::with_capacity(nodes.len());
    for &p in &nodes {
        let mut row = vec![T::zero(); 2 + k];
        row[0] = T::one();
        row[1] = -T::one();
        for (i, u) in fam.members.iter().enumerate() {
            row[2 + i] = u.get(p as usize);
        }
        rows.push((row, ConstraintOp::Le, g.get(p as usize)));
    }
    let lp = LinearProgram { objective, rows };
    let sol = solve_lp(&lp, cfg.max_lp_iters)?;
    Ok(-sol.value)
}

/// |sup side - inf side| of the discrete duality; must be below the duality
/// tolerance for every inputs.
pub fn edwards_gap<T: Scalar>(
    z: usize,
    g: &GridField<T>,
    fam: &TestFamily<T>,
    cfg: &JensenConfig<T>,
) -> Result<T> {
    let (inf_side, _) = jensen_lp_min(z, g, fam, cfg)?;
    let sup_side = cone_side_sup(z, g, fam, cfg)?;
    Ok((inf_side - sup_side).abs())
}

/// One row of a boundary-mass scan.
#[derive(Clone, Debug)]
pub struct MassProfileRecord<T: Scalar> {
    pub node: u32,
    /// Shell threshold (distance to the boundary).
    pub shell: T,
    /// Largest interior mass a Jensen measure at the node can place on the
    /// shell.
    pub max_interior_mass: T,
    /// Arithmetic bound sup_band(-u) / min_shell(-u) from the designated
    /// exhaustion member, when one is given.
    pub bound: Option<T>,
}

/// For boundary barycenters, maximizes the Jensen mass placed on interior
/// shells. With a certified negative exhaustion in the family the mass is
/// pinched toward zero; without one it can stay large.
pub fn boundary_mass_profile<T: Scalar>(
    domain: &Arc<Domain<T>>,
    fam: &TestFamily<T>,
    shells: &[T],
    exhaustion_member: Option<usize>,
    max_nodes: usize,
    cfg: &JensenConfig<T>,
) -> Result<Vec<MassProfileRecord<T>>> {
    let nodes = support_nodes(domain, cfg.max_support)?;
    let dist = domain.distance_to_boundary();
    let boundary = domain.boundary_points();
    let stride = (boundary.len() / max_nodes.max(1)).max(1);
    let mut out = Vec::new();
    for (bi, &b) in boundary.iter().enumerate() {
        if bi % stride != 0 {
            continue;
        }
        for &shell in shells {
            let in_shell: Vec<bool> = nodes
                .iter()
                .map(|&p| {
                    domain.interior().get(p as usize) && dist[p as usize] >= shell
                })
                .collect();
            // maximize interior mass = minimize its negative
            let objective: Vec<T> = in_shell
                .iter()
                .map(|&k| if k { -T::one() } else { T::zero() })
                .collect();
            let mut rows = Vec::with_capacity(1 + fam.len());
            rows.push((vec![T::one(); nodes.len()], ConstraintOp::Eq, T::one()));
            for u in &fam.members {
                let row: Vec<T> = nodes.iter().map(|&p| u.get(p as usize)).collect();
                rows.push((row, ConstraintOp::Ge, u.get(b as usize)));
            }
            let lp = LinearProgram { objective, rows };
            let sol = solve_lp(&lp, cfg.max_lp_iters)?;
            let mass = -sol.value;
            let bound = exhaustion_member.map(|mi| {
                let u = &fam.members[mi];
                // sup of -u over the boundary band (two face rings)
                let mut band = domain.boundary().clone();
                for _ in 0..2 {
                    let cur = band.clone();
                    for d in 0..domain.dims() {
                        let s = domain.strides()[d] as isize;
                        band.or_shifted(&cur, s);
                        band.or_shifted(&cur, -s);
                    }
                }
                let mut band_sup = T::zero();
                for &p in domain.boundary_points() {
                    band_sup = band_sup.max(-u.get(p as usize));
                }
                for p in band.ones() {
                    if domain.interior().get(p) {
                        band_sup = band_sup.max(-u.get(p));
                    }
                }
                let mut min_shell = T::infinity();
                for (&p, &k) in nodes.iter().zip(&in_shell) {
                    if k {
                        min_shell = min_shell.min(-u.get(p as usize));
                    }
                }
                if min_shell > T::zero() {
                    band_sup / min_shell
                } else {
                    T::infinity()
                }
            });
            out.push(MassProfileRecord {
                node: b,
                shell,
                max_interior_mass: mass,
                bound,
            });
        }
    }
    Ok(out)
}

/// Scan record: is the only Jensen measure at the node the point mass?
#[derive(Clone, Debug)]
pub struct ScanRecord<T: Scalar> {
    pub node: u32,
    pub trivial: bool,
    /// Worst probe slack g(z) - value (0 for trivial nodes).
    pub worst_slack: T,
}

/// Flags nodes whose Jensen set collapses to the point mass: for every
/// probe, spreading cannot lower the integral. Probes must separate: family
/// members themselves always give equality and are rejected here by
/// supplying strictly concave local probes per node.
pub fn jensen_boundary_scan<T: Scalar>(
    domain: &Arc<Domain<T>>,
    fam: &TestFamily<T>,
    nodes: &[u32],
    extra_probes: &[GridField<T>],
    tol: T,
    cfg: &JensenConfig<T>,
) -> Result<Vec<ScanRecord<T>>> {
    let mut out = Vec::with_capacity(nodes.len());
    let dims = domain.dims();
    for &z in nodes {
        let z = z as usize;
        let mut zc: Coords<T> = [T::zero(); MAX_REAL_DIM];
        domain.point_into(z, &mut zc);
        // local strictly concave probe g = -|xi - z|^2
        let mut values = vec![T::nan(); domain.cells()];
        let mut pt: Coords<T> = [T::zero(); MAX_REAL_DIM];
        for &p in domain
            .interior_points()
            .iter()
            .chain(domain.boundary_points())
        {
            domain.point_into(p as usize, &mut pt);
            let mut d2 = T::zero();
            for i in 0..dims {
                let t = pt[i] - zc[i];
                d2 = d2 + t * t;
            }
            values[p as usize] = -d2;
        }
        let local = GridField::from_values(
            Arc::clone(domain),
            values,
            "scan_probe",
        )?;
        let mut worst_slack = T::zero();
        for probe in std::iter::once(&local).chain(extra_probes.iter()) {
            let (v, _) = jensen_lp_min(z, probe, fam, cfg)?;
            worst_slack = worst_slack.max(probe.get(z) - v);
        }
        out.push(ScanRecord {
            node: z as u32,
            trivial: worst_slack <= tol,
            worst_slack,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ExtensionWitness<T: Scalar> {
    pub node: u32,
    pub criterion_value: T,
    pub data_value: T,
    pub measure: DiscreteMeasure<T>,
}

pub struct ExtensionOutcome<T: Scalar> {
    pub pass: bool,
    pub witness: Option<ExtensionWitness<T>>,
    /// The order-m envelope of the boundary data.
    pub extension: GridField<T>,
    /// Boundary attainment gap of the envelope.
    pub attainment_gap: T,
    /// Worst criterion deviation over the boundary.
    pub worst_criterion: T,
}

/// Checks whether boundary data f extends to a continuous m-subharmonic
/// function: at every boundary node the Jensen minimum of a continuous
/// extension must return the data value; the envelope then realizes the
/// extension and must attain f at the boundary.
pub fn boundary_extension_check<T: Scalar>(
    domain: &Arc<Domain<T>>,
    m: usize,
    f: &[T],
    fam: &TestFamily<T>,
    criterion_tol: T,
    attainment_tol: T,
    samples: usize,
    seed: u64,
    solver: &SolverConfig<T>,
    cfg: &JensenConfig<T>,
) -> Result<ExtensionOutcome<T>> {
    if f.len() != domain.boundary_points().len() {
        return Err(Error::validation("boundary data does not match mask"));
    }
    // harmonic-type continuous extension: the order-1 envelope
    let p1 = EnvelopeProblem::new(
        Arc::clone(domain),
        1,
        EnvelopeMode::Boundary { f: f.to_vec() },
        1,
        seed,
    )?;
    let mut h_cfg = solver.clone();
    h_cfg.certify = false;
    let harmonic = solve_envelope(&p1, &h_cfg)?;

    // criterion at every boundary node
    let mut witness: Option<ExtensionWitness<T>> = None;
    let mut worst = T::zero();
    for (bi, &b) in domain.boundary_points().iter().enumerate() {
        let (v, mu) = jensen_lp_min(b as usize, &harmonic.u, fam, cfg)?;
        let dev = (v - f[bi]).abs();
        if dev > worst {
            worst = dev;
            if dev > criterion_tol {
                witness = Some(ExtensionWitness {
                    node: b,
                    criterion_value: v,
                    data_value: f[bi],
                    measure: mu,
                });
            }
        }
    }

    // the order-m envelope and its attainment
    let pm = EnvelopeProblem::new(
        Arc::clone(domain),
        m,
        EnvelopeMode::Boundary { f: f.to_vec() },
        samples,
        seed,
    )?;
    let env = solve_envelope(&pm, &h_cfg)?;
    let attainment_gap = env.boundary_report.max_gap;

    Ok(ExtensionOutcome {
        pass: witness.is_none() && attainment_gap <= attainment_tol,
        witness,
        extension: env.u,
        attainment_gap,
        worst_criterion: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::shapes;

    fn disc(h: f64) -> Arc<Domain<f64>> {
        Arc::new(Domain::new(shapes::disc::<f64>(1.0), h).unwrap())
    }

    fn small_family(dom: &Arc<Domain<f64>>, m: usize, quadratics: usize) -> TestFamily<f64> {
        build_test_family(
            dom,
            m,
            &FamilySpec {
                quadratic_count: quadratics,
                seed: 21,
                ..FamilySpec::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn family_builds_and_certifies() {
        let dom = disc(0.2);
        let fam = small_family(&dom, 1, 6);
        // constants, +-Re z, +-Im z, 6 quadratics
        assert_eq!(fam.len(), 2 + 4 + 6);
        assert!(fam.margins.iter().all(|&m| m >= -1e-9));
        // deterministic for a fixed seed
        let fam2 = small_family(&dom, 1, 6);
        for (a, b) in fam.members.iter().zip(&fam2.members) {
            for &p in dom.interior_points() {
                assert_eq!(a.get(p as usize), b.get(p as usize));
            }
        }
    }

    #[test]
    fn family_rejects_bad_extra() {
        let dom = disc(0.2);
        // -|z|^2 is nowhere subharmonic
        let bad = eval_closed_form(
            &ClosedForm::Affine {
                terms: vec![(-1.0, ClosedForm::SqNorm)],
                offset: 0.0,
            },
            &dom,
        );
        let r = build_test_family(
            &dom,
            1,
            &FamilySpec {
                quadratic_count: 0,
                extras: vec![bad],
                ..FamilySpec::default()
            },
        );
        assert!(matches!(r, Err(Error::FamilyMember { .. })));
    }

    #[test]
    fn point_mass_feasibility_bound() {
        let dom = disc(0.18);
        let fam = small_family(&dom, 1, 5);
        let cfg = JensenConfig::default();
        let g = eval_closed_form(
            &ClosedForm::Affine {
                terms: vec![(-1.0, ClosedForm::SqNorm)],
                offset: 0.4,
            },
            &dom,
        );
        for &z in dom.interior_points().iter().step_by(17) {
            let (v, mu) = jensen_lp_min(z as usize, &g, &fam, &cfg).unwrap();
            assert!(v <= g.get(z as usize) + 1e-9);
            mu.validate(dom.as_ref()).unwrap();
            // barycenter consistency
            for u in &fam.members {
                assert!(mu.integrate(u) >= u.get(z as usize) - 1e-8);
            }
        }
    }

    #[test]
    fn constants_only_family_gives_global_min() {
        let dom = disc(0.2);
        let fam = build_test_family(
            &dom,
            1,
            &FamilySpec {
                quadratic_count: 0,
                ..FamilySpec::default()
            },
        )
        .unwrap();
        // strip down to the constants: linear members also constrain, so
        // rebuild by hand
        let consts = TestFamily {
            m: 1,
            members: fam.members[..2].to_vec(),
            ids: fam.ids[..2].to_vec(),
            margins: fam.margins[..2].to_vec(),
            seed: 0,
        };
        let g = eval_closed_form(&ClosedForm::SqNorm, &dom);
        let z = dom.flat_of_point(&[0.6, 0.0]).unwrap();
        let (v, _) = jensen_lp_min(z, &g, &consts, &JensenConfig::default()).unwrap();
        let min_g = dom
            .interior_points()
            .iter()
            .chain(dom.boundary_points())
            .map(|&p| g.get(p as usize))
            .fold(f64::INFINITY, f64::min);
        assert!((v - min_g).abs() < 1e-10, "{v} vs {min_g}");
    }

    #[test]
    fn member_probe_gives_exact_value() {
        let dom = disc(0.2);
        let fam = small_family(&dom, 1, 4);
        let cfg = JensenConfig::default();
        let u = fam.members[7].clone();
        for &z in dom.interior_points().iter().step_by(23) {
            let (v, _) = jensen_lp_min(z as usize, &u, &fam, &cfg).unwrap();
            assert!(
                (v - u.get(z as usize)).abs() < 1e-9,
                "member value must be reproduced"
            );
        }
    }

    #[test]
    fn duality_gap_vanishes() {
        let dom = disc(0.22);
        let fam = small_family(&dom, 1, 5);
        let cfg = JensenConfig::default();
        let g = eval_closed_form(
            &ClosedForm::Affine {
                terms: vec![(-0.7, ClosedForm::SqNorm), (0.3, ClosedForm::ReCoordSq { j: 0 })],
                offset: 0.2,
            },
            &dom,
        );
        for &z in dom.interior_points().iter().step_by(31) {
            let gap = edwards_gap(z as usize, &g, &fam, &cfg).unwrap();
            assert!(gap <= 1e-8, "duality gap {gap}");
        }
        // constant data: both sides equal the constant
        let c = GridField::constant(Arc::clone(&dom), 0.37);
        let z = dom.interior_points()[5] as usize;
        let (v, _) = jensen_lp_min(z, &c, &fam, &cfg).unwrap();
        assert!((v - 0.37).abs() < 1e-10);
        assert!(edwards_gap(z, &c, &fam, &cfg).unwrap() <= 1e-9);
    }

    #[test]
    fn family_growth_raises_values() {
        let dom = disc(0.22);
        let small = small_family(&dom, 1, 2);
        let large = small_family(&dom, 1, 9); // same seed: first members agree
        let cfg = JensenConfig::default();
        let g = eval_closed_form(
            &ClosedForm::Affine {
                terms: vec![(-1.0, ClosedForm::SqNorm)],
                offset: 0.0,
            },
            &dom,
        );
        for &z in dom.interior_points().iter().step_by(29) {
            let (v_small, _) = jensen_lp_min(z as usize, &g, &small, &cfg).unwrap();
            let (v_large, _) = jensen_lp_min(z as usize, &g, &large, &cfg).unwrap();
            assert!(v_large >= v_small - 1e-9);
        }
    }

    #[test]
    fn interior_nodes_are_never_trivial_and_mass_is_one() {
        let dom = disc(0.2);
        let fam = small_family(&dom, 1, 5);
        let cfg = JensenConfig::default();
        let z = dom.flat_of_point(&[0.2, 0.0]).unwrap();
        // two-point oracle: mu = (d_{z+he} + d_{z-he})/2 is feasible for the
        // family and strictly lowers the concave probe
        let h = dom.h();
        let zp = dom.flat_of_point(&[0.2 + h, 0.0]).unwrap();
        let zm = dom.flat_of_point(&[0.2 - h, 0.0]).unwrap();
        let probe = {
            let mut values = vec![f64::NAN; dom.cells()];
            let mut pt = [0.0; MAX_REAL_DIM];
            for &p in dom.interior_points().iter().chain(dom.boundary_points()) {
                dom.point_into(p as usize, &mut pt);
                values[p as usize] = -((pt[0] - 0.2) * (pt[0] - 0.2) + pt[1] * pt[1]);
            }
            GridField::from_values(Arc::clone(&dom), values, "probe").unwrap()
        };
        for u in &fam.members {
            let avg = 0.5 * (u.get(zp) + u.get(zm));
            assert!(avg >= u.get(z) - 1e-9, "oracle measure must be feasible");
        }
        let oracle_value = 0.5 * (probe.get(zp) + probe.get(zm));
        assert!(oracle_value <= probe.get(z) - h * h * 0.9);
        let (v, _) = jensen_lp_min(z, &probe, &fam, &cfg).unwrap();
        assert!(v <= oracle_value + 1e-9, "LP must beat the explicit measure");

        let scan = jensen_boundary_scan(&dom, &fam, &[z as u32], &[], 1e-6, &cfg).unwrap();
        assert!(!scan[0].trivial);
    }

    #[test]
    fn disc_boundary_nodes_are_trivial_at_grid_scale() {
        // the rasterized ring wobbles in radius by O(h), so measures at a
        // boundary node can spread ~sqrt(h) along it: triviality holds with
        // an h-scaled tolerance, while interior nodes keep O(1) slack
        let h = 0.2;
        let dom = disc(h);
        let fam = small_family(&dom, 1, 5);
        let cfg = JensenConfig::default();
        let nodes: Vec<u32> = dom.boundary_points().iter().copied().step_by(5).collect();
        let scan = jensen_boundary_scan(&dom, &fam, &nodes, &[], 2.5 * h, &cfg).unwrap();
        for rec in &scan {
            assert!(
                rec.trivial,
                "boundary node {} slack {}",
                rec.node, rec.worst_slack
            );
        }
        let deep = dom.flat_of_point(&[0.2, 0.0]).unwrap() as u32;
        let scan = jensen_boundary_scan(&dom, &fam, &[deep], &[], 2.5 * h, &cfg).unwrap();
        assert!(!scan[0].trivial);
        assert!(scan[0].worst_slack > 0.5, "deep slack {}", scan[0].worst_slack);
    }

    #[test]
    fn boundary_mass_pinched_by_exhaustion() {
        let dom = disc(0.2);
        let exh = eval_closed_form(
            &ClosedForm::Affine {
                terms: vec![(1.0, ClosedForm::SqNorm)],
                offset: -1.0,
            },
            &dom,
        );
        let fam = build_test_family(
            &dom,
            1,
            &FamilySpec {
                quadratic_count: 3,
                seed: 21,
                extras: vec![exh],
                ..FamilySpec::default()
            },
        )
        .unwrap();
        let exh_idx = fam.len() - 1;
        let cfg = JensenConfig::default();
        let recs = boundary_mass_profile(&dom, &fam, &[0.4], Some(exh_idx), 6, &cfg).unwrap();
        assert!(!recs.is_empty());
        for r in &recs {
            let bound = r.bound.unwrap();
            assert!(
                r.max_interior_mass <= bound + 1e-8,
                "mass {} vs bound {bound}",
                r.max_interior_mass
            );
            assert!(r.max_interior_mass < 0.5, "deep mass must be small");
        }
    }

    #[test]
    fn extension_check_passes_for_pluriharmonic_data() {
        let dom = disc(0.15);
        let fam = small_family(&dom, 1, 5);
        let cfg = JensenConfig::default();
        let f: Vec<f64> = dom
            .boundary_points()
            .iter()
            .map(|&b| {
                let pt = dom.point_of(b as usize);
                pt[0]
            })
            .collect();
        let h = dom.h();
        let out = boundary_extension_check(
            &dom,
            1,
            &f,
            &fam,
            6.0 * h,
            6.0 * h,
            1,
            3,
            &SolverConfig::default(),
            &cfg,
        )
        .unwrap();
        assert!(out.pass, "criterion worst {}", out.worst_criterion);
        // the extension is Re z up to grid error
        let mut worst = 0.0f64;
        for &p in dom.interior_points() {
            let pt = dom.point_of(p as usize);
            worst = worst.max((out.extension.get(p as usize) - pt[0]).abs());
        }
        assert!(worst <= 4.0 * h, "extension deviates by {worst}");
    }
}
