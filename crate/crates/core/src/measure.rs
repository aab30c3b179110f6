//! Discrete m-Hessian measure densities and total masses.
//!
//! Units: densities are normalized so the field |z|^2 has density exactly 1,
//! and masses are Riemann sums against the cell volume h^{2n}. Conversion to
//! any other volume normalization is a single constant per dimension and is
//! deliberately left out of the numbers reported here.

use crate::cone::{binomial, eigenvalues_hermitian, sigma_all, HermitianForm};
use crate::error::{Error, Result};
use crate::field::{complex_hessian_fd, GridField, MshOptions, MshReport};
use crate::grid::Bitset;
use crate::scalar::Scalar;
use rayon::prelude::*;

/// Grid density of an m-Hessian measure with its total mass.
#[derive(Clone, Debug)]
pub struct MeasureDensity<T: Scalar> {
    /// Density per cell (NaN off the evaluated set).
    pub density: Vec<T>,
    /// Interior nodes excluded by stencil failures.
    pub excluded: Vec<u32>,
    /// Nodes where the crease rule (minimum over one-sided Hessians) fired.
    pub crease_count: usize,
    pub m: usize,
    /// Riemann sum of the density over the evaluated interior.
    pub total_mass: T,
    /// Cell volume used for the mass (h^{2n}).
    pub cell_volume: T,
}

fn density_of_hessian<T: Scalar>(h: &HermitianForm<T>, m: usize) -> Result<T> {
    let spec = eigenvalues_hermitian(h)?;
    let sig = sigma_all(spec.eigenvalues());
    Ok(sig[m] / binomial::<T>(h.n(), m))
}

/// Pointwise density sigma_m(eigenvalues of the FD Hessian) / C(n,m).
///
/// At detected creases the minimum over the one-sided corner Hessians is
/// used, which keeps the density a conservative lower estimate.
pub fn hessian_density<T: Scalar>(field: &GridField<T>, m: usize) -> Result<MeasureDensity<T>> {
    let domain = field.domain().as_ref();
    let n = domain.n();
    if m == 0 || m > n {
        return Err(Error::validation(format!(
            "measure order {m} outside range 1..={n}"
        )));
    }
    let slope_tol = T::of(0.02);

    struct Acc<T: Scalar> {
        density: Vec<(u32, T)>,
        excluded: Vec<u32>,
        crease: usize,
        mass: T,
    }

    let acc = domain
        .interior_points()
        .par_chunks(8192)
        .map(|chunk| {
            let mut acc = Acc {
                density: Vec::with_capacity(chunk.len()),
                excluded: Vec::new(),
                crease: 0,
                mass: T::zero(),
            };
            for &p in chunk {
                let p = p as usize;
                match complex_hessian_fd(field, p) {
                    Ok(h) => {
                        let mut d = match density_of_hessian(&h, m) {
                            Ok(d) => d,
                            Err(_) => {
                                acc.excluded.push(p as u32);
                                continue;
                            }
                        };
                        if crate::field::crease_probe(field, p, slope_tol) {
                            acc.crease += 1;
                            let mut best = d;
                            let dims = domain.dims();
                            let mut signs = vec![1i8; dims];
                            for combo in 0..(1u32 << dims) {
                                for (dd, s) in signs.iter_mut().enumerate() {
                                    *s = if combo & (1 << dd) != 0 { 1 } else { -1 };
                                }
                                if let Ok(oh) = crate::field::corner_hessian_probe(field, p, &signs)
                                {
                                    if let Ok(od) = density_of_hessian(&oh, m) {
                                        best = best.min(od);
                                    }
                                }
                            }
                            // a max-crease carries nonnegative singular mass;
                            // the corner minimum estimates the smooth branch
                            // and corners that straddle the kink are cut at
                            // the known sign
                            d = best.max(T::zero());
                        }
                        acc.mass = acc.mass + d;
                        acc.density.push((p as u32, d));
                    }
                    Err(_) => acc.excluded.push(p as u32),
                }
            }
            acc
        })
        .reduce(
            || Acc {
                density: Vec::new(),
                excluded: Vec::new(),
                crease: 0,
                mass: T::zero(),
            },
            |mut a, b| {
                a.density.extend(b.density);
                a.excluded.extend(b.excluded);
                a.crease += b.crease;
                a.mass = a.mass + b.mass;
                a
            },
        );

    let mut density = vec![T::nan(); domain.cells()];
    for &(p, d) in &acc.density {
        density[p as usize] = d;
    }
    let mut excluded = acc.excluded;
    excluded.sort_unstable();
    let cell_volume = domain.h().powi(2 * n as i32);
    // deterministic mass: re-sum in point order
    let mut mass = T::zero();
    for &(_, d) in &acc.density {
        mass = mass + d;
    }
    mass = mass * cell_volume;

    Ok(MeasureDensity {
        density,
        excluded,
        crease_count: acc.crease,
        m,
        total_mass: mass,
        cell_volume,
    })
}

/// Mass over a sub-region with an h-scaled quadrature error estimate.
#[derive(Clone, Debug)]
pub struct MassReport<T: Scalar> {
    pub mass: T,
    /// Heuristic quadrature error: cell volume times the density variation
    /// captured near the region edge.
    pub error_estimate: T,
    pub cells: usize,
}

pub fn total_mass<T: Scalar>(
    d: &MeasureDensity<T>,
    field: &GridField<T>,
    region: Option<&Bitset>,
) -> Result<MassReport<T>> {
    let domain = field.domain().as_ref();
    if let Some(r) = region {
        if r.len() != domain.cells() {
            return Err(Error::validation("region mask does not match grid"));
        }
    }
    let mut mass = T::zero();
    let mut abs_near_edge = T::zero();
    let mut cells = 0usize;
    // edge band: interior nodes within two rings of the boundary
    let mut band = domain.boundary().clone();
    for _ in 0..2 {
        let cur = band.clone();
        for dd in 0..domain.dims() {
            let s = domain.strides()[dd] as isize;
            band.or_shifted(&cur, s);
            band.or_shifted(&cur, -s);
        }
    }
    band.and(domain.interior());

    for &p in domain.interior_points() {
        let p = p as usize;
        if let Some(r) = region {
            if !r.get(p) {
                continue;
            }
        }
        let v = d.density[p];
        if v.is_nan() {
            continue;
        }
        mass = mass + v;
        cells += 1;
        if band.get(p) {
            abs_near_edge = abs_near_edge + v.abs();
        }
    }
    Ok(MassReport {
        mass: mass * d.cell_volume,
        error_estimate: abs_near_edge * d.cell_volume,
        cells,
    })
}

/// Itemized membership report for the class of bounded nonpositive
/// m-subharmonic functions with boundary limit zero and finite Hessian mass.
#[derive(Clone, Debug)]
pub struct E0Report<T: Scalar> {
    pub nonpositive: bool,
    pub max_value: T,
    pub boundary_limit_zero: bool,
    pub boundary_band_sup: T,
    pub bounded: bool,
    pub msh: MshReport<T>,
    pub mass: MassReport<T>,
    pub finite_mass: bool,
}

impl<T: Scalar> E0Report<T> {
    pub fn member(&self) -> bool {
        self.nonpositive
            && self.boundary_limit_zero
            && self.bounded
            && self.msh.all_passed()
            && self.finite_mass
    }
}

/// Checks the defining items one by one: phi <= tol, boundary-band sup above
/// -band_tol, boundedness, the m-subharmonicity certificate, and finite
/// total mass.
pub fn e0_membership<T: Scalar>(
    field: &GridField<T>,
    m: usize,
    tol: T,
    band_tol: T,
) -> Result<E0Report<T>> {
    let rep = crate::field::exhaustion_report(
        field,
        &crate::field::ExhaustionOptions {
            with_ladder: false,
            ladder_levels: 0,
        },
    );
    let max_value = field.interior_max();
    let sup = field.sup_norm();
    let mut opts = MshOptions::default();
    opts.tol = tol.max(T::of(crate::cone::CONE_TOL));
    let msh = crate::field::msh_report(field, m, &opts)?;
    let density = hessian_density(field, m)?;
    let mass = total_mass(&density, field, None)?;
    Ok(E0Report {
        nonpositive: max_value <= tol,
        max_value,
        boundary_limit_zero: rep.boundary_band_sup >= -band_tol,
        boundary_band_sup: rep.boundary_band_sup,
        bounded: sup.is_finite(),
        msh,
        finite_mass: mass.mass.is_finite(),
        mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{eval_closed_form, ClosedForm};
    use crate::grid::{shapes, Domain};
    use std::sync::Arc;

    #[test]
    fn sq_norm_density_is_one() {
        let dom = Arc::new(Domain::new(shapes::ball::<f64>(2, 1.0), 0.1).unwrap());
        let f = eval_closed_form(&ClosedForm::SqNorm, &dom);
        for m in 1..=2 {
            let d = hessian_density(&f, m).unwrap();
            for &p in dom.interior_points() {
                let v = d.density[p as usize];
                assert!((v - 1.0).abs() < 1e-10, "m={m}: density {v}");
            }
        }
    }

    #[test]
    fn mass_of_sq_norm_is_ball_volume() {
        // density 1 everywhere, so the mass is the grid volume of the ball:
        // pi^n/n! in R^{2n}
        let h = 0.05;
        let dom = Arc::new(Domain::new(shapes::disc::<f64>(1.0), h).unwrap());
        let f = eval_closed_form(&ClosedForm::SqNorm, &dom);
        let d = hessian_density(&f, 1).unwrap();
        let mass = total_mass(&d, &f, None).unwrap();
        let oracle = std::f64::consts::PI;
        assert!(
            (mass.mass - oracle).abs() < oracle * 3.0 * h,
            "mass {} vs {oracle}",
            mass.mass
        );
    }

    #[test]
    fn zero_and_pluriharmonic_densities_vanish() {
        let dom = Arc::new(Domain::new(shapes::ball::<f64>(2, 1.0), 0.2).unwrap());
        let z = crate::field::GridField::constant(Arc::clone(&dom), 0.0);
        let d = hessian_density(&z, 2).unwrap();
        let mass = total_mass(&d, &z, None).unwrap();
        assert!(mass.mass.abs() < 1e-12);

        let ph = eval_closed_form(&ClosedForm::ReCoordSq { j: 0 }, &dom);
        let d = hessian_density(&ph, 2).unwrap();
        for &p in dom.interior_points() {
            assert!(d.density[p as usize].abs() < 1e-10);
        }
    }

    #[test]
    fn phi_2_order_2_density_vanishes() {
        let dom = Arc::new(Domain::new(shapes::reinhardt::<f64>(3, 2), 0.35).unwrap());
        let f = eval_closed_form(&ClosedForm::PhiK { k: 2 }, &dom);
        let d = hessian_density(&f, 2).unwrap();
        for &p in dom.interior_points() {
            let v = d.density[p as usize];
            if !v.is_nan() {
                assert!(v.abs() < 1e-9, "sigma_2(1,1,-1/2) = 0, got {v}");
            }
        }
    }

    #[test]
    fn density_scaling_power() {
        let dom = Arc::new(Domain::new(shapes::ball::<f64>(2, 1.0), 0.2).unwrap());
        let a = crate::cone::HermitianForm::diagonal(&[1.3, 0.4]);
        let f = eval_closed_form(
            &ClosedForm::HermitianQuadratic {
                form: a,
                shift: 0.0,
            },
            &dom,
        );
        let s = 1.7f64;
        let fs = f.map("scaled", |v| s * v);
        for m in 1..=2usize {
            let d1 = hessian_density(&f, m).unwrap();
            let d2 = hessian_density(&fs, m).unwrap();
            let p = dom.interior_points()[17] as usize;
            assert!(
                (d2.density[p] - s.powi(m as i32) * d1.density[p]).abs() < 1e-9,
                "degree-m homogeneity"
            );
        }
    }

    #[test]
    fn order_1_density_matches_direct_laplacian() {
        let dom = Arc::new(Domain::new(shapes::disc::<f64>(1.0), 0.1).unwrap());
        let f = eval_closed_form(
            &ClosedForm::HermitianQuadratic {
                form: crate::cone::HermitianForm::diagonal(&[0.8]),
                shift: 0.3,
            },
            &dom,
        );
        let d = hessian_density(&f, 1).unwrap();
        let h = dom.h();
        for &p in dom.interior_points().iter().take(50) {
            let p = p as usize;
            let s = dom.strides();
            let lap = (f.get(p + s[0]) + f.get(p - s[0]) + f.get(p + s[1]) + f.get(p - s[1])
                - 4.0 * f.get(p))
                / (h * h);
            assert!((d.density[p] - 0.25 * lap).abs() < 1e-10);
        }
    }

    #[test]
    fn e0_membership_cases() {
        let h = 0.05;
        let dom = Arc::new(Domain::new(shapes::disc::<f64>(1.0), h).unwrap());
        // |z|^2 - 1: member
        let f = eval_closed_form(
            &ClosedForm::Affine {
                terms: vec![(1.0, ClosedForm::SqNorm)],
                offset: -1.0,
            },
            &dom,
        );
        let rep = e0_membership(&f, 1, 1e-9, 4.0 * h).unwrap();
        assert!(rep.member(), "{rep:?}");

        // constant -1 fails exactly the boundary-limit item
        let c = crate::field::GridField::constant(Arc::clone(&dom), -1.0);
        let rep = e0_membership(&c, 1, 1e-9, 4.0 * h).unwrap();
        assert!(!rep.member());
        assert!(rep.nonpositive);
        assert!(!rep.boundary_limit_zero);
        assert!(rep.msh.all_passed());
        assert!(rep.finite_mass);
    }
}
