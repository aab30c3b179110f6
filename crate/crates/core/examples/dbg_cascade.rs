use hesslab::envelope::*;
use hesslab::field::GridField;
use hesslab::grid::{shapes, Bitset, Domain, MAX_REAL_DIM};
use std::sync::Arc;
use std::time::Instant;

fn corner_gap(r: &EnvelopeResult<f64>) -> f64 {
    let dom = r.u.domain();
    let mut pt = [0.0; MAX_REAL_DIM];
    let mut g = f64::NEG_INFINITY;
    for (bi, &b) in dom.boundary_points().iter().enumerate() {
        dom.point_into(b as usize, &mut pt);
        if pt[..4].iter().map(|x| x * x).sum::<f64>().sqrt() < 0.1 {
            g = g.max(r.boundary_report.gaps[bi]);
        }
    }
    g
}

fn solve_level(m: usize, h: f64, samples: usize, max_iters: usize, tol: f64, init: Option<&GridField<f64>>) -> EnvelopeResult<f64> {
    let dom = Arc::new(Domain::new(shapes::hartogs_triangle::<f64>(), h).unwrap());
    let mut e = Bitset::new(dom.cells());
    let mut pt = [0.0; MAX_REAL_DIM];
    for &p in dom.interior_points() {
        dom.point_into(p as usize, &mut pt);
        let d2 = pt[0]*pt[0] + pt[1]*pt[1] + (pt[2]-0.5)*(pt[2]-0.5) + pt[3]*pt[3];
        if d2 < 0.0225 { e.set(p as usize, true); }
    }
    let problem = EnvelopeProblem::new(Arc::clone(&dom), m, EnvelopeMode::Extremal { e }, samples, 7).unwrap();
    let cfg = SolverConfig { tol, max_iters, certify: false, ..SolverConfig::default() };
    let init_field = init.map(|coarse| {
        let cd = coarse.domain();
        let mut f = GridField::constant(Arc::clone(&dom), 0.0);
        for &p in dom.interior_points() {
            dom.point_into(p as usize, &mut pt);
            if let Some(q) = cd.flat_of_point(&pt[..4]) {
                let v = coarse.get(q);
                if v.is_finite() { f.set(p as usize, v); }
            }
        }
        f
    });
    let t = Instant::now();
    let r = solve_envelope_with_init(&problem, &cfg, init_field.as_ref()).unwrap();
    println!("  m={m} h={h}: {} interior, {} iters, residual {:.2e}, conv={}, corner_gap={:.4}, max_gap={:.4}, {:?}",
        dom.interior_points().len(), r.iterations, r.final_residual, r.converged, corner_gap(&r), r.boundary_report.max_gap, t.elapsed());
    r
}

fn main() {
    let m: usize = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(2);
    let budget: usize = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(1500);
    println!("cascade m={m} fine-budget={budget}:");
    let r16 = solve_level(m, 0.16, 48, 4000, 1e-7, None);
    let r08 = solve_level(m, 0.08, 48, 4000, 1e-7, Some(&r16.u));
    let _r04 = solve_level(m, 0.04, 48, budget, 1e-6, Some(&r08.u));
}
// sweep-budget study appended via second main? no - edit main instead
