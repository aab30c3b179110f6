use hesslab::envelope::*;
use hesslab::grid::{shapes, Domain};
use std::sync::Arc;

fn main() {
    let domain = Arc::new(Domain::new(shapes::ball::<f64>(2, 1.0), 0.1).unwrap());
    let cfg = ExhaustionConfig::<f64> {
        samples: 32,
        solver: SolverConfig { tol: 1e-6, certify: false, ..SolverConfig::default() },
        ..ExhaustionConfig::default()
    };
    let b = build_exhaustion(&domain, 2, ExhaustionRecipe::BoundedMass, &cfg).unwrap();
    let e0 = b.e0.as_ref().unwrap();
    println!("nonpositive={} max={:.3e}", e0.nonpositive, e0.max_value);
    println!("boundary_limit_zero={} band_sup={:.4}", e0.boundary_limit_zero, e0.boundary_band_sup);
    println!("bounded={}", e0.bounded);
    println!("msh pass={} worst={:.4e} failed={} evaluated={}", e0.msh.all_passed(), e0.msh.worst_margin, e0.msh.failed, e0.msh.evaluated);
    println!("finite_mass={} mass={:.4}", e0.finite_mass, e0.mass.mass);
    println!("build msh pass={} worst={:.4e}", b.msh.all_passed(), b.msh.worst_margin);
    // locate failures
    use hesslab::field::{msh_report, MshOptions};
    let mut opts = MshOptions::<f64>::default();
    opts.tol = 1e-3;
    opts.collect_points = true;
    let rep = msh_report(&b.field, 2, &opts).unwrap();
    let mut hist = [0usize; 12];
    let mut worst_r = 0.0;
    let mut worst_m = 0.0f64;
    for v in rep.per_point.as_ref().unwrap() {
        if !v.passed {
            let pt = domain.point_of(v.flat as usize);
            let r = (pt[..4].iter().map(|x| x * x).sum::<f64>()).sqrt();
            hist[(r * 10.0) as usize % 12] += 1;
            if v.margin < worst_m { worst_m = v.margin; worst_r = r; }
        }
    }
    println!("fail radius histogram {hist:?} worst margin {worst_m:.3} at r={worst_r:.2}");
}
