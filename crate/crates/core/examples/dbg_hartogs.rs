use hesslab::envelope::*;
use hesslab::grid::shapes;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let h: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.08);
    let m: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(2);
    let samples: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(48);
    let cfg = TesterConfig::<f64> {
        samples,
        solver: SolverConfig { tol: 1e-5, certify: false, ..SolverConfig::default() },
        ..TesterConfig::default()
    };
    let t0 = Instant::now();
    let out = hyperconvexity_test(
        &shapes::hartogs_triangle::<f64>(),
        m, h,
        &[0.0, 0.0, 0.55, 0.0], 0.2,
        &cfg,
    ).unwrap();
    println!("m={m} h={h} samples={samples}: verdict {:?} in {:?}", out.verdict, t0.elapsed());
    println!("  coarse: max_gap={:.4} converged={} iters={}", out.coarse.max_gap, out.coarse.converged, out.coarse.iterations);
    println!("  fine:   max_gap={:.4} converged={} iters={}", out.fine.max_gap, out.fine.converged, out.fine.iterations);
    // gap near the origin corner at both levels
    for (name, prof) in [("coarse", &out.coarse), ("fine", &out.fine)] {
        let corner_gap = prof.gaps.iter()
            .filter(|(pt, _)| pt[..4].iter().map(|x| x * x).sum::<f64>().sqrt() < 0.1)
            .map(|&(_, g)| g)
            .fold(f64::NEG_INFINITY, f64::max);
        println!("  {name}: corner-region gap = {corner_gap:.4}");
    }
    if let Some(w) = out.witness {
        println!("  witness at {:?}", &w[..4]);
    }
}
