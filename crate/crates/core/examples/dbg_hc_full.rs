use hesslab::envelope::*;
use hesslab::grid::shapes;
use std::time::Instant;

fn main() {
    type T = f64;
    let h: T = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(0.08);
    let samples: usize = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(96);
    let cfg = TesterConfig::<T> {
        samples,
        solver: SolverConfig { tol: 1e-6, certify: false, ..SolverConfig::default() },
        ..TesterConfig::default()
    };
    for m in [1usize, 2] {
        let t0 = Instant::now();
        let out = hyperconvexity_test(
            &shapes::hartogs_triangle::<T>(),
            m, h,
            &[0.0, 0.0, 0.55, 0.0], 0.2,
            &cfg,
        ).unwrap();
        println!("m={m} h={h}: verdict {:?} in {:?}", out.verdict, t0.elapsed());
        for (name, prof) in [("coarse", &out.coarse), ("fine", &out.fine)] {
            let corner = prof.gaps.iter()
                .filter(|(pt, _)| pt[..4].iter().map(|x| x*x).sum::<T>().sqrt() < 0.1)
                .map(|&(_, g)| g).fold(T::NEG_INFINITY, T::max);
            println!("  {name} h={}: max_gap {:.4} corner {:.4} settled {} iters {}", prof.h, prof.max_gap, corner, prof.converged, prof.iterations);
        }
    }
}
