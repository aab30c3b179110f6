use hesslab::field::*;
use hesslab::grid::{shapes, Domain};
use std::sync::Arc;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let dom = Arc::new(Domain::new(shapes::hartogs_triangle::<f64>(), 0.02).unwrap());
    println!("domain: {} cells, {} interior, {} boundary, {:?}",
        dom.cells(), dom.interior_points().len(), dom.boundary_points().len(), t0.elapsed());
    let t1 = Instant::now();
    let f = eval_closed_form(&ClosedForm::HartogsExh, &dom);
    println!("field eval: {:?}", t1.elapsed());
    let t2 = Instant::now();
    let r = msh_report(&f, 1, &MshOptions::default()).unwrap();
    println!("msh m=1: {:?}  worst={:.3e} passed={} failed={} skipped={} crease={}",
        t2.elapsed(), r.worst_margin, r.passed, r.failed, r.skipped, r.crease_points);
    let t3 = Instant::now();
    let rep = exhaustion_report(&f, &ExhaustionOptions { with_ladder: false, ladder_levels: 0 });
    println!("exhaustion: {:?} band_sup={:.4e} (4h={})", t3.elapsed(), rep.boundary_band_sup, 4.0*0.02);
    println!("total: {:?}", t0.elapsed());
}
