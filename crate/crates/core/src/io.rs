//! Plain-text serialization: field dumps, CSV reports, certificate blocks,
//! and run manifests. All numeric formatting is fixed-width scientific with
//! 17 significant digits, so identical inputs produce identical bytes.

use crate::cone::HermitianForm;
use crate::envelope::{EnvelopeResult, GapProfile, HyperconvexityOutcome, Verdict};
use crate::field::{GridField, MshReport};
use crate::jensen::{DiscreteMeasure, MassProfileRecord, ScanRecord};
use crate::measure::MeasureDensity;
use crate::scalar::Scalar;
use std::fmt::Write as _;

/// 17 significant digits, locale-free.
pub fn fmt_real<T: Scalar>(x: T) -> String {
    format!("{:.16e}", x.to_f64_lossy())
}

/// Hermitian form as a plain-text matrix block: one row per line, entries as
/// "re,im" pairs separated by spaces.
pub fn form_to_text<T: Scalar>(f: &HermitianForm<T>) -> String {
    let n = f.n();
    let mut out = format!("hermitian_form n={n}\n");
    for j in 0..n {
        let mut row = Vec::with_capacity(n);
        for k in 0..n {
            let e = f.get(j, k);
            row.push(format!("{},{}", fmt_real(e.re), fmt_real(e.im)));
        }
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn form_from_text<T: Scalar>(text: &str) -> crate::Result<HermitianForm<T>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| crate::Error::validation("empty form block"))?;
    let n: usize = header
        .trim()
        .strip_prefix("hermitian_form n=")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| crate::Error::validation("bad form header"))?;
    let mut entries = Vec::with_capacity(n * n);
    for line in lines.take(n) {
        for pair in line.split_whitespace() {
            let (re, im) = pair
                .split_once(',')
                .ok_or_else(|| crate::Error::validation("bad form entry"))?;
            let re: f64 = re
                .parse()
                .map_err(|_| crate::Error::validation("bad form entry"))?;
            let im: f64 = im
                .parse()
                .map_err(|_| crate::Error::validation("bad form entry"))?;
            entries.push(num_complex::Complex::new(T::of(re), T::of(im)));
        }
    }
    HermitianForm::new(n, entries)
}

/// Field dump: a text header followed by the masked values in flat (row
/// major) order, one per line as `flat_index value`.
pub fn dump_field<T: Scalar>(f: &GridField<T>) -> String {
    let d = f.domain();
    let mut out = String::new();
    let _ = writeln!(out, "field shape={}", d.shape().id());
    let _ = writeln!(out, "n={} h={}", d.n(), fmt_real(d.h()));
    let _ = writeln!(
        out,
        "interior_checksum={:016x} boundary_checksum={:016x}",
        d.interior().checksum(),
        d.boundary().checksum()
    );
    let _ = writeln!(out, "provenance={}", f.provenance());
    let mut nodes: Vec<u32> = d
        .interior_points()
        .iter()
        .chain(d.boundary_points())
        .copied()
        .collect();
    nodes.sort_unstable();
    let _ = writeln!(out, "values={}", nodes.len());
    for p in nodes {
        let _ = writeln!(out, "{} {}", p, fmt_real(f.get(p as usize)));
    }
    out
}

/// Density dump in the field format.
pub fn dump_density<T: Scalar>(d: &MeasureDensity<T>, reference: &GridField<T>) -> String {
    let dom = reference.domain();
    let mut out = String::new();
    let _ = writeln!(out, "density shape={}", dom.shape().id());
    let _ = writeln!(out, "n={} h={} m={}", dom.n(), fmt_real(dom.h()), d.m);
    let _ = writeln!(out, "total_mass={}", fmt_real(d.total_mass));
    let _ = writeln!(out, "excluded={}", d.excluded.len());
    for &p in dom.interior_points() {
        let v = d.density[p as usize];
        if !v.is_nan() {
            let _ = writeln!(out, "{} {}", p, fmt_real(v));
        }
    }
    out
}

/// Per-point certification CSV: point index, margin, sigma_1..sigma_m.
pub fn msh_csv<T: Scalar>(report: &MshReport<T>) -> String {
    let mut out = String::from("point,margin");
    for k in 1..=report.m {
        let _ = write!(out, ",sigma_{k}");
    }
    out.push('\n');
    if let Some(points) = &report.per_point {
        for v in points {
            let _ = write!(out, "{},{}", v.flat, fmt_real(v.margin));
            for s in &v.sigma {
                let _ = write!(out, ",{}", fmt_real(*s));
            }
            out.push('\n');
        }
    }
    out
}

pub fn measure_csv<T: Scalar>(mu: &DiscreteMeasure<T>) -> String {
    let mut out = String::from("node,weight\n");
    for (&p, &w) in mu.support.iter().zip(&mu.weights) {
        let _ = writeln!(out, "{},{}", p, fmt_real(w));
    }
    out
}

pub fn scan_csv<T: Scalar>(records: &[ScanRecord<T>]) -> String {
    let mut out = String::from("node,trivial,worst_slack\n");
    for r in records {
        let _ = writeln!(out, "{},{},{}", r.node, r.trivial, fmt_real(r.worst_slack));
    }
    out
}

pub fn mass_profile_csv<T: Scalar>(records: &[MassProfileRecord<T>]) -> String {
    let mut out = String::from("node,shell,max_interior_mass,bound\n");
    for r in records {
        let bound = r
            .bound
            .map(fmt_real)
            .unwrap_or_else(|| "".to_string());
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.node,
            fmt_real(r.shell),
            fmt_real(r.max_interior_mass),
            bound
        );
    }
    out
}

pub fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::FailPersistent => "FAIL-persistent",
        Verdict::Inconclusive => "INCONCLUSIVE",
    }
}

/// Boundary gap profile CSV: node index implicit by row, coordinates, gap.
pub fn gaps_csv<T: Scalar>(profile: &GapProfile<T>, dims: usize) -> String {
    let mut out = String::from("h,gap");
    for i in 0..dims {
        let _ = write!(out, ",x{i}");
    }
    out.push('\n');
    for (pt, gap) in &profile.gaps {
        let _ = write!(out, "{},{}", fmt_real(profile.h), fmt_real(*gap));
        for x in pt.iter().take(dims) {
            let _ = write!(out, ",{}", fmt_real(*x));
        }
        out.push('\n');
    }
    out
}

/// Summary CSV for a refinement verdict: h, worst gap, worst node, verdict.
pub fn hyperconvexity_csv<T: Scalar>(out3: &HyperconvexityOutcome<T>, dims: usize) -> String {
    let mut out = String::from("h,worst_gap,worst_x,verdict\n");
    for prof in [&out3.coarse, &out3.fine] {
        let worst = prof
            .gaps
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .map(|(pt, _)| {
                pt.iter()
                    .take(dims)
                    .map(|x| fmt_real(*x))
                    .collect::<Vec<_>>()
                    .join(";")
            })
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_real(prof.h),
            fmt_real(prof.max_gap),
            worst,
            verdict_str(out3.verdict)
        );
    }
    out
}

/// Certificate block for an envelope result (JSON-like plain text).
pub fn certificate_block<T: Scalar>(r: &EnvelopeResult<T>, tol: T) -> String {
    let mut out = String::from("{\n");
    let _ = writeln!(out, "  \"converged\": {},", r.converged);
    let _ = writeln!(out, "  \"iterations\": {},", r.iterations);
    let _ = writeln!(out, "  \"residual\": {},", fmt_real(r.final_residual));
    let _ = writeln!(out, "  \"tol\": {},", fmt_real(tol));
    let _ = writeln!(out, "  \"seed\": {},", r.seed);
    let _ = writeln!(out, "  \"pinch_error\": {},", fmt_real(r.pinch_error));
    let _ = writeln!(
        out,
        "  \"boundary_max_gap\": {},",
        fmt_real(r.boundary_report.max_gap)
    );
    match &r.msh_certificate {
        Some(cert) => {
            let _ = writeln!(out, "  \"certificate_passed\": {},", cert.all_passed());
            let _ = writeln!(
                out,
                "  \"certificate_worst_margin\": {}",
                fmt_real(cert.worst_margin)
            );
        }
        None => {
            let _ = writeln!(out, "  \"certificate_passed\": null");
        }
    }
    out.push_str("}\n");
    out
}

/// Run manifest: configuration echo, seed, wall time, library version.
pub fn manifest(entries: &[(String, String)], wall_seconds: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "hesslab_version={}", env!("CARGO_PKG_VERSION"));
    for (k, v) in entries {
        let _ = writeln!(out, "{k}={v}");
    }
    let _ = writeln!(out, "wall_seconds={wall_seconds:.3}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{eval_closed_form, ClosedForm};
    use crate::grid::{shapes, Domain};
    use num_complex::Complex;
    use std::sync::Arc;

    #[test]
    fn form_round_trip() {
        let f = HermitianForm::<f64>::new(
            2,
            vec![
                Complex::new(1.25, 0.0),
                Complex::new(0.5, -0.75),
                Complex::new(0.5, 0.75),
                Complex::new(-2.0, 0.0),
            ],
        )
        .unwrap();
        let text = form_to_text(&f);
        let g = form_from_text::<f64>(&text).unwrap();
        assert!(f.sub(&g).frobenius_norm() < 1e-15);
    }

    #[test]
    fn dumps_are_byte_stable() {
        let dom = Arc::new(Domain::new(shapes::disc::<f64>(1.0), 0.25).unwrap());
        let f = eval_closed_form(&ClosedForm::SqNorm, &dom);
        let a = dump_field(&f);
        let b = dump_field(&f);
        assert_eq!(a, b);
        assert!(a.contains("shape=ball(n=1,r=1)"));
        assert!(a.lines().count() > dom.interior_points().len());
    }
}
