//! Scenario plumbing: flag/config merging, domain and form parsing, report
//! emission, and the command implementations.

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use hesslab::cone::HermitianForm;
use hesslab::envelope::{
    build_exhaustion, bm_regularity_test, hyperconvexity_test, solve_envelope, EnvelopeMode,
    EnvelopeProblem, ExhaustionConfig, ExhaustionRecipe, SolverConfig, TesterConfig, Verdict,
};
use hesslab::field::{eval_closed_form, ClosedForm, ExhaustionOptions, GridField, MshOptions};
use hesslab::grid::{shapes, Bitset, Domain, ShapeSpec, MAX_REAL_DIM};
use hesslab::io;
use hesslab::jensen::{
    boundary_mass_profile, build_test_family, edwards_gap, jensen_boundary_scan, jensen_lp_min,
    FamilySpec, JensenConfig,
};
use hesslab::measure::{hessian_density, total_mass};
use hesslab::Real;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

/// Caps the rayon pool from HESSLAB_THREADS, if set.
pub fn init_threads() {
    if let Ok(v) = std::env::var("HESSLAB_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
}

#[derive(Args, Clone, Debug)]
pub struct CommonArgs {
    /// Domain: disc[:r] | ball:<n>:<r> | polydisc:<r1,r2,..> | hartogs |
    /// reinhardt:<n>:<k> | box:<w1,..,w2n> | product[A|B] | intersect[A|B]
    #[arg(long)]
    pub domain: Option<String>,
    /// Cone order (1 = subharmonic ... n = plurisubharmonic).
    #[arg(long)]
    pub m: Option<usize>,
    /// Grid spacing ladder, strictly decreasing, comma separated.
    #[arg(long)]
    pub h: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Solver / report tolerance.
    #[arg(long)]
    pub tol: Option<Real>,
    /// Dual-cone sample count for envelope solves.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Output directory for CSV reports, dumps, and the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat key=value configuration file; command-line flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Fully merged scenario settings.
pub struct Settings {
    pub domain: String,
    pub m: usize,
    pub ladder: Vec<Real>,
    pub seed: u64,
    pub tol: Real,
    pub samples: usize,
    pub out: PathBuf,
    /// Raw config-file entries for command-specific keys.
    #[allow(dead_code)]
    pub extra: BTreeMap<String, String>,
}

impl Settings {
    fn from_common(common: &CommonArgs) -> Result<Self> {
        let mut file: BTreeMap<String, String> = BTreeMap::new();
        if let Some(path) = &common.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {path:?}"))?;
            for (ln, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| anyhow!("config line {} is not key=value", ln + 1))?;
                file.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let pick_str = |cli: &Option<String>, key: &str, default: &str| -> String {
            cli.clone()
                .or_else(|| file.get(key).cloned())
                .unwrap_or_else(|| default.to_string())
        };
        let domain = pick_str(&common.domain, "domain", "disc");
        let m = common
            .m
            .or_else(|| file.get("m").and_then(|v| v.parse().ok()))
            .unwrap_or(1);
        let ladder_text = pick_str(&common.h, "h", "0.1");
        let ladder: Vec<Real> = ladder_text
            .split(',')
            .map(|s| s.trim().parse::<Real>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| anyhow!("bad h ladder '{ladder_text}': {e}"))?;
        if ladder.is_empty() {
            bail!("empty h ladder");
        }
        for w in ladder.windows(2) {
            if w[1] >= w[0] {
                bail!("h ladder must be strictly decreasing");
            }
        }
        let seed = common
            .seed
            .or_else(|| file.get("seed").and_then(|v| v.parse().ok()))
            .unwrap_or(7);
        let tol = common
            .tol
            .or_else(|| file.get("tol").and_then(|v| v.parse().ok()))
            .unwrap_or(1e-6);
        let samples = common
            .samples
            .or_else(|| file.get("samples").and_then(|v| v.parse().ok()))
            .unwrap_or(64);
        let out = common
            .out
            .clone()
            .or_else(|| file.get("out").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("hesslab_out"));
        Ok(Settings {
            domain,
            m,
            ladder,
            seed,
            tol,
            samples,
            out,
            extra: file,
        })
    }

    fn manifest_entries(&self, cmd: &str) -> Vec<(String, String)> {
        vec![
            ("command".into(), cmd.into()),
            ("domain".into(), self.domain.clone()),
            ("m".into(), self.m.to_string()),
            (
                "h".into(),
                self.ladder
                    .iter()
                    .map(|h| h.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("seed".into(), self.seed.to_string()),
            ("tol".into(), self.tol.to_string()),
            ("samples".into(), self.samples.to_string()),
        ]
    }
}

/// Recursive domain grammar.
pub fn parse_shape(spec: &str) -> Result<ShapeSpec<Real>> {
    let spec = spec.trim();
    for (prefix, combiner) in [
        ("product[", 0usize),
        ("intersect[", 1usize),
    ] {
        if let Some(rest) = spec.strip_prefix(prefix) {
            let inner = rest
                .strip_suffix(']')
                .ok_or_else(|| anyhow!("missing ']' in {spec}"))?;
            // split on the top-level '|'
            let mut depth = 0usize;
            let mut split = None;
            for (i, c) in inner.char_indices() {
                match c {
                    '[' => depth += 1,
                    ']' => depth -= 1,
                    '|' if depth == 0 => {
                        split = Some(i);
                        break;
                    }
                    _ => {}
                }
            }
            let split = split.ok_or_else(|| anyhow!("missing '|' in {spec}"))?;
            let a = parse_shape(&inner[..split])?;
            let b = parse_shape(&inner[split + 1..])?;
            return Ok(if combiner == 0 {
                shapes::product(a, b)
            } else {
                shapes::intersection(a, b)
            });
        }
    }
    let mut parts = spec.split(':');
    let head = parts.next().unwrap_or_default();
    let args: Vec<&str> = parts.collect();
    let shape = match head {
        "disc" => {
            let r: f64 = args.first().map(|s| s.parse()).transpose()?.unwrap_or(1.0);
            shapes::disc(r)
        }
        "ball" => {
            let n: usize = args
                .first()
                .ok_or_else(|| anyhow!("ball needs :<n>:<r>"))?
                .parse()?;
            let r: f64 = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(1.0);
            shapes::ball(n, r)
        }
        "polydisc" => {
            let radii: Vec<f64> = args
                .first()
                .ok_or_else(|| anyhow!("polydisc needs :<r1,r2,..>"))?
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<std::result::Result<_, _>>()?;
            shapes::polydisc(&radii)
        }
        "hartogs" => shapes::hartogs_triangle(),
        "reinhardt" => {
            let n: usize = args
                .first()
                .ok_or_else(|| anyhow!("reinhardt needs :<n>:<k>"))?
                .parse()?;
            let k: usize = args
                .get(1)
                .ok_or_else(|| anyhow!("reinhardt needs :<n>:<k>"))?
                .parse()?;
            shapes::reinhardt(n, k)
        }
        "box" => {
            let widths: Vec<f64> = args
                .first()
                .ok_or_else(|| anyhow!("box needs :<w1,..,w2n>"))?
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<std::result::Result<_, _>>()?;
            shapes::real_box(&widths)
        }
        other => bail!("unknown domain '{other}'"),
    };
    Ok(shape)
}

/// Closed-form grammar for certifier inputs.
pub fn parse_form(spec: &str, n: usize) -> Result<ClosedForm<Real>> {
    let mut parts = spec.trim().split(':');
    let head = parts.next().unwrap_or_default();
    let rest: Vec<&str> = parts.collect();
    Ok(match head {
        "sq_norm" => ClosedForm::SqNorm,
        "hartogs_exh" => ClosedForm::HartogsExh,
        "phi_k" => ClosedForm::PhiK {
            k: rest
                .first()
                .ok_or_else(|| anyhow!("phi_k needs :<k>"))?
                .parse()?,
        },
        "log_abs" => ClosedForm::LogAbsCoord {
            j: rest.first().map(|s| s.parse()).transpose()?.unwrap_or(0),
        },
        "re_linear" => {
            let j: usize = rest.first().map(|s| s.parse()).transpose()?.unwrap_or(0);
            let mut coeffs = vec![hesslab::num_complex::Complex::new(0.0, 0.0); n];
            coeffs[j] = hesslab::num_complex::Complex::new(1.0, 0.0);
            ClosedForm::ReLinear { coeffs }
        }
        "quad" => {
            let diag: Vec<Real> = rest
                .first()
                .ok_or_else(|| anyhow!("quad needs :<d1,..,dn>"))?
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<std::result::Result<_, _>>()?;
            if diag.len() != n {
                bail!("quad needs {n} diagonal entries");
            }
            ClosedForm::HermitianQuadratic {
                form: HermitianForm::diagonal(&diag),
                shift: 0.0,
            }
        }
        "const" => ClosedForm::Constant(
            rest.first()
                .ok_or_else(|| anyhow!("const needs :<c>"))?
                .parse()?,
        ),
        other => bail!("unknown form '{other}'"),
    })
}

fn parse_point_list(s: &str) -> Result<Vec<Real>> {
    s.split(',')
        .map(|t| t.trim().parse::<Real>().map_err(|e| anyhow!("{e}")))
        .collect()
}

fn write_out(dir: &Path, name: &str, content: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

fn ball_mask(domain: &Arc<Domain<Real>>, center: &[Real], radius: Real) -> Bitset {
    let mut e = Bitset::new(domain.cells());
    let mut pt = [0.0; MAX_REAL_DIM];
    for &p in domain.interior_points() {
        domain.point_into(p as usize, &mut pt);
        let mut d2 = 0.0;
        for i in 0..domain.dims() {
            let t = pt[i] - center[i];
            d2 += t * t;
        }
        if d2 < radius * radius {
            e.set(p as usize, true);
        }
    }
    e
}

fn default_ball(domain: &Arc<Domain<Real>>) -> (Vec<Real>, Real) {
    let dist = domain.distance_to_boundary();
    let mut best = (domain.interior_points()[0] as usize, 0.0);
    for &p in domain.interior_points() {
        if dist[p as usize] > best.1 {
            best = (p as usize, dist[p as usize]);
        }
    }
    let pt = domain.point_of(best.0);
    (pt[..domain.dims()].to_vec(), best.1 * 0.4)
}

pub enum Scenario {
    MshCheck {
        common: CommonArgs,
        form: String,
    },
    Envelope {
        common: CommonArgs,
        mode: String,
        ball: Option<String>,
    },
    Exhaust {
        common: CommonArgs,
        recipe: String,
    },
    Hyperconvex {
        common: CommonArgs,
        ball: Option<String>,
    },
    BmRegular {
        common: CommonArgs,
        z0: Option<String>,
    },
    HessianMass {
        common: CommonArgs,
        form: String,
    },
    Jensen {
        common: CommonArgs,
        grid: Option<usize>,
        family: usize,
    },
    Edwards {
        common: CommonArgs,
        grid: Option<usize>,
        family: usize,
        pairs: usize,
    },
    PaperExamples {
        common: CommonArgs,
    },
}

impl Scenario {
    pub fn run(self) -> Result<i32> {
        let t0 = Instant::now();
        match self {
            Scenario::MshCheck { common, form } => {
                let s = Settings::from_common(&common)?;
                let shape = parse_shape(&s.domain)?;
                let cf = parse_form(&form, shape.n())?;
                let mut all_pass = true;
                for &h in &s.ladder {
                    let domain = Arc::new(Domain::new(shape.clone(), h)?);
                    let field = eval_closed_form(&cf, &domain);
                    let mut opts = MshOptions::default();
                    opts.tol = s.tol.max(1e-9);
                    opts.collect_points = domain.interior_points().len() <= 2_000_000;
                    let rep = hesslab::field::msh_report(&field, s.m, &opts)?;
                    println!(
                        "msh-check h={h}: {}/{} pass, worst margin {:.3e}, skipped {}, creases {}",
                        rep.passed, rep.evaluated, rep.worst_margin, rep.skipped, rep.crease_points
                    );
                    write_out(&s.out, &format!("msh_h{h}.csv"), &io::msh_csv(&rep))?;
                    all_pass &= rep.all_passed();
                }
                let mut entries = s.manifest_entries("msh-check");
                entries.push(("form".into(), form));
                write_out(
                    &s.out,
                    "manifest.txt",
                    &io::manifest(&entries, t0.elapsed().as_secs_f64()),
                )?;
                Ok(if all_pass { 0 } else { 1 })
            }
            Scenario::Envelope { common, mode, ball } => {
                let s = Settings::from_common(&common)?;
                let shape = parse_shape(&s.domain)?;
                let mut code = 0;
                for &h in &s.ladder {
                    let domain = Arc::new(Domain::new(shape.clone(), h)?);
                    let env_mode = if let Some(rest) = mode.strip_prefix("obstacle:") {
                        let cf = parse_form(rest, domain.n())?;
                        EnvelopeMode::Obstacle {
                            f: eval_closed_form(&cf, &domain),
                        }
                    } else if let Some(rest) = mode.strip_prefix("boundary:") {
                        let cf = parse_form(rest, domain.n())?;
                        let n = domain.n();
                        let f: Vec<Real> = domain
                            .boundary_points()
                            .iter()
                            .map(|&b| {
                                let pt = domain.project_to_boundary(b as usize);
                                cf.eval(&pt[..2 * n], n)
                            })
                            .collect();
                        EnvelopeMode::Boundary { f }
                    } else if mode == "extremal" {
                        let (center, radius) = match &ball {
                            Some(b) => {
                                let v = parse_point_list(b)?;
                                let (c, r) = v.split_at(v.len() - 1);
                                (c.to_vec(), r[0])
                            }
                            None => default_ball(&domain),
                        };
                        EnvelopeMode::Extremal {
                            e: ball_mask(&domain, &center, radius),
                        }
                    } else {
                        bail!("unknown mode '{mode}'");
                    };
                    let problem =
                        EnvelopeProblem::new(Arc::clone(&domain), s.m, env_mode, s.samples, s.seed)?;
                    let cfg = SolverConfig {
                        tol: s.tol,
                        ..SolverConfig::default()
                    };
                    let r = solve_envelope(&problem, &cfg)?;
                    println!(
                        "envelope h={h}: converged={} iters={} residual={:.3e} boundary_gap={:.3e}",
                        r.converged, r.iterations, r.final_residual, r.boundary_report.max_gap
                    );
                    write_out(&s.out, &format!("envelope_h{h}.field"), &io::dump_field(&r.u))?;
                    write_out(
                        &s.out,
                        &format!("envelope_h{h}.cert"),
                        &io::certificate_block(&r, cfg.tol),
                    )?;
                    if !r.converged {
                        code = 2;
                    } else if r.msh_certificate.as_ref().map(|c| !c.all_passed()) == Some(true) {
                        code = code.max(1);
                    }
                }
                let mut entries = s.manifest_entries("envelope");
                entries.push(("mode".into(), mode));
                write_out(
                    &s.out,
                    "manifest.txt",
                    &io::manifest(&entries, t0.elapsed().as_secs_f64()),
                )?;
                Ok(code)
            }
            Scenario::Exhaust { common, recipe } => {
                let s = Settings::from_common(&common)?;
                let shape = parse_shape(&s.domain)?;
                let recipe_kind = match recipe.as_str() {
                    "strict_sum" => ExhaustionRecipe::StrictSum,
                    "bounded_mass" => ExhaustionRecipe::BoundedMass,
                    "uniform" => ExhaustionRecipe::Uniform,
                    other => bail!("unknown recipe '{other}'"),
                };
                let h = s.ladder[0];
                let domain = Arc::new(Domain::new(shape, h)?);
                let cfg = ExhaustionConfig {
                    samples: s.samples,
                    seed: s.seed,
                    solver: SolverConfig {
                        tol: s.tol,
                        certify: false,
                        ..SolverConfig::default()
                    },
                    ..ExhaustionConfig::default()
                };
                let b = build_exhaustion(&domain, s.m, recipe_kind, &cfg)?;
                let ok = b.negative_ok
                    && b.msh.all_passed()
                    && b.mass
                        .as_ref()
                        .map(|m| m.mass <= 1.0 + cfg.mass_tol)
                        .unwrap_or(true);
                println!(
                    "exhaust {recipe} h={h}: negative={} msh_pass={} band_sup={:.3e} sup_norm={:.4}{}",
                    b.negative_ok,
                    b.msh.all_passed(),
                    b.exhaustion.boundary_band_sup,
                    b.sup_norm,
                    b.mass
                        .as_ref()
                        .map(|m| format!(" mass={:.4}", m.mass))
                        .unwrap_or_default()
                );
                write_out(&s.out, "exhaustion.field", &io::dump_field(&b.field))?;
                let mut entries = s.manifest_entries("exhaust");
                entries.push(("recipe".into(), recipe));
                write_out(
                    &s.out,
                    "manifest.txt",
                    &io::manifest(&entries, t0.elapsed().as_secs_f64()),
                )?;
                Ok(if ok { 0 } else { 1 })
            }
            Scenario::Hyperconvex { common, ball } => {
                let s = Settings::from_common(&common)?;
                let shape = parse_shape(&s.domain)?;
                let h = s.ladder[0];
                if s.ladder.len() > 1 && (s.ladder[1] - h * 0.5).abs() > 1e-12 {
                    bail!("hyperconvex ladder must be h,h/2");
                }
                let probe = Arc::new(Domain::new(shape.clone(), h)?);
                let (center, radius) = match &ball {
                    Some(b) => {
                        let v = parse_point_list(b)?;
                        let (c, r) = v.split_at(v.len() - 1);
                        (c.to_vec(), r[0])
                    }
                    None => default_ball(&probe),
                };
                drop(probe);
                let cfg = TesterConfig {
                    samples: s.samples,
                    seed: s.seed,
                    solver: SolverConfig {
                        tol: s.tol,
                        certify: false,
                        ..SolverConfig::default()
                    },
                    ..TesterConfig::default()
                };
                let out = hyperconvexity_test(&shape, s.m, h, &center, radius, &cfg)?;
                println!(
                    "hyperconvex m={} h={h}: {} (coarse gap {:.4}, fine gap {:.4})",
                    s.m,
                    io::verdict_str(out.verdict),
                    out.coarse.max_gap,
                    out.fine.max_gap
                );
                let dims = 2 * shape.n();
                write_out(&s.out, "hyperconvex.csv", &io::hyperconvexity_csv(&out, dims))?;
                write_out(&s.out, "gaps_coarse.csv", &io::gaps_csv(&out.coarse, dims))?;
                write_out(&s.out, "gaps_fine.csv", &io::gaps_csv(&out.fine, dims))?;
                let mut entries = s.manifest_entries("hyperconvex");
                entries.push((
                    "ball".into(),
                    format!(
                        "{},{}",
                        center
                            .iter()
                            .map(|x| x.to_string())
                            .collect::<Vec<_>>()
                            .join(","),
                        radius
                    ),
                ));
                entries.push(("verdict".into(), io::verdict_str(out.verdict).into()));
                write_out(
                    &s.out,
                    "manifest.txt",
                    &io::manifest(&entries, t0.elapsed().as_secs_f64()),
                )?;
                Ok(match out.verdict {
                    Verdict::Pass => 0,
                    Verdict::FailPersistent => 1,
                    Verdict::Inconclusive => 2,
                })
            }
            Scenario::BmRegular { common, z0 } => {
                let s = Settings::from_common(&common)?;
                let shape = parse_shape(&s.domain)?;
                let h = s.ladder[0];
                let domain = Arc::new(Domain::new(shape, h)?);
                let z0_pt = match &z0 {
                    Some(z) => parse_point_list(z)?,
                    None => {
                        let b = domain.boundary_points()[0] as usize;
                        domain.point_of(b)[..domain.dims()].to_vec()
                    }
                };
                let cfg = TesterConfig {
                    samples: s.samples,
                    seed: s.seed,
                    solver: SolverConfig {
                        tol: s.tol,
                        certify: false,
                        ..SolverConfig::default()
                    },
                    ..TesterConfig::default()
                };
                let out = bm_regularity_test(&domain, s.m, &z0_pt, &cfg)?;
                println!(
                    "bm-regular m={} h={h}: {} (gap at point {:.3e}, far-field sup {:.3e})",
                    s.m,
                    io::verdict_str(out.verdict),
                    out.gap_at_point,
                    out.far_field_sup
                );
                let mut entries = s.manifest_entries("bm-regular");
                entries.push(("verdict".into(), io::verdict_str(out.verdict).into()));
                write_out(
                    &s.out,
                    "manifest.txt",
                    &io::manifest(&entries, t0.elapsed().as_secs_f64()),
                )?;
                Ok(match out.verdict {
                    Verdict::Pass => 0,
                    Verdict::FailPersistent => 1,
                    Verdict::Inconclusive => 2,
                })
            }
            Scenario::HessianMass { common, form } => {
                let s = Settings::from_common(&common)?;
                let shape = parse_shape(&s.domain)?;
                let cf = parse_form(&form, shape.n())?;
                let mut rows = String::from("h,mass,error_estimate,cells,excluded\n");
                for &h in &s.ladder {
                    let domain = Arc::new(Domain::new(shape.clone(), h)?);
                    let field = eval_closed_form(&cf, &domain);
                    let d = hessian_density(&field, s.m)?;
                    let mass = total_mass(&d, &field, None)?;
                    println!(
                        "hessian-mass h={h}: mass={:.6} (est err {:.2e}), {} cells, {} excluded",
                        mass.mass,
                        mass.error_estimate,
                        mass.cells,
                        d.excluded.len()
                    );
                    rows.push_str(&format!(
                        "{},{},{},{},{}\n",
                        io::fmt_real(h),
                        io::fmt_real(mass.mass),
                        io::fmt_real(mass.error_estimate),
                        mass.cells,
                        d.excluded.len()
                    ));
                    write_out(&s.out, &format!("density_h{h}.field"), &io::dump_density(&d, &field))?;
                }
                write_out(&s.out, "mass.csv", &rows)?;
                let mut entries = s.manifest_entries("hessian-mass");
                entries.push(("form".into(), form));
                write_out(
                    &s.out,
                    "manifest.txt",
                    &io::manifest(&entries, t0.elapsed().as_secs_f64()),
                )?;
                Ok(0)
            }
            Scenario::Jensen { common, grid, family } => {
                let s = Settings::from_common(&common)?;
                let shape = parse_shape(&s.domain)?;
                let h = grid_spacing(&shape, grid, s.ladder[0]);
                let domain = Arc::new(Domain::new(shape, h)?);
                let fam = build_test_family(
                    &domain,
                    s.m,
                    &FamilySpec {
                        quadratic_count: family,
                        seed: s.seed,
                        ..FamilySpec::default()
                    },
                )?;
                let cfg = JensenConfig::default();
                // boundary scan on a subsample
                let nodes: Vec<u32> = domain
                    .boundary_points()
                    .iter()
                    .copied()
                    .step_by((domain.boundary_points().len() / 24).max(1))
                    .collect();
                let scan = jensen_boundary_scan(&domain, &fam, &nodes, &[], 2.5 * h, &cfg)?;
                write_out(&s.out, "scan.csv", &io::scan_csv(&scan))?;
                let trivial = scan.iter().filter(|r| r.trivial).count();
                println!(
                    "jensen m={} h={h}: family {} members, {}/{} boundary nodes trivial at tol {:.2e}",
                    s.m,
                    fam.len(),
                    trivial,
                    scan.len(),
                    2.5 * h
                );
                // a representative measure at a deep node
                let deep = {
                    let dist = domain.distance_to_boundary();
                    let mut best = (domain.interior_points()[0] as usize, 0.0);
                    for &p in domain.interior_points() {
                        if dist[p as usize] > best.1 {
                            best = (p as usize, dist[p as usize]);
                        }
                    }
                    best.0
                };
                let g = eval_closed_form(
                    &ClosedForm::Affine {
                        terms: vec![(-1.0, ClosedForm::SqNorm)],
                        offset: 0.0,
                    },
                    &domain,
                );
                let (value, mu) = jensen_lp_min(deep, &g, &fam, &cfg)?;
                println!(
                    "  deep-node probe value {:.6} (point value {:.6}), measure support {}",
                    value,
                    g.get(deep),
                    mu.support.len()
                );
                write_out(&s.out, "measure.csv", &io::measure_csv(&mu))?;
                // interior mass profile with shells at 20% and 40% depth
                let dist = domain.distance_to_boundary();
                let dmax = domain
                    .interior_points()
                    .iter()
                    .map(|&p| dist[p as usize])
                    .fold(0.0, f64::max);
                let recs = boundary_mass_profile(
                    &domain,
                    &fam,
                    &[0.2 * dmax, 0.4 * dmax],
                    None,
                    12,
                    &cfg,
                )?;
                write_out(&s.out, "mass_profile.csv", &io::mass_profile_csv(&recs))?;
                let mut entries = s.manifest_entries("jensen");
                entries.push(("family".into(), family.to_string()));
                write_out(
                    &s.out,
                    "manifest.txt",
                    &io::manifest(&entries, t0.elapsed().as_secs_f64()),
                )?;
                Ok(0)
            }
            Scenario::Edwards {
                common,
                grid,
                family,
                pairs,
            } => {
                let s = Settings::from_common(&common)?;
                let shape = parse_shape(&s.domain)?;
                let h = grid_spacing(&shape, grid, s.ladder[0]);
                let domain = Arc::new(Domain::new(shape, h)?);
                let fam = build_test_family(
                    &domain,
                    s.m,
                    &FamilySpec {
                        quadratic_count: family.saturating_sub(6).max(1),
                        seed: s.seed,
                        ..FamilySpec::default()
                    },
                )?;
                let cfg = JensenConfig::default();
                let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ 0x5a5a);
                let mut rows = String::from("pair,node,gap\n");
                let mut worst: Real = 0.0;
                let masked: Vec<u32> = domain
                    .interior_points()
                    .iter()
                    .chain(domain.boundary_points())
                    .copied()
                    .collect();
                for i in 0..pairs {
                    let z = masked[rng.gen_range(0..masked.len())] as usize;
                    let cx: Real = rng.gen_range(-0.5..0.5);
                    let cy: Real = rng.gen_range(-0.5..0.5);
                    let amp: Real = rng.gen_range(0.2..1.5);
                    let g = probe_field(&domain, cx, cy, amp);
                    let gap = edwards_gap(z, &g, &fam, &cfg)?;
                    worst = worst.max(gap);
                    rows.push_str(&format!("{i},{z},{}\n", io::fmt_real(gap)));
                }
                println!(
                    "edwards m={} h={h}: {} pairs, worst duality gap {:.3e} (tol {:.1e})",
                    s.m, pairs, worst, cfg.duality_tol
                );
                write_out(&s.out, "edwards.csv", &rows)?;
                let mut entries = s.manifest_entries("edwards");
                entries.push(("pairs".into(), pairs.to_string()));
                write_out(
                    &s.out,
                    "manifest.txt",
                    &io::manifest(&entries, t0.elapsed().as_secs_f64()),
                )?;
                Ok(if worst <= cfg.duality_tol { 0 } else { 1 })
            }
            Scenario::PaperExamples { common } => {
                let s = Settings::from_common(&common)?;
                let mut failures = Vec::new();

                // Reinhardt dichotomy: phi_2 on the k=2 domain in C^3
                {
                    let domain = Arc::new(Domain::new(shapes::reinhardt::<Real>(3, 2), 0.35)?);
                    let f = eval_closed_form(&ClosedForm::PhiK { k: 2 }, &domain);
                    let opts = MshOptions::default();
                    let r1 = hesslab::field::msh_report(&f, 1, &opts)?;
                    let r2 = hesslab::field::msh_report(&f, 2, &opts)?;
                    let r3 = hesslab::field::msh_report(&f, 3, &opts)?;
                    let ok = r1.all_passed()
                        && r2.all_passed()
                        && r3.failed == r3.evaluated
                        && (r3.worst_margin + 0.5).abs() < 1e-9;
                    println!(
                        "reinhardt dichotomy: m=1 {} m=2 {} m=3 fails with sigma_3 {:.4} -> {}",
                        r1.all_passed(),
                        r2.all_passed(),
                        r3.worst_margin,
                        if ok { "ok" } else { "FAIL" }
                    );
                    if !ok {
                        failures.push("reinhardt dichotomy");
                    }
                }

                // Hartogs triangle: the max-type exhaustion is subharmonic
                // and vanishes at the boundary
                {
                    let h = 0.05;
                    let domain = Arc::new(Domain::new(shapes::hartogs_triangle::<Real>(), h)?);
                    let f = eval_closed_form(&ClosedForm::HartogsExh, &domain);
                    let rep = hesslab::field::msh_report(&f, 1, &MshOptions::default())?;
                    let exh = hesslab::field::exhaustion_report(
                        &f,
                        &ExhaustionOptions {
                            with_ladder: false,
                            ladder_levels: 0,
                        },
                    );
                    let ok = rep.all_passed()
                        && rep.worst_margin >= -1e-6
                        && exh.boundary_band_sup >= -4.0 * h
                        && exh.positive_count == 0;
                    println!(
                        "hartogs exhaustion: margin {:.2e}, band sup {:.3e} -> {}",
                        rep.worst_margin,
                        exh.boundary_band_sup,
                        if ok { "ok" } else { "FAIL" }
                    );
                    if !ok {
                        failures.push("hartogs exhaustion");
                    }
                }

                // bounded-mass construction on the unit ball in C^2
                {
                    let domain = Arc::new(Domain::new(shapes::ball::<Real>(2, 1.0), 0.1)?);
                    let cfg = ExhaustionConfig {
                        samples: 32,
                        seed: s.seed,
                        solver: SolverConfig {
                            tol: 1e-6,
                            certify: false,
                            ..SolverConfig::default()
                        },
                        ..ExhaustionConfig::default()
                    };
                    let b = build_exhaustion(&domain, 2, ExhaustionRecipe::BoundedMass, &cfg)?;
                    let mass = b.mass.as_ref().map(|m| m.mass).unwrap_or(Real::NAN);
                    let e0_ok = b.e0.as_ref().map(|r| r.member()).unwrap_or(false);
                    let ok = b.sup_norm <= 1.0 + 1e-12 && mass <= 1.0 + cfg.mass_tol && e0_ok;
                    println!(
                        "bounded-mass construction: |psi| <= {:.4}, mass {:.4} (cap {:.2}), class member {} -> {}",
                        b.sup_norm,
                        mass,
                        1.0 + cfg.mass_tol,
                        e0_ok,
                        if ok { "ok" } else { "FAIL" }
                    );
                    if !ok {
                        failures.push("bounded-mass construction");
                    }
                }

                let entries = s.manifest_entries("paper-examples");
                write_out(
                    &s.out,
                    "manifest.txt",
                    &io::manifest(&entries, t0.elapsed().as_secs_f64()),
                )?;
                if failures.is_empty() {
                    println!("paper-examples: all ok");
                    Ok(0)
                } else {
                    println!("paper-examples failures: {failures:?}");
                    Ok(1)
                }
            }
        }
    }
}

/// Grid spacing from a per-axis node count (diameter / (grid - 1)).
fn grid_spacing(shape: &ShapeSpec<Real>, grid: Option<usize>, fallback: Real) -> Real {
    match grid {
        Some(gn) if gn >= 2 => {
            let extent = shape
                .bounding_box()
                .iter()
                .map(|(lo, hi)| hi - lo)
                .fold(0.0, Real::max);
            extent / (gn - 1) as Real
        }
        _ => fallback,
    }
}

/// Smooth concave-ish probe for duality checks.
fn probe_field(
    domain: &Arc<Domain<Real>>,
    cx: Real,
    cy: Real,
    amp: Real,
) -> GridField<Real> {
    let mut values = vec![Real::NAN; domain.cells()];
    let mut pt = [0.0; MAX_REAL_DIM];
    for &p in domain
        .interior_points()
        .iter()
        .chain(domain.boundary_points())
    {
        domain.point_into(p as usize, &mut pt);
        let mut d2 = 0.0;
        for i in 0..domain.dims() {
            let c = if i == 0 { cx } else if i == 1 { cy } else { 0.0 };
            let t = pt[i] - c;
            d2 += t * t;
        }
        values[p as usize] = -amp * d2 + 0.3 * pt[0];
    }
    GridField::from_values(Arc::clone(domain), values, "edwards_probe").unwrap()
}
