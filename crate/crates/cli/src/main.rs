//! Scenario-driven command line for the m-subharmonic laboratory: configure
//! a domain, run certifiers, envelope solves, measure computations, and the
//! duality checks, and emit CSV reports with recorded seeds and tolerances.
//!
//! Exit codes: 0 = all verdicts pass / as expected, 1 = a verdict failed,
//! 2 = inconclusive result, configuration error, or runtime error.

mod scenario;

use clap::{Parser, Subcommand};
use scenario::{CommonArgs, Scenario};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hesslab",
    about = "Numerical laboratory for m-subharmonic functions on gridded domains in C^n",
    long_about = None,
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify m-subharmonicity of a catalogue field on a domain.
    ///
    /// CSV columns: point,margin,sigma_1..sigma_m
    MshCheck {
        #[command(flatten)]
        common: CommonArgs,
        /// Closed form to certify: sq_norm | hartogs_exh | phi_k:<k> |
        /// log_abs:<j> | re_linear:<j> | quad:<d1,d2,..> | const:<c>
        #[arg(long, default_value = "sq_norm")]
        form: String,
    },
    /// Solve an envelope problem and dump the field with its certificate.
    Envelope {
        #[command(flatten)]
        common: CommonArgs,
        /// obstacle:<form> | boundary:<form> | extremal
        #[arg(long, default_value = "extremal")]
        mode: String,
        /// Extremal ball "c1,..,c2n,r" (defaults to a centered ball).
        #[arg(long)]
        ball: Option<String>,
    },
    /// Build a negative exhaustion function with certificates.
    Exhaust {
        #[command(flatten)]
        common: CommonArgs,
        /// strict_sum | bounded_mass | uniform
        #[arg(long, default_value = "strict_sum")]
        recipe: String,
    },
    /// Hyperconvexity tester: extremal solves at h and h/2.
    ///
    /// CSV columns: h,worst_gap,worst_x,verdict
    Hyperconvex {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        ball: Option<String>,
    },
    /// Boundary-regularity tester: barrier envelope at a boundary point.
    BmRegular {
        #[command(flatten)]
        common: CommonArgs,
        /// Boundary point "x1,..,x2n" (defaults to the first boundary node).
        #[arg(long)]
        z0: Option<String>,
    },
    /// m-Hessian measure density and total mass of a catalogue field.
    HessianMass {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "sq_norm")]
        form: String,
    },
    /// Jensen-measure diagnostics: LP minima, a boundary scan, and measures.
    Jensen {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of grid nodes per axis (overrides --h).
        #[arg(long)]
        grid: Option<usize>,
        /// Family quadratic count.
        #[arg(long, default_value_t = 12)]
        family: usize,
    },
    /// Duality check: |envelope sup - Jensen inf| on random probes.
    Edwards {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, default_value_t = 20)]
        family: usize,
        /// Number of random (z, g) probe pairs.
        #[arg(long, default_value_t = 10)]
        pairs: usize,
    },
    /// Curated example suite: the Reinhardt dichotomy, the Hartogs triangle
    /// exhaustion, and the bounded-mass construction.
    PaperExamples {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    scenario::init_threads();
    let run = |s: Scenario| -> anyhow::Result<i32> { s.run() };
    let result = match cli.command {
        Command::MshCheck { common, form } => run(Scenario::MshCheck { common, form }),
        Command::Envelope { common, mode, ball } => run(Scenario::Envelope { common, mode, ball }),
        Command::Exhaust { common, recipe } => run(Scenario::Exhaust { common, recipe }),
        Command::Hyperconvex { common, ball } => run(Scenario::Hyperconvex { common, ball }),
        Command::BmRegular { common, z0 } => run(Scenario::BmRegular { common, z0 }),
        Command::HessianMass { common, form } => run(Scenario::HessianMass { common, form }),
        Command::Jensen { common, grid, family } => run(Scenario::Jensen { common, grid, family }),
        Command::Edwards {
            common,
            grid,
            family,
            pairs,
        } => run(Scenario::Edwards {
            common,
            grid,
            family,
            pairs,
        }),
        Command::PaperExamples { common } => run(Scenario::PaperExamples { common }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
