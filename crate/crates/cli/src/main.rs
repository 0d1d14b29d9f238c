//! Command-line surface for the double-power NLS laboratory. Every
//! computation is a subcommand with deterministic CSV/JSON output; the
//! `validate` subcommand runs the cross-check suites.
//!
//! Exit codes: 0 success, 2 precondition violation, 3 numerical failure,
//! 4 inconclusive experiment. Errors are emitted as a single JSON line on
//! stderr.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dpnls::error::Error;

use output::Format;

#[derive(Parser)]
#[command(name = "dpnls", version, about = "Numerical laboratory for the 1-D double-power NLS")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// First exponent (1 < p < q)
    #[arg(long, global = true)]
    p: Option<f64>,

    /// Second exponent (p < q)
    #[arg(long, global = true)]
    q: Option<f64>,

    /// Write data here instead of stdout (metadata goes to a .meta.json sidecar)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format (default: csv for tables, json for reports)
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Relative tolerance for the profile quadratures
    #[arg(long, global = true)]
    quad_tol: Option<f64>,

    /// Reserved: every computation is deterministic already; rejected if
    /// given a value
    #[arg(long, global = true, num_args = 0..=1, require_equals = true, default_missing_value = "")]
    seedless: Option<String>,

    /// Optional key=value config file (precedence: flags > config > defaults)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Classify (p, q) by the sign of the mass-derivative limit at omega = 0
    Classify,
    /// Tabulate the profile phi_omega and its derivative
    Profile {
        /// Frequency omega >= 0
        #[arg(long)]
        omega: Option<f64>,
        /// Right endpoint of the x grid [0, xmax]
        #[arg(long)]
        xmax: Option<f64>,
        /// Number of grid points
        #[arg(long)]
        n: Option<usize>,
    },
    /// Tabulate the first-order profile variation eta_0 on [-xmax, xmax]
    Eta {
        #[arg(long)]
        xmax: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Sweep M(omega) and M'(omega) over a frequency range
    MassCurve {
        #[arg(long)]
        omega_min: Option<f64>,
        #[arg(long)]
        omega_max: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Convergence table of the quadratic form along an R schedule
    Unstable {
        /// Cutoff radii in units of the characteristic length (repeatable)
        #[arg(long = "r", value_name = "R_OVER_ELL")]
        r_over_ell: Vec<f64>,
    },
    /// Time-evolve phi_0 + lambda psi_R and emit the diagnostic series
    Evolve {
        /// Perturbation amplitude (default: scaled so the perturbation is
        /// 1e-2 of the profile in H^1; 0 runs the stationary check)
        #[arg(long)]
        lambda: Option<f64>,
        /// Cutoff radius of psi_R (default: L/5, the largest the seam allows)
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Half-width of the periodic box (default: 100 characteristic lengths)
        #[arg(long)]
        l: Option<f64>,
        /// Grid size, a power of two
        #[arg(long)]
        n: Option<usize>,
        /// Record diagnostics every this many steps
        #[arg(long)]
        sample_every: Option<usize>,
    },
    /// Run every cross-check suite applicable at (p, q) and report residuals
    Validate,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Domain(_) | Error::InvalidParams(_) => 2,
        Error::Bracket(_)
        | Error::QuadratureFailure { .. }
        | Error::IllConditionedBeta { .. }
        | Error::EvolutionAborted { .. } => 3,
        Error::NotApplicable(_) | Error::ScheduleExhausted(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => code,
        Err(err) => {
            let code = exit_code(&err);
            eprintln!(
                "{}",
                serde_json::json!({ "error": err.to_string(), "exit_code": code })
            );
            ExitCode::from(code)
        }
    }
}
