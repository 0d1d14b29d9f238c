//! One function per subcommand. Each resolves its parameters (flags >
//! config > defaults), runs the computation, and renders through
//! `output::Sink` so data files are byte-identical across runs.

use std::process::ExitCode;

use serde_json::{json, Value};

use dpnls::error::{Error, Result};
use dpnls::eta::{self, EtaZero};
use dpnls::evolve;
use dpnls::mass::{self, MassPrime, P_DIVERGENCE};
use dpnls::model::{self, ModelParams, StabilityTag};
use dpnls::par;
use dpnls::profile::{self, ProfileEvaluator};
use dpnls::unstable;

use crate::config::Config;
use crate::output::{json_number, Format, Sink, Table};
use crate::{Cli, Command};

/// Matches the certification tolerance used by the core R-schedule search
/// (orthogonality defect relative to ||phi_0||^2).
const ORTHOGONALITY_TOL: f64 = 1e-8;

const CLOSED_FORM_TOL: f64 = 1e-12;

pub fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(v) = &cli.seedless {
        if !v.is_empty() {
            return Err(Error::InvalidParams(format!(
                "--seedless is a reserved flag and takes no value, got {v:?}"
            )));
        }
    }
    let cfg = Config::load(cli.config.as_deref())?;
    let p = cfg.require(cli.p, "p")?;
    let q = cfg.require(cli.q, "q")?;
    let params = ModelParams::new(p, q)?;
    let quad_tol = cfg.resolve(cli.quad_tol, "quad-tol", 1e-12)?;
    if !(quad_tol > 0.0 && quad_tol < 1.0) {
        return Err(Error::InvalidParams(format!(
            "--quad-tol must lie in (0, 1), got {quad_tol}"
        )));
    }

    let meta = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "argv": std::env::args().skip(1).collect::<Vec<_>>(),
    });
    let sink = Sink::new(cli.out.clone(), meta);

    match &cli.command {
        Command::Classify => cmd_classify(&params, report_format(cli.format)?, &sink),
        Command::Profile { omega, xmax, n } => {
            let omega = cfg.resolve(*omega, "omega", 0.0)?;
            let xmax = cfg.resolve(*xmax, "xmax", 20.0)?;
            let n = cfg.resolve(*n, "n", 201)?;
            cmd_profile(&params, omega, xmax, n, quad_tol, table_format(cli.format), &sink)
        }
        Command::Eta { xmax, n } => {
            let xmax = cfg.resolve(*xmax, "xmax", 50.0)?;
            let n = cfg.resolve(*n, "n", 201)?;
            cmd_eta(&params, xmax, n, table_format(cli.format), &sink)
        }
        Command::MassCurve { omega_min, omega_max, n } => {
            let omega_min = cfg.resolve(*omega_min, "omega-min", 0.0)?;
            let omega_max = cfg.resolve(*omega_max, "omega-max", 1.0)?;
            let n = cfg.resolve(*n, "n", 21)?;
            cmd_mass_curve(&params, omega_min, omega_max, n, table_format(cli.format), &sink)
        }
        Command::Unstable { r_over_ell } => {
            let schedule = if r_over_ell.is_empty() {
                unstable::default_r_schedule(&params)
            } else {
                let ell = params.characteristic_length();
                r_over_ell.iter().map(|&r| r * ell).collect()
            };
            cmd_unstable(&params, &schedule, report_format(cli.format)?, &sink)
        }
        Command::Evolve { lambda, r, t_max, dt, l, n, sample_every } => {
            let (l_def, n_def, dt_def) = evolve::default_grid(&params);
            let l = cfg.resolve(*l, "l", l_def)?;
            let n = cfg.resolve(*n, "n", n_def)?;
            let dt = cfg.resolve(*dt, "dt", dt_def)?;
            let r = cfg.resolve(*r, "r", l / 5.0)?;
            let t_max = cfg.resolve(*t_max, "t-max", 50.0)?;
            let sample_every = cfg.resolve(*sample_every, "sample-every", 100)?;
            let lambda = cfg.resolve_opt(*lambda, "lambda")?;
            cmd_evolve(
                &params,
                lambda,
                r,
                t_max,
                dt,
                l,
                n,
                sample_every,
                table_format(cli.format),
                &sink,
            )
        }
        Command::Validate => cmd_validate(&params, report_format(cli.format)?, &sink),
    }
}

/// Tabular subcommands default to CSV.
fn table_format(requested: Option<Format>) -> Format {
    requested.unwrap_or(Format::Csv)
}

/// Report subcommands are JSON-shaped; a CSV request has no faithful
/// rendering and is rejected up front.
fn report_format(requested: Option<Format>) -> Result<Format> {
    match requested {
        Some(Format::Csv) => Err(Error::InvalidParams(
            "this subcommand emits a structured report; only --format json is available".into(),
        )),
        _ => Ok(Format::Json),
    }
}

fn emit_json(sink: &Sink, value: &Value) -> Result<ExitCode> {
    sink.write(&format!("{:#}\n", value))
        .map_err(|e| Error::Domain(format!("cannot write output: {e}")))?;
    Ok(ExitCode::SUCCESS)
}

fn emit_table(sink: &Sink, table: &Table, format: Format) -> Result<ExitCode> {
    sink.write(&table.render(format))
        .map_err(|e| Error::Domain(format!("cannot write output: {e}")))?;
    Ok(ExitCode::SUCCESS)
}

fn has_closed_form(params: &ModelParams) -> bool {
    (params.q() - (2.0 * params.p() - 1.0)).abs() < CLOSED_FORM_TOL
}

fn grid(xmax: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidParams(format!(
            "grid needs at least 2 points, got n = {n}"
        )));
    }
    if !(xmax > 0.0) {
        return Err(Error::InvalidParams(format!("xmax must be positive, got {xmax}")));
    }
    Ok((0..n).map(|i| xmax * i as f64 / (n - 1) as f64).collect())
}

fn cmd_classify(params: &ModelParams, _format: Format, sink: &Sink) -> Result<ExitCode> {
    let class = model::classify(params);
    let p = params.p();
    let q = params.q();
    let g1 = class.gamma1_threshold;
    let mut notes: Vec<String> = Vec::new();
    if (q - g1).abs() < CLOSED_FORM_TOL {
        notes.push("gap region boundary: q = gamma1(p)".into());
    } else if q > g1 {
        notes.push("satisfies q > gamma1(p)".into());
    } else {
        notes.push("violates q > gamma1(p)".into());
    }
    if class.two_p_plus_q > 7.0 && p < P_DIVERGENCE {
        notes.push("satisfies 2p + q > 7 with p < 7/3".into());
    } else {
        notes.push("violates 2p + q > 7 with p < 7/3".into());
    }
    emit_json(
        sink,
        &json!({
            "p": p,
            "q": q,
            "class": class.tag,
            "two_p_plus_q": class.two_p_plus_q,
            "gamma1": g1,
            "notes": notes,
        }),
    )
}

fn cmd_profile(
    params: &ModelParams,
    omega: f64,
    xmax: f64,
    n: usize,
    quad_tol: f64,
    format: Format,
    sink: &Sink,
) -> Result<ExitCode> {
    let xs = grid(xmax, n)?;
    let evaluator = ProfileEvaluator::new(params.clone(), omega)?.with_tolerances(quad_tol, quad_tol);
    let closed = has_closed_form(params);
    let header = if closed {
        vec!["x", "phi", "phi_prime", "phi_closed_form"]
    } else {
        vec!["x", "phi", "phi_prime"]
    };
    let mut table = Table::new(header);
    for &x in &xs {
        let mut row = vec![
            Some(x),
            Some(evaluator.phi(x)?),
            Some(evaluator.phi_prime(x)?),
        ];
        if closed {
            row.push(Some(profile::phi_closed_form(x, omega, params)?));
        }
        table.push(row);
    }
    emit_table(sink, &table, format)
}

fn cmd_eta(
    params: &ModelParams,
    xmax: f64,
    n: usize,
    format: Format,
    sink: &Sink,
) -> Result<ExitCode> {
    // eta_0 is even, so the grid spans [-xmax, xmax] and each value is
    // evaluated at |x|: mirrored rows are bit-identical.
    let half = grid(xmax, n.div_ceil(2).max(2))?;
    let e = EtaZero::new(params.clone())?;
    let closed = has_closed_form(params);
    let header = if closed {
        vec!["x", "eta0", "eta0_prime", "eta0_closed_form"]
    } else {
        vec!["x", "eta0", "eta0_prime"]
    };
    let mut table = Table::new(header);
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    for &x in &half {
        let mut row = vec![Some(x), Some(e.eta0(x)?), Some(e.eta0_prime(x)?)];
        if closed {
            row.push(Some(eta::eta0_closed_form(x, params)?));
        }
        rows.push(row);
    }
    for row in rows.iter().skip(1).rev() {
        let mut mirrored = row.clone();
        mirrored[0] = Some(-row[0].unwrap());
        // the derivative of an even function is odd
        mirrored[2] = Some(-row[2].unwrap());
        table.push(mirrored);
    }
    for row in rows {
        table.push(row);
    }
    emit_table(sink, &table, format)
}

fn cmd_mass_curve(
    params: &ModelParams,
    omega_min: f64,
    omega_max: f64,
    n: usize,
    format: Format,
    sink: &Sink,
) -> Result<ExitCode> {
    if n < 2 {
        return Err(Error::InvalidParams(format!(
            "sweep needs at least 2 points, got n = {n}"
        )));
    }
    if !(0.0 <= omega_min && omega_min < omega_max) {
        return Err(Error::InvalidParams(format!(
            "need 0 <= omega_min < omega_max, got [{omega_min}, {omega_max}]"
        )));
    }
    let omegas: Vec<f64> = (0..n)
        .map(|i| omega_min + (omega_max - omega_min) * i as f64 / (n - 1) as f64)
        .collect();
    let reports = mass::mass_curve(&omegas, params)?;
    // independent finite-difference column (omega = 0 has no symmetric
    // difference and is left empty)
    let fd: Vec<Option<f64>> = par::par_map(omegas.clone(), |omega| {
        if omega > 1e-8 {
            mass::mass_prime_fd(omega, (1e-4f64).min(0.5 * omega), params).ok()
        } else {
            None
        }
    });
    let mut table = Table::new(vec!["omega", "mass", "mass_prime", "mass_prime_fd"]);
    for (report, fd) in reports.iter().zip(fd) {
        let mp = match report.mass_prime {
            MassPrime::Finite(v) => v,
            MassPrime::MinusInfinity => f64::NEG_INFINITY,
        };
        table.push(vec![Some(report.omega), Some(report.mass), Some(mp), fd]);
    }
    emit_table(sink, &table, format)
}

fn report_json(report: &unstable::UnstableDirectionReport) -> Value {
    json!({
        "r": report.r,
        "beta_r": report.beta_r,
        "term_phi0": report.term_phi0,
        "cross_term": report.cross_term,
        "square_term": report.square_term,
        "total": report.total,
        "predicted_limit": report.predicted_limit,
        "orthogonality_defect": report.orthogonality_defect,
    })
}

fn cmd_unstable(
    params: &ModelParams,
    schedule: &[f64],
    _format: Format,
    sink: &Sink,
) -> Result<ExitCode> {
    let class = model::classify(params);
    let base = json!({
        "p": params.p(),
        "q": params.q(),
        "ell": params.characteristic_length(),
        "class": class.tag,
        "schedule": schedule,
    });
    if params.require_q_below_5().is_err()
        || !matches!(
            class.tag,
            StabilityTag::MassDerivNegativeFinite | StabilityTag::MassDerivMinusInfinity
        )
    {
        let mut value = base;
        value["not_applicable"] = json!(format!(
            "instability construction requires M'(0) in [-inf, 0) and q < 5; (p, q) = ({}, {}) classifies as {:?}",
            params.p(),
            params.q(),
            class.tag
        ));
        emit_json(sink, &value)?;
        return Ok(ExitCode::from(4));
    }
    if schedule.is_empty() {
        return Err(Error::InvalidParams("empty R schedule".into()));
    }
    let e = EtaZero::new(params.clone())?;
    let reports: Vec<unstable::UnstableDirectionReport> =
        par::par_map(schedule.to_vec(), |r| unstable::quadform_terms(r, &e))
            .into_iter()
            .collect::<Result<_>>()?;
    let norm_sq = 2.0 * mass::mass(0.0, params)?;
    let selected = reports
        .iter()
        .find(|rep| rep.total < 0.0 && rep.orthogonality_defect < ORTHOGONALITY_TOL * norm_sq);
    let mut value = base;
    value["reports"] = Value::Array(reports.iter().map(report_json).collect());
    value["selected"] = selected.map(report_json).unwrap_or(Value::Null);
    emit_json(sink, &value)?;
    Ok(if selected.is_some() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(4)
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_evolve(
    params: &ModelParams,
    lambda: Option<f64>,
    r: f64,
    t_max: f64,
    dt: f64,
    l: f64,
    n: usize,
    sample_every: usize,
    format: Format,
    sink: &Sink,
) -> Result<ExitCode> {
    if !(t_max > 0.0) {
        return Err(Error::InvalidParams(format!("t_max must be positive, got {t_max}")));
    }
    let lambda = match lambda {
        Some(v) => v,
        None => evolve::default_lambda(params, r, l, n)?,
    };
    let mut state = evolve::init_state(params, lambda, r, l, n, dt)?;
    state.run(t_max, sample_every)?;
    let mut table = Table::new(vec![
        "t",
        "energy",
        "charge",
        "modulation_distance",
        "sup_norm",
    ]);
    for sample in state.history() {
        table.push(vec![
            Some(sample.t),
            Some(sample.energy),
            Some(sample.charge),
            Some(sample.modulation_distance),
            Some(sample.sup_norm),
        ]);
    }
    emit_table(sink, &table, format)
}

struct Check {
    name: &'static str,
    pass: bool,
    value: f64,
    tolerance: f64,
    detail: String,
}

impl Check {
    fn residual(name: &'static str, value: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name,
            pass: value.abs() < tolerance,
            value,
            tolerance,
            detail,
        }
    }
}

fn cmd_validate(params: &ModelParams, _format: Format, sink: &Sink) -> Result<ExitCode> {
    let p = params.p();
    let mut checks: Vec<Check> = Vec::new();

    let profile0 = ProfileEvaluator::new(params.clone(), 0.0)?;
    let e = EtaZero::new(params.clone())?;

    if has_closed_form(params) {
        for omega in [0.0, 0.1] {
            let evaluator = ProfileEvaluator::new(params.clone(), omega)?;
            let mut sup: f64 = 0.0;
            for i in 0..=40 {
                let x = 0.5 * i as f64;
                sup = sup.max(
                    (evaluator.phi(x)? - profile::phi_closed_form(x, omega, params)?).abs(),
                );
            }
            checks.push(Check::residual(
                if omega == 0.0 {
                    "profile_closed_form_omega0"
                } else {
                    "profile_closed_form_omega01"
                },
                sup,
                1e-8,
                format!("sup |phi - closed form| on [0, 20] at omega = {omega}"),
            ));
        }
        let mut sup: f64 = 0.0;
        for i in 0..=50 {
            let x = i as f64;
            let reference = eta::eta0_closed_form(x, params)?;
            sup = sup.max((e.eta0(x)? - reference).abs() / reference.abs().max(1.0));
        }
        checks.push(Check::residual(
            "eta_closed_form",
            sup,
            1e-6,
            "sup relative |eta0 - closed form| on [0, 50]".into(),
        ));
    }

    let residual = e.residual_linearized(0.1, 10.0, 60, 1e-3)?;
    checks.push(Check::residual(
        "eta_linearized_residual",
        residual,
        1e-4,
        "sup |L0 eta0 + phi0| on [0.1, 10], finite-difference second derivative".into(),
    ));

    let slope_phi = profile0.decay_exponent_phi(100.0)?;
    let expected_phi = -2.0 / (p - 1.0);
    checks.push(Check::residual(
        "profile_decay_exponent",
        slope_phi - expected_phi,
        0.05,
        format!("log-log slope of phi_0 on [100, 400], expected {expected_phi}"),
    ));

    let (slope_eta, eta_sign) = e.decay_exponent_eta(100.0)?;
    let expected_eta = -2.0 / (p - 1.0) + 2.0;
    checks.push(Check::residual(
        "eta_decay_exponent",
        slope_eta - expected_eta,
        0.05,
        format!("log-log slope of |eta0| on [100, 400], expected {expected_eta}"),
    ));
    checks.push(Check {
        name: "eta_eventually_negative",
        pass: eta_sign < 0.0,
        value: eta_sign,
        tolerance: 0.0,
        detail: "sign of eta0 in the far field".into(),
    });

    let class = model::classify(params);
    let mp0 = mass::mass_prime(0.0, params)?;
    let (sign_pass, mp0_value) = match (class.tag, mp0) {
        (StabilityTag::MassDerivZero, MassPrime::Finite(v)) => (v.abs() < 1e-5, v),
        (StabilityTag::MassDerivPositive, MassPrime::Finite(v)) => (v > 0.0, v),
        (StabilityTag::MassDerivNegativeFinite, MassPrime::Finite(v)) => (v < 0.0, v),
        (StabilityTag::MassDerivMinusInfinity, MassPrime::MinusInfinity) => {
            (true, f64::NEG_INFINITY)
        }
        (_, MassPrime::MinusInfinity) => (false, f64::NEG_INFINITY),
        (StabilityTag::MassDerivMinusInfinity, MassPrime::Finite(v)) => (false, v),
    };
    checks.push(Check {
        name: "mass_prime_sign_vs_classify",
        pass: sign_pass,
        value: mp0_value,
        tolerance: 0.0,
        detail: format!("M'(0) against classification {:?}", class.tag),
    });

    let mp = mass::mass_prime(0.1, params)?
        .finite()
        .expect("mass derivative is finite at omega > 0");
    let fd = mass::mass_prime_fd(0.1, 1e-4, params)?;
    checks.push(Check::residual(
        "mass_prime_fd_agreement",
        (mp - fd) / mp.abs().max(1.0),
        1e-4,
        "relative |formula - central difference| at omega = 0.1".into(),
    ));

    match (mp0, mass::pairing_integral(&e)?) {
        (MassPrime::Finite(a), MassPrime::Finite(b)) => {
            checks.push(Check::residual(
                "pairing_identity",
                (a - b) / a.abs().max(1.0),
                1e-5,
                "M'(0) formula vs x-space pairing integral".into(),
            ));
        }
        (MassPrime::MinusInfinity, MassPrime::MinusInfinity) => {
            checks.push(Check {
                name: "pairing_identity",
                pass: true,
                value: f64::NEG_INFINITY,
                tolerance: 0.0,
                detail: "both routes agree on the -infinity marker".into(),
            });
        }
        _ => checks.push(Check {
            name: "pairing_identity",
            pass: false,
            value: f64::NAN,
            tolerance: 0.0,
            detail: "finite/-infinity marker mismatch between the two routes".into(),
        }),
    }

    let qf = unstable::quadform_phi0(params)?;
    let qf_direct = unstable::quadform_phi0_direct(params)?;
    checks.push(Check::residual(
        "quadform_consistency",
        (qf - qf_direct) / qf.abs().max(1.0),
        1e-6,
        "<L0 phi0, phi0> via the two independent formulas".into(),
    ));

    let all_pass = checks.iter().all(|c| c.pass);
    let value = json!({
        "p": params.p(),
        "q": params.q(),
        "all_pass": all_pass,
        "checks": checks
            .iter()
            .map(|c| {
                json!({
                    "name": c.name,
                    "pass": c.pass,
                    "value": json_number(Some(c.value)),
                    "tolerance": c.tolerance,
                    "detail": c.detail,
                })
            })
            .collect::<Vec<_>>(),
    });
    emit_json(sink, &value)?;
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}
