//! Cutoff unstable directions psi_R = phi_0 + beta_R chi_R eta_0.
//!
//! The quadratic form <L_0 psi_R, psi_R> splits into the phi_0 term, a cross
//! term, and a square term; the cutoff-derivative pieces live on the band
//! [R, 2R] and vanish (or are controlled) as R grows, so the total converges
//! to <L_0 phi_0, phi_0> + ||phi_0||^4 / M'(0) when M'(0) is finite and to
//! <L_0 phi_0, phi_0> when M'(0) = -infinity. Both limits are negative
//! whenever the mass derivative is, which is the instability certificate:
//! psi_R is orthogonal to phi_0 in L^2 with a negative quadratic form.

use crate::error::{Error, Result};
use crate::eta::EtaZero;
use crate::mass::{self, MassPrime, P_DIVERGENCE};
use crate::model::{self, ModelParams, StabilityTag};
use crate::quad;
use crate::series::PowerFn;

/// Relative threshold (against ||phi_0||^2) below which the beta_R
/// denominator is reported as ill-conditioned instead of divided by.
const DENOMINATOR_FLOOR: f64 = 1e-8;

/// Relative orthogonality-defect tolerance for an acceptable report.
const ORTHOGONALITY_TOL: f64 = 1e-8;

/// Smooth even cutoff chi_R: identically 1 on |x| <= R, identically 0 on
/// |x| >= 2R, built from the standard exponential bump
/// sigma(t) = exp(-1/t) (t > 0) as chi(x) = sigma(2 - |x|) /
/// (sigma(2 - |x|) + sigma(|x| - 1)), then chi_R(x) = chi(x/R).
///
/// The R -> infinity limits are cutoff-independent; this
/// particular chi is fixed so that every emitted number is reproducible.
#[derive(Debug, Clone, Copy)]
pub struct CutoffProfile {
    r: f64,
}

fn sigma(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

fn sigma_prime(t: f64) -> f64 {
    if t > 0.0 {
        sigma(t) / (t * t)
    } else {
        0.0
    }
}

fn sigma_double_prime(t: f64) -> f64 {
    if t > 0.0 {
        sigma(t) * (1.0 / (t * t * t * t) - 2.0 / (t * t * t))
    } else {
        0.0
    }
}

/// chi and its first two derivatives on the reference scale (R = 1),
/// evaluated for r = |x| in the transition band (1, 2).
fn chi_unit(r: f64) -> (f64, f64, f64) {
    let n = sigma(2.0 - r);
    let m = sigma(r - 1.0);
    let np = -sigma_prime(2.0 - r);
    let mp = sigma_prime(r - 1.0);
    let npp = sigma_double_prime(2.0 - r);
    let mpp = sigma_double_prime(r - 1.0);
    let d = n + m;
    let chi = n / d;
    let num1 = np * m - n * mp;
    let chi1 = num1 / (d * d);
    let chi2 = (npp * m - n * mpp) / (d * d) - 2.0 * num1 * (np + mp) / (d * d * d);
    (chi, chi1, chi2)
}

impl CutoffProfile {
    pub fn r(&self) -> f64 {
        self.r
    }

    /// chi_R(x) = chi(x/R); even, 1 on the plateau, 0 outside 2R.
    pub fn chi(&self, x: f64) -> f64 {
        let r = x.abs() / self.r;
        if r <= 1.0 {
            1.0
        } else if r >= 2.0 {
            0.0
        } else {
            chi_unit(r).0
        }
    }

    /// chi_R'(x) = chi'(x/R)/R; odd, supported on R <= |x| <= 2R.
    pub fn chi_prime(&self, x: f64) -> f64 {
        let r = x.abs() / self.r;
        if !(1.0..2.0).contains(&r) {
            return 0.0;
        }
        x.signum() * chi_unit(r).1 / self.r
    }

    /// chi_R''(x) = chi''(x/R)/R^2; even, supported on R <= |x| <= 2R.
    pub fn chi_double_prime(&self, x: f64) -> f64 {
        let r = x.abs() / self.r;
        if !(1.0..2.0).contains(&r) {
            return 0.0;
        }
        chi_unit(r).2 / (self.r * self.r)
    }
}

pub fn make_cutoff(r: f64) -> Result<CutoffProfile> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("cutoff scale must be positive, got {r}")));
    }
    Ok(CutoffProfile { r })
}

/// One row of the convergence study at a fixed cutoff scale:
/// the decomposition
/// <L_0 psi_R, psi_R> = <L_0 phi_0, phi_0> + cross_term + square_term
/// together with the predicted R -> infinity limit and the L^2
/// orthogonality defect |(psi_R, phi_0)|.
#[derive(Debug, Clone, Copy)]
pub struct UnstableDirectionReport {
    pub r: f64,
    pub beta_r: f64,
    /// <L_0 phi_0, phi_0>
    pub term_phi0: f64,
    /// 2 beta_R <L_0 (chi_R eta_0), phi_0>
    pub cross_term: f64,
    /// beta_R^2 <L_0 (chi_R eta_0), chi_R eta_0>
    pub square_term: f64,
    pub total: f64,
    pub predicted_limit: f64,
    pub orthogonality_defect: f64,
}

/// ||phi_0'||^2 and ||phi_0||_r^r on the quadrature side: with tau = G(z),
///   ||phi_0'||^2    = (2/b) int_0^1 sqrt(W(a tau)/tau) dtau,
///   ||phi_0||_r^r   = (2/b) int_0^1 (a tau)^{r/2} / sqrt(tau W(a tau)) dtau.
/// The tau = 1 endpoint is de-singularized by tau = 1 - u^2 with the root
/// residual of W(a) treated as exactly zero, as everywhere else.
struct ZeroProfileNorms {
    a: f64,
    b: f64,
    ws_a: f64,
    w_fn: PowerFn,
}

const SPLIT: f64 = 0.5;

impl ZeroProfileNorms {
    fn new(params: &ModelParams) -> Result<Self> {
        params.require_p_below_5()?;
        let a = model::a_omega(0.0, params)?;
        Ok(Self {
            a,
            b: 2.0 / a.sqrt(),
            ws_a: model::w_s_eval(a, 0.0, params)?,
            w_fn: PowerFn::w(params.p(), params.q(), 0.0),
        })
    }

    fn w_below(&self, d: f64) -> f64 {
        if d.abs() <= PowerFn::near_threshold(self.a) {
            -self.w_fn.diff_near(self.a, d)
        } else {
            self.w_fn.eval(self.a - d)
        }
    }

    fn grad_sq(&self) -> Result<f64> {
        let fu = |u: f64| {
            let tau = 1.0 - u * u;
            2.0 * u * (self.w_below(self.a * u * u).max(0.0) / tau).sqrt()
        };
        let upper = quad::integrate(&fu, 0.0, (1.0 - SPLIT).sqrt(), 1e-300, 1e-12)?;
        let f = |tau: f64| (self.w_fn.eval(self.a * tau).max(0.0) / tau).sqrt();
        let lower = quad::integrate(&f, 0.0, SPLIT, 1e-300, 1e-12)?;
        Ok(2.0 / self.b * (upper + lower))
    }

    fn lr_norm(&self, r: f64) -> Result<f64> {
        let half = 0.5 * r;
        let fu = |u: f64| {
            if u == 0.0 {
                return 2.0 * self.a.powf(half) / (-self.ws_a * self.a).sqrt();
            }
            let tau = 1.0 - u * u;
            2.0 * u * (self.a * tau).powf(half)
                / (tau.sqrt() * self.w_below(self.a * u * u).max(f64::MIN_POSITIVE).sqrt())
        };
        let upper = quad::integrate(&fu, 0.0, (1.0 - SPLIT).sqrt(), 1e-300, 1e-12)?;
        let f = |tau: f64| {
            (self.a * tau).powf(half) / (tau * self.w_fn.eval(self.a * tau)).sqrt()
        };
        let lower = quad::integrate(&f, 0.0, SPLIT, 1e-300, 1e-12)?;
        Ok(2.0 / self.b * (upper + lower))
    }
}

/// <L_0 phi_0, phi_0> = -(p-1) ||phi_0'||^2 - (q-p) ||phi_0||_{q+1}^{q+1};
/// always negative.
pub fn quadform_phi0(params: &ModelParams) -> Result<f64> {
    let norms = ZeroProfileNorms::new(params)?;
    let p = params.p();
    let q = params.q();
    Ok(-(p - 1.0) * norms.grad_sq()? - (q - p) * norms.lr_norm(q + 1.0)?)
}

/// The same quadratic form by its defining expression
/// ||phi_0'||^2 + p ||phi_0||_{p+1}^{p+1} - q ||phi_0||_{q+1}^{q+1};
/// kept as an independent cross-check of `quadform_phi0`.
pub fn quadform_phi0_direct(params: &ModelParams) -> Result<f64> {
    let norms = ZeroProfileNorms::new(params)?;
    let p = params.p();
    let q = params.q();
    Ok(norms.grad_sq()? + p * norms.lr_norm(p + 1.0)? - q * norms.lr_norm(q + 1.0)?)
}

/// Segment points for [0, 2R] quadratures: geometric refinement near the
/// origin (where phi_0 eta_0 changes character) plus an explicit split at R,
/// where the chi_R weight loses analyticity.
fn bulk_segments(r: f64, ell: f64) -> Vec<f64> {
    let mut points = vec![0.0];
    let mut t = ell;
    while t < r {
        points.push(t);
        t *= 4.0;
    }
    points.extend([r, 1.5 * r, 2.0 * r]);
    points
}

/// (phi_0, chi_R eta_0)_{L^2} over the line (evenness doubles [0, 2R]).
fn pairing_denominator(cut: &CutoffProfile, e: &EtaZero, ell: f64) -> Result<f64> {
    let f = |x: f64| {
        cut.chi(x)
            * e.profile0().phi(x).expect("phi inside denominator integrand")
            * e.eta0(x).expect("eta0 inside denominator integrand")
    };
    let seg = bulk_segments(cut.r(), ell);
    Ok(2.0 * quad::integrate_segmented(&f, &seg, 1e-13, 1e-11)?)
}

/// beta_R = -||phi_0||^2 / (phi_0, chi_R eta_0)_{L^2}.
pub fn beta_r(r: f64, e: &EtaZero) -> Result<f64> {
    let norm_sq = 2.0 * mass::mass(0.0, e.params())?;
    let cut = make_cutoff(r)?;
    let denom = pairing_denominator(&cut, e, e.params().characteristic_length())?;
    if denom.abs() < DENOMINATOR_FLOOR * norm_sq {
        return Err(Error::IllConditionedBeta { denominator: denom });
    }
    Ok(-norm_sq / denom)
}

/// The four boundary-band inner products of Eqs. the decomposition, all
/// supported on R <= |x| <= 2R and doubled by evenness:
/// <chi_R'' eta_0, phi_0>, <chi_R' eta_0', phi_0>,
/// <chi_R'' eta_0, chi_R eta_0>, <chi_R' eta_0', chi_R eta_0>.
pub struct BandTerms {
    pub dd_phi: f64,
    pub d_phi: f64,
    pub dd_eta: f64,
    pub d_eta: f64,
}

pub fn band_terms(cut: &CutoffProfile, e: &EtaZero) -> Result<BandTerms> {
    let r = cut.r();
    let seg = [r, 1.25 * r, 1.5 * r, 2.0 * r];
    let band = |f: &dyn Fn(f64) -> f64| -> Result<f64> {
        Ok(2.0 * quad::integrate_segmented(&|x| f(x), &seg, 1e-13, 1e-10)?)
    };
    let phi = |x: f64| e.profile0().phi(x).expect("phi inside band integrand");
    let eta = |x: f64| e.eta0(x).expect("eta0 inside band integrand");
    let eta_p = |x: f64| e.eta0_prime(x).expect("eta0' inside band integrand");
    Ok(BandTerms {
        dd_phi: band(&|x| cut.chi_double_prime(x) * eta(x) * phi(x))?,
        d_phi: band(&|x| cut.chi_prime(x) * eta_p(x) * phi(x))?,
        dd_eta: band(&|x| cut.chi_double_prime(x) * cut.chi(x) * eta(x) * eta(x))?,
        d_eta: band(&|x| cut.chi_prime(x) * cut.chi(x) * eta_p(x) * eta(x))?,
    })
}

/// Full decomposition of <L_0 psi_R, psi_R> at one cutoff scale, via
/// L_0 (chi_R eta_0) = -chi_R'' eta_0 - 2 chi_R' eta_0' - chi_R phi_0:
///   cross  = 2 beta_R (-<chi_R'' eta_0, phi_0> - 2 <chi_R' eta_0', phi_0>
///                      - <chi_R phi_0, phi_0>),
///   square = beta_R^2 (-<chi_R'' eta_0, chi_R eta_0>
///                      - 2 <chi_R' eta_0', chi_R eta_0>
///                      - <chi_R phi_0, chi_R eta_0>).
pub fn quadform_terms(r: f64, e: &EtaZero) -> Result<UnstableDirectionReport> {
    let params = e.params();
    let p = params.p();
    let ell = params.characteristic_length();
    let cut = make_cutoff(r)?;

    let norm_sq = 2.0 * mass::mass(0.0, params)?;
    let denom = pairing_denominator(&cut, e, ell)?;
    if denom.abs() < DENOMINATOR_FLOOR * norm_sq {
        return Err(Error::IllConditionedBeta { denominator: denom });
    }
    let beta = -norm_sq / denom;

    let phi = |x: f64| e.profile0().phi(x).expect("phi inside bulk integrand");
    let eta = |x: f64| e.eta0(x).expect("eta0 inside bulk integrand");
    let seg = bulk_segments(r, ell);
    // <chi_R phi_0, phi_0> and <chi_R phi_0, chi_R eta_0>
    let bulk_phi =
        2.0 * quad::integrate_segmented(&|x| cut.chi(x) * phi(x) * phi(x), &seg, 1e-13, 1e-11)?;
    let bulk_eta = 2.0
        * quad::integrate_segmented(
            &|x| {
                let c = cut.chi(x);
                c * c * phi(x) * eta(x)
            },
            &seg,
            1e-13,
            1e-11,
        )?;

    let bands = band_terms(&cut, e)?;
    let term_phi0 = quadform_phi0(params)?;
    let cross_term = 2.0 * beta * (-bands.dd_phi - 2.0 * bands.d_phi - bulk_phi);
    let square_term = beta * beta * (-bands.dd_eta - 2.0 * bands.d_eta - bulk_eta);

    let predicted_limit = match mass::mass_prime(0.0, params)? {
        MassPrime::Finite(mp) if p < P_DIVERGENCE => term_phi0 + norm_sq * norm_sq / mp,
        _ => term_phi0,
    };

    // recompute the denominator on a finer, shifted segmentation so the
    // defect reflects genuine quadrature disagreement, not the identity
    // norm + beta * denom = 0 replayed with the same numbers
    let mut fine = vec![0.0];
    let mut t = 0.5 * ell;
    while t < r {
        fine.push(t);
        t *= 2.0;
    }
    fine.extend([r, 1.2 * r, 1.5 * r, 1.8 * r, 2.0 * r]);
    let denom_check = 2.0
        * quad::integrate_segmented(
            &|x| cut.chi(x) * phi(x) * eta(x),
            &fine,
            1e-13,
            1e-11,
        )?;
    let orthogonality_defect = (norm_sq + beta * denom_check).abs();

    Ok(UnstableDirectionReport {
        r,
        beta_r: beta,
        term_phi0,
        cross_term,
        square_term,
        total: term_phi0 + cross_term + square_term,
        predicted_limit,
        orthogonality_defect,
    })
}

/// Default cutoff schedule {50, 100, 200, 400, 800} in units of the
/// profile's characteristic length, so schedules are comparable across
/// exponent pairs.
pub fn default_r_schedule(params: &ModelParams) -> Vec<f64> {
    let ell = params.characteristic_length();
    [50.0, 100.0, 200.0, 400.0, 800.0].iter().map(|&c| c * ell).collect()
}

/// Walks the schedule and returns the first scale R* whose report certifies
/// an unstable direction: total < 0 with orthogonality defect below
/// tolerance. Requires the mass-derivative classification to be negative
/// (finite or -infinity).
pub fn find_unstable_direction(
    params: &ModelParams,
    r_schedule: &[f64],
) -> Result<(f64, UnstableDirectionReport)> {
    params.require_q_below_5()?;
    let tag = model::classify(params).tag;
    if !matches!(
        tag,
        StabilityTag::MassDerivNegativeFinite | StabilityTag::MassDerivMinusInfinity
    ) {
        return Err(Error::NotApplicable(format!(
            "instability construction requires M'(0) in [-inf, 0); (p, q) = ({}, {}) classifies as {tag:?}",
            params.p(),
            params.q()
        )));
    }
    let e = EtaZero::new(params.clone())?;
    let norm_sq = 2.0 * mass::mass(0.0, params)?;
    let mut best: Option<(f64, f64)> = None;
    for &r in r_schedule {
        let report = quadform_terms(r, &e)?;
        if report.total < 0.0 && report.orthogonality_defect < ORTHOGONALITY_TOL * norm_sq {
            return Ok((r, report));
        }
        best = Some((r, report.total));
    }
    Err(Error::ScheduleExhausted(match best {
        Some((r, total)) => format!(
            "no scale out of {} certified instability; last R = {r} gave total = {total}",
            r_schedule.len()
        ),
        None => "empty schedule".into(),
    }))
}
