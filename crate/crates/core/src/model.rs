//! Exponent pair, the scalar functions f and W, the zero point a(omega),
//! and the stability classification by the sign of the mass-derivative
//! limit at zero frequency.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// The exponent pair (p, q) of the double-power nonlinearity.
///
/// Construction enforces 1 < p < q. Some constructions additionally require
/// q < 5; call sites check that through [`ModelParams::require_q_below_5`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    p: f64,
    q: f64,
}

impl ModelParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p.is_finite() && q.is_finite()) {
            return Err(Error::InvalidParams("p and q must be finite".into()));
        }
        if !(1.0 < p && p < q) {
            return Err(Error::InvalidParams(format!(
                "need 1 < p < q, got p = {p}, q = {q}"
            )));
        }
        Ok(Self { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn require_q_below_5(&self) -> Result<()> {
        if self.q < 5.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "construction requires q < 5, got q = {}",
                self.q
            )))
        }
    }

    /// p < 5 guarantees square-integrability of the stationary profile in 1-D.
    pub fn require_p_below_5(&self) -> Result<()> {
        if self.p < 5.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "phi_0 is not square integrable for p >= 5, got p = {}",
                self.p
            )))
        }
    }

    /// Half-width scale of the profile core, used to express R schedules and
    /// domain sizes in comparable units across (p, q).
    pub fn characteristic_length(&self) -> f64 {
        ((self.p + 1.0) * (self.p + 1.0) / self.p).sqrt() / (self.p - 1.0)
    }
}

/// Sign of the one-sided mass-derivative limit at omega = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityTag {
    MassDerivPositive,
    MassDerivZero,
    MassDerivNegativeFinite,
    MassDerivMinusInfinity,
}

/// Classification of (p, q) by the four branches of the mass-derivative limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityClass {
    pub tag: StabilityTag,
    pub two_p_plus_q: f64,
    pub gamma1_threshold: f64,
}

/// f(s) = s^{(p-1)/2} - s^{(q-1)/2}.
pub fn f_eval(s: f64, params: &ModelParams) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::Domain(format!("f requires s >= 0, got {s}")));
    }
    Ok(s.powf(0.5 * (params.p - 1.0)) - s.powf(0.5 * (params.q - 1.0)))
}

/// W(s; omega) = omega s + 2/(p+1) s^{(p+1)/2} - 2/(q+1) s^{(q+1)/2}.
pub fn w_eval(s: f64, omega: f64, params: &ModelParams) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::Domain(format!("W requires s >= 0, got {s}")));
    }
    Ok(omega * s + 2.0 / (params.p + 1.0) * s.powf(0.5 * (params.p + 1.0))
        - 2.0 / (params.q + 1.0) * s.powf(0.5 * (params.q + 1.0)))
}

/// W_s(s; omega) = omega + f(s).
pub fn w_s_eval(s: f64, omega: f64, params: &ModelParams) -> Result<f64> {
    Ok(omega + f_eval(s, params)?)
}

/// The unique positive zero a(omega) of W(.; omega).
///
/// At omega = 0 the closed form ((q+1)/(p+1))^{2/(q-p)} is exact. For
/// omega > 0 a safeguarded Newton iteration runs inside the bracket
/// [a(0), a_hi], where a_hi doubles until W changes sign.
pub fn a_omega(omega: f64, params: &ModelParams) -> Result<f64> {
    if omega < 0.0 {
        return Err(Error::Domain(format!("a(omega) requires omega >= 0, got {omega}")));
    }
    let a0 = ((params.q + 1.0) / (params.p + 1.0)).powf(2.0 / (params.q - params.p));
    if omega == 0.0 {
        return Ok(a0);
    }

    // a(.) is increasing, so a(0) is a lower bound with W > 0 there.
    let mut lo = a0;
    let mut hi = 2.0 * a0;
    let mut guard = 0;
    while w_eval(hi, omega, params)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Bracket(format!(
                "no sign change of W(.; {omega}) up to s = {hi} for (p, q) = ({}, {})",
                params.p, params.q
            )));
        }
    }

    let tol = 1e-13 * a0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let w = w_eval(x, omega, params)?;
        if w > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let ws = w_s_eval(x, omega, params)?;
        let newton = x - w / ws;
        x = if ws != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < tol {
            return Ok(x);
        }
    }
    Ok(x)
}

/// a'(omega) = -a(omega)/W_s(a(omega); omega); always positive.
pub fn a_prime(omega: f64, params: &ModelParams) -> Result<f64> {
    let a = a_omega(omega, params)?;
    Ok(-a / w_s_eval(a, omega, params)?)
}

/// b(omega) = 2/sqrt(a(omega)).
pub fn b_omega(omega: f64, params: &ModelParams) -> Result<f64> {
    Ok(2.0 / a_omega(omega, params)?.sqrt())
}

/// b'(omega) = -a'(omega) a(omega)^{-3/2}.
pub fn b_prime(omega: f64, params: &ModelParams) -> Result<f64> {
    let a = a_omega(omega, params)?;
    Ok(-a_prime(omega, params)? * a.powf(-1.5))
}

/// gamma_1(p) = (23 - 3p)/(3 + p).
pub fn gamma1(p: f64) -> f64 {
    (23.0 - 3.0 * p) / (3.0 + p)
}

const BOUNDARY_TOL: f64 = 1e-12;

/// Four-branch classification by the sign of the mass-derivative limit:
/// 2p + q < 7 positive, = 7 zero, > 7 negative (finite for p < 7/3,
/// minus infinity for p >= 7/3). Points within 1e-12 of the boundary
/// 2p + q = 7 are labeled as the zero branch.
pub fn classify(params: &ModelParams) -> StabilityClass {
    let s = 2.0 * params.p + params.q;
    let tag = if (s - 7.0).abs() <= BOUNDARY_TOL {
        StabilityTag::MassDerivZero
    } else if s < 7.0 {
        StabilityTag::MassDerivPositive
    } else if params.p < 7.0 / 3.0 {
        StabilityTag::MassDerivNegativeFinite
    } else {
        StabilityTag::MassDerivMinusInfinity
    };
    StabilityClass {
        tag,
        two_p_plus_q: s,
        gamma1_threshold: gamma1(params.p),
    }
}
