//! Quadrature representation of the ground-state profile.
//!
//! The profile at frequency omega is recovered from the strictly decreasing
//! map F(tau; omega) = int_tau^1 ds/sqrt(s W(a s; omega)) and its inverse G:
//! phi_omega(x)^2 = a G(b x; omega) with b = 2/sqrt(a). The integrable
//! endpoint singularity at s = 1 is removed by the substitution s = 1 - u^2;
//! the buildup of the integral towards tau = 0 is handled on a logarithmic
//! axis (s = e^{-y}) so that tau may be driven extremely small without loss
//! of relative accuracy.

use std::sync::Mutex;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::fit;
use crate::model::{self, ModelParams};
use crate::quad;
use crate::series::PowerFn;

/// Interior split point between the logarithmic piece and the u-substituted
/// endpoint piece of the F integrals.
const TAU_SPLIT: f64 = 0.5;

/// Below this value of G the omega = 0 profile switches to its fitted
/// algebraic continuation (avoids underflow in W).
const G_SWITCH: f64 = 1e-14;

const MEMO_CAP: usize = 8192;

/// All quantities attached to one frequency omega.
pub struct ProfileEvaluator {
    params: ModelParams,
    omega: f64,
    a: f64,
    b: f64,
    quad_tol: f64,
    inv_tol: f64,
    w_fn: PowerFn,
    w_s_fn: PowerFn,
    // W(a; omega), zero up to the accuracy of the root find
    // inversion seeds (z, tau), sorted by z
    memo: Mutex<Vec<(f64, f64)>>,
    // (z_switch, tau = G_SWITCH) for the asymptotic continuation, lazily set
    switch_point: OnceLock<(f64, f64)>,
}

impl ProfileEvaluator {
    pub fn new(params: ModelParams, omega: f64) -> Result<Self> {
        if omega < 0.0 {
            return Err(Error::Domain(format!("omega must be >= 0, got {omega}")));
        }
        let a = model::a_omega(omega, &params)?;
        let w_fn = PowerFn::w(params.p(), params.q(), omega);
        Ok(Self {
            params,
            omega,
            a,
            b: 2.0 / a.sqrt(),
            quad_tol: 1e-12,
            inv_tol: 1e-12,
            w_fn,
            w_s_fn: PowerFn::w_s(params.p(), params.q()),
            memo: Mutex::new(Vec::new()),
            switch_point: OnceLock::new(),
        })
    }

    pub fn with_tolerances(mut self, quad_tol: f64, inv_tol: f64) -> Self {
        self.quad_tol = quad_tol;
        self.inv_tol = inv_tol;
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    fn w(&self, s: f64) -> f64 {
        model::w_eval(s, self.omega, &self.params).expect("s >= 0 by construction")
    }

    fn w_s(&self, s: f64) -> f64 {
        model::w_s_eval(s, self.omega, &self.params).expect("s >= 0 by construction")
    }

    /// W(a - d; omega), stable for d << a where direct evaluation cancels.
    ///
    /// The computed root `a` satisfies W(a) = 0 only to root-finder accuracy;
    /// treating that residual as exactly zero (W(a-d) = -(W(a)-W(a-d))) keeps
    /// the endpoint behaviour of the de-singularized integrands consistent,
    /// which matters: carrying the residual through perturbs integrals by the
    /// square root of it rather than linearly.
    fn w_below_a(&self, d: f64) -> f64 {
        if d.abs() <= PowerFn::near_threshold(self.a) {
            -self.w_fn.diff_near(self.a, d)
        } else {
            self.w(self.a - d)
        }
    }

    /// W_s(a; omega) - W_s(a - d; omega), stable for d << a.
    fn w_s_drop_below_a(&self, d: f64) -> f64 {
        self.w_s_fn.diff(self.a, d)
    }

    /// F(tau; omega) = int_tau^1 ds/sqrt(s W(a s; omega)).
    pub fn f_eval(&self, tau: f64) -> Result<f64> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::Domain(format!("F requires 0 < tau <= 1, got {tau}")));
        }
        if tau == 1.0 {
            return Ok(0.0);
        }
        let a = self.a;
        let mut total = 0.0;

        // endpoint piece on [max(tau, split), 1] with s = 1 - u^2
        let lo = tau.max(TAU_SPLIT);
        let u_hi = (1.0 - lo).sqrt();
        let fu = |u: f64| {
            if u == 0.0 {
                return 2.0 / (-self.w_s(a) * a).sqrt();
            }
            let s = 1.0 - u * u;
            let w = self.w_below_a(a * u * u).max(0.0);
            if w == 0.0 {
                2.0 / (-self.w_s(a) * a).sqrt()
            } else {
                2.0 * u / (s * w).sqrt()
            }
        };
        total += quad::integrate(&fu, 0.0, u_hi, 1e-300, self.quad_tol)?;

        // logarithmic piece on [tau, split] with s = e^{-y}
        if tau < TAU_SPLIT {
            let fy = |y: f64| {
                let s = (-y).exp();
                (s / self.w(a * s)).sqrt()
            };
            let y_lo = -(TAU_SPLIT.ln());
            let y_hi = -(tau.ln());
            total += quad::integrate(&fy, y_lo, y_hi, 1e-300, self.quad_tol)?;
        }
        Ok(total)
    }

    /// F_tau(tau; omega) = -1/sqrt(tau W(a tau; omega)), tau in (0, 1).
    pub fn f_tau(&self, tau: f64) -> Result<f64> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Domain(format!("F_tau requires 0 < tau < 1, got {tau}")));
        }
        Ok(-1.0 / (tau * self.w(self.a * tau)).sqrt())
    }

    /// Partial derivative of F with respect to omega (a(omega) varies too).
    pub fn f_omega(&self, tau: f64) -> Result<f64> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::Domain(format!("F_omega requires 0 < tau <= 1, got {tau}")));
        }
        if tau == 1.0 {
            return Ok(0.0);
        }
        let a = self.a;
        let wsa = self.w_s(a);
        let mut integral = 0.0;

        let lo = tau.max(TAU_SPLIT);
        let u_hi = (1.0 - lo).sqrt();
        let hu = |u: f64| {
            if u == 0.0 {
                // limit 2 W_ss(a) a / (-W_s(a) a)^{3/2}
                return 2.0 * self.w_fn.deriv(a, 2) * a / (-wsa * a).powf(1.5);
            }
            let s = 1.0 - u * u;
            let d = a * u * u;
            let num = self.w_s_drop_below_a(d);
            let w = self.w_below_a(d).max(f64::MIN_POSITIVE);
            2.0 * u * num * s.sqrt() / w.powf(1.5)
        };
        integral += quad::integrate(&hu, 0.0, u_hi, 1e-300, self.quad_tol)?;

        if tau < TAU_SPLIT {
            let hy = |y: f64| {
                let s = (-y).exp();
                let w = self.w(a * s);
                s * (-self.w_s(a * s) + wsa) * s.sqrt() / w.powf(1.5)
            };
            integral += quad::integrate(&hy, -(TAU_SPLIT.ln()), -(tau.ln()), 1e-300, self.quad_tol)?;
        }
        Ok(-a / (2.0 * wsa) * integral)
    }

    fn memo_lookup(&self, z: f64) -> Option<(f64, bool)> {
        let memo = self.memo.lock().unwrap();
        let idx = memo.partition_point(|&(mz, _)| mz < z);
        memo.get(idx)
            .and_then(|&(mz, tau)| (mz == z).then_some((tau, true)))
    }

    fn memo_seed(&self, z: f64) -> Option<f64> {
        let memo = self.memo.lock().unwrap();
        if memo.is_empty() {
            return None;
        }
        let idx = memo.partition_point(|&(mz, _)| mz < z);
        let cand = [idx.checked_sub(1), Some(idx)]
            .into_iter()
            .flatten()
            .filter_map(|i| memo.get(i));
        cand.min_by(|x, y| (x.0 - z).abs().total_cmp(&(y.0 - z).abs()))
            .map(|&(_, tau)| tau)
    }

    fn memo_insert(&self, z: f64, tau: f64) {
        let mut memo = self.memo.lock().unwrap();
        if memo.len() >= MEMO_CAP {
            return;
        }
        let idx = memo.partition_point(|&(mz, _)| mz < z);
        if memo.get(idx).map(|&(mz, _)| mz != z).unwrap_or(true) {
            memo.insert(idx, (z, tau));
        }
    }

    /// For omega = 0, the z beyond which the profile switches to its
    /// algebraic continuation, together with the tau value there.
    fn switch_point(&self) -> (f64, f64) {
        *self.switch_point.get_or_init(|| {
            let z = self
                .f_eval(G_SWITCH)
                .expect("F at the switch tau must converge");
            (z, G_SWITCH)
        })
    }

    /// G(z; omega) = F^{-1}(z; omega): the unique tau in (0, 1] with
    /// F(tau) = z. Bracketed bisection on a logarithmic tau axis refined by
    /// Newton steps using F_tau.
    pub fn g_eval(&self, z: f64) -> Result<f64> {
        if z < 0.0 {
            return Err(Error::Domain(format!("G requires z >= 0, got {z}")));
        }
        if z == 0.0 {
            return Ok(1.0);
        }
        if self.omega == 0.0 {
            let (z_sw, tau_sw) = self.switch_point();
            if z > z_sw {
                // G(z; 0) ~ z^{-4/(p-1)} continuation beyond the switch point
                let expo = -4.0 / (self.params.p() - 1.0);
                return Ok(tau_sw * (z / z_sw).powf(expo));
            }
        }

        // an exact memo hit short-circuits the solve, so repeated queries at
        // the same z (e.g. phi and its derivatives at +-x) agree bitwise
        if let Some((tau, exact)) = self.memo_lookup(z) {
            if exact {
                return Ok(tau);
            }
        }

        // establish a bracket [tau_lo, tau_hi] with F(tau_lo) >= z >= F(tau_hi)
        let seed = self.memo_seed(z).unwrap_or(TAU_SPLIT).clamp(1e-300, 1.0 - 1e-9);
        let mut lo = seed;
        let mut f_lo = self.f_eval(lo)?;
        let mut hi = seed;
        let mut f_hi = f_lo;
        let mut guard = 0;
        while f_lo < z {
            lo = lo * lo; // halve on the log axis
            if lo < 1e-300 {
                if self.omega > 0.0 {
                    // exponential decay has pushed G below the double range;
                    // the profile is zero to working precision out here
                    return Ok(0.0);
                }
                return Err(Error::Bracket(format!("G bracketing underflow at z = {z}")));
            }
            f_lo = self.f_eval(lo)?;
            guard += 1;
            if guard > 60 {
                return Err(Error::Bracket(format!("G lower bracket not found for z = {z}")));
            }
        }
        while f_hi > z {
            hi = (hi.sqrt() * 2.0).min(1.0).max(hi.sqrt()); // move towards 1
            if hi >= 1.0 {
                hi = 1.0;
                f_hi = 0.0;
                break;
            }
            f_hi = self.f_eval(hi)?;
            guard += 1;
            if guard > 120 {
                return Err(Error::Bracket(format!("G upper bracket not found for z = {z}")));
            }
        }
        let _ = f_hi;

        let mut tau = (lo.ln() + hi.ln()).mul_add(0.5, 0.0).exp();
        for _ in 0..200 {
            let fv = self.f_eval(tau)? - z;
            if fv > 0.0 {
                lo = tau;
            } else {
                hi = tau;
            }
            let mut next = f64::NAN;
            if tau < 1.0 {
                let deriv = self.f_tau(tau.min(1.0 - 1e-16))?;
                let cand = tau - fv / deriv;
                if cand > lo && cand < hi {
                    next = cand;
                }
            }
            if next.is_nan() {
                next = ((lo.ln() + hi.ln()) * 0.5).exp();
            }
            let step = (next - tau).abs();
            tau = next;
            if step <= self.inv_tol * tau {
                // one polishing Newton step: the stored value is served
                // verbatim on later queries, so squeeze out the last digits
                if tau < 1.0 {
                    let fv = self.f_eval(tau)? - z;
                    let polished = tau - fv / self.f_tau(tau)?;
                    if polished > 0.0 && polished < 1.0 {
                        tau = polished;
                    }
                }
                self.memo_insert(z, tau);
                return Ok(tau);
            }
        }
        self.memo_insert(z, tau);
        Ok(tau)
    }

    /// G_z via the singularity-free form -sqrt(G W(a G; omega)); returns 0 at z = 0.
    pub fn g_z(&self, z: f64) -> Result<f64> {
        if z < 0.0 {
            return Err(Error::Domain(format!("G_z requires z >= 0, got {z}")));
        }
        if z == 0.0 {
            return Ok(0.0);
        }
        let tau = self.g_eval(z)?;
        Ok(-(tau * self.w(self.a * tau).max(0.0)).sqrt())
    }

    /// G_omega(z) = -F_omega(G(z))/F_tau(G(z)), evaluated in the form
    /// F_omega(G(z)) * sqrt(G W(a G)) which stays finite at z = 0.
    pub fn g_omega(&self, z: f64) -> Result<f64> {
        if z < 0.0 {
            return Err(Error::Domain(format!("G_omega requires z >= 0, got {z}")));
        }
        if z == 0.0 {
            return Ok(0.0);
        }
        let tau = self.g_eval(z)?;
        // G_omega = -F_omega/F_tau and F_tau = 1/G_z
        let gz = -(tau * self.w(self.a * tau).max(0.0)).sqrt();
        Ok(-self.f_omega(tau)? * gz)
    }

    /// phi_omega(x) = sqrt(a G(b |x|; omega)); even in x.
    pub fn phi(&self, x: f64) -> Result<f64> {
        let tau = self.g_eval(self.b * x.abs())?;
        Ok((self.a * tau).sqrt())
    }

    /// phi_omega'(x) = -sign(x) sqrt(W(phi^2; omega)); odd in x, 0 at x = 0.
    pub fn phi_prime(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        let phi = self.phi(x)?;
        Ok(-x.signum() * self.w(phi * phi).max(0.0).sqrt())
    }

    /// Least-squares slope of log phi_0 vs log x over [x_lo, 4 x_lo].
    pub fn decay_exponent_phi(&self, x_lo: f64) -> Result<f64> {
        if self.omega != 0.0 {
            return Err(Error::Domain(
                "decay exponent fit is defined for the omega = 0 profile".into(),
            ));
        }
        Ok(fit::loglog_slope(
            |x| self.phi(x).expect("phi evaluation inside fit window"),
            x_lo,
            4.0 * x_lo,
            33,
        ))
    }
}

/// Elementary closed form of the profile for q = 2p - 1.
pub fn phi_closed_form(x: f64, omega: f64, params: &ModelParams) -> Result<f64> {
    let p = params.p();
    if (params.q() - (2.0 * p - 1.0)).abs() >= 1e-12 {
        return Err(Error::InvalidParams(format!(
            "closed form requires q = 2p - 1, got (p, q) = ({}, {})",
            p,
            params.q()
        )));
    }
    if omega < 0.0 {
        return Err(Error::Domain(format!("omega must be >= 0, got {omega}")));
    }
    let pm1 = p - 1.0;
    let pp1 = p + 1.0;
    if omega == 0.0 {
        Ok((2.0 * pp1 / (pp1 * pp1 / p + pm1 * pm1 * x * x)).powf(1.0 / pm1))
    } else {
        let root = (1.0 + pp1 * pp1 / p * omega).sqrt();
        let denom = root * (pm1 * omega.sqrt() * x).cosh() - 1.0;
        Ok((pp1 * omega / denom).powf(1.0 / pm1))
    }
}
