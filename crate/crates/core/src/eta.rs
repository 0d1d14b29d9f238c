//! The one-sided frequency derivative of the profile family at zero
//! frequency.
//!
//! eta_0(x) = lim_{omega -> 0} (phi_omega(x) - phi_0(x))/omega exists
//! pointwise, is even and smooth, and solves the linearized equation
//! L_0 eta_0 = -phi_0 with L_0 = -d^2/dx^2 + p phi_0^{p-1} - q phi_0^{q-1}.
//! Unlike the exponentially decaying eta_omega (omega > 0), eta_0 behaves
//! like -x^{-2/(p-1)+2} at infinity, so depending on p it may decay, tend to
//! a negative constant, or grow.

use crate::error::{Error, Result};
use crate::fit;
use crate::model::{self, ModelParams};
use crate::profile::ProfileEvaluator;

/// eta_0 evaluator bundling the zero-frequency profile with the one-sided
/// derivatives of the scaling parameters a and b at omega = 0.
pub struct EtaZero {
    params: ModelParams,
    profile0: ProfileEvaluator,
    a0: f64,
    a0_prime: f64,
    b0: f64,
    b0_prime: f64,
}

impl EtaZero {
    pub fn new(params: ModelParams) -> Result<Self> {
        let profile0 = ProfileEvaluator::new(params.clone(), 0.0)?;
        let a0 = profile0.a();
        let a0_prime = model::a_prime(0.0, &params)?;
        let b0 = profile0.b();
        // b = 2 a^{-1/2}  =>  b' = -a'/a^{3/2}
        let b0_prime = -a0_prime / (a0 * a0.sqrt());
        Ok(Self {
            params,
            profile0,
            a0,
            a0_prime,
            b0,
            b0_prime,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn profile0(&self) -> &ProfileEvaluator {
        &self.profile0
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn a0_prime(&self) -> f64 {
        self.a0_prime
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn b0_prime(&self) -> f64 {
        self.b0_prime
    }

    /// eta_0(x) = [a'(0) G(b0 |x|) + a0 b'(0) |x| G_z(b0 |x|)
    ///             + a0 G_omega(b0 |x|)] / (2 phi_0(x)); even in x.
    ///
    /// At the origin the quotient is evaluated in its analytically reduced
    /// form a'(0)/(2 sqrt(a0)) (G = 1 and G_z = G_omega = 0 there, and the
    /// raw derivative formulas carry a removable 0/0).
    pub fn eta0(&self, x: f64) -> Result<f64> {
        let r = x.abs();
        if r == 0.0 {
            return Ok(self.a0_prime / (2.0 * self.a0.sqrt()));
        }
        let z = self.b0 * r;
        let g = self.profile0.g_eval(z)?;
        let gz = self.profile0.g_z(z)?;
        let gom = self.profile0.g_omega(z)?;
        let phi = (self.a0 * g).sqrt();
        Ok((self.a0_prime * g + self.a0 * self.b0_prime * r * gz + self.a0 * gom) / (2.0 * phi))
    }

    /// eta_0'(x) = -[2 W_s(phi_0^2; 0) phi_0 eta_0 + phi_0^2]
    ///             / (2 sqrt(W(phi_0^2; 0))) for x > 0; odd extension,
    /// 0 at the origin (eta_0 is even and differentiable there).
    ///
    /// The overall minus sign comes from differentiating
    /// phi_omega' = -sqrt(W(phi_omega^2; omega)) in omega; it is fixed
    /// against the closed-form derivative and a central difference of eta_0.
    pub fn eta0_prime(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        let r = x.abs();
        let phi = self.profile0.phi(r)?;
        let eta = self.eta0(r)?;
        let s = phi * phi;
        let w = model::w_eval(s, 0.0, &self.params)?;
        let ws = model::w_s_eval(s, 0.0, &self.params)?;
        let value = -(2.0 * ws * phi * eta + s) / (2.0 * w.sqrt());
        Ok(x.signum() * value)
    }

    /// Sup over a uniform grid on [x_lo, x_hi] (n points, all >= h away from
    /// the origin) of |L_0 eta_0 + phi_0|, with eta_0'' from five-point
    /// central differences of `eta0`. Deliberately finite-difference: a
    /// derived second-derivative formula would come from the same ODE and
    /// make the check circular.
    pub fn residual_linearized(&self, x_lo: f64, x_hi: f64, n: usize, h: f64) -> Result<f64> {
        if !(x_lo > 2.0 * h && x_hi > x_lo && n >= 2) {
            return Err(Error::Domain(format!(
                "residual grid must satisfy x_lo > 2h and x_hi > x_lo, got [{x_lo}, {x_hi}] with h = {h}"
            )));
        }
        let p = self.params.p();
        let q = self.params.q();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let x = x_lo + (x_hi - x_lo) * i as f64 / (n - 1) as f64;
            let d2 = (-self.eta0(x + 2.0 * h)? + 16.0 * self.eta0(x + h)? - 30.0 * self.eta0(x)?
                + 16.0 * self.eta0(x - h)?
                - self.eta0(x - 2.0 * h)?)
                / (12.0 * h * h);
            let phi = self.profile0.phi(x)?;
            let eta = self.eta0(x)?;
            let res = -d2 + (p * phi.powf(p - 1.0) - q * phi.powf(q - 1.0)) * eta + phi;
            worst = worst.max(res.abs());
        }
        Ok(worst)
    }

    /// Least-squares exponent of |eta_0| on [x_lo, 4 x_lo] together with the
    /// sign of eta_0 at the far end. The expected values are -2/(p-1)+2 and
    /// -1. The sign is reported separately so the p = 2 constant-limit case
    /// (exponent ~ 0) is not misread as decay. A sign change inside the fit
    /// window invalidates the fit and is reported as an error carrying the
    /// last crossing location.
    pub fn decay_exponent_eta(&self, x_lo: f64) -> Result<(f64, f64)> {
        let n = 33;
        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            let t = i as f64 / (n - 1) as f64;
            let x = x_lo * 4.0f64.powf(t);
            samples.push((x, self.eta0(x)?));
        }
        let sign = samples.last().unwrap().1.signum();
        if let Some(w) = samples.windows(2).rev().find(|w| w[0].1.signum() != w[1].1.signum()) {
            return Err(Error::Domain(format!(
                "eta_0 changes sign inside the fit window, last crossing in [{}, {}]",
                w[0].0, w[1].0
            )));
        }
        let (lx, ly): (Vec<f64>, Vec<f64>) =
            samples.iter().map(|&(x, y)| (x.ln(), y.abs().ln())).unzip();
        Ok((fit::ls_slope(&lx, &ly), sign))
    }
}

/// Elementary closed form of eta_0 for q = 2p - 1.
pub fn eta0_closed_form(x: f64, params: &ModelParams) -> Result<f64> {
    let p = params.p();
    if (params.q() - (2.0 * p - 1.0)).abs() >= 1e-12 {
        return Err(Error::InvalidParams(format!(
            "closed form requires q = 2p - 1, got (p, q) = ({}, {})",
            p,
            params.q()
        )));
    }
    let pm1 = p - 1.0;
    let pp1 = p + 1.0;
    let base = 2.0 * pp1 / (pp1 * pp1 / p + pm1 * pm1 * x * x);
    let quartic = pp1.powi(4) / (8.0 * p * p)
        - pm1 * pm1 * pp1 * pp1 / (4.0 * p) * x * x
        - pm1.powi(4) / 24.0 * x.powi(4);
    Ok(base.powf(1.0 / pm1 + 1.0) / (pm1 * pp1) * quartic)
}

/// First-order difference quotient (phi_omega(x) - phi_0(x))/omega; converges
/// pointwise to eta_0(x) as omega decreases. Diagnostic only.
pub fn eta_fd(x: f64, omega: f64, params: &ModelParams) -> Result<f64> {
    if omega <= 0.0 {
        return Err(Error::Domain(format!("eta_fd requires omega > 0, got {omega}")));
    }
    let at_omega = ProfileEvaluator::new(params.clone(), omega)?;
    let at_zero = ProfileEvaluator::new(params.clone(), 0.0)?;
    Ok((at_omega.phi(x)? - at_zero.phi(x)?) / omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn eta(p: f64, q: f64) -> EtaZero {
        EtaZero::new(ModelParams::new(p, q).unwrap()).unwrap()
    }

    #[test]
    fn value_at_origin_is_reduced_formula() {
        // a'(0)/(2 sqrt(a0)): hand values 4/(2*4/3) = 3/2 for (2,3),
        // 2/(2 sqrt(3/2)) for (3,5)
        let e = eta(2.0, 3.0);
        assert_abs_diff_eq!(e.eta0(0.0).unwrap(), 1.5, epsilon = 1e-12);
        let e35 = eta(3.0, 5.0);
        assert_abs_diff_eq!(e35.eta0(0.0).unwrap(), 0.81649658092772603, epsilon = 1e-12);
        let e15 = eta(1.5, 2.0);
        assert_abs_diff_eq!(e15.eta0(0.0).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn interior_value_against_closed_form_oracle() {
        // (1/3)(144/121)(81/32 - 9/8 - 1/24) evaluated by hand
        let e = eta(2.0, 3.0);
        assert_abs_diff_eq!(e.eta0(1.0).unwrap(), 0.54132231404958678, epsilon = 1e-9);
    }

    #[test]
    fn evenness_is_exact() {
        let e = eta(2.2, 3.4);
        for x in [0.3, 1.7, 9.0] {
            assert_eq!(e.eta0(x).unwrap(), e.eta0(-x).unwrap());
        }
    }

    #[test]
    fn closed_form_values() {
        let m = ModelParams::new(2.0, 3.0).unwrap();
        assert_abs_diff_eq!(eta0_closed_form(0.0, &m).unwrap(), 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(
            eta0_closed_form(1.0, &m).unwrap(),
            0.54132231404958678,
            epsilon = 1e-14
        );
        // (p, q) = (3, 5): (1/8)(3/2)^{3/2}(32/9) at the origin
        let m35 = ModelParams::new(3.0, 5.0).unwrap();
        assert_abs_diff_eq!(
            eta0_closed_form(0.0, &m35).unwrap(),
            0.81649658092772603,
            epsilon = 1e-14
        );
        assert!(eta0_closed_form(0.0, &ModelParams::new(2.0, 3.5).unwrap()).is_err());
    }

    #[test]
    fn quadrature_route_matches_closed_form() {
        for (p, q) in [(1.5, 2.0), (2.0, 3.0), (3.0, 5.0)] {
            let e = eta(p, q);
            let m = ModelParams::new(p, q).unwrap();
            for i in 0..=25 {
                let x = 2.0 * i as f64;
                let cf = eta0_closed_form(x, &m).unwrap();
                let num = e.eta0(x).unwrap();
                assert!(
                    (num - cf).abs() < 1e-6 * (1.0 + cf.abs()),
                    "(p, q) = ({p}, {q}), x = {x}: {num} vs {cf}"
                );
            }
        }
    }

    #[test]
    fn constant_limit_for_p_two() {
        // leading term of the closed form for p = 2: eta_0 -> -1/2
        let e = eta(2.0, 3.0);
        assert_abs_diff_eq!(e.eta0(400.0).unwrap(), -0.5, epsilon = 1e-3);
    }

    #[test]
    fn derivative_values_and_oddness() {
        let e = eta(2.0, 3.0);
        assert_eq!(e.eta0_prime(0.0).unwrap(), 0.0);
        // oracle: closed-form differentiation at x = 1
        assert_abs_diff_eq!(e.eta0_prime(1.0).unwrap(), -1.35236664162284, epsilon = 1e-8);
        assert_abs_diff_eq!(
            e.eta0_prime(-1.0).unwrap(),
            -e.eta0_prime(1.0).unwrap(),
            epsilon = 0.0
        );
    }

    #[test]
    fn derivative_matches_central_difference() {
        let e = eta(2.2, 3.4);
        let h = 1e-5;
        for x in [0.5, 2.0, 7.0] {
            let fd = (e.eta0(x + h).unwrap() - e.eta0(x - h).unwrap()) / (2.0 * h);
            assert_abs_diff_eq!(e.eta0_prime(x).unwrap(), fd, epsilon = 1e-7);
        }
    }

    #[test]
    fn derivative_growth_bound() {
        // |eta_0'(x)| x^{2/(p-1)-1} stays bounded on [10, 1000]
        let e = eta(2.0, 3.0);
        let expo = 2.0 / (e.params().p() - 1.0) - 1.0;
        let mut sup: f64 = 0.0;
        for i in 0..=20 {
            let x = 10.0 * 100.0f64.powf(i as f64 / 20.0);
            sup = sup.max(e.eta0_prime(x).unwrap().abs() * x.powf(expo));
        }
        assert!(sup < 10.0, "growth bound violated: {sup}");
    }

    #[test]
    fn finite_difference_quotient_converges() {
        let m = ModelParams::new(2.0, 3.0).unwrap();
        let e = eta(2.0, 3.0);
        assert_abs_diff_eq!(eta_fd(0.0, 1e-3, &m).unwrap(), 1.5, epsilon = 5e-3);
        for x in [0.0, 1.0, 5.0] {
            let target = e.eta0(x).unwrap();
            let mut prev = f64::INFINITY;
            for omega in [1e-2, 1e-3, 1e-4] {
                let gap = (eta_fd(x, omega, &m).unwrap() - target).abs();
                assert!(gap < prev, "x = {x}, omega = {omega}: {gap} !< {prev}");
                prev = gap;
            }
        }
    }

    #[test]
    fn linearized_equation_residual() {
        let e = eta(2.0, 3.0);
        let r = e.residual_linearized(0.1, 10.0, 34, 1e-3).unwrap();
        assert!(r < 1e-5, "residual {r}");
        let e2 = eta(2.2, 3.4);
        let r2 = e2.residual_linearized(0.1, 10.0, 34, 1e-3).unwrap();
        assert!(r2 < 1e-4, "residual {r2}");
    }

    #[test]
    fn residual_check_is_not_vacuous() {
        // replacing eta_0 by 0 must leave sup |phi_0| > 1
        let e = eta(2.0, 3.0);
        let phi_at_grid_start = e.profile0().phi(0.1).unwrap();
        assert!(phi_at_grid_start > 1.0);
    }

    #[test]
    fn growth_exponents_and_signs() {
        let (ex, sign) = eta(3.0, 4.0).decay_exponent_eta(100.0).unwrap();
        assert_abs_diff_eq!(ex, 1.0, epsilon = 0.05);
        assert_eq!(sign, -1.0);
        let (ex, sign) = eta(2.0, 3.0).decay_exponent_eta(100.0).unwrap();
        assert!(ex.abs() < 0.05, "exponent {ex}");
        assert_eq!(sign, -1.0);
        let (ex, sign) = eta(1.5, 2.0).decay_exponent_eta(100.0).unwrap();
        assert_abs_diff_eq!(ex, -2.0, epsilon = 0.05);
        assert_eq!(sign, -1.0);
    }

    #[test]
    fn sign_change_in_window_is_rejected() {
        // near the origin eta_0 starts positive and turns negative
        let e = eta(2.0, 3.0);
        let err = e.decay_exponent_eta(0.5).unwrap_err();
        assert!(err.to_string().contains("sign"), "{err}");
    }
}
