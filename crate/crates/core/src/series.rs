//! Stable evaluation of the model's power-sum functions near the zero point.
//!
//! Every scalar function used by the quadrature representations has the form
//! c_1 s^{alpha_1} + c_2 s^{alpha_2} (+ omega s). Direct evaluation of
//! differences like W(a(1-u^2)) or K(a) - K(a s) loses all significant digits
//! as s -> 1 because W(a) = 0 there; a short Taylor expansion around s = a
//! restores full relative accuracy for the de-singularized integrands.

/// A function of the form `linear * s + sum_i coef_i * s^{expo_i}`.
#[derive(Debug, Clone, Copy)]
pub struct PowerFn {
    pub linear: f64,
    pub terms: [(f64, f64); 2],
}

impl PowerFn {
    /// W(s; omega) = omega s + 2/(p+1) s^{(p+1)/2} - 2/(q+1) s^{(q+1)/2}.
    pub fn w(p: f64, q: f64, omega: f64) -> Self {
        Self {
            linear: omega,
            terms: [
                (2.0 / (p + 1.0), 0.5 * (p + 1.0)),
                (-2.0 / (q + 1.0), 0.5 * (q + 1.0)),
            ],
        }
    }

    /// W_s(s; omega) = omega + s^{(p-1)/2} - s^{(q-1)/2} (constant part in `linear`
    /// is handled by the caller; here it only matters for differences, where it drops).
    pub fn w_s(p: f64, q: f64) -> Self {
        Self {
            linear: 0.0,
            terms: [(1.0, 0.5 * (p - 1.0)), (-1.0, 0.5 * (q - 1.0))],
        }
    }

    /// J(s) = -2/(p+1) s^{(p-1)/2} + 2/(q+1) s^{(q-1)/2}.
    pub fn j(p: f64, q: f64) -> Self {
        Self {
            linear: 0.0,
            terms: [
                (-2.0 / (p + 1.0), 0.5 * (p - 1.0)),
                (2.0 / (q + 1.0), 0.5 * (q - 1.0)),
            ],
        }
    }

    /// K(s) = -(5-p)/(p+1) s^{(p-1)/2} + (5-q)/(q+1) s^{(q-1)/2}.
    pub fn k(p: f64, q: f64) -> Self {
        Self {
            linear: 0.0,
            terms: [
                (-(5.0 - p) / (p + 1.0), 0.5 * (p - 1.0)),
                ((5.0 - q) / (q + 1.0), 0.5 * (q - 1.0)),
            ],
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.linear * s + self.terms[0].0 * s.powf(self.terms[0].1)
            + self.terms[1].0 * s.powf(self.terms[1].1)
    }

    /// k-th derivative at s.
    pub fn deriv(&self, s: f64, k: u32) -> f64 {
        let mut total = if k == 1 { self.linear } else { 0.0 };
        for &(c, alpha) in &self.terms {
            let mut fall = 1.0;
            for j in 0..k {
                fall *= alpha - j as f64;
            }
            total += c * fall * s.powf(alpha - k as f64);
        }
        total
    }

    /// f(a) - f(a - d), accurate for |d| << a, via a fourth-order expansion.
    pub fn diff_near(&self, a: f64, d: f64) -> f64 {
        let d1 = self.deriv(a, 1);
        let d2 = self.deriv(a, 2);
        let d3 = self.deriv(a, 3);
        let d4 = self.deriv(a, 4);
        (((-d4 / 24.0 * d + d3 / 6.0) * d - d2 / 2.0) * d + d1) * d
    }

    /// Relative distance below which `diff_near` carries full accuracy.
    pub fn near_threshold(a: f64) -> f64 {
        1e-4 * a
    }

    /// f(a) - f(a - d), switching between direct evaluation and the expansion.
    pub fn diff(&self, a: f64, d: f64) -> f64 {
        if d.abs() <= Self::near_threshold(a) {
            self.diff_near(a, d)
        } else {
            self.eval(a) - self.eval(a - d)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expansion_matches_direct_at_moderate_distance() {
        let w = PowerFn::w(2.0, 3.5, 0.1);
        let a = 1.9;
        for d in [1e-4, 5e-4, 1e-3] {
            let direct = w.eval(a) - w.eval(a - d);
            let series = w.diff_near(a, d);
            assert!(
                ((direct - series) / direct).abs() < 1e-10,
                "d = {d}: {direct} vs {series}"
            );
        }
    }

    #[test]
    fn derivative_against_finite_difference() {
        let j = PowerFn::j(2.2, 3.1);
        let h = 1e-6;
        let fd = (j.eval(1.5 + h) - j.eval(1.5 - h)) / (2.0 * h);
        assert!((j.deriv(1.5, 1) - fd).abs() < 1e-9);
    }
}
