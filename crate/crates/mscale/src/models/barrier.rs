//! Geometric Brownian motion killed at two barriers `L < R`.

use crate::averaging::GroupParams;
use crate::diffusion::DiffusionSpec;
use crate::error::{invalid, Result};
use crate::spectral::{EigenSystem, LocalCoeffs, MatrixElements, Source};
use std::f64::consts::{LN_2, PI};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierModel {
    pub rate: f64,
    pub sigma_bar: f64,
    pub lower: f64,
    pub upper: f64,
}

impl BarrierModel {
    pub fn new(rate: f64, sigma_bar: f64, lower: f64, upper: f64) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return invalid(format!("rate {rate} must be nonnegative"));
        }
        if !(sigma_bar > 0.0) || !sigma_bar.is_finite() {
            return invalid(format!("sigma_bar {sigma_bar} must be positive"));
        }
        if !(lower > 0.0 && lower < upper && upper.is_finite()) {
            return invalid(format!("barriers need 0 < L < R, got L={lower}, R={upper}"));
        }
        Ok(Self { rate, sigma_bar, lower, upper })
    }

    fn log_ratio(&self) -> f64 {
        (self.upper / self.lower).ln()
    }

    /// `ν = r/σ̄ − σ̄/2`
    pub fn nu(&self) -> f64 {
        self.rate / self.sigma_bar - 0.5 * self.sigma_bar
    }

    /// `ψₙ(x)` for the label `n ≥ 1`; rejects points off `(L, R)`.
    pub fn eigenfunction(&self, n: usize, x: f64) -> Result<f64> {
        if n == 0 {
            return invalid("barrier eigenfunctions start at n = 1");
        }
        if !(x > self.lower && x < self.upper) {
            return invalid(format!("{x} is outside ({}, {})", self.lower, self.upper));
        }
        Ok(self.psi(n - 1, x))
    }

    /// `cₙ = (ψₙ, (· − K)⁺)` for `n = 1..=count`.
    pub fn call_coefficients(&self, strike: f64, count: usize) -> Result<Vec<f64>> {
        if !(strike > 0.0) || !strike.is_finite() {
            return invalid(format!("strike {strike} must be positive"));
        }
        let s = self.sigma_bar;
        let nu = self.nu();
        let u_up = self.log_ratio() / s;
        // below L the payoff region starts at the barrier
        let u_k = ((strike / self.lower).ln() / s).max(0.0);
        let pre = (self.lower.ln() * nu / s).exp() / self.log_ratio().sqrt();
        let phi = |n: usize, z: f64| {
            let w = n as f64 * PI / u_up;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            2.0 / (w * w + z * z) * ((u_k * z).exp() * (w * (w * u_k).cos() - z * (w * u_k).sin()) - (u_up * z).exp() * sign * w)
        };
        Ok((1..=count)
            .map(|n| if strike >= self.upper { 0.0 } else { pre * (self.lower * phi(n, nu + s) - strike * phi(n, nu)) })
            .collect())
    }
}

impl EigenSystem for BarrierModel {
    fn first_index(&self) -> usize {
        1
    }

    fn sigma_bar(&self) -> f64 {
        self.sigma_bar
    }

    fn fom_bar(&self) -> f64 {
        0.0
    }

    fn lambda(&self, j: usize) -> f64 {
        let n = (j + 1) as f64;
        let nu = self.nu();
        0.5 * (n * PI * self.sigma_bar / self.log_ratio()).powi(2) + 0.5 * nu * nu + self.rate
    }

    fn psi_upto(&self, count: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
        if !(x > self.lower && x < self.upper) {
            return (vec![0.0; count], vec![0.0; count]);
        }
        let lg = self.log_ratio();
        let p = 0.5 - self.rate / (self.sigma_bar * self.sigma_bar);
        let amp = self.sigma_bar / lg.sqrt() * x.powf(p);
        let u = (x / self.lower).ln();
        let mut psi = Vec::with_capacity(count);
        let mut dpsi = Vec::with_capacity(count);
        for j in 0..count {
            let w = (j + 1) as f64 * PI / lg;
            let (sn, cs) = (w * u).sin_cos();
            psi.push(amp * sn);
            dpsi.push(amp / x * (p * sn + w * cs));
        }
        (psi, dpsi)
    }

    fn local(&self, x: f64) -> LocalCoeffs {
        LocalCoeffs { a: x, da: 1.0, b_hat: self.rate * x, db_hat: self.rate, k: self.rate, dk: 0.0 }
    }

    fn log_speed(&self, x: f64) -> f64 {
        let s2 = self.sigma_bar * self.sigma_bar;
        LN_2 - s2.ln() - 2.0 * x.ln() + 2.0 * self.rate / s2 * x.ln()
    }

    fn diffusion(&self) -> DiffusionSpec {
        let (r, s) = (self.rate, self.sigma_bar);
        let me = *self;
        DiffusionSpec::new(move |x| s * x, move |x| r * x, self.lower, self.upper, (self.lower * self.upper).sqrt())
            .expect("barrier interval validated at construction")
            .with_rate(move |_| r)
            .with_log_densities(move |x| -2.0 * r / (s * s) * x.ln(), move |x| me.log_speed(x))
    }

    fn window(&self, _count: usize) -> (f64, f64) {
        (self.lower, self.upper)
    }

    fn with_averages(&self, sigma_bar: f64, fom_bar: f64) -> Result<Self> {
        if fom_bar != 0.0 {
            return invalid("the barrier model has no market price of volatility risk");
        }
        Self::new(self.rate, sigma_bar, self.lower, self.upper)
    }

    fn closed_form_elements(&self, gp: &GroupParams, count: usize) -> Option<Result<MatrixElements>> {
        if gp.u2 != 0.0 || gp.u1 != 0.0 || gp.fom_bar_prime != 0.0 {
            return None;
        }
        Some(Ok(self.elements(gp, count)))
    }
}

impl BarrierModel {
    /// Closed-form `A`, `B`, `B̃`. The diagonal of `A` carries `σ̄²` on every
    /// `n²π²/log²(R/L)`; see the test against quadrature.
    fn elements(&self, gp: &GroupParams, count: usize) -> MatrixElements {
        let mut m = MatrixElements::zeros(count, Source::ClosedForm);
        let (r, s) = (self.rate, self.sigma_bar);
        let (v3, v2, v1, v0, sp) = (gp.v3, gp.v2, gp.v1, gp.v0, gp.sigma_bar_prime);
        let lg = self.log_ratio();
        let (ll, lr) = (self.lower.ln(), self.upper.ln());
        let nu = self.nu();
        let s2 = s * s;
        let s4 = s2 * s2;
        let pi2 = PI * PI;
        for jn in 0..count {
            let n = (jn + 1) as f64;
            for jk in 0..count {
                let k = (jk + 1) as f64;
                if jk == jn {
                    let w2 = n * n * pi2 * s2 / (lg * lg);
                    m.a[(jk, jn)] = -v3 * ((3.0 * w2 * nu - nu.powi(3)) / (s2 * s) - (nu * nu - w2) / s2)
                        - v2 * ((nu * nu - w2) / s2 + nu / s);
                    m.b[(jk, jn)] = v1 * (2.0 * r - s2) / (2.0 * s2) - v0;
                    let l2 = lr * lr - ll * ll;
                    m.bt[(jk, jn)] = -v1 * sp * (1.0 / (2.0 * s) - r * nu * l2 / (s4 * lg))
                        - v0 * sp * (1.0 / s + r * l2 / (s2 * s * lg));
                    continue;
                }
                let parity = if (jk + jn) % 2 == 0 { 1.0 } else { -1.0 };
                let e = parity - 1.0;
                let d = k * k - n * n;
                m.a[(jk, jn)] = -v3
                    * (e * k * n * (4.0 * n * n * pi2 * s4 + (-12.0 * r * r + 4.0 * r * s2 + s4) * lg * lg)
                        / (2.0 * d * s4 * lg.powi(3)))
                    - v2 * (4.0 * e * k * n * r / (d * s2 * lg));
                m.b[(jk, jn)] = v1 * 2.0 * e * k * n / (d * lg);
                let upsilon = 4.0 * k * n * r * (ll - parity * lr) / (d * s2 * s * lg)
                    - 2.0 * e * k * n * (d * pi2 * s4 - 2.0 * r * (-2.0 * r + s2) * lg * lg) / (d * d * pi2 * s4 * s * lg);
                m.bt[(jk, jn)] =
                    -v1 * sp * upsilon - v0 * sp * (8.0 * e * k * n * r * lg / (d * d * pi2 * s2 * s));
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{eigen_residual, first_mismatch, matrix_elements_by_quadrature, payoff_coefficients};
    use approx::assert_relative_eq;

    fn fig1() -> BarrierModel {
        BarrierModel::new(0.05, 0.34, 1.5, 2.5).unwrap()
    }

    #[test]
    fn first_eigenvalue() {
        // ½(π·0.34/log(5/3))² + ½(0.05/0.34 − 0.17)² + 0.05
        assert_relative_eq!(fig1().lambda(0), 2.236_424_618_887_388, max_relative = 1e-12);
    }

    #[test]
    fn vanishes_at_barriers() {
        let m = fig1();
        for j in 0..10 {
            assert!(m.psi(j, 1.5 + 1e-12).abs() < 1e-9);
            assert!(m.psi(j, 2.5 - 1e-12).abs() < 1e-9);
        }
        assert!(m.eigenfunction(1, 1.5).is_err());
        assert!(m.eigenfunction(0, 2.0).is_err());
    }

    #[test]
    fn eigen_residuals() {
        let m = fig1();
        for j in 0..10 {
            for i in 1..10 {
                let x = 1.5 + i as f64 * 0.1;
                assert!(eigen_residual(&m, j, x, 1e-4) < 1e-6, "j={j} x={x}");
            }
        }
    }

    #[test]
    fn call_coefficients_match_quadrature() {
        let m = fig1();
        let c = m.call_coefficients(2.0, 10).unwrap();
        let q = payoff_coefficients(&m, |x| (x - 2.0f64).max(0.0), &[2.0], 10).unwrap();
        for j in 0..10 {
            assert_relative_eq!(c[j], q[j], max_relative = 1e-9, epsilon = 1e-12);
        }
        assert!(m.call_coefficients(2.5, 4).unwrap().iter().all(|&v| v == 0.0));
        // strike below L: payoff is x − K on the whole interval
        let c = m.call_coefficients(1.0, 4).unwrap();
        let q = payoff_coefficients(&m, |x| x - 1.0, &[], 4).unwrap();
        for j in 0..4 {
            assert_relative_eq!(c[j], q[j], max_relative = 1e-9);
        }
    }

    #[test]
    fn closed_form_elements_match_quadrature() {
        let m = fig1();
        let gp = GroupParams { v3: 0.3, v2: 0.7, v1: 1.1, v0: 0.4, sigma_bar: 0.34, sigma_bar_prime: 0.9, ..Default::default() };
        let cf = m.closed_form_elements(&gp, 8).unwrap().unwrap();
        let q = matrix_elements_by_quadrature(&m, &gp, 8).unwrap();
        for (x, y) in [(&cf.a, &q.a), (&cf.b, &q.b), (&cf.bt, &q.bt)] {
            assert_eq!(first_mismatch(x, y, 1e-7, 1e-9), None);
        }
    }

    #[test]
    fn parity_selection_rule() {
        let gp = GroupParams { v3: 1.0, v2: 1.0, v1: 1.0, ..Default::default() };
        let e = fig1().closed_form_elements(&gp, 6).unwrap().unwrap();
        assert_eq!(e.a[(0, 2)], 0.0);
        assert_eq!(e.b[(3, 1)], 0.0);
        assert_ne!(e.a[(0, 1)], 0.0);
    }
}
