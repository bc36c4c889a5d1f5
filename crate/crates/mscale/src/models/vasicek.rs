//! Ornstein-Uhlenbeck short rate discounted at its own level.

use crate::averaging::GroupParams;
use crate::diffusion::DiffusionSpec;
use crate::error::{invalid, Result};
use crate::specfun::{hermite_normalized_upto, ln_factorial};
use crate::spectral::{EigenSystem, LocalCoeffs, MatrixElements, Source};
use std::f64::consts::{LN_2, PI};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VasicekModel {
    pub kappa: f64,
    pub theta: f64,
    pub sigma_bar: f64,
    pub fom_bar: f64,
}

impl VasicekModel {
    pub fn new(kappa: f64, theta: f64, sigma_bar: f64, fom_bar: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return invalid(format!("kappa {kappa} must be positive"));
        }
        if !(sigma_bar > 0.0) || !sigma_bar.is_finite() {
            return invalid(format!("sigma_bar {sigma_bar} must be positive"));
        }
        if !theta.is_finite() || !fom_bar.is_finite() {
            return invalid("theta and fom_bar must be finite");
        }
        Ok(Self { kappa, theta, sigma_bar, fom_bar })
    }

    /// `θ̄ = θ − f̄Ω/κ`
    pub fn theta_bar(&self) -> f64 {
        self.theta - self.fom_bar / self.kappa
    }

    /// `A = σ̄/κ^{3/2}`
    pub fn shift(&self) -> f64 {
        self.sigma_bar / self.kappa.powf(1.5)
    }

    fn xi(&self, x: f64) -> f64 {
        self.kappa.sqrt() / self.sigma_bar * (x - self.theta_bar())
    }

    /// `ln 𝒩ₙ`
    fn ln_norm(&self, n: usize) -> f64 {
        0.5 * (0.5 * (self.kappa / PI).ln() + self.sigma_bar.ln() - (n + 1) as f64 * LN_2 - ln_factorial(n))
    }

    /// `cₙ = (ψₙ, 1)`, the zero-coupon bond.
    pub fn bond_coefficients(&self, count: usize) -> Vec<f64> {
        let a = self.shift();
        let base = (2.0 / self.sigma_bar).ln() + 0.5 * (PI / self.kappa).ln() - 0.25 * a * a;
        (0..count).map(|n| (base + self.ln_norm(n) + n as f64 * a.ln()).exp()).collect()
    }

    /// Affine bond price for the short rate `dX = κ(θ̄ − X)dt + σ̄dW`.
    pub fn affine_bond_price(&self, t: f64, x: f64) -> f64 {
        let (k, s) = (self.kappa, self.sigma_bar);
        let b = -(-k * t).exp_m1() / k;
        let ln_a = (self.theta_bar() - s * s / (2.0 * k * k)) * (b - t) - s * s * b * b / (4.0 * k);
        (ln_a - b * x).exp()
    }

    /// `n!𝒩ₙ / ((n−m)!𝒩_{n−m})`
    fn ladder(n: usize, m: usize) -> f64 {
        (0.5 * (ln_factorial(n) - ln_factorial(n - m)) - 0.5 * m as f64 * LN_2).exp()
    }

    fn elements(&self, gp: &GroupParams, count: usize) -> MatrixElements {
        let mut out = MatrixElements::zeros(count, Source::ClosedForm);
        let (k, s) = (self.kappa, self.sigma_bar);
        let q = 2.0 * k.sqrt() / s;
        let inv = -1.0 / k;
        let binom = |n: usize, m: usize| -> f64 {
            match (n, m) {
                (_, 0) => 1.0,
                (2, 1) => 2.0,
                (2, 2) | (3, 3) => 1.0,
                (3, 1) | (3, 2) => 3.0,
                _ => unreachable!(),
            }
        };
        for n in 0..count {
            let e = 1.0 / (2.0 * s) - s / k.powi(3) - n as f64 / s;
            for m in 0..=n.min(3) {
                let kk = n - m;
                let lad = Self::ladder(n, m);
                let mut a = -gp.v3 * binom(3, m) * inv.powi(3 - m as i32) * q.powi(m as i32) * lad;
                if m <= 2 {
                    a -= (gp.v2 + gp.u2) * binom(2, m) * inv.powi(2 - m as i32) * q.powi(m as i32) * lad;
                }
                let (sp, fp) = (gp.sigma_bar_prime, gp.fom_bar_prime);
                let (b, bt) = match m {
                    0 => {
                        a -= gp.u1 * inv;
                        let bt = -gp.v1 * sp * inv * e - gp.v0 * sp * e - gp.v1 * fp / k.powi(3) + gp.v0 * fp / (k * k);
                        (-gp.v1 * inv - gp.v0, bt)
                    }
                    1 => {
                        a -= gp.u1 * q * lad;
                        let bt = -gp.v1 * sp * (inv * 4.0 / k.powf(1.5) + q * e) * lad
                            - gp.v0 * sp * 4.0 / k.powf(1.5) * lad
                            - gp.v1 * fp * (-4.0 / (s * k.powf(1.5))) * lad
                            - gp.v0 * fp * 2.0 / (s * k.sqrt()) * lad;
                        (-gp.v1 * q * lad, bt)
                    }
                    2 => {
                        let bt = -gp.v1 * sp * (inv * (-2.0 / s) + q * 4.0 / k.powf(1.5)) * lad
                            - gp.v0 * sp * (-2.0 / s) * lad
                            - gp.v1 * fp * 4.0 / (s * s) * lad;
                        (0.0, bt)
                    }
                    _ => (0.0, -gp.v1 * sp * q * (-2.0 / s) * lad),
                };
                out.a[(kk, n)] = a;
                out.b[(kk, n)] = b;
                out.bt[(kk, n)] = bt;
            }
        }
        out
    }
}

impl EigenSystem for VasicekModel {
    fn first_index(&self) -> usize {
        0
    }

    fn sigma_bar(&self) -> f64 {
        self.sigma_bar
    }

    fn fom_bar(&self) -> f64 {
        self.fom_bar
    }

    fn lambda(&self, j: usize) -> f64 {
        self.theta_bar() - self.sigma_bar * self.sigma_bar / (2.0 * self.kappa * self.kappa) + self.kappa * j as f64
    }

    fn psi_upto(&self, count: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
        let a = self.shift();
        let xi = self.xi(x);
        let mut h = vec![0.0; count];
        hermite_normalized_upto(xi + a, &mut h);
        // 𝒩ₙ Hₙ = √(σ̄√κ / (2√π)) Hₙ/√(2ⁿn!)
        let pre = (self.sigma_bar * self.kappa.sqrt() / (2.0 * PI.sqrt())).sqrt() * (-a * xi - 0.5 * a * a).exp();
        let dxi = self.kappa.sqrt() / self.sigma_bar;
        let psi: Vec<f64> = h.iter().map(|v| pre * v).collect();
        let dpsi = (0..count)
            .map(|n| {
                let lower = if n == 0 { 0.0 } else { (2.0 * n as f64).sqrt() * h[n - 1] };
                pre * dxi * (lower - a * h[n])
            })
            .collect();
        (psi, dpsi)
    }

    fn local(&self, x: f64) -> LocalCoeffs {
        LocalCoeffs {
            a: 1.0,
            da: 0.0,
            b_hat: self.kappa * (self.theta_bar() - x),
            db_hat: -self.kappa,
            k: x,
            dk: 1.0,
        }
    }

    fn log_speed(&self, x: f64) -> f64 {
        let s2 = self.sigma_bar * self.sigma_bar;
        LN_2 - s2.ln() - self.kappa * (self.theta_bar() - x).powi(2) / s2
    }

    fn diffusion(&self) -> DiffusionSpec {
        let (k, tb, s) = (self.kappa, self.theta_bar(), self.sigma_bar);
        let me = *self;
        DiffusionSpec::new(move |_| s, move |x| k * (tb - x), f64::NEG_INFINITY, f64::INFINITY, tb)
            .expect("the real line is a valid interval")
            .with_rate(|x| x)
            .with_length_scale(s / k.sqrt())
            .with_log_densities(move |x| k * (tb - x).powi(2) / (s * s), move |x| me.log_speed(x))
    }

    fn window(&self, count: usize) -> (f64, f64) {
        let len = self.sigma_bar / self.kappa.sqrt();
        let center = self.theta_bar() - self.shift() * len;
        let half = len * ((2.0 * count as f64 + 1.0).sqrt() + 9.0);
        (center - half, center + half)
    }

    fn with_averages(&self, sigma_bar: f64, fom_bar: f64) -> Result<Self> {
        Self::new(self.kappa, self.theta, sigma_bar, fom_bar)
    }

    fn closed_form_elements(&self, gp: &GroupParams, count: usize) -> Option<Result<MatrixElements>> {
        Some(Ok(self.elements(gp, count)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{eigen_residual, first_mismatch, matrix_elements_by_quadrature, payoff_coefficients};
    use approx::assert_relative_eq;

    fn fig2() -> VasicekModel {
        // σ̄ and f̄Ω of the fast-factor preset, κ = 1
        VasicekModel::new(1.0, 0.05, 0.054_365_636_569_180_9, 0.005_436_563_656_918_09).unwrap()
    }

    #[test]
    fn ground_eigenvalue() {
        let m = VasicekModel::new(1.0, 0.05, 0.02, 0.0).unwrap();
        assert_relative_eq!(m.lambda(0), 0.0498, max_relative = 1e-14);
        assert_relative_eq!(m.lambda(3) - m.lambda(2), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn eigen_residuals() {
        let m = fig2();
        let (lo, hi) = m.window(10);
        for j in 0..10 {
            for i in 1..20 {
                let x = lo + (hi - lo) * i as f64 / 20.0;
                assert!(eigen_residual(&m, j, x, 1e-3 * m.sigma_bar) < 1e-6, "j={j} x={x}");
            }
        }
    }

    #[test]
    fn bond_coefficients_match_quadrature() {
        let m = fig2();
        let c = m.bond_coefficients(12);
        let q = payoff_coefficients(&m, |_| 1.0, &[], 12).unwrap();
        for j in 0..12 {
            assert_relative_eq!(c[j], q[j], max_relative = 1e-8, epsilon = 1e-12);
        }
    }

    #[test]
    fn closed_form_elements_match_quadrature() {
        let m = fig2();
        let gp = GroupParams {
            v3: 0.3,
            v2: 0.5,
            u2: 0.2,
            u1: 0.9,
            v1: 1.3,
            v0: 0.6,
            sigma_bar_prime: 0.7,
            fom_bar_prime: 0.3,
            ..Default::default()
        };
        let cf = m.closed_form_elements(&gp, 8).unwrap().unwrap();
        let q = matrix_elements_by_quadrature(&m, &gp, 8).unwrap();
        for (x, y) in [(&cf.a, &q.a), (&cf.b, &q.b), (&cf.bt, &q.bt)] {
            assert_eq!(first_mismatch(x, y, 1e-7, 1e-9), None);
        }
        // Hermite ladder: A is upper triangular with bandwidth 3
        assert_eq!(cf.a[(1, 5)], 0.0);
        assert_eq!(cf.a[(4, 2)], 0.0);
    }
}
