//! Jump-to-default CEV stock with zero interest rate.
//!
//! Everything is computed in the variable `y = A x^{−2η}`, where the
//! eigenfunctions become `√μ A^{ν/2} x e^{−y} ℓ_{n−1}(y)` with `ℓ` the
//! normalized Laguerre polynomials of order `ν`.

use crate::averaging::GroupParams;
use crate::diffusion::quad::Tol;
use crate::diffusion::{DiffusionSpec, EndpointClass};
use crate::error::{invalid, Result};
use crate::specfun::{hyp_pfq_terminating, laguerre_normalized_upto, laguerre_unchecked, ln_factorial, ln_gamma, GaussLaguerre};
use crate::spectral::quadrature::integrate_vector;
use crate::spectral::{EigenSystem, LocalCoeffs, MatrixElements, Source};
use std::f64::consts::LN_2;

/// Past this `y` every eigenfunction is below `e^{−370}`.
const Y_CUTOFF: f64 = 740.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JdcevModel {
    pub mu: f64,
    pub c: f64,
    pub eta: f64,
    pub sigma_bar: f64,
}

/// Behaviour of the origin according to the published regime table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JdcevRegime {
    Natural,
    Exit,
    Regular,
}

impl JdcevRegime {
    pub fn endpoint_class(self) -> EndpointClass {
        match self {
            Self::Natural => EndpointClass::Natural,
            Self::Exit => EndpointClass::Exit,
            Self::Regular => EndpointClass::Regular,
        }
    }
}

impl JdcevModel {
    pub fn new(mu: f64, c: f64, eta: f64, sigma_bar: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return invalid(format!("mu {mu} must be positive"));
        }
        if !(c > 0.0) || !c.is_finite() {
            return invalid(format!("c {c} must be positive"));
        }
        if !(eta < 0.0) || !eta.is_finite() {
            return invalid(format!("eta {eta} must be negative"));
        }
        if !(sigma_bar > 0.0) || !sigma_bar.is_finite() {
            return invalid(format!("sigma_bar {sigma_bar} must be positive"));
        }
        Ok(Self { mu, c, eta, sigma_bar })
    }

    /// `c/σ̄²`
    pub fn c_ratio(&self) -> f64 {
        self.c / (self.sigma_bar * self.sigma_bar)
    }

    /// `−2η`
    fn power(&self) -> f64 {
        -2.0 * self.eta
    }

    /// `A = μ/(σ̄²|η|)`
    pub fn scale(&self) -> f64 {
        self.mu / (self.sigma_bar * self.sigma_bar * self.eta.abs())
    }

    /// `ν = (1 + 2c/σ̄²)/(2|η|)`
    pub fn nu(&self) -> f64 {
        (1.0 + 2.0 * self.c_ratio()) / self.power()
    }

    pub fn regime(&self) -> JdcevRegime {
        let cr = self.c_ratio();
        if cr >= 0.5 {
            JdcevRegime::Natural
        } else if self.eta >= cr - 0.5 {
            JdcevRegime::Exit
        } else {
            JdcevRegime::Regular
        }
    }

    pub fn to_y(&self, x: f64) -> f64 {
        self.scale() * x.powf(self.power())
    }

    pub fn from_y(&self, y: f64) -> f64 {
        (y / self.scale()).powf(1.0 / self.power())
    }

    /// `ln(√μ A^{ν/2})`
    fn ln_prefactor(&self) -> f64 {
        0.5 * self.mu.ln() + 0.5 * self.nu() * self.scale().ln()
    }

    /// `ψₙ(x)` for the label `n ≥ 1`.
    pub fn eigenfunction(&self, n: usize, x: f64) -> Result<f64> {
        if n == 0 {
            return invalid("JDCEV eigenfunctions start at n = 1");
        }
        if !(x > 0.0) {
            return invalid(format!("{x} is not a positive stock price"));
        }
        Ok(self.psi(n - 1, x))
    }

    /// `(ψₙ, (K − ·)⁺)` for `n = 1..=count`, through the terminating `₂F₂`.
    pub fn put_coefficients(&self, strike: f64, count: usize) -> Result<Vec<f64>> {
        if !(strike > 0.0) || !strike.is_finite() {
            return invalid(format!("strike {strike} must be positive"));
        }
        let (nu, a, cr, ae) = (self.nu(), self.scale(), self.c_ratio(), self.eta.abs());
        let z = self.to_y(strike);
        let g = cr / ae;
        let base = (nu / 2.0 + 1.0) * a.ln() + (2.0 * cr + 1.0 - 2.0 * self.eta) * strike.ln()
            - ln_gamma(nu + 1.0)
            - 0.5 * self.mu.ln();
        (1..=count)
            .map(|n| {
                let pre = (base + 0.5 * (ln_gamma(nu + n as f64) - ln_factorial(n - 1))).exp();
                let f = hyp_pfq_terminating(&[1.0 - n as f64, g + 1.0], &[nu + 1.0, g + 2.0], z)?;
                let ratio = (ln_gamma(nu + 1.0) + ln_factorial(n - 1) - ln_gamma(nu + n as f64 + 1.0)).exp();
                Ok(pre * (f / (g + 1.0) - ratio * laguerre_unchecked(n - 1, nu + 1.0, z)))
            })
            .collect()
    }

    /// `ψₙ(x′)𝔪(x′)`, the coefficients of a point mass at `x′`.
    pub fn delta_coefficients(&self, x_prime: f64, count: usize) -> Result<Vec<f64>> {
        if !(x_prime > 0.0) || !x_prime.is_finite() {
            return invalid(format!("point {x_prime} must be positive"));
        }
        // the exponentials of ψ and 𝔪 cancel
        let mut l = vec![0.0; count];
        laguerre_normalized_upto(self.nu(), self.to_y(x_prime), &mut l);
        let s2 = self.sigma_bar * self.sigma_bar;
        let lpre = self.ln_prefactor() + (2.0 / s2).ln() + (2.0 * self.c_ratio() - 1.0 - 2.0 * self.eta) * x_prime.ln();
        Ok(l.iter().map(|v| lpre.exp() * v).collect())
    }

    /// Upper end of the survival window: `P(X_t > x_max)` is of order
    /// `e^{−40}` for a start at `x` and horizons up to `t`.
    pub fn survival_cutoff(&self, t: f64, x: f64) -> f64 {
        let w = (-2.0 * self.mu * self.eta.abs() * t).exp();
        let ymax = ((self.to_y(x).sqrt() + (40.0 * (1.0 - w)).sqrt()) / w.sqrt()).powi(2);
        self.from_y(ymax)
    }

    /// `(ψₙ, 𝕀_{(0, x_max]})` for `n = 1..=count`.
    pub fn survival_coefficients(&self, x_max: f64, count: usize) -> Result<Vec<f64>> {
        if !(x_max > 0.0) || !x_max.is_finite() {
            return invalid(format!("survival cutoff {x_max} must be positive"));
        }
        if count == 0 {
            return Ok(Vec::new());
        }
        let (nu, a, p) = (self.nu(), self.scale(), self.power());
        let q = 1.0 / p;
        let beta = nu - q;
        let ymax = self.to_y(x_max);
        // u = Y s^{1/(β+1)} absorbs the weight u^β
        let gamma = 1.0 / (beta + 1.0);
        let mut l = vec![0.0; count];
        let (v, _) = integrate_vector(
            |s, out: &mut [f64]| {
                laguerre_normalized_upto(nu, ymax * s.powf(gamma), &mut l);
                out.copy_from_slice(&l);
            },
            0.0,
            1.0,
            8,
            &[count],
            Tol { abs: 1e-13, rel: 1e-11, max_intervals: 20_000 },
        )?;
        let s2 = self.sigma_bar * self.sigma_bar;
        let lpre = self.ln_prefactor() + (2.0 * q / s2).ln() - (beta + 1.0) * a.ln() + (beta + 1.0) * ymax.ln()
            - (beta + 1.0).ln();
        Ok(v.iter().map(|i| lpre.exp() * i).collect())
    }

    /// Leading-order survival `Σ Tₙψₙ(x)(ψₙ, 1)` summed in closed form.
    /// Only valid for `c/σ̄² < ½`, where `(ψₙ, 1)` would diverge term by
    /// term but the sum does not.
    pub fn survival_closed_form(&self, t: f64, x: f64) -> f64 {
        let (nu, p) = (self.nu(), self.power());
        let q = 1.0 / p;
        let w = (-2.0 * self.mu * self.eta.abs() * t).exp();
        let yy = self.to_y(x) / (1.0 - w);
        // Kummer: ₁F₁(q; ν+1; −Y) = e^{−Y} ₁F₁(ν+1−q; ν+1; Y)
        let (a1, b1) = (nu + 1.0 - q, nu + 1.0);
        let (mut term, mut sum) = (1.0f64, 1.0f64);
        let mut k = 0.0;
        while term > 1e-17 * sum && k < 10_000.0 {
            term *= (a1 + k) * yy / ((b1 + k) * (k + 1.0));
            sum += term;
            k += 1.0;
        }
        let ln = -self.mu * t + ln_gamma(nu - q + 1.0) - ln_gamma(nu + 1.0) + q * yy.ln() - yy + sum.ln();
        ln.exp()
    }

    /// Normalized Laguerre values with the first `count` derivatives in `y`
    /// up to third order.
    fn laguerre_jet(nu: f64, y: f64, count: usize) -> Vec<[f64; 4]> {
        let mut l = vec![0.0; count];
        laguerre_normalized_upto(nu, y, &mut l);
        (0..count)
            .map(|n| {
                let nf = n as f64;
                let lower = if n == 0 { 0.0 } else { (nf * (nf + nu)).sqrt() * l[n - 1] };
                let p0 = l[n];
                let p1 = (nf * p0 - lower) / y;
                let p2 = ((y - nu - 1.0) * p1 - nf * p0) / y;
                let p3 = ((y - nu - 2.0) * p2 + (1.0 - nf) * p1) / y;
                [p0, p1, p2, p3]
            })
            .collect()
    }

    /// `ψ_j/(√μA^{ν/2} x e^{−y})` for a reparametrized model, with its `y`
    /// derivative, written in this model's `y`.
    fn reduced_shifted(&self, other: &Self, y: f64, count: usize) -> Vec<(f64, f64)> {
        let rho = other.scale() / self.scale();
        let yh = rho * y;
        let jet = Self::laguerre_jet(other.nu(), yh, count);
        let amp = (other.ln_prefactor() - self.ln_prefactor() + y - yh).exp();
        jet.iter().map(|j| (amp * j[0], amp * ((1.0 - rho) * j[0] + rho * j[1]))).collect()
    }

    /// `A` and `B` by Gauss-Laguerre rules exact for the polynomial parts;
    /// `B̃` by the same rules applied to a finite difference in `σ̄`.
    fn elements(&self, gp: &GroupParams, count: usize) -> Result<MatrixElements> {
        if gp.fom_bar_prime != 0.0 {
            return invalid("the JDCEV model has no market price of volatility risk");
        }
        let (nu, a, p, eta) = (self.nu(), self.scale(), self.power(), self.eta);
        let mut out = MatrixElements::zeros(count, Source::ClosedForm);
        out.bt_source = Source::Quadrature;
        let nodes = count + 8;
        let want_bt = gp.sigma_bar_prime != 0.0 && (gp.v1 != 0.0 || gp.v0 != 0.0);
        let shifted = if want_bt {
            // five-point stencil [+h, -h, +2h, -2h]
            let h = 1e-4 * self.sigma_bar;
            let at = |d: f64| self.with_averages(self.sigma_bar + d, 0.0);
            Some(([at(h)?, at(-h)?, at(2.0 * h)?, at(-2.0 * h)?], gp.sigma_bar_prime / (12.0 * h)))
        } else {
            None
        };
        // the three weights y^ν, y^{ν−½}, y^{ν−1}
        for (rule_index, shift) in [0.0, 0.5, 1.0].into_iter().enumerate() {
            if rule_index == 2 && gp.u2 == 0.0 {
                continue;
            }
            let rule = GaussLaguerre::new(nodes, nu - shift)?;
            let mut op_a = vec![0.0; count];
            let mut op_b = vec![0.0; count];
            let mut op_bt = vec![0.0; count];
            for (&y, &lw) in rule.nodes.iter().zip(&rule.log_weights) {
                let sw = (0.5 * lw).exp();
                let jet = Self::laguerre_jet(nu, y, count);
                for (n, j) in jet.iter().enumerate() {
                    let [p0, p1, p2, p3] = *j;
                    let r0 = p0 + p * y * (p1 - p0);
                    let r1 = p1 + p * (p1 - p0) + p * y * (p2 - p1);
                    let r2 = p2 + 2.0 * p * (p2 - p1) + p * y * (p3 - p2);
                    match rule_index {
                        0 => {
                            op_a[n] = -gp.v2 * a * p * (r1 - r0);
                            op_b[n] = -gp.v0 * p0;
                        }
                        1 => {
                            let w = (2.0 * eta + 1.0) * p * (r1 - r0)
                                + p * (p * (r1 - r0) + p * y * (r2 - r1) - p * y * (r1 - r0));
                            op_a[n] = -(gp.v3 * a * w + gp.u1 * r0) * a.sqrt();
                            op_b[n] = -gp.v1 * a.sqrt() * r0;
                        }
                        _ => {
                            op_a[n] = -gp.u2 * a * ((eta + 1.0) * r0 + p * y * (r1 - r0));
                            op_b[n] = 0.0;
                        }
                    }
                    op_a[n] *= sw;
                    op_b[n] *= sw;
                }
                if let Some((stencil, scale)) = &shifted {
                    if rule_index < 2 {
                        let [p1, m1, p2, m2] = stencil.each_ref().map(|e| self.reduced_shifted(e, y, count));
                        for n in 0..count {
                            let q0 = scale * (8.0 * (p1[n].0 - m1[n].0) - (p2[n].0 - m2[n].0));
                            let q1 = scale * (8.0 * (p1[n].1 - m1[n].1) - (p2[n].1 - m2[n].1));
                            op_bt[n] = sw
                                * if rule_index == 0 {
                                    -gp.v0 * q0
                                } else {
                                    -gp.v1 * a.sqrt() * (q0 + p * y * (q1 - q0))
                                };
                        }
                    }
                }
                for n in 0..count {
                    for (k, jk) in jet.iter().enumerate() {
                        let lk = sw * jk[0];
                        out.a[(k, n)] += lk * op_a[n];
                        out.b[(k, n)] += lk * op_b[n];
                        out.bt[(k, n)] += lk * op_bt[n];
                    }
                }
            }
        }
        Ok(out)
    }
}

impl EigenSystem for JdcevModel {
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
        2.0 * self.mu * self.eta.abs() * ((j + 1) as f64 + self.nu())
    }

    fn psi_upto(&self, count: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
        let y = self.to_y(x);
        if !(x > 0.0) || !(y < Y_CUTOFF) {
            return (vec![0.0; count], vec![0.0; count]);
        }
        let (nu, p) = (self.nu(), self.power());
        let mut l = vec![0.0; count];
        laguerre_normalized_upto(nu, y, &mut l);
        let pre = (self.ln_prefactor() - y).exp();
        let psi = l.iter().map(|v| pre * x * v).collect();
        let dpsi = (0..count)
            .map(|k| {
                let kf = k as f64;
                let lower = if k == 0 { 0.0 } else { (kf * (kf + nu)).sqrt() * l[k - 1] };
                pre * (l[k] * (1.0 - p * y) + p * (kf * l[k] - lower))
            })
            .collect();
        (psi, dpsi)
    }

    fn local(&self, x: f64) -> LocalCoeffs {
        let (mu, c, eta) = (self.mu, self.c, self.eta);
        let x2e = x.powf(2.0 * eta);
        LocalCoeffs {
            a: x.powf(eta + 1.0),
            da: (eta + 1.0) * x.powf(eta),
            b_hat: mu * x + c * x2e * x,
            db_hat: mu + c * (2.0 * eta + 1.0) * x2e,
            k: mu + c * x2e,
            dk: 2.0 * eta * c * x2e / x,
        }
    }

    fn log_speed(&self, x: f64) -> f64 {
        let s2 = self.sigma_bar * self.sigma_bar;
        LN_2 - s2.ln() + (2.0 * self.c_ratio() - 2.0 - 2.0 * self.eta) * x.ln() + self.to_y(x)
    }

    fn diffusion(&self) -> DiffusionSpec {
        let me = *self;
        let (mu, c, eta, s) = (self.mu, self.c, self.eta, self.sigma_bar);
        let x0 = self.from_y(1.0);
        DiffusionSpec::new(move |x| s * x.powf(eta + 1.0), move |x| mu * x + c * x.powf(2.0 * eta + 1.0), 0.0, f64::INFINITY, x0)
            .expect("the positive half-line is a valid interval")
            .with_hazard(move |x| mu + c * x.powf(2.0 * eta))
            .with_length_scale(x0)
            .with_log_densities(move |x| -2.0 * me.c_ratio() * x.ln() - me.to_y(x), move |x| me.log_speed(x))
    }

    fn window(&self, count: usize) -> (f64, f64) {
        let n = count as f64;
        let ymax = (4.0 * n + 2.0 * self.nu() + 60.0 + 10.0 * n.sqrt()).min(0.9 * Y_CUTOFF);
        (0.0, self.from_y(ymax))
    }

    fn with_averages(&self, sigma_bar: f64, fom_bar: f64) -> Result<Self> {
        if fom_bar != 0.0 {
            return invalid("the JDCEV model has no market price of volatility risk");
        }
        Self::new(self.mu, self.c, self.eta, sigma_bar)
    }

    fn closed_form_elements(&self, gp: &GroupParams, count: usize) -> Option<Result<MatrixElements>> {
        Some(self.elements(gp, count))
    }
}
