//! Special functions used by the closed-form eigen-systems.
//!
//! Polynomials are evaluated by three-term recurrence. Gamma-function
//! ratios go through `log_gamma` so that normalisations stay finite for
//! degrees up to a few hundred.

use crate::error::{invalid, Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};

/// Physicists' Hermite polynomial `H_n(x)`.
pub fn hermite(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[k] = H_k(x) / sqrt(2^k k!)` for `k < out.len()`.
pub fn hermite_normalized_upto(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * x;
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * x * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

/// Generalised Laguerre polynomial `L_n^(nu)(x)`.
pub fn laguerre(n: usize, nu: f64, x: f64) -> Result<f64> {
    if !(nu > -1.0) {
        return invalid(format!("laguerre parameter {nu} must exceed -1"));
    }
    Ok(laguerre_unchecked(n, nu, x))
}

pub(crate) fn laguerre_unchecked(n: usize, nu: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, 1.0 + nu - x);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + nu - x) * cur - (kf + nu) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[k] = sqrt(k! / Gamma(k+nu+1)) L_k^(nu)(x)`.
pub fn laguerre_normalized_upto(nu: f64, x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = (-0.5 * ln_gamma(nu + 1.0)).exp();
    if out.len() > 1 {
        out[1] = (1.0 + nu - x) * out[0] / (1.0 + nu).sqrt();
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = ((2.0 * kf + 1.0 + nu - x) * out[k] - (kf * (kf + nu)).sqrt() * out[k - 1])
            / ((kf + 1.0) * (kf + nu + 1.0)).sqrt();
    }
}

/// `ln Gamma(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return invalid(format!("log_gamma argument {x} must be positive"));
    }
    Ok(ln_gamma(x))
}

pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Rising factorial `(a)_n`.
pub fn pochhammer(a: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |acc, k| acc * (a + k as f64))
}

fn nonpositive_integer(a: f64) -> Option<usize> {
    let r = a.round();
    if r <= 0.0 && (a - r).abs() < 1e-12 {
        Some((-r) as usize)
    } else {
        None
    }
}

/// Neumaier-compensated accumulator.
#[derive(Default, Clone, Copy)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Terminating generalised hypergeometric series `pFq(top; bottom; x)`.
///
/// At least one top parameter must be a nonpositive integer. Terms are
/// carried as (log-magnitude, sign) and summed with compensation.
pub fn hyp_pfq_terminating(top: &[f64], bottom: &[f64], x: f64) -> Result<f64> {
    let last = top
        .iter()
        .filter_map(|&a| nonpositive_integer(a))
        .min()
        .ok_or(Error::NonTerminating)?;
    for &b in bottom {
        if let Some(j) = nonpositive_integer(b) {
            if j < last {
                return Err(Error::BottomPole(b));
            }
        }
    }
    let mut logs = Vec::with_capacity(last + 1);
    let mut signs = Vec::with_capacity(last + 1);
    let (mut lmag, mut sign) = (0.0f64, 1.0f64);
    logs.push(lmag);
    signs.push(sign);
    for k in 0..last {
        let kf = k as f64;
        let mut ratio = x / (kf + 1.0);
        for &a in top {
            ratio *= a + kf;
        }
        for &b in bottom {
            ratio /= b + kf;
        }
        if ratio == 0.0 {
            break;
        }
        lmag += ratio.abs().ln();
        sign *= ratio.signum();
        logs.push(lmag);
        signs.push(sign);
    }
    let lmax = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut acc = KahanSum::default();
    for (l, s) in logs.iter().zip(&signs) {
        acc.add(s * (l - lmax).exp());
    }
    Ok(acc.value() * lmax.exp())
}

/// `int_0^inf y^gamma e^-y L_n^(alpha)(y) L_m^(beta)(y) dy` through the
/// 3F2 product formula, with a direct finite sum where the formula has a
/// removable pole.
pub fn laguerre_product_integral(gamma: f64, n: usize, alpha: f64, m: usize, beta: f64) -> Result<f64> {
    if !(gamma > -1.0) || !(alpha > -1.0) || !(beta > -1.0) {
        return invalid("laguerre_product_integral needs gamma, alpha, beta > -1");
    }
    let lead = pochhammer(alpha - gamma, n);
    let b2 = gamma + 1.0 - alpha - n as f64;
    let regular = lead != 0.0 && nonpositive_integer(b2).map_or(true, |j| j >= m);
    if regular {
        let f = hyp_pfq_terminating(&[gamma + 1.0, -(m as f64), gamma + 1.0 - alpha], &[beta + 1.0, b2], 1.0);
        if let Ok(f) = f {
            let lpre = ln_gamma(beta + 1.0 + m as f64) - ln_gamma(beta + 1.0) + ln_gamma(gamma + 1.0)
                - ln_factorial(n)
                - ln_factorial(m);
            return Ok(lead * lpre.exp() * f);
        }
    }
    let mut acc = KahanSum::default();
    for j in 0..=m {
        let lbin = ln_gamma(m as f64 + beta + 1.0) - ln_gamma(j as f64 + beta + 1.0) - ln_factorial(m - j);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let s = gamma + j as f64;
        let inner = pochhammer(alpha - s, n);
        let l = lbin - ln_factorial(j) + ln_gamma(s + 1.0) - ln_factorial(n);
        acc.add(sign * inner * l.exp());
    }
    Ok(acc.value())
}

/// Generalised Gauss-Laguerre rule for the weight `y^alpha e^-y`.
///
/// Weights are stored as logarithms: for a few hundred nodes the
/// outermost weights underflow while the polynomial values they multiply
/// overflow.
#[derive(Debug, Clone)]
pub struct GaussLaguerre {
    pub alpha: f64,
    pub nodes: Vec<f64>,
    pub log_weights: Vec<f64>,
}

/// `(L_m, L_{m-1})` scaled by `exp(-ln_scale)`.
fn laguerre_pair_scaled(m: usize, alpha: f64, y: f64) -> (f64, f64, f64) {
    let (mut prev, mut cur, mut ln_scale) = (0.0, 1.0, 0.0);
    for k in 0..m {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - y) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        let big = cur.abs().max(prev.abs());
        if big > 1e150 {
            prev /= big;
            cur /= big;
            ln_scale += big.ln();
        }
    }
    (cur, prev, ln_scale)
}

impl GaussLaguerre {
    pub fn new(m: usize, alpha: f64) -> Result<Self> {
        if m == 0 || !(alpha > -1.0) {
            return invalid("Gauss-Laguerre rule needs m >= 1 and alpha > -1");
        }
        // Golub-Welsch for starting values, then Newton on the recurrence.
        let jac = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                2.0 * i as f64 + alpha + 1.0
            } else if i + 1 == j || j + 1 == i {
                let k = i.max(j) as f64;
                (k * (k + alpha)).sqrt()
            } else {
                0.0
            }
        });
        let mut nodes: Vec<f64> = SymmetricEigen::new(jac).eigenvalues.iter().cloned().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mf = m as f64;
        let mut log_weights = Vec::with_capacity(m);
        let lconst = ln_gamma(mf + alpha + 1.0) - ln_factorial(m);
        for y in nodes.iter_mut() {
            for _ in 0..8 {
                let (lm, lm1, _) = laguerre_pair_scaled(m, alpha, *y);
                let d = (mf * lm - (mf + alpha) * lm1) / *y;
                let step = lm / d;
                *y -= step;
                if step.abs() <= 1e-15 * y.abs() {
                    break;
                }
            }
            let (lm, lm1, ls) = laguerre_pair_scaled(m, alpha, *y);
            let d = (mf * lm - (mf + alpha) * lm1) / *y;
            log_weights.push(lconst - y.ln() - 2.0 * (d.abs().ln() + ls));
        }
        Ok(Self { alpha, nodes, log_weights })
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = KahanSum::default();
        for (y, lw) in self.nodes.iter().zip(&self.log_weights) {
            acc.add(lw.exp() * f(*y));
        }
        acc.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn hermite_monomial(n: usize, x: f64) -> f64 {
        // Explicit sum n! sum_m (-1)^m (2x)^(n-2m) / (m! (n-2m)!)
        let mut s = 0.0;
        for m in 0..=n / 2 {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let fact = |k: usize| (1..=k).fold(1.0, |a, b| a * b as f64);
            s += sign * fact(n) / (fact(m) * fact(n - 2 * m)) * (2.0 * x).powi((n - 2 * m) as i32);
        }
        s
    }

    fn laguerre_monomial(n: usize, nu: f64, x: f64) -> f64 {
        let fact = |k: usize| (1..=k).fold(1.0, |a, b| a * b as f64);
        let mut s = 0.0;
        for j in 0..=n {
            // binom(n+nu, n-j) computed as a product
            let mut b = 1.0;
            for i in 0..(n - j) {
                b *= (nu + j as f64 + 1.0 + i as f64) / (i as f64 + 1.0);
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * b * x.powi(j as i32) / fact(j);
        }
        s
    }

    #[test]
    fn hermite_small_degrees() {
        assert_eq!(hermite(0, 3.7), 1.0);
        assert_eq!(hermite(1, 2.0), 4.0);
        let x = 1.3f64;
        let direct = 32.0 * x.powi(5) - 160.0 * x.powi(3) + 120.0 * x;
        assert_relative_eq!(hermite(5, x), direct, max_relative = 1e-13);
    }

    #[test]
    fn recurrences_match_monomial_expansion() {
        for n in 0..=10 {
            for &x in &[-2.1, -0.4, 0.3, 1.7] {
                assert_relative_eq!(hermite(n, x), hermite_monomial(n, x), max_relative = 1e-10, epsilon = 1e-10);
                let l = laguerre(n, 0.505, x.abs()).unwrap();
                assert_relative_eq!(l, laguerre_monomial(n, 0.505, x.abs()), max_relative = 1e-10, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn normalized_recurrences_match_plain() {
        let mut h = vec![0.0; 30];
        hermite_normalized_upto(1.1, &mut h);
        for (k, v) in h.iter().enumerate() {
            let scale = (k as f64 * 2f64.ln() + ln_factorial(k)).exp().sqrt();
            assert_relative_eq!(*v, hermite(k, 1.1) / scale, max_relative = 1e-11, epsilon = 1e-13);
        }
        let mut l = vec![0.0; 30];
        laguerre_normalized_upto(0.7, 2.3, &mut l);
        for (k, v) in l.iter().enumerate() {
            let c = (ln_factorial(k) - ln_gamma(k as f64 + 1.7)).exp().sqrt();
            assert_relative_eq!(*v, c * laguerre(k, 0.7, 2.3).unwrap(), max_relative = 1e-11, epsilon = 1e-13);
        }
    }

    #[test]
    fn laguerre_basics() {
        assert_eq!(laguerre(0, 0.505, 2.3).unwrap(), 1.0);
        assert_relative_eq!(laguerre(1, 0.3, 0.9).unwrap(), 1.0 + 0.3 - 0.9, max_relative = 1e-15);
        assert!(laguerre(2, -1.0, 0.5).is_err());
        let h = 1e-5;
        let fd = (laguerre(4, 0.5, 1.1 + h).unwrap() - laguerre(4, 0.5, 1.1 - h).unwrap()) / (2.0 * h);
        assert!((fd + laguerre(3, 1.5, 1.1).unwrap()).abs() < 1e-7);
    }

    #[test]
    fn scalar_functions() {
        assert_eq!(norm_cdf(0.0), 0.5);
        assert_eq!(erf(0.0), 0.0);
        assert_relative_eq!(log_gamma(5.0).unwrap(), 24f64.ln(), max_relative = 1e-14);
        assert!(log_gamma(0.0).is_err());
        assert!((norm_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
    }

    #[test]
    fn pfq_closed_forms() {
        assert_eq!(hyp_pfq_terminating(&[0.0, 2.5], &[1.5], 3.0).unwrap(), 1.0);
        let (a, b, c, x) = (0.7, 1.9, 2.4, 0.8);
        let v = hyp_pfq_terminating(&[-1.0, a], &[b, c], x).unwrap();
        assert_relative_eq!(v, 1.0 - a * x / (b * c), max_relative = 1e-15);
        // Direct 4-term sum of 3F2(-3, 1.2, 0.4; 2.1, 0.9; 1).
        let mut direct = 0.0;
        let mut term = 1.0;
        for k in 0..4 {
            direct += term;
            let kf = k as f64;
            term *= (-3.0 + kf) * (1.2 + kf) * (0.4 + kf) / ((2.1 + kf) * (0.9 + kf) * (kf + 1.0));
        }
        let v = hyp_pfq_terminating(&[-3.0, 1.2, 0.4], &[2.1, 0.9], 1.0).unwrap();
        assert_relative_eq!(v, direct, max_relative = 1e-14);
        assert_eq!(hyp_pfq_terminating(&[0.5], &[1.0], 1.0), Err(Error::NonTerminating));
        assert!(matches!(hyp_pfq_terminating(&[-3.0], &[-1.0], 1.0), Err(Error::BottomPole(_))));
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn hermite_orthogonality() {
        let pi = std::f64::consts::PI;
        for n in 0..=15 {
            for m in 0..=15 {
                let v = simpson(|x| hermite(n, x) * hermite(m, x) * (-x * x).exp(), -12.0, 12.0, 6000);
                let expect = if n == m { pi.sqrt() * (n as f64 * 2f64.ln() + ln_factorial(n)).exp() } else { 0.0 };
                let scale = (pi.sqrt() * (n as f64 * 2f64.ln() + ln_factorial(n)).exp()
                    * pi.sqrt()
                    * (m as f64 * 2f64.ln() + ln_factorial(m)).exp())
                .sqrt();
                assert!((v - expect).abs() <= 1e-8 * scale, "n={n} m={m} v={v}");
            }
        }
    }

    #[test]
    fn laguerre_orthogonality_via_gauss_rule() {
        let nu = 0.505;
        let rule = GaussLaguerre::new(20, nu).unwrap();
        for n in 0..=15 {
            for m in 0..=15 {
                let v = rule.integrate(|y| laguerre(n, nu, y).unwrap() * laguerre(m, nu, y).unwrap());
                let norm = (ln_gamma(n as f64 + nu + 1.0) - ln_factorial(n)).exp();
                let expect = if n == m { norm } else { 0.0 };
                let scale = (norm * (ln_gamma(m as f64 + nu + 1.0) - ln_factorial(m)).exp()).sqrt();
                assert!((v - expect).abs() <= 1e-8 * scale, "n={n} m={m}");
            }
        }
    }

    #[test]
    fn gauss_laguerre_moments() {
        for &alpha in &[-0.5, 0.0, 0.505, 2.25] {
            let rule = GaussLaguerre::new(40, alpha).unwrap();
            for j in 0..30 {
                let v = rule.integrate(|y| y.powi(j));
                let expect = ln_gamma(alpha + j as f64 + 1.0).exp();
                assert_relative_eq!(v, expect, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn product_integral_matches_gauss_rule() {
        for &(gamma, n, alpha, m, beta) in &[
            (0.8, 3, 0.3, 4, 1.3),
            (1.5, 5, 0.5, 2, 1.5),
            (0.5, 4, 0.5, 4, 0.5),
            (2.0, 6, 0.0, 3, 1.0),
            (0.25, 0, 0.75, 5, 2.0),
        ] {
            let rule = GaussLaguerre::new(30, gamma).unwrap();
            let v = laguerre_product_integral(gamma, n, alpha, m, beta).unwrap();
            let q = rule.integrate(|y| laguerre(n, alpha, y).unwrap() * laguerre(m, beta, y).unwrap());
            assert_relative_eq!(v, q, max_relative = 1e-11, epsilon = 1e-12);
        }
    }
}
