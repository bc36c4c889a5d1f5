//! Yields, Black-Scholes implied volatilities and the JDCEV put assembled
//! from its two pieces.

use crate::averaging::GroupParams;
use crate::error::{invalid, Error, Result};
use crate::models::JdcevModel;
use crate::specfun::{norm_cdf, norm_pdf};
use crate::spectral::{
    dz_coefficients, dz_lambda, expand, matrix_elements, EigenSystem, ExpansionData, PriceExpansion, Truncation,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YieldExpansion {
    pub r00: f64,
    pub r10: f64,
    pub r01: f64,
    /// `R₀,₀ + √ε R₁,₀ + √δ R₀,₁`
    pub combined: f64,
}

pub fn yield_expansion(u00: f64, u10: f64, u01: f64, t: f64, epsilon: f64, delta: f64) -> Result<YieldExpansion> {
    if !(t > 0.0) {
        return invalid(format!("yield needs t > 0, got {t}"));
    }
    if !(u00 > 0.0) {
        return Err(Error::UndefinedYield(u00));
    }
    let r00 = -u00.ln() / t;
    let r10 = -u10 / (t * u00);
    let r01 = -u01 / (t * u00);
    Ok(YieldExpansion { r00, r10, r01, combined: r00 + epsilon.sqrt() * r10 + delta.sqrt() * r01 })
}

fn d_plus_minus(t: f64, x: f64, vol: f64, strike: f64, r: f64) -> (f64, f64) {
    let sd = vol * t.sqrt();
    let d1 = ((x / strike).ln() + (r + 0.5 * vol * vol) * t) / sd;
    (d1, d1 - sd)
}

/// Black-Scholes put. Degenerate `t = 0` or `vol = 0` gives the discounted
/// intrinsic value.
pub fn bs_put(t: f64, x: f64, vol: f64, strike: f64, r: f64) -> f64 {
    let disc = strike * (-r * t).exp();
    if t <= 0.0 || vol <= 0.0 {
        return (disc - x).max(0.0);
    }
    let (d1, d2) = d_plus_minus(t, x, vol, strike, r);
    disc * norm_cdf(-d2) - x * norm_cdf(-d1)
}

pub fn bs_call(t: f64, x: f64, vol: f64, strike: f64, r: f64) -> f64 {
    bs_put(t, x, vol, strike, r) + x - strike * (-r * t).exp()
}

pub fn bs_vega(t: f64, x: f64, vol: f64, strike: f64, r: f64) -> f64 {
    let (d1, _) = d_plus_minus(t, x, vol, strike, r);
    x * norm_pdf(d1) * t.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpliedVol {
    pub value: f64,
    pub converged: bool,
    /// `bs_put(value) − price`
    pub residual: f64,
}

const VOL_FLOOR: f64 = 1e-6;
const VOL_CAP: f64 = 5.0;
/// Largest volatility the bracket may grow to for deep default-risk skews.
const VOL_LIMIT: f64 = 1e3;

/// Black-Scholes volatility reproducing a put price: bisection on a
/// bracket, then Newton steps kept inside it.
pub fn implied_vol(price: f64, t: f64, x: f64, strike: f64, r: f64) -> Result<ImpliedVol> {
    if !(t > 0.0 && x > 0.0 && strike > 0.0) {
        return invalid("implied volatility needs t, x, K > 0");
    }
    let disc = strike * (-r * t).exp();
    let (lo_band, hi_band) = ((disc - x).max(0.0), disc);
    if !(price > lo_band && price < hi_band) {
        return Err(Error::NoImpliedVol { price, lo: lo_band, hi: hi_band });
    }
    let f = |v: f64| bs_put(t, x, v, strike, r) - price;
    let (mut lo, mut hi) = (VOL_FLOOR, VOL_CAP);
    while f(hi) < 0.0 {
        if hi >= VOL_LIMIT {
            return Err(Error::NoImpliedVol { price, lo: bs_put(t, x, VOL_FLOOR, strike, r), hi: bs_put(t, x, hi, strike, r) });
        }
        lo = hi;
        hi *= 2.0;
    }
    if f(lo) > 0.0 {
        return Err(Error::NoImpliedVol { price, lo: bs_put(t, x, lo, strike, r), hi: bs_put(t, x, hi, strike, r) });
    }
    let tol = 1e-12;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-4 * hi {
            break;
        }
    }
    let mut v = 0.5 * (lo + hi);
    let mut converged = false;
    for _ in 0..50 {
        let g = f(v);
        if g.abs() <= tol {
            converged = true;
            break;
        }
        if g < 0.0 {
            lo = v;
        } else {
            hi = v;
        }
        let vega = bs_vega(t, x, v, strike, r);
        let step = v - g / vega;
        v = if vega > 0.0 && step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-15 * hi {
            converged = f(v).abs() <= tol;
            break;
        }
    }
    Ok(ImpliedVol { value: v, converged, residual: f(v) })
}

/// Put on a defaultable JDCEV stock, `(K − X)⁺𝕀_{τ>t} + K𝕀_{τ≤t}`, with
/// every correction applied to both pieces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JdcevPut {
    pub put: PriceExpansion,
    /// Expansion of `P(τ > t)`.
    pub survival: PriceExpansion,
    /// Call through put-call parity with `r = 0`.
    pub call: f64,
    pub cutoff: f64,
}

/// Slack allowed on the survival probability before truncation is blamed.
pub const SURVIVAL_SLACK: f64 = 1e-6;

/// Series data for both pieces of the put, sharing one set of matrix
/// elements. Valid for any `(t, x)` up to the survival cutoff.
#[derive(Debug, Clone)]
pub struct JdcevPutData {
    pub strike: f64,
    pub cutoff: f64,
    pub put_piece: ExpansionData,
    pub survival_piece: ExpansionData,
}

impl JdcevPutData {
    /// `cutoff` should come from `survival_cutoff` at the largest `t` and
    /// `x` that will be evaluated.
    pub fn build(model: &JdcevModel, gp: &GroupParams, strike: f64, cutoff: f64, count: usize) -> Result<Self> {
        let put_c = model.put_coefficients(strike, count)?;
        let surv_c = model.survival_coefficients(cutoff, count)?;
        if gp.fast_is_zero() && gp.slow_is_zero() {
            return Ok(Self {
                strike,
                cutoff,
                put_piece: ExpansionData::leading(model, put_c),
                survival_piece: ExpansionData::leading(model, surv_c),
            });
        }
        let elements = matrix_elements(model, gp, count)?;
        let dz_lam = dz_lambda(model, gp, count)?;
        let dz_put = dz_coefficients(model, gp, count, |m| m.put_coefficients(strike, count))?;
        let dz_surv = dz_coefficients(model, gp, count, |m| m.survival_coefficients(cutoff, count))?;
        let lambda = model.lambdas(count);
        Ok(Self {
            strike,
            cutoff,
            put_piece: ExpansionData {
                lambda: lambda.clone(),
                c: put_c,
                dz_c: dz_put,
                dz_lambda: dz_lam.clone(),
                elements: Some(elements.clone()),
            },
            survival_piece: ExpansionData { lambda, c: surv_c, dz_c: dz_surv, dz_lambda: dz_lam, elements: Some(elements) },
        })
    }

    pub fn evaluate(
        &self,
        model: &JdcevModel,
        t: f64,
        x: f64,
        epsilon: f64,
        delta: f64,
        truncation: Truncation,
    ) -> Result<JdcevPut> {
        let k = self.strike;
        let p = expand(model, &self.put_piece, t, x, epsilon, delta, truncation)?;
        let s = expand(model, &self.survival_piece, t, x, epsilon, delta, truncation)?;
        if !(s.u00 >= -SURVIVAL_SLACK && s.u00 <= 1.0 + SURVIVAL_SLACK) {
            return Err(Error::Truncation(format!("survival {} outside [0, 1] after {} terms", s.u00, s.terms)));
        }
        let u00 = p.u00 + k * (1.0 - s.u00);
        let u10 = p.u10 - k * s.u10;
        let u01 = p.u01 - k * s.u01;
        let combined = u00 + epsilon.sqrt() * u10 + delta.sqrt() * u01;
        let put = PriceExpansion {
            u00,
            u10,
            u01,
            combined,
            terms: p.terms.max(s.terms),
            tail_estimate: p.tail_estimate + k * s.tail_estimate,
            converged: p.converged && s.converged,
            warn_small_t: p.warn_small_t,
            epsilon,
            delta,
        };
        Ok(JdcevPut { put, survival: s, call: combined + x - k, cutoff: self.cutoff })
    }
}

/// One-shot put price at `(t, x)`.
#[allow(clippy::too_many_arguments)]
pub fn jdcev_put_assemble(
    model: &JdcevModel,
    gp: &GroupParams,
    t: f64,
    x: f64,
    strike: f64,
    count: usize,
    epsilon: f64,
    delta: f64,
    truncation: Truncation,
) -> Result<JdcevPut> {
    let data = JdcevPutData::build(model, gp, strike, model.survival_cutoff(t, x), count)?;
    data.evaluate(model, t, x, epsilon, delta, truncation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn yield_terms() {
        let y = yield_expansion((-0.05f64 * 2.0).exp(), 0.0, 0.0, 2.0, 0.1, 0.1).unwrap();
        assert_relative_eq!(y.r00, 0.05, max_relative = 1e-14);
        assert_eq!(y.combined, y.r00);
        assert!(matches!(yield_expansion(0.0, 0.0, 0.0, 1.0, 0.0, 0.0), Err(Error::UndefinedYield(_))));
    }

    #[test]
    fn yield_matches_price_to_first_order() {
        let (u00, u10, u01, t) = (0.9, 0.02, -0.01, 1.5);
        for eps in [1e-2, 1e-3, 1e-4] {
            let y = yield_expansion(u00, u10, u01, t, eps, eps).unwrap();
            let lhs = (-y.combined * t).exp();
            let rhs = u00 + eps.sqrt() * (u10 + u01);
            assert!((lhs - rhs).abs() < 0.1 * eps, "eps {eps}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn put_limits() {
        assert_eq!(bs_put(1.0, 60.0, 1e-9, 50.0, 0.0), 0.0);
        assert_eq!(bs_put(0.0, 40.0, 0.3, 50.0, 0.0), 10.0);
        // parity
        let (c, p) = (bs_call(0.7, 48.0, 0.25, 50.0, 0.03), bs_put(0.7, 48.0, 0.25, 50.0, 0.03));
        assert_relative_eq!(c - p, 48.0 - 50.0 * (-0.021f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn implied_vol_round_trip() {
        let p = bs_put(1.0, 50.0, 0.2, 50.0, 0.0);
        let iv = implied_vol(p, 1.0, 50.0, 50.0, 0.0).unwrap();
        assert!(iv.converged);
        assert!((iv.value - 0.2).abs() < 1e-9);
        assert!(iv.residual.abs() < 1e-10);
        assert!(matches!(implied_vol(50.0, 1.0, 50.0, 50.0, 0.0), Err(Error::NoImpliedVol { .. })));
        assert!(matches!(implied_vol(0.0, 1.0, 50.0, 50.0, 0.0), Err(Error::NoImpliedVol { .. })));
    }

    fn fig3() -> JdcevModel {
        JdcevModel::new(0.05, 0.5, -1.0, 10.0).unwrap()
    }

    #[test]
    fn jdcev_put_leading_order_properties() {
        let m = fig3();
        let gp = GroupParams::leading(10.0, 0.0);
        let tr = Truncation::Adaptive { min: 20, tol: 1e-10 };
        // with N ≤ 200 and eigenvalue spacing 0.1 the series resolves t ≳ 1
        let mut prev_surv = 1.0;
        for t in [1.0, 1.5, 2.0, 3.0] {
            let r = jdcev_put_assemble(&m, &gp, t, 50.0, 50.0, 200, 0.0, 0.0, tr).unwrap();
            assert!(r.put.converged);
            assert!(r.survival.u00 <= prev_surv && r.survival.u00 >= 0.0);
            assert_relative_eq!(r.survival.u00, m.survival_closed_form(t, 50.0), max_relative = 1e-8);
            prev_surv = r.survival.u00;
        }
        let mut prev = f64::INFINITY;
        for strike in [30.0, 40.0, 50.0, 60.0, 70.0] {
            let p = jdcev_put_assemble(&m, &gp, 1.0, 50.0, strike, 200, 0.0, 0.0, tr).unwrap().put.u00;
            assert!(p > 0.0);
            if prev.is_finite() {
                assert!(p > prev);
            }
            prev = p;
        }
    }

    #[test]
    fn jdcev_implied_skew_slopes_down() {
        let m = fig3();
        let gp = GroupParams::leading(10.0, 0.0);
        let tr = Truncation::Adaptive { min: 20, tol: 1e-10 };
        let vols: Vec<f64> = [30.0, 40.0, 50.0, 60.0, 70.0]
            .iter()
            .map(|&k| {
                let p = jdcev_put_assemble(&m, &gp, 1.0, 50.0, k, 200, 0.0, 0.0, tr).unwrap().put.u00;
                implied_vol(p, 1.0, 50.0, k, 0.0).unwrap().value
            })
            .collect();
        assert!(vols.windows(2).all(|w| w[1] < w[0]), "{vols:?}");
    }

    #[test]
    fn jdcev_put_small_strike_vanishes() {
        let m = fig3();
        let gp = GroupParams::leading(10.0, 0.0);
        let p = jdcev_put_assemble(&m, &gp, 1.0, 50.0, 1e-3, 200, 0.0, 0.0, Truncation::default()).unwrap();
        assert!(p.put.u00.abs() < 1e-4, "{}", p.put.u00);
    }
}
