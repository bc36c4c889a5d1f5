//! One-dimensional diffusion generators `½a²∂xx + b∂x − k`, their scale and
//! speed densities, boundary classification and weighted inner products.

pub mod boundary;
pub mod quad;

use crate::error::{invalid, Result};
use quad::{integrate, Quad, Tol};
use std::fmt;
use std::sync::Arc;

pub use boundary::{classify_boundaries, BoundaryCondition, BoundaryReport, EndpointClass, EndpointReport};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Behavior imposed at an endpoint that classifies as regular.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegularBehavior {
    #[default]
    Killing,
    Reflecting,
}

#[derive(Clone)]
pub struct DiffusionSpec {
    pub a: RealFn,
    pub b: RealFn,
    pub r: RealFn,
    pub h: RealFn,
    pub lower: f64,
    pub upper: f64,
    pub x0: f64,
    pub lower_regular: RegularBehavior,
    pub upper_regular: RegularBehavior,
    /// Typical length used to step toward infinite endpoints.
    pub length_scale: Option<f64>,
    log_scale: Option<RealFn>,
    log_speed: Option<RealFn>,
    pub tol: Tol,
}

impl fmt::Debug for DiffusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("interval", &(self.lower, self.upper))
            .field("x0", &self.x0)
            .field("closed_form_densities", &(self.log_scale.is_some(), self.log_speed.is_some()))
            .finish()
    }
}

fn zero() -> RealFn {
    Arc::new(|_| 0.0)
}

impl DiffusionSpec {
    /// Generator with zero killing on `(lower, upper)`.
    pub fn new(
        a: impl Fn(f64) -> f64 + Send + Sync + 'static,
        b: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lower: f64,
        upper: f64,
        x0: f64,
    ) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return invalid(format!("interval ({lower}, {upper}) is empty"));
        }
        if !(x0 > lower && x0 < upper) || !x0.is_finite() {
            return invalid(format!("reference point {x0} is not interior to ({lower}, {upper})"));
        }
        Ok(Self {
            a: Arc::new(a),
            b: Arc::new(b),
            r: zero(),
            h: zero(),
            lower,
            upper,
            x0,
            lower_regular: RegularBehavior::Killing,
            upper_regular: RegularBehavior::Killing,
            length_scale: None,
            log_scale: None,
            log_speed: None,
            tol: Tol::default(),
        })
    }

    pub fn with_rate(mut self, r: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.r = Arc::new(r);
        self
    }

    pub fn with_hazard(mut self, h: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.h = Arc::new(h);
        self
    }

    pub fn with_regular_behavior(mut self, lower: RegularBehavior, upper: RegularBehavior) -> Self {
        self.lower_regular = lower;
        self.upper_regular = upper;
        self
    }

    pub fn with_length_scale(mut self, len: f64) -> Self {
        self.length_scale = Some(len);
        self
    }

    pub fn with_reference(mut self, x0: f64) -> Result<Self> {
        if !(x0 > self.lower && x0 < self.upper) || !x0.is_finite() {
            return invalid(format!("reference point {x0} is not interior"));
        }
        self.x0 = x0;
        Ok(self)
    }

    /// Registers closed forms for `log 𝔰` and `log 𝔪`. They may use any
    /// normalization, but must satisfy `𝔰 𝔪 a² / 2 = 1`.
    pub fn with_log_densities(
        mut self,
        log_scale: impl Fn(f64) -> f64 + Send + Sync + 'static,
        log_speed: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.log_scale = Some(Arc::new(log_scale));
        self.log_speed = Some(Arc::new(log_speed));
        self
    }

    pub fn without_killing(&self) -> Self {
        let mut s = self.clone();
        s.r = zero();
        s.h = zero();
        s
    }

    pub fn has_closed_form_densities(&self) -> bool {
        self.log_scale.is_some()
    }

    pub fn killing(&self, x: f64) -> f64 {
        (self.r)(x) + (self.h)(x)
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }

    fn drift_integral(&self, x: f64) -> Result<f64> {
        let (a, b) = (self.a.clone(), self.b.clone());
        let q = integrate(
            move |y| {
                let ay = a(y);
                2.0 * b(y) / (ay * ay)
            },
            self.x0,
            x,
            self.tol,
        )?;
        Ok(q.value)
    }

    pub fn log_scale_density(&self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            return invalid(format!("{x} is outside ({}, {})", self.lower, self.upper));
        }
        match &self.log_scale {
            Some(f) => Ok(f(x)),
            None => Ok(-self.drift_integral(x)?),
        }
    }

    pub fn log_speed_density(&self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            return invalid(format!("{x} is outside ({}, {})", self.lower, self.upper));
        }
        match &self.log_speed {
            Some(f) => Ok(f(x)),
            None => {
                let a = (self.a)(x);
                Ok(std::f64::consts::LN_2 - 2.0 * a.abs().ln() + self.drift_integral(x)?)
            }
        }
    }

    pub fn scale_density(&self, x: f64) -> Result<f64> {
        Ok(self.log_scale_density(x)?.exp())
    }

    pub fn speed_density(&self, x: f64) -> Result<f64> {
        Ok(self.log_speed_density(x)?.exp())
    }

    /// `∫ f g 𝔪 dx` over `window`, which may have infinite ends.
    pub fn weighted_inner_product(
        &self,
        f: impl Fn(f64) -> f64,
        g: impl Fn(f64) -> f64,
        window: (f64, f64),
    ) -> Result<Quad> {
        let (lo, hi) = (window.0.max(self.lower), window.1.min(self.upper));
        if lo >= hi {
            return invalid(format!("window ({}, {}) misses the state space", window.0, window.1));
        }
        let failure = std::cell::RefCell::new(None);
        let q = integrate(
            |x| {
                if !self.contains(x) {
                    return 0.0;
                }
                let fg = f(x) * g(x);
                if fg == 0.0 {
                    return 0.0;
                }
                match self.log_speed_density(x) {
                    // 𝔪 underflows in the far tails where f g may overflow.
                    Ok(lm) if lm.exp() == 0.0 => 0.0,
                    Ok(lm) => fg * lm.exp(),
                    Err(e) => {
                        *failure.borrow_mut() = Some(e);
                        0.0
                    }
                }
            },
            lo,
            hi,
            self.tol,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_drift_has_unit_scale() {
        let s = DiffusionSpec::new(|_| 1.3, |_| 0.0, -1.0, 1.0, 0.2).unwrap();
        assert_relative_eq!(s.scale_density(0.7).unwrap(), 1.0, max_relative = 1e-15);
        let s = DiffusionSpec::new(|_| 2f64.sqrt(), |_| 0.0, -1.0, 1.0, 0.2).unwrap();
        assert_relative_eq!(s.speed_density(-0.4).unwrap(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn gbm_scale_density() {
        let (r, sig, x0) = (0.05, 0.34, 2.0);
        let s = DiffusionSpec::new(move |x| sig * x, move |x| r * x, 0.0, f64::INFINITY, x0).unwrap();
        for &x in &[0.3, 1.7, 2.0, 9.0] {
            let want = (x / x0).powf(-2.0 * r / (sig * sig));
            assert_relative_eq!(s.scale_density(x).unwrap(), want, max_relative = 1e-10);
        }
    }

    #[test]
    fn ou_scale_density() {
        let (kappa, theta, sig, x0) = (1.3, 0.05, 0.2, 0.1);
        let s = DiffusionSpec::new(move |_| sig, move |x| kappa * (theta - x), f64::NEG_INFINITY, f64::INFINITY, x0)
            .unwrap();
        for &x in &[-0.3, 0.0, 0.1, 0.45] {
            let want = (kappa * (x - theta).powi(2) / (sig * sig) - kappa * (x0 - theta).powi(2) / (sig * sig)).exp();
            assert_relative_eq!(s.scale_density(x).unwrap(), want, max_relative = 1e-10);
        }
    }

    #[test]
    fn scale_speed_identity_numeric() {
        let s = DiffusionSpec::new(|x: f64| 0.3 * x.powf(0.7), |x| 0.1 - 0.2 * x, 0.0, f64::INFINITY, 1.0).unwrap();
        for &x in &[0.2, 1.0, 3.5] {
            let a = (s.a)(x);
            let prod = s.scale_density(x).unwrap() * s.speed_density(x).unwrap() * a * a / 2.0;
            assert_relative_eq!(prod, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn inner_product_against_gaussian_speed() {
        // a = 1, b = -x: 𝔪 ∝ e^{-x²}
        let s = DiffusionSpec::new(|_| 1.0, |x| -x, f64::NEG_INFINITY, f64::INFINITY, 0.0).unwrap();
        let q = s.weighted_inner_product(|x| x, |x| x, (f64::NEG_INFINITY, f64::INFINITY)).unwrap();
        // 2 ∫ x² e^{-x²} dx = √π
        assert_relative_eq!(q.value, std::f64::consts::PI.sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn rejects_bad_intervals() {
        assert!(DiffusionSpec::new(|_| 1.0, |_| 0.0, 1.0, 0.0, 0.5).is_err());
        assert!(DiffusionSpec::new(|_| 1.0, |_| 0.0, 0.0, 1.0, 1.0).is_err());
    }
}
