//! Averages against the fast factor's invariant law, the Poisson equations
//! for `f² − σ̄²` and `fΩ − f̄Ω`, and the group parameters.

use crate::diffusion::quad::{integrate, Tol};
use crate::diffusion::DiffusionSpec;
use crate::error::{invalid, Error, Result};
use crate::specfun::erf;
use std::sync::Arc;

pub type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

const CENTERING_TOL: f64 = 1e-7;

/// Normalized invariant density of the fast generator on `(lo, hi)`.
#[derive(Clone)]
pub struct InvariantDensity {
    log_pdf: Fn1,
    pub lo: f64,
    pub hi: f64,
    /// Location and width used to place quadrature.
    pub center: f64,
    pub width: f64,
    tol: Tol,
}

impl std::fmt::Debug for InvariantDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InvariantDensity")
            .field("support", &(self.lo, self.hi))
            .field("center", &self.center)
            .field("width", &self.width)
            .finish()
    }
}

impl InvariantDensity {
    pub fn gaussian(mean: f64, var: f64) -> Result<Self> {
        if !(var > 0.0) {
            return invalid(format!("variance {var} must be positive"));
        }
        let norm = -0.5 * (2.0 * std::f64::consts::PI * var).ln();
        Ok(Self {
            log_pdf: Arc::new(move |y| norm - (y - mean).powi(2) / (2.0 * var)),
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            center: mean,
            width: var.sqrt(),
            tol: Tol::new(1e-13, 1e-11),
        })
    }

    pub fn pdf(&self, y: f64) -> f64 {
        if y <= self.lo || y >= self.hi {
            0.0
        } else {
            (self.log_pdf)(y).exp()
        }
    }

    /// `∫ g π` over `(from, to)` ⊂ support.
    fn integral(&self, g: &dyn Fn(f64) -> f64, from: f64, to: f64) -> Result<f64> {
        let (c, w) = (self.center, self.width);
        let (from, to) = (from.max(self.lo), to.min(self.hi));
        if from >= to {
            return Ok(0.0);
        }
        let u = |y: f64| (y - c) / w;
        let q = integrate(
            |s| {
                let y = c + w * s;
                let p = self.pdf(y);
                if p == 0.0 {
                    0.0
                } else {
                    g(y) * p * w
                }
            },
            u(from),
            u(to),
            self.tol,
        )?;
        Ok(q.value)
    }

    /// `⟨g⟩ = ∫ g π`. An integrand that is constant at every node returns
    /// that constant exactly.
    pub fn average(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        let first = std::cell::Cell::new(None::<f64>);
        let constant = std::cell::Cell::new(true);
        let v = self.integral(
            &|y| {
                let gy = g(y);
                match first.get() {
                    None => first.set(Some(gy)),
                    Some(f0) if f0.to_bits() != gy.to_bits() => constant.set(false),
                    _ => {}
                }
                gy
            },
            self.lo,
            self.hi,
        )?;
        match (constant.get(), first.get()) {
            (true, Some(c)) => Ok(c),
            _ => Ok(v),
        }
    }
}

/// Invariant density `π ∝ 𝔪` of `½β²∂yy + α∂y` on `(lo, hi)`.
pub fn invariant_density(
    alpha: impl Fn(f64) -> f64 + Send + Sync + 'static,
    beta: impl Fn(f64) -> f64 + Send + Sync + 'static,
    lo: f64,
    hi: f64,
    y_ref: f64,
) -> Result<InvariantDensity> {
    let spec = DiffusionSpec::new(beta, alpha, lo, hi, y_ref)?;
    let width = (spec.a)(y_ref).abs().max(1e-8);
    let log_m = {
        let spec = spec.clone();
        move |y: f64| spec.log_speed_density(y).unwrap_or(f64::NEG_INFINITY)
    };
    let trial = InvariantDensity {
        log_pdf: Arc::new(log_m.clone()),
        lo,
        hi,
        center: y_ref,
        width,
        tol: Tol::new(1e-13, 1e-10),
    };
    let z = trial.integral(&|_| 1.0, lo, hi).map_err(|_| Error::NotErgodic)?;
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::NotErgodic);
    }
    let ln_z = z.ln();
    Ok(InvariantDensity { log_pdf: Arc::new(move |y| log_m(y) - ln_z), ..trial })
}

#[derive(Clone)]
pub struct FastFactorSpec {
    pub alpha: Fn1,
    pub beta: Fn1,
    /// Market price of volatility risk `Λ(y, z)`.
    pub lambda: Fn2,
    pub density: InvariantDensity,
}

impl std::fmt::Debug for FastFactorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FastFactorSpec").field("density", &self.density).finish()
    }
}

impl FastFactorSpec {
    /// Fast factor with the invariant density computed from `α`, `β`.
    pub fn new(
        alpha: impl Fn(f64) -> f64 + Send + Sync + 'static,
        beta: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lambda: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        support: (f64, f64),
        y_ref: f64,
    ) -> Result<Self> {
        let alpha: Fn1 = Arc::new(alpha);
        let beta: Fn1 = Arc::new(beta);
        let (a2, b2) = (alpha.clone(), beta.clone());
        let density = invariant_density(move |y| a2(y), move |y| b2(y), support.0, support.1, y_ref)?;
        Ok(Self { alpha, beta, lambda: Arc::new(lambda), density })
    }

    /// `α = κ(m − y)`, constant `β`, with the Gaussian law registered.
    pub fn ou(kappa: f64, mean: f64, beta: f64, lambda: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(kappa > 0.0 && beta > 0.0) {
            return invalid("fast OU factor needs kappa > 0 and beta > 0");
        }
        Ok(Self {
            alpha: Arc::new(move |y| kappa * (mean - y)),
            beta: Arc::new(move |_| beta),
            lambda: Arc::new(lambda),
            density: InvariantDensity::gaussian(mean, beta * beta / (2.0 * kappa))?,
        })
    }

    /// Fast factor of the figure experiments: `α = −y`, constant `β`,
    /// `Λ = Erf(y)`.
    pub fn erf_example(beta: f64) -> Result<Self> {
        Self::ou(1.0, 0.0, beta, |y, _| erf(y))
    }

    pub fn average(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        self.density.average(g)
    }
}

#[derive(Clone)]
pub struct SlowFactorSpec {
    pub c: Fn1,
    pub g: Fn1,
    /// Market price of risk `Γ(y, z)`.
    pub gamma: Fn2,
}

impl std::fmt::Debug for SlowFactorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SlowFactorSpec")
    }
}

impl SlowFactorSpec {
    pub fn new(
        c: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        gamma: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { c: Arc::new(c), g: Arc::new(g), gamma: Arc::new(gamma) }
    }

    /// Slow factor of the figure experiments: `c = −z`, constant `g`,
    /// `Γ = Erf(z)`.
    pub fn erf_example(g: f64) -> Self {
        Self::new(|z| -z, move |_| g, |_, z| erf(z))
    }
}

#[derive(Clone)]
pub struct VolStructure {
    pub f: Fn2,
    pub omega: Fn2,
}

impl std::fmt::Debug for VolStructure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("VolStructure")
    }
}

impl VolStructure {
    pub fn new(
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        omega: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { f: Arc::new(f), omega: Arc::new(omega) }
    }

    pub fn constant(sigma: f64) -> Self {
        Self::new(move |_, _| sigma, |_, _| 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Correlations {
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

impl Correlations {
    pub fn validate(&self) -> Result<()> {
        let Self { xy, xz, yz } = *self;
        if [xy, xz, yz].iter().any(|r| !(r.abs() <= 1.0)) {
            return invalid("correlations must lie in [-1, 1]");
        }
        let det = 1.0 + 2.0 * xy * xz * yz - xy * xy - xz * xz - yz * yz;
        if det < -1e-14 {
            return invalid(format!("correlation matrix is not positive semidefinite (det {det:e})"));
        }
        Ok(())
    }
}

/// Volatility factors, their dynamics and correlations. A missing fast
/// factor freezes `y` at `y_frozen`.
#[derive(Debug, Clone)]
pub struct FactorSpec {
    pub fast: Option<FastFactorSpec>,
    pub slow: Option<SlowFactorSpec>,
    pub vol: VolStructure,
    pub corr: Correlations,
    pub y_frozen: f64,
}

impl FactorSpec {
    /// `⟨g(·)⟩`, or `g(y_frozen)` without a fast factor.
    pub fn average(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        match &self.fast {
            Some(fast) => fast.average(g),
            None => Ok(g(self.y_frozen)),
        }
    }

    pub fn sigma_bar(&self, z: f64) -> Result<f64> {
        let f = &self.vol.f;
        Ok(self.average(|y| f(y, z).powi(2))?.sqrt())
    }

    pub fn fom_bar(&self, z: f64) -> Result<f64> {
        let (f, om) = (&self.vol.f, &self.vol.omega);
        self.average(|y| f(y, z) * om(y, z))
    }
}

/// `∂yφ` for `L₀φ = rhs`, held as `β²π∂yφ = 2F` with
/// `F(y) = ∫_{lo}^{y} rhs π`.
pub struct PoissonDerivative<'a> {
    fast: &'a FastFactorSpec,
    rhs: Box<dyn Fn(f64) -> f64 + 'a>,
}

impl<'a> PoissonDerivative<'a> {
    /// `F(y)`, integrated from whichever tail is nearer.
    pub fn flux(&self, y: f64) -> Result<f64> {
        let d = &self.fast.density;
        if y <= d.center {
            d.integral(&|u| (self.rhs)(u), d.lo, y)
        } else {
            Ok(-d.integral(&|u| (self.rhs)(u), y, d.hi)?)
        }
    }

    pub fn eval(&self, y: f64) -> Result<f64> {
        let b = (self.fast.beta)(y);
        let p = self.fast.density.pdf(y);
        Ok(2.0 * self.flux(y)? / (b * b * p))
    }

    /// `⟨β w ∂yφ⟩ = ∫ 2 w F / β dy`, which avoids dividing by `π`.
    pub fn beta_weighted_average(&self, w: impl Fn(f64) -> f64) -> Result<f64> {
        let d = &self.fast.density;
        let (c, s) = (d.center, d.width);
        let failure = std::cell::RefCell::new(None);
        let q = integrate(
            |u| {
                let y = c + s * u;
                if y <= d.lo || y >= d.hi {
                    return 0.0;
                }
                let wy = w(y);
                if wy == 0.0 {
                    return 0.0;
                }
                match self.flux(y) {
                    Ok(fl) if fl == 0.0 => 0.0,
                    Ok(fl) => 2.0 * wy * fl / (self.fast.beta)(y) * s,
                    Err(e) => {
                        *failure.borrow_mut() = Some(e);
                        0.0
                    }
                }
            },
            (d.lo - c) / s,
            (d.hi - c) / s,
            Tol::new(1e-12, 1e-9),
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(q?.value)
    }
}

/// Solves `L₀φ = rhs` for `∂yφ`, after checking `⟨rhs⟩ = 0`.
pub fn poisson_solve_dy<'a>(rhs: impl Fn(f64) -> f64 + 'a, fast: &'a FastFactorSpec) -> Result<PoissonDerivative<'a>> {
    let mean = fast.average(&rhs)?;
    let scale = fast.average(|y| rhs(y).abs())?;
    if mean.abs() > CENTERING_TOL * scale.max(1.0) {
        return Err(Error::Solvability { mean });
    }
    Ok(PoissonDerivative { fast, rhs: Box::new(rhs) })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroupParams {
    pub v3: f64,
    pub v2: f64,
    pub u2: f64,
    pub u1: f64,
    pub v1: f64,
    pub v0: f64,
    pub sigma_bar: f64,
    pub fom_bar: f64,
    pub sigma_bar_prime: f64,
    pub fom_bar_prime: f64,
    pub rho_xy: f64,
    pub rho_xz: f64,
}

impl GroupParams {
    /// Only the averaged coefficients; every correction parameter is zero.
    pub fn leading(sigma_bar: f64, fom_bar: f64) -> Self {
        Self { sigma_bar, fom_bar, ..Self::default() }
    }

    pub fn fast_is_zero(&self) -> bool {
        self.v3 == 0.0 && self.v2 == 0.0 && self.u2 == 0.0 && self.u1 == 0.0
    }

    pub fn slow_is_zero(&self) -> bool {
        (self.v1 == 0.0 && self.v0 == 0.0) || (self.sigma_bar_prime == 0.0 && self.fom_bar_prime == 0.0)
    }
}

pub fn default_bump(z: f64) -> f64 {
    1e-4 * z.abs().max(1.0)
}

pub fn group_params(factors: &FactorSpec, z: f64, bump: f64) -> Result<GroupParams> {
    if !(bump > 0.0) {
        return invalid("derivative bump must be positive");
    }
    factors.corr.validate()?;
    let (f, om) = (&factors.vol.f, &factors.vol.omega);
    let sigma_bar = factors.sigma_bar(z)?;
    let fom_bar = factors.fom_bar(z)?;
    let mut gp = GroupParams {
        sigma_bar,
        fom_bar,
        rho_xy: factors.corr.xy,
        rho_xz: factors.corr.xz,
        ..GroupParams::default()
    };

    if let Some(slow) = &factors.slow {
        let sp = factors.sigma_bar(z + bump)?;
        let sm = factors.sigma_bar(z - bump)?;
        gp.sigma_bar_prime = (sp - sm) / (2.0 * bump);
        let fp = factors.fom_bar(z + bump)?;
        let fm = factors.fom_bar(z - bump)?;
        gp.fom_bar_prime = (fp - fm) / (2.0 * bump);
        let g = (slow.g)(z);
        gp.v1 = g * factors.corr.xz * factors.average(|y| f(y, z))?;
        let gamma = &slow.gamma;
        gp.v0 = -g * factors.average(|y| gamma(y, z))?;
    }

    if let Some(fast) = &factors.fast {
        let s2 = sigma_bar * sigma_bar;
        let lam = &fast.lambda;
        let dphi = poisson_solve_dy(|y| f(y, z).powi(2) - s2, fast)?;
        let deta = poisson_solve_dy(|y| f(y, z) * om(y, z) - fom_bar, fast)?;
        let rho = factors.corr.xy;
        gp.v3 = -0.5 * rho * dphi.beta_weighted_average(|y| f(y, z))?;
        gp.v2 = 0.5 * dphi.beta_weighted_average(|y| lam(y, z))?;
        gp.u2 = rho * deta.beta_weighted_average(|y| f(y, z))?;
        gp.u1 = -deta.beta_weighted_average(|y| lam(y, z))?;
    }
    Ok(gp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn computed_density_matches_gaussian() {
        for (kappa, m, beta) in [(1.0, 0.0, 1.0), (2.5, 0.3, 0.7)] {
            let d = invariant_density(move |y| kappa * (m - y), move |_| beta, f64::NEG_INFINITY, f64::INFINITY, m).unwrap();
            let g = InvariantDensity::gaussian(m, beta * beta / (2.0 * kappa)).unwrap();
            for &y in &[m - 1.0, m - 0.2, m, m + 0.5] {
                assert!((d.pdf(y) - g.pdf(y)).abs() < 1e-9, "y = {y}");
            }
        }
    }

    #[test]
    fn non_ergodic_rejected() {
        let r = invariant_density(|_| 0.0, |_| 1.0, f64::NEG_INFINITY, f64::INFINITY, 0.0);
        assert!(matches!(r, Err(Error::NotErgodic)));
    }

    #[test]
    fn lognormal_moment() {
        let beta = 1.0;
        let fast = FastFactorSpec::erf_example(beta).unwrap();
        assert_eq!(fast.average(|_| 1.0).unwrap(), 1.0);
        // Var Y = β²/2, so E e^{2Y} = e^{β²}.
        let v = fast.average(|y| (2.0 * y).exp()).unwrap();
        assert_relative_eq!(v, (beta * beta).exp(), max_relative = 1e-10);
    }

    #[test]
    fn uncentered_rhs_rejected() {
        let fast = FastFactorSpec::erf_example(1.0).unwrap();
        assert!(matches!(poisson_solve_dy(|y| y * y, &fast), Err(Error::Solvability { .. })));
        let zero = poisson_solve_dy(|_| 0.0, &fast).unwrap();
        assert_eq!(zero.eval(0.7).unwrap(), 0.0);
    }

    #[test]
    fn poisson_residual_and_symmetry() {
        let fast = FastFactorSpec::erf_example(1.0).unwrap();
        let rhs = |y: f64| y.sin();
        let d = poisson_solve_dy(rhs, &fast).unwrap();
        for &y in &[-1.2, -0.3, 0.4, 1.5] {
            assert_relative_eq!(d.eval(y).unwrap(), d.eval(-y).unwrap(), max_relative = 1e-8);
            let h = 1e-4;
            let d2 = (d.eval(y + h).unwrap() - d.eval(y - h).unwrap()) / (2.0 * h);
            let l0 = 0.5 * d2 + (fast.alpha)(y) * d.eval(y).unwrap();
            assert!((l0 - rhs(y)).abs() < 1e-5, "y = {y}: {l0} vs {}", rhs(y));
        }
    }

    fn figure_factors(beta: f64, sigma: f64) -> FactorSpec {
        let norm = (-beta * beta / 2.0f64).exp();
        FactorSpec {
            fast: Some(FastFactorSpec::erf_example(beta).unwrap()),
            slow: None,
            vol: VolStructure::new(move |y, _| sigma * y.exp() / norm, |_, _| 0.0),
            corr: Correlations { xy: -0.5, xz: 0.0, yz: 0.0 },
            y_frozen: 0.0,
        }
    }

    #[test]
    fn verbatim_normalization_inflates_sigma_bar() {
        let gp = group_params(&figure_factors(1.0, 0.34), 0.0, 1e-4).unwrap();
        assert_relative_eq!(gp.sigma_bar, 0.34 * 1f64.exp(), max_relative = 1e-10);
        assert_eq!(gp.fom_bar, 0.0);
        assert_eq!((gp.u2, gp.u1), (0.0, 0.0));
    }

    // Frozen from an independent 30-digit quadrature of the same integrals.
    #[test]
    fn figure_fast_parameters() {
        let gp = group_params(&figure_factors(1.0, 0.34), 0.0, 1e-4).unwrap();
        assert_relative_eq!(gp.sigma_bar, 0.924_215_821_676_075_4, max_relative = 1e-10);
        assert_relative_eq!(gp.v3, -0.528_215_301_677_167_9, max_relative = 1e-8);
        assert_relative_eq!(gp.v2, -0.314_973_897_062_268_8, max_relative = 1e-8);

        let omega = 0.1 * 0.25f64.exp();
        let mut bond = figure_factors(1.0, 0.02);
        bond.vol.omega = Arc::new(move |_, _| omega);
        let gp = group_params(&bond, 0.0, 1e-4).unwrap();
        assert_relative_eq!(gp.sigma_bar, 0.054_365_636_569_180_90, max_relative = 1e-10);
        assert_relative_eq!(gp.fom_bar, 0.005_436_563_656_918_090, max_relative = 1e-10);
        assert_relative_eq!(gp.v3, -1.075_138_004_634_984e-4, max_relative = 1e-8);
        assert_relative_eq!(gp.v2, -1.089_875_076_340_030e-3, max_relative = 1e-8);
        assert_relative_eq!(gp.u2, 1.493_253_264_141_118e-4, max_relative = 1e-8);
        assert_relative_eq!(gp.u1, 1.062_397_547_290_083e-3, max_relative = 1e-8);

        let gp = group_params(&figure_factors(2.0, 10.0), 0.0, 1e-4).unwrap();
        assert_relative_eq!(gp.sigma_bar, 545.981_500_331_442_4, max_relative = 1e-10);
        assert_relative_eq!(gp.v3, -802_285_807.689_228_2, max_relative = 1e-8);
        assert_relative_eq!(gp.v2, -409_018.708_263_819, max_relative = 1e-8);
    }

    #[test]
    fn constant_vol_has_exactly_zero_corrections() {
        let factors = FactorSpec {
            fast: Some(FastFactorSpec::erf_example(1.0).unwrap()),
            slow: Some(SlowFactorSpec::new(|z| -z, |_| 1.0, |_, _| 0.0)),
            vol: VolStructure::constant(0.3),
            corr: Correlations { xy: -0.5, xz: -0.5, yz: 0.0 },
            y_frozen: 0.0,
        };
        let gp = group_params(&factors, 0.5, 1e-4).unwrap();
        assert!(gp.fast_is_zero() && gp.slow_is_zero());
        assert_eq!(gp.sigma_bar, 0.3);
        assert_eq!(gp.v1, 1.0 * -0.5 * 0.3);
    }

    #[test]
    fn slow_example_derivatives() {
        let (sigma, z0, g) = (0.34, 2.0, 2.0);
        let factors = FactorSpec {
            fast: None,
            slow: Some(SlowFactorSpec::erf_example(g)),
            vol: VolStructure::new(move |_, z| sigma * (z - z0).exp(), |_, _| 0.1),
            corr: Correlations { xy: 0.0, xz: -0.5, yz: 0.0 },
            y_frozen: 0.0,
        };
        let gp = group_params(&factors, z0, default_bump(z0)).unwrap();
        assert_relative_eq!(gp.sigma_bar, sigma, max_relative = 1e-15);
        assert_relative_eq!(gp.sigma_bar_prime, sigma, max_relative = 1e-7);
        assert_relative_eq!(gp.fom_bar_prime, 0.1 * sigma, max_relative = 1e-7);
        assert_relative_eq!(gp.v1, g * -0.5 * sigma, max_relative = 1e-15);
        assert_relative_eq!(gp.v0, -g * erf(z0), max_relative = 1e-15);
        assert!(gp.fast_is_zero());
    }

    #[test]
    fn correlation_psd() {
        assert!(Correlations { xy: 0.9, xz: 0.9, yz: -0.9 }.validate().is_err());
        assert!(Correlations { xy: -0.5, xz: -0.5, yz: 0.0 }.validate().is_ok());
    }
}
