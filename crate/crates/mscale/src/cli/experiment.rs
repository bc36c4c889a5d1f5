//! Turns a [`RunConfig`] into expansion prices, Monte Carlo estimates and
//! convergence studies.

use super::config::{FactorConfig, GridAxis, ModelConfig, Normalization, RunConfig};
use crate::averaging::{default_bump, group_params, FactorSpec, FastFactorSpec, GroupParams, SlowFactorSpec, VolStructure};
use crate::diffusion::{classify_boundaries, BoundaryReport};
use crate::error::{invalid, Result};
use crate::mc::{self, ConvergenceStudy, Dynamics, McConfig, McEstimate, McPayoff, ScaleAxis, Start};
use crate::models::{BarrierModel, JdcevModel, JdcevRegime, VasicekModel};
use crate::observables::{bs_vega, implied_vol, yield_expansion, JdcevPutData};
use crate::spectral::{expand, EigenSystem, ExpansionData, PriceExpansion, Truncation};
use rayon::prelude::*;

/// `f(y, z) = σ · e^y/N · e^{z − z₀}` with the factors present, constant `Ω`.
pub fn factor_spec(fc: &FactorConfig) -> Result<FactorSpec> {
    let fast = fc.fast_beta.map(FastFactorSpec::erf_example).transpose()?;
    let slow = fc.slow_g.map(SlowFactorSpec::erf_example);
    let fast_norm = match (fc.fast_beta, fc.normalization) {
        (Some(b), Normalization::Verbatim) => (-0.5 * b * b).exp(),
        (Some(b), Normalization::Unit) => (0.5 * b * b).exp(),
        (None, _) => 1.0,
    };
    let (sigma, z0, omega) = (fc.sigma, fc.z, fc.omega);
    let (has_fast, has_slow) = (fast.is_some(), slow.is_some());
    let vol = VolStructure::new(
        move |y, z| {
            let mut f = sigma;
            if has_fast {
                f *= y.exp() / fast_norm;
            }
            if has_slow {
                f *= (z - z0).exp();
            }
            f
        },
        move |_, _| omega,
    );
    Ok(FactorSpec { fast, slow, vol, corr: fc.corr, y_frozen: fc.y })
}

/// Factor specification with its averaged group parameters at the current `z`.
pub struct Setup {
    pub factors: FactorSpec,
    pub gp: GroupParams,
}

impl Setup {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let factors = factor_spec(&cfg.factors)?;
        let z = cfg.factors.z;
        let gp = group_params(&factors, z, default_bump(z))?;
        Ok(Self { factors, gp })
    }
}

pub fn barrier_model(cfg: &RunConfig, gp: &GroupParams) -> Result<Option<BarrierModel>> {
    match cfg.model {
        ModelConfig::Barrier { rate, lower, upper, .. } => {
            BarrierModel::new(rate, gp.sigma_bar, lower, upper)?.with_averages(gp.sigma_bar, gp.fom_bar).map(Some)
        }
        _ => Ok(None),
    }
}

/// The yield (bond) or implied volatility (put) read off a price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observable {
    pub leading: f64,
    pub approx: f64,
    /// Implied-volatility inversion failed for either price.
    pub failed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub grid: f64,
    pub t: f64,
    pub x: f64,
    pub strike: Option<f64>,
    pub expansion: PriceExpansion,
    pub observable: Option<Observable>,
}

fn data_for<S: EigenSystem>(
    m: &S,
    gp: &GroupParams,
    n: usize,
    coeffs: impl Fn(&S) -> Result<Vec<f64>>,
) -> Result<ExpansionData> {
    if gp.fast_is_zero() && gp.slow_is_zero() {
        Ok(ExpansionData::leading(m, coeffs(m)?[..n].to_vec()))
    } else {
        ExpansionData::build(m, gp, n, coeffs)
    }
}

fn iv_or_nan(price: f64, t: f64, x: f64, k: f64) -> (f64, bool) {
    match implied_vol(price, t, x, k, 0.0) {
        Ok(v) if v.converged => (v.value, false),
        _ => (f64::NAN, true),
    }
}

/// Expansion at every grid point for the scales `(epsilon, delta)`. Series
/// data is shared across points whenever the strike is fixed.
pub fn expansions(cfg: &RunConfig, gp: &GroupParams, epsilon: f64, delta: f64) -> Result<Vec<GridPoint>> {
    let n = cfg.numerics.terms;
    let trunc = Truncation::Adaptive { min: 10.min(n), tol: cfg.numerics.tol_series };
    let points: Vec<(f64, f64, f64, Option<f64>)> = cfg
        .output
        .grid
        .iter()
        .map(|&g| {
            let (t, x, k) = cfg.point(g);
            (g, t, x, k)
        })
        .collect();
    let per_strike = cfg.output.axis == GridAxis::Strike;
    match cfg.model {
        ModelConfig::Barrier { strike, .. } => {
            let m = barrier_model(cfg, gp)?.expect("barrier config");
            let build = |k: f64| data_for(&m, gp, n, |mm| mm.call_coefficients(k, n));
            let shared = if per_strike { None } else { Some(build(strike)?) };
            points
                .par_iter()
                .map(|&(g, t, x, k)| {
                    let own;
                    let data = match &shared {
                        Some(d) => d,
                        None => {
                            own = build(k.unwrap_or(strike))?;
                            &own
                        }
                    };
                    let e = expand(&m, data, t, x, epsilon, delta, trunc)?;
                    Ok(GridPoint { grid: g, t, x, strike: k, expansion: e, observable: None })
                })
                .collect()
        }
        ModelConfig::Vasicek { kappa, theta } => {
            let m = VasicekModel::new(kappa, theta, gp.sigma_bar, gp.fom_bar)?;
            let data = data_for(&m, gp, n, |mm| Ok(mm.bond_coefficients(n)))?;
            points
                .par_iter()
                .map(|&(g, t, x, _)| {
                    let e = expand(&m, &data, t, x, epsilon, delta, trunc)?;
                    let y = yield_expansion(e.u00, e.u10, e.u01, t, epsilon, delta)?;
                    let obs = Observable { leading: y.r00, approx: y.combined, failed: false };
                    Ok(GridPoint { grid: g, t, x, strike: None, expansion: e, observable: Some(obs) })
                })
                .collect()
        }
        ModelConfig::Jdcev { mu, c, eta, strike } => {
            if gp.fom_bar != 0.0 {
                return invalid("the JDCEV model takes no market price of volatility risk (set omega = 0)");
            }
            let m = JdcevModel::new(mu, c, eta, gp.sigma_bar)?;
            let cutoff = points.iter().map(|&(_, t, x, _)| m.survival_cutoff(t, x)).fold(0.0, f64::max);
            let build = |k: f64| JdcevPutData::build(&m, gp, k, cutoff, n);
            let shared = if per_strike { None } else { Some(build(strike)?) };
            points
                .par_iter()
                .map(|&(g, t, x, k)| {
                    let k = k.unwrap_or(strike);
                    let own;
                    let data = match &shared {
                        Some(d) => d,
                        None => {
                            own = build(k)?;
                            &own
                        }
                    };
                    let put = data.evaluate(&m, t, x, epsilon, delta, trunc)?.put;
                    let (lead, f1) = iv_or_nan(put.u00, t, x, k);
                    let (approx, f2) = iv_or_nan(put.combined, t, x, k);
                    let obs = Observable { leading: lead, approx, failed: f1 || f2 };
                    Ok(GridPoint { grid: g, t, x, strike: Some(k), expansion: put, observable: Some(obs) })
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McPoint {
    pub estimate: McEstimate,
    /// Yield or implied volatility of the mean, with its delta-method error.
    pub observable: Option<(f64, f64)>,
}

pub fn mc_config(cfg: &RunConfig) -> McConfig {
    let n = &cfg.numerics;
    McConfig {
        epsilon: cfg.factors.epsilon,
        delta: cfg.factors.delta,
        n_paths: n.paths,
        steps_per_unit: n.steps,
        seed: n.seed,
        survival: n.survival,
        antithetic: n.antithetic,
        bridge: n.bridge,
        scaling: cfg.factors.scaling,
    }
}

fn dynamics_and_payoff(cfg: &RunConfig, gp: &GroupParams) -> Result<(Dynamics, Box<dyn Fn(Option<f64>) -> McPayoff>)> {
    Ok(match cfg.model {
        ModelConfig::Barrier { strike, .. } => {
            let m = barrier_model(cfg, gp)?.expect("barrier config");
            (Dynamics::barrier(&m), Box::new(move |k: Option<f64>| McPayoff::call(k.unwrap_or(strike))))
        }
        ModelConfig::Vasicek { kappa, theta } => {
            let m = VasicekModel::new(kappa, theta, gp.sigma_bar, gp.fom_bar)?;
            (Dynamics::vasicek(&m), Box::new(|_| McPayoff::bond()))
        }
        ModelConfig::Jdcev { mu, c, eta, strike } => {
            let m = JdcevModel::new(mu, c, eta, gp.sigma_bar)?;
            (Dynamics::jdcev(&m), Box::new(move |k: Option<f64>| McPayoff::defaultable_put(k.unwrap_or(strike))))
        }
    })
}

/// Monte Carlo estimate at every grid point at the configured scales. One
/// path set serves every maturity (or every strike) when the spot is fixed.
pub fn mc_points(cfg: &RunConfig, setup: &Setup) -> Result<Vec<McPoint>> {
    let (dynamics, payoff) = dynamics_and_payoff(cfg, &setup.gp)?;
    let mcfg = mc_config(cfg);
    let f = &cfg.factors;
    let start = |x: f64| Start { x, y: f.y, z: f.z };
    let points: Vec<(f64, f64, Option<f64>)> = cfg.output.grid.iter().map(|&g| cfg.point(g)).collect();
    let estimates: Vec<McEstimate> = match cfg.output.axis {
        GridAxis::Spot => points
            .iter()
            .map(|&(t, x, k)| mc::simulate_price(&dynamics, &setup.factors, &payoff(k), t, start(x), &mcfg))
            .collect::<Result<_>>()?,
        GridAxis::Maturity => {
            let times: Vec<f64> = points.iter().map(|p| p.0).collect();
            let (_, x, k) = points[0];
            mc::simulate(&dynamics, &setup.factors, &[payoff(k)], &times, start(x), &mcfg)?.into_iter().map(|r| r[0]).collect()
        }
        GridAxis::Strike => {
            let (t, x, _) = points[0];
            let payoffs: Vec<McPayoff> = points.iter().map(|p| payoff(p.2)).collect();
            mc::simulate(&dynamics, &setup.factors, &payoffs, &[t], start(x), &mcfg)?.remove(0)
        }
    };
    Ok(points
        .iter()
        .zip(estimates)
        .map(|(&(t, x, k), e)| {
            let observable = match cfg.model {
                ModelConfig::Barrier { .. } => None,
                ModelConfig::Vasicek { .. } => Some(if e.mean > 0.0 {
                    (-e.mean.ln() / t, e.std_error / (t * e.mean))
                } else {
                    (f64::NAN, f64::NAN)
                }),
                ModelConfig::Jdcev { .. } => {
                    let k = k.expect("put strike");
                    let (v, _) = iv_or_nan(e.mean, t, x, k);
                    Some((v, e.std_error / bs_vega(t, x, v, k, 0.0)))
                }
            };
            McPoint { estimate: e, observable }
        })
        .collect())
}

/// Convergence of the first grid point along `ε` (fast factor present)
/// or `δ` (slow factor only), over `numerics.scales`.
pub fn convergence(cfg: &RunConfig, setup: &Setup) -> Result<ConvergenceStudy> {
    let axis = match (cfg.factors.fast_beta, cfg.factors.slow_g) {
        (Some(_), _) => ScaleAxis::Epsilon,
        (None, Some(_)) => ScaleAxis::Delta,
        (None, None) => return invalid("a convergence study needs a fast or a slow factor"),
    };
    let mut one = cfg.clone();
    one.output.grid.truncate(1);
    let (dynamics, payoff) = dynamics_and_payoff(&one, &setup.gp)?;
    let (t, x, k) = one.point(one.output.grid[0]);
    let f = &cfg.factors;
    mc::convergence_study(
        &dynamics,
        &setup.factors,
        &payoff(k),
        t,
        Start { x, y: f.y, z: f.z },
        axis,
        &cfg.numerics.scales,
        &mc_config(cfg),
        |s| {
            let (e, d) = match axis {
                ScaleAxis::Epsilon => (s, f.delta),
                ScaleAxis::Delta => (f.epsilon, s),
            };
            Ok(expansions(&one, &setup.gp, e, d)?[0].expansion.combined)
        },
    )
}

/// Boundary report of the averaged operator, with the parameter-table regime
/// for JDCEV.
pub fn classify(cfg: &RunConfig, gp: &GroupParams) -> Result<(BoundaryReport, Option<JdcevRegime>)> {
    match cfg.model {
        ModelConfig::Barrier { .. } => {
            let m = barrier_model(cfg, gp)?.expect("barrier config");
            Ok((classify_boundaries(&m.diffusion())?, None))
        }
        ModelConfig::Vasicek { kappa, theta } => {
            let m = VasicekModel::new(kappa, theta, gp.sigma_bar, gp.fom_bar)?;
            Ok((classify_boundaries(&m.diffusion())?, None))
        }
        ModelConfig::Jdcev { mu, c, eta, .. } => {
            let m = JdcevModel::new(mu, c, eta, gp.sigma_bar)?;
            Ok((classify_boundaries(&m.diffusion())?, Some(m.regime())))
        }
    }
}
