//! Euler-Maruyama Monte Carlo for the full three-factor model.

use crate::averaging::{FactorSpec, Fn1};
use crate::error::{invalid, Error, Result};
use crate::models::{BarrierModel, JdcevModel, VasicekModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use std::sync::Arc;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SurvivalMode {
    /// Draw `ℰ ~ Exp(1)` and default once `∫h ≥ ℰ`.
    Sample,
    /// Multiply the payoff by `e^{−∫h}`.
    #[default]
    Weight,
}

/// How the factor noise scales with `ε` and `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScaleConvention {
    /// `β/√ε` for `Y` and `√δ g` for `Z`, as in the general dynamics.
    #[default]
    Generator,
    /// `β` and `g` unscaled, as the example factors are printed.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Line,
    /// Knock-out outside `(lower, upper)`.
    Barriers { lower: f64, upper: f64 },
    /// Default on reaching zero.
    AbsorbAtZero,
}

/// Coefficients of `X` before the volatility factor: `dX = (b − afΩ)dt + af dW`.
#[derive(Clone)]
pub struct Dynamics {
    pub a: Fn1,
    pub b: Fn1,
    pub rate: Fn1,
    pub hazard: Fn1,
    pub domain: Domain,
}

impl std::fmt::Debug for Dynamics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dynamics").field("domain", &self.domain).finish()
    }
}

impl Dynamics {
    pub fn barrier(m: &BarrierModel) -> Self {
        let r = m.rate;
        Self {
            a: Arc::new(|x| x),
            b: Arc::new(move |x| r * x),
            rate: Arc::new(move |_| r),
            hazard: Arc::new(|_| 0.0),
            domain: Domain::Barriers { lower: m.lower, upper: m.upper },
        }
    }

    /// Uses `θ`, not `θ̄`: the `fΩ` drift is simulated directly.
    pub fn vasicek(m: &VasicekModel) -> Self {
        let (k, th) = (m.kappa, m.theta);
        Self {
            a: Arc::new(|_| 1.0),
            b: Arc::new(move |x| k * (th - x)),
            rate: Arc::new(|x| x),
            hazard: Arc::new(|_| 0.0),
            domain: Domain::Line,
        }
    }

    pub fn jdcev(m: &JdcevModel) -> Self {
        let (mu, c, eta) = (m.mu, m.c, m.eta);
        Self {
            a: Arc::new(move |x| x.powf(eta + 1.0)),
            b: Arc::new(move |x| mu * x + c * x.powf(2.0 * eta + 1.0)),
            rate: Arc::new(|_| 0.0),
            hazard: Arc::new(move |x| mu + c * x.powf(2.0 * eta)),
            domain: Domain::AbsorbAtZero,
        }
    }
}

/// `H(X_t)` while alive, `default_value` after any killing.
#[derive(Clone)]
pub struct McPayoff {
    pub h: Fn1,
    pub default_value: f64,
}

impl McPayoff {
    pub fn new(h: impl Fn(f64) -> f64 + Send + Sync + 'static, default_value: f64) -> Self {
        Self { h: Arc::new(h), default_value }
    }

    pub fn call(strike: f64) -> Self {
        Self::new(move |x| (x - strike).max(0.0), 0.0)
    }

    /// Put on a defaultable stock: pays `K` after default.
    pub fn defaultable_put(strike: f64) -> Self {
        Self::new(move |x| (strike - x).max(0.0), strike)
    }

    pub fn bond() -> Self {
        Self::new(|_| 1.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub n_paths: usize,
    /// Overrides the default step `min(t/200, ε/50)`.
    pub steps_per_unit: Option<usize>,
    pub seed: u64,
    pub survival: SurvivalMode,
    pub antithetic: bool,
    /// Brownian-bridge probability of touching a barrier between steps.
    pub bridge: bool,
    pub scaling: ScaleConvention,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            delta: 0.0,
            n_paths: 100_000,
            steps_per_unit: None,
            seed: 0,
            survival: SurvivalMode::Weight,
            antithetic: false,
            bridge: false,
            scaling: ScaleConvention::Generator,
        }
    }
}

impl McConfig {
    /// Number of Euler steps for horizon `t`.
    pub fn steps(&self, t: f64) -> usize {
        let dt = match self.steps_per_unit {
            Some(n) => 1.0 / n.max(1) as f64,
            None if self.epsilon > 0.0 => (t / 200.0).min(self.epsilon / 50.0),
            None => t / 200.0,
        };
        ((t / dt).ceil() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Start {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√samples`; antithetic pairs count
    /// as one sample.
    pub std_error: f64,
    pub n_paths: usize,
    pub n_knocked_out: usize,
    pub n_defaulted: usize,
    pub elapsed: Duration,
}

/// Lower-triangular factor of the 3×3 correlation matrix. Zero pivots of
/// a singular but semidefinite matrix are kept at zero.
fn cholesky3(xy: f64, xz: f64, yz: f64) -> [[f64; 3]; 3] {
    let c = [[1.0, xy, xz], [xy, 1.0, yz], [xz, yz, 1.0]];
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (c[i][i] - s).max(0.0).sqrt();
            } else if l[j][j] > 1e-12 {
                l[i][j] = (c[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// Deterministic pairwise sum.
fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Alive,
    KnockedOut,
    Defaulted,
}

/// Path state at an observation time.
#[derive(Debug, Clone, Copy)]
struct Snapshot {
    x: f64,
    disc: f64,
    /// Survival weight in weighting mode, 1 otherwise.
    alive: f64,
    status: Status,
}

impl Snapshot {
    fn value(&self, p: &McPayoff) -> f64 {
        match self.status {
            Status::Alive => self.disc * (self.alive * (p.h)(self.x) + (1.0 - self.alive) * p.default_value),
            _ => self.disc * p.default_value,
        }
    }
}

struct Simulator<'a> {
    dynamics: &'a Dynamics,
    factors: &'a FactorSpec,
    cfg: McConfig,
    start: Start,
    /// Step counts at which the path is observed, increasing.
    checkpoints: Vec<usize>,
    dt: f64,
    chol: [[f64; 3]; 3],
}

impl Simulator<'_> {
    fn run_path(&self, rng: &mut ChaCha8Rng, sign: f64, out: &mut Vec<Snapshot>) {
        let d = self.dynamics;
        let fs = self.factors;
        let (eps, del) = (self.cfg.epsilon, self.cfg.delta);
        let fast = fs.fast.as_ref().filter(|_| eps > 0.0);
        let slow = fs.slow.as_ref().filter(|_| del > 0.0);
        let printed = self.cfg.scaling == ScaleConvention::Printed;
        let sample_mode = self.cfg.survival == SurvivalMode::Sample;
        let (dt, sq) = (self.dt, self.dt.sqrt());
        let l = &self.chol;
        let exp_draw: f64 = rng.sample(Exp1);
        let Start { mut x, mut y, mut z } = self.start;
        let (mut int_r, mut int_h) = (0.0, 0.0);
        let mut bridge_survival = 1.0;
        let (mut r_prev, mut h_prev) = ((d.rate)(x), (d.hazard)(x));
        let last = *self.checkpoints.last().unwrap_or(&0);
        let mut next_cp = 0;
        let mut status = Status::Alive;
        out.clear();
        for step in 1..=last {
            let g0: f64 = sign * rng.sample::<f64, _>(StandardNormal);
            let g1: f64 = sign * rng.sample::<f64, _>(StandardNormal);
            let g2: f64 = sign * rng.sample::<f64, _>(StandardNormal);
            let u: f64 = if sample_mode && self.cfg.bridge { rng.random() } else { 0.0 };
            let dwx = sq * g0;
            let dwy = sq * (l[1][0] * g0 + l[1][1] * g1);
            let dwz = sq * (l[2][0] * g0 + l[2][1] * g1 + l[2][2] * g2);
            let fv = (fs.vol.f)(y, z);
            let om = (fs.vol.omega)(y, z);
            let vol = (d.a)(x) * fv;
            let x_new = x + ((d.b)(x) - vol * om) * dt + vol * dwx;
            if let Some(fast) = fast {
                let be = (fast.beta)(y);
                let noise = if printed { be } else { be / eps.sqrt() };
                y += ((fast.alpha)(y) / eps - be * (fast.lambda)(y, z) / eps.sqrt()) * dt + noise * dwy;
            }
            if let Some(slow) = slow {
                let gz = (slow.g)(z);
                let noise = if printed { gz } else { del.sqrt() * gz };
                z += (del * (slow.c)(z) - del.sqrt() * gz * (slow.gamma)(y, z)) * dt + noise * dwz;
            }
            match d.domain {
                Domain::Barriers { lower, upper } => {
                    if !(x_new > lower && x_new < upper) {
                        status = Status::KnockedOut;
                    } else if self.cfg.bridge {
                        let v2dt = vol * vol * dt;
                        let p_lo = (-2.0 * (x - lower) * (x_new - lower) / v2dt).exp();
                        let p_hi = (-2.0 * (upper - x) * (upper - x_new) / v2dt).exp();
                        let s = (1.0 - p_lo) * (1.0 - p_hi);
                        if sample_mode {
                            if u >= s {
                                status = Status::KnockedOut;
                            }
                        } else {
                            bridge_survival *= s;
                        }
                    }
                }
                Domain::AbsorbAtZero if x_new <= 0.0 => status = Status::Defaulted,
                _ => {}
            }
            if status == Status::Alive {
                x = x_new;
                let (r_now, h_now) = ((d.rate)(x), (d.hazard)(x));
                int_r += 0.5 * (r_prev + r_now) * dt;
                int_h += 0.5 * (h_prev + h_now) * dt;
                (r_prev, h_prev) = (r_now, h_now);
                if sample_mode && int_h >= exp_draw {
                    status = Status::Defaulted;
                }
            }
            let alive = if sample_mode { 1.0 } else { (-int_h).exp() * bridge_survival };
            let snap = Snapshot { x, disc: (-int_r).exp(), alive, status };
            if status != Status::Alive {
                // the path is frozen from here on
                while next_cp < self.checkpoints.len() {
                    out.push(snap);
                    next_cp += 1;
                }
                return;
            }
            while next_cp < self.checkpoints.len() && self.checkpoints[next_cp] == step {
                out.push(snap);
                next_cp += 1;
            }
        }
    }

    /// Values for one sample, `[checkpoint][payoff]` flattened, with the
    /// knock-out and default counts per checkpoint.
    fn sample(&self, index: u64, payoffs: &[McPayoff]) -> (Vec<f64>, Vec<(u32, u32)>) {
        let mut base = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        base.set_stream(index);
        let signs: &[f64] = if self.cfg.antithetic { &[1.0, -1.0] } else { &[1.0] };
        let np = payoffs.len();
        let mut values = vec![0.0; self.checkpoints.len() * np];
        let mut counts = vec![(0u32, 0u32); self.checkpoints.len()];
        let mut snaps = Vec::with_capacity(self.checkpoints.len());
        for &s in signs {
            let mut rng = base.clone();
            self.run_path(&mut rng, s, &mut snaps);
            for (c, snap) in snaps.iter().enumerate() {
                for (j, p) in payoffs.iter().enumerate() {
                    values[c * np + j] += snap.value(p) / signs.len() as f64;
                }
                counts[c].0 += (snap.status == Status::KnockedOut) as u32;
                counts[c].1 += (snap.status == Status::Defaulted) as u32;
            }
        }
        (values, counts)
    }
}

/// Estimates for every payoff at every horizon from one set of paths,
/// indexed `[time][payoff]`. The step is chosen for the shortest horizon
/// and the others are observed at the nearest step.
pub fn simulate(
    dynamics: &Dynamics,
    factors: &FactorSpec,
    payoffs: &[McPayoff],
    times: &[f64],
    start: Start,
    cfg: &McConfig,
) -> Result<Vec<Vec<McEstimate>>> {
    let began = Instant::now();
    if times.is_empty() || payoffs.is_empty() {
        return invalid("simulation needs at least one horizon and one payoff");
    }
    if times.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return invalid("horizons must be positive");
    }
    if !(cfg.epsilon >= 0.0 && cfg.delta >= 0.0) {
        return invalid("scale parameters must be nonnegative");
    }
    if cfg.n_paths < 2 {
        return invalid("at least two paths are needed for a standard error");
    }
    if cfg.antithetic && cfg.n_paths % 2 != 0 {
        return invalid(format!("antithetic sampling needs an even path count, got {}", cfg.n_paths));
    }
    factors.corr.validate()?;
    let inside = match dynamics.domain {
        Domain::Line => start.x.is_finite(),
        Domain::Barriers { lower, upper } => start.x > lower && start.x < upper,
        Domain::AbsorbAtZero => start.x > 0.0 && start.x.is_finite(),
    };
    if !inside {
        return invalid(format!("start x = {} is not interior", start.x));
    }
    let t_min = times.iter().cloned().fold(f64::INFINITY, f64::min);
    let dt = t_min / cfg.steps(t_min) as f64;
    let steps: Vec<usize> = times.iter().map(|t| ((t / dt).round() as usize).max(1)).collect();
    let mut checkpoints = steps.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let c = factors.corr;
    let sim = Simulator { dynamics, factors, cfg: *cfg, start, checkpoints, dt, chol: cholesky3(c.xy, c.xz, c.yz) };
    let samples = if cfg.antithetic { cfg.n_paths / 2 } else { cfg.n_paths };
    let results: Vec<(Vec<f64>, Vec<(u32, u32)>)> =
        (0..samples as u64).into_par_iter().map(|i| sim.sample(i, payoffs)).collect();
    let n = samples as f64;
    let np = payoffs.len();
    let mut out = Vec::with_capacity(times.len());
    let elapsed = began.elapsed();
    for &st in &steps {
        let cp = sim.checkpoints.binary_search(&st).expect("every horizon is a checkpoint");
        let ko: usize = results.iter().map(|r| r.1[cp].0 as usize).sum();
        let def: usize = results.iter().map(|r| r.1[cp].1 as usize).sum();
        let mut row = Vec::with_capacity(np);
        for j in 0..np {
            let values: Vec<f64> = results.iter().map(|r| r.0[cp * np + j]).collect();
            let mean = pairwise_sum(&values) / n;
            if !mean.is_finite() {
                return Err(Error::Truncation("simulation produced a non-finite mean".into()));
            }
            let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
            let var = pairwise_sum(&sq) / (n - 1.0);
            row.push(McEstimate {
                mean,
                std_error: (var / n).sqrt(),
                n_paths: cfg.n_paths,
                n_knocked_out: ko,
                n_defaulted: def,
                elapsed,
            });
        }
        out.push(row);
    }
    Ok(out)
}

/// `Ẽ[e^{−∫r} (H(X_t)𝕀_{τ>t} + D𝕀_{τ≤t})]` by simulation.
pub fn simulate_price(
    dynamics: &Dynamics,
    factors: &FactorSpec,
    payoff: &McPayoff,
    t: f64,
    start: Start,
    cfg: &McConfig,
) -> Result<McEstimate> {
    Ok(simulate(dynamics, factors, std::slice::from_ref(payoff), &[t], start, cfg)?[0][0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YieldEstimate {
    pub value: f64,
    /// Delta-method error `SE(price)/(t·price)`.
    pub std_error: f64,
    pub price: McEstimate,
}

/// Yield `−log(Ẽ[e^{−∫X}])/t` of a zero-coupon bond.
pub fn simulate_bond_yield(
    dynamics: &Dynamics,
    factors: &FactorSpec,
    t: f64,
    start: Start,
    cfg: &McConfig,
) -> Result<YieldEstimate> {
    Ok(simulate_bond_yields(dynamics, factors, &[t], start, cfg)?[0])
}

/// Bond yields at several maturities from one set of paths.
pub fn simulate_bond_yields(
    dynamics: &Dynamics,
    factors: &FactorSpec,
    times: &[f64],
    start: Start,
    cfg: &McConfig,
) -> Result<Vec<YieldEstimate>> {
    let est = simulate(dynamics, factors, &[McPayoff::bond()], times, start, cfg)?;
    times
        .iter()
        .zip(est)
        .map(|(&t, row)| {
            let price = row[0];
            if !(price.mean > 0.0) {
                return Err(Error::UndefinedYield(price.mean));
            }
            Ok(YieldEstimate { value: -price.mean.ln() / t, std_error: price.std_error / (t * price.mean), price })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleAxis {
    Epsilon,
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub scale: f64,
    pub mc: McEstimate,
    pub approx: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub axis: ScaleAxis,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log error` against `log scale`.
    pub slope: f64,
    /// Some error is within two standard errors of zero.
    pub inconclusive: bool,
    /// Paths needed for every error to clear three standard errors.
    pub recommended_paths: Option<usize>,
}

/// `|u_MC − u_approx|` over a halving grid of `ε` (or `δ`), with the fitted
/// log-log slope. `approx(s)` is the expansion at scale `s`.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    dynamics: &Dynamics,
    factors: &FactorSpec,
    payoff: &McPayoff,
    t: f64,
    start: Start,
    axis: ScaleAxis,
    grid: &[f64],
    cfg: &McConfig,
    approx: impl Fn(f64) -> Result<f64>,
) -> Result<ConvergenceStudy> {
    if grid.len() < 3 {
        return invalid("a convergence study needs at least three scales");
    }
    for w in grid.windows(2) {
        if !(w[0] > 0.0) || (w[1] / w[0] - 0.5).abs() > 1e-9 {
            return invalid(format!("scales must halve: {} then {}", w[0], w[1]));
        }
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &s in grid {
        let mut c = *cfg;
        match axis {
            ScaleAxis::Epsilon => c.epsilon = s,
            ScaleAxis::Delta => c.delta = s,
        }
        let mc = simulate_price(dynamics, factors, payoff, t, start, &c)?;
        let a = approx(s)?;
        rows.push(ConvergenceRow { scale: s, mc, approx: a, error: (mc.mean - a).abs() });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.scale.ln(), r.error.max(f64::MIN_POSITIVE).ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let inconclusive = rows.iter().any(|r| r.error < 2.0 * r.mc.std_error);
    let recommended_paths = inconclusive.then(|| {
        rows.iter()
            .map(|r| {
                let ratio = 3.0 * r.mc.std_error / r.error.max(1e-300);
                (r.mc.n_paths as f64 * ratio * ratio).ceil().min(1e12) as usize
            })
            .max()
            .unwrap_or(cfg.n_paths)
    });
    Ok(ConvergenceStudy { axis, rows, slope: sxy / sxx, inconclusive, recommended_paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::{Correlations, FastFactorSpec, VolStructure};

    fn constant(sigma: f64) -> FactorSpec {
        FactorSpec { fast: None, slow: None, vol: VolStructure::constant(sigma), corr: Correlations::default(), y_frozen: 0.0 }
    }

    fn gbm(r: f64) -> Dynamics {
        Dynamics {
            a: Arc::new(|x| x),
            b: Arc::new(move |x| r * x),
            rate: Arc::new(move |_| r),
            hazard: Arc::new(|_| 0.0),
            domain: Domain::Line,
        }
    }

    fn cfg(paths: usize, seed: u64) -> McConfig {
        McConfig { n_paths: paths, seed, ..Default::default() }
    }

    #[test]
    fn discounted_gbm_is_a_martingale() {
        let e = simulate_price(&gbm(0.05), &constant(0.3), &McPayoff::new(|x| x, 0.0), 1.0, Start { x: 2.0, ..Default::default() }, &cfg(20_000, 7))
            .unwrap();
        assert!((e.mean - 2.0).abs() < 3.0 * e.std_error, "{} ± {}", e.mean, e.std_error);
    }

    #[test]
    fn bit_identical_for_same_seed() {
        let run = || {
            simulate_price(&gbm(0.05), &constant(0.3), &McPayoff::call(2.0), 0.5, Start { x: 2.0, ..Default::default() }, &cfg(2_000, 42))
                .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn antithetic_keeps_mean_and_cuts_variance() {
        let start = Start { x: 2.0, ..Default::default() };
        let plain = simulate_price(&gbm(0.0), &constant(0.3), &McPayoff::new(|x| x * x, 0.0), 1.0, start, &cfg(20_000, 3)).unwrap();
        let anti = simulate_price(
            &gbm(0.0),
            &constant(0.3),
            &McPayoff::new(|x| x * x, 0.0),
            1.0,
            start,
            &McConfig { antithetic: true, ..cfg(20_000, 3) },
        )
        .unwrap();
        let exact = 4.0 * 0.09f64.exp();
        assert!((plain.mean - exact).abs() < 3.0 * plain.std_error);
        assert!((anti.mean - exact).abs() < 3.0 * anti.std_error);
        assert!(anti.std_error < plain.std_error);
    }

    #[test]
    fn shared_paths_match_single_horizon() {
        let start = Start { x: 2.0, ..Default::default() };
        let payoffs = [McPayoff::call(1.8), McPayoff::call(2.2)];
        let all = simulate(&gbm(0.05), &constant(0.3), &payoffs, &[0.5, 1.0], start, &cfg(1_000, 5)).unwrap();
        let one = simulate_price(&gbm(0.05), &constant(0.3), &payoffs[1], 0.5, start, &cfg(1_000, 5)).unwrap();
        assert_eq!(all[0][1].mean.to_bits(), one.mean.to_bits());
        assert!(all[1][0].mean > all[1][1].mean);
        assert!(simulate(&gbm(0.05), &constant(0.3), &payoffs, &[], start, &cfg(1_000, 5)).is_err());
    }

    #[test]
    fn std_error_scales_with_paths() {
        let start = Start { x: 2.0, ..Default::default() };
        let small = simulate_price(&gbm(0.0), &constant(0.3), &McPayoff::call(2.0), 0.25, start, &cfg(2_000, 11)).unwrap();
        let big = simulate_price(&gbm(0.0), &constant(0.3), &McPayoff::call(2.0), 0.25, start, &cfg(32_000, 11)).unwrap();
        let ratio = small.std_error / big.std_error;
        assert!((ratio / 4.0 - 1.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn survival_modes_agree_under_hazard() {
        let m = JdcevModel::new(0.05, 0.5, -1.0, 10.0).unwrap();
        let d = Dynamics::jdcev(&m);
        let start = Start { x: 50.0, ..Default::default() };
        let w = simulate_price(&d, &constant(10.0), &McPayoff::defaultable_put(50.0), 1.0, start, &cfg(20_000, 5)).unwrap();
        let s = simulate_price(
            &d,
            &constant(10.0),
            &McPayoff::defaultable_put(50.0),
            1.0,
            start,
            &McConfig { survival: SurvivalMode::Sample, ..cfg(20_000, 6) },
        )
        .unwrap();
        let band = 3.0 * (w.std_error.powi(2) + s.std_error.powi(2)).sqrt();
        assert!((w.mean - s.mean).abs() < band, "{} vs {} (band {band})", w.mean, s.mean);
        assert!(s.n_defaulted > 0);
    }

    #[test]
    fn frozen_rate_gives_its_own_yield() {
        let m = VasicekModel::new(1.0, 0.05, 0.02, 0.0).unwrap();
        let y = simulate_bond_yield(&Dynamics::vasicek(&m), &constant(1e-12), 2.0, Start { x: 0.05, ..Default::default() }, &cfg(100, 1))
            .unwrap();
        assert!((y.value - 0.05).abs() < 1e-9);
    }

    #[test]
    fn step_rule() {
        let c = McConfig { epsilon: 0.01, ..Default::default() };
        assert_eq!(c.steps(1.0), 5000);
        assert_eq!(McConfig::default().steps(0.5), 200);
    }

    #[test]
    fn cholesky_reproduces_correlations() {
        let l = cholesky3(-0.5, 0.3, 0.2);
        let dot = |i: usize, j: usize| (0..3).map(|k| l[i][k] * l[j][k]).sum::<f64>();
        assert!((dot(1, 0) + 0.5).abs() < 1e-15 && (dot(2, 0) - 0.3).abs() < 1e-15 && (dot(2, 1) - 0.2).abs() < 1e-15);
        assert!((dot(2, 2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fast_factor_runs_and_rejects_bad_grid() {
        let fs = FactorSpec {
            fast: Some(FastFactorSpec::erf_example(1.0).unwrap()),
            slow: None,
            vol: VolStructure::new(|y, _| 0.3 * y.exp(), |_, _| 0.0),
            corr: Correlations { xy: -0.5, ..Default::default() },
            y_frozen: 0.0,
        };
        let c = McConfig { epsilon: 0.05, n_paths: 200, ..Default::default() };
        let start = Start { x: 2.0, ..Default::default() };
        assert!(simulate_price(&gbm(0.0), &fs, &McPayoff::call(2.0), 0.1, start, &c).is_ok());
        let r = convergence_study(&gbm(0.0), &fs, &McPayoff::call(2.0), 0.1, start, ScaleAxis::Epsilon, &[0.04, 0.03, 0.01], &c, |_| Ok(0.0));
        assert!(r.is_err());
    }
}
