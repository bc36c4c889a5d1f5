//! Feller classification of the endpoints of a [`DiffusionSpec`].
//!
//! `I` and `J` are accumulated in log space over panels that approach the
//! endpoint geometrically: the distance to a finite endpoint halves from one
//! panel to the next, and the extent toward an infinite endpoint doubles.

use super::quad::GaussLegendre;
use super::{DiffusionSpec, RegularBehavior};
use crate::error::{Error, Result};
use std::f64::consts::LN_10;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndpointClass {
    Natural,
    Exit,
    Entrance,
    Regular,
}

impl EndpointClass {
    fn from_finiteness(i_finite: bool, j_finite: bool) -> Self {
        match (i_finite, j_finite) {
            (false, false) => Self::Natural,
            (true, false) => Self::Exit,
            (false, true) => Self::Entrance,
            (true, true) => Self::Regular,
        }
    }
}

impl fmt::Display for EndpointClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Natural => "natural",
            Self::Exit => "exit",
            Self::Entrance => "entrance",
            Self::Regular => "regular",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    None,
    /// `ψ → 0`
    DirichletZero,
    /// `ψ′/𝔰 → 0`
    ReflectingFluxZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointReport {
    pub location: f64,
    pub class: EndpointClass,
    /// `+∞` when divergent.
    pub i: f64,
    pub j: f64,
    pub condition: BoundaryCondition,
    /// Classification of the same diffusion with `k ≡ 0`.
    pub class_without_killing: EndpointClass,
}

impl EndpointReport {
    pub fn label(&self) -> String {
        match (self.class, self.condition) {
            (EndpointClass::Regular, BoundaryCondition::DirichletZero) => "regular(killing)".into(),
            (EndpointClass::Regular, _) => "regular(reflecting)".into(),
            (c, _) => c.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryReport {
    pub lower: EndpointReport,
    pub upper: EndpointReport,
}

impl fmt::Display for BoundaryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {}", self.lower.label(), self.upper.label())
    }
}

const MAX_PANELS: usize = 60;
const LN_CAP: f64 = 12.0 * LN_10;
const SLOW_RATIO: f64 = 0.97;

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn log_sum(it: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = it.into_iter().collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Limit {
    /// Log of the limiting value.
    Finite(f64),
    Infinite,
}

/// Decides whether `Σ exp(ln_incr[j])` converges.
fn limit_of(ln_incr: &[f64], endpoint: &'static str, what: &str) -> Result<Limit> {
    let ln15 = 1.5f64.ln();
    let mut cum = Vec::with_capacity(ln_incr.len());
    let mut acc = f64::NEG_INFINITY;
    for (j, &p) in ln_incr.iter().enumerate() {
        if p.is_nan() {
            return Err(Error::Indeterminate { endpoint, detail: format!("{what}: undefined integrand") });
        }
        if p == f64::INFINITY {
            return Ok(Limit::Infinite);
        }
        acc = log_add(acc, p);
        cum.push(acc);
        if j >= 3
            && acc > LN_CAP
            && (1..=3).all(|d| cum[j + 1 - d] - cum[j - d] > ln15)
        {
            return Ok(Limit::Infinite);
        }
        if j >= 4 {
            let last = &ln_incr[j - 3..=j];
            if last.iter().all(|&x| x == f64::NEG_INFINITY) {
                return Ok(Limit::Finite(acc));
            }
            let ratios: Vec<f64> = last.windows(2).map(|w| (w[1] - w[0]).exp()).collect();
            if ratios.iter().all(|&r| r <= 0.9) {
                let rho = ratios[2];
                let tail = p + (rho / (1.0 - rho)).ln();
                if tail - acc < -12.0 * LN_10 {
                    return Ok(Limit::Finite(log_add(acc, tail)));
                }
            }
        }
    }
    // Neither rule fired before the panels ran out: decide on the trend.
    let n = ln_incr.len();
    if n < 6 {
        return Err(Error::Indeterminate { endpoint, detail: format!("{what}: only {n} panels available") });
    }
    let ratios: Vec<f64> = ln_incr[n - 5..].windows(2).map(|w| (w[1] - w[0]).exp()).collect();
    if ratios.iter().all(|&r| r >= SLOW_RATIO) {
        return Ok(Limit::Infinite);
    }
    // Increments levelling off toward a constant: logarithmic growth.
    let levelling = ratios[1..].windows(2).all(|w| w[1] > w[0] && (1.0 - w[1]) < (1.0 - w[0]) / 1.5);
    if levelling && ratios[3] > 0.9 {
        return Ok(Limit::Infinite);
    }
    if ratios.iter().all(|&r| r < SLOW_RATIO) {
        let rho = ratios.iter().cloned().fold(0.0, f64::max);
        return Ok(Limit::Finite(log_add(acc, ln_incr[n - 1] + (rho / (1.0 - rho)).ln())));
    }
    Err(Error::Indeterminate {
        endpoint,
        detail: format!("{what}: partial sums neither settle nor grow (last panel ratios {ratios:?})"),
    })
}

struct Node {
    ln_w: f64,
    /// `log ∫ 𝔰` from `x0` to the node.
    ln_from_ref: f64,
    /// `log ∫ 𝔰` from the node to the panel end, accumulated backward.
    ln_rem: f64,
    ln_m: f64,
    ln_one_k: f64,
    /// Steep panels: `log` of the `I` and `J` integrands without the
    /// killing weight, formed without adding two huge logarithms.
    i_direct: Option<f64>,
    j_direct: Option<f64>,
}

struct Panel {
    ln_scale: f64,
    nodes: Vec<Node>,
}

/// Largest change of `log 𝔰` or `log 𝔪` allowed across one subpanel.
const MAX_LOG_STEP: f64 = 0.5;
/// Total subpanels per endpoint; the walk stops early once exhausted.
const SUBPANEL_BUDGET: usize = 20_000;
/// Panels needing more subpanels than this try the steep estimate first.
const STEEP_THRESHOLD: usize = 2_000;
const STEEP_SUBPANELS: usize = 8;
/// Largest `|γ′|/γ²` accepted by the steep estimate.
const WATSON_MAX: f64 = 1e-2;

fn panel_points(spec: &DiffusionSpec, toward: f64) -> Vec<f64> {
    let x0 = spec.x0;
    let mut pts = vec![x0];
    if toward.is_finite() {
        let d = x0 - toward;
        let floor = 1e-13 * toward.abs().max(d.abs());
        for j in 1..=MAX_PANELS {
            let p = toward + d * (-(j as f64)).exp2();
            if (p - toward).abs() < floor {
                break;
            }
            pts.push(p);
        }
    } else {
        let len = spec.length_scale.unwrap_or_else(|| {
            let a = (spec.a)(x0).abs();
            a.clamp(1e-6 * x0.abs().max(1.0), 1e6)
        });
        let dir = toward.signum();
        for j in 1..=MAX_PANELS {
            pts.push(x0 + dir * len * ((j as f64).exp2() - 1.0));
        }
    }
    pts
}

/// Evaluates `log 𝔰` and `log 𝔪` along the walk, stepping the drift
/// integral from the previous point when no closed form is registered.
struct LogDensities<'a> {
    spec: &'a DiffusionSpec,
    last: (f64, f64),
}

impl<'a> LogDensities<'a> {
    fn new(spec: &'a DiffusionSpec) -> Result<Self> {
        let x0 = spec.x0;
        let ls = spec.log_scale_density(x0)?;
        Ok(Self { spec, last: (x0, ls) })
    }

    fn at(&mut self, x: f64) -> Result<(f64, f64)> {
        let spec = self.spec;
        if let (Some(s), Some(m)) = (&spec.log_scale, &spec.log_speed) {
            return Ok((s(x), m(x)));
        }
        let (a, b) = (&spec.a, &spec.b);
        let step = super::quad::integrate(
            |y| {
                let ay = a(y);
                2.0 * b(y) / (ay * ay)
            },
            self.last.0,
            x,
            spec.tol,
        )?;
        let ls = self.last.1 - step.value;
        self.last = (x, ls);
        let ax = (spec.a)(x).abs();
        Ok((ls, std::f64::consts::LN_2 - 2.0 * ax.ln() - ls))
    }
}

/// Gauss-Legendre rule with its integration matrix
/// `q[i][j] = ∫_{-1}^{t_i} ℓ_j(t) dt` over the Lagrange basis.
struct Rule {
    t: Vec<f64>,
    w: Vec<f64>,
    q: Vec<Vec<f64>>,
}

impl Rule {
    fn new(n: usize) -> Self {
        let gl = GaussLegendre::new(n);
        let (t, w) = (gl.nodes, gl.weights);
        let lagrange = |j: usize, x: f64| -> f64 {
            (0..n).filter(|&m| m != j).map(|m| (x - t[m]) / (t[j] - t[m])).product()
        };
        let q = (0..n)
            .map(|i| {
                let half = 0.5 * (t[i] + 1.0);
                (0..n)
                    .map(|j| (0..n).map(|k| w[k] * lagrange(j, -1.0 + half * (t[k] + 1.0))).sum::<f64>() * half)
                    .collect()
            })
            .collect();
        Self { t, w, q }
    }
}

fn build_panels(spec: &DiffusionSpec, pts: &[f64]) -> Result<Vec<Panel>> {
    let rule = Rule::new(20);
    let mut dens = LogDensities::new(spec)?;
    let mut probe = LogDensities::new(spec)?;
    let mut budget = SUBPANEL_BUDGET;
    let mut panels = Vec::with_capacity(pts.len());
    let mut ln_ref = f64::NEG_INFINITY;
    // log(𝔰𝔪) − log(2/a²), zero unless closed forms carry their own constants
    let (ls0, lm0) = probe.at(spec.x0)?;
    let offset = ls0 + lm0 - (std::f64::consts::LN_2 - 2.0 * (spec.a)(spec.x0).abs().ln());
    for win in pts.windows(2) {
        let (q0, q1) = (win[0], win[1]);
        // Size the subdivision from the variation of the log densities.
        let mut var = 0.0;
        let mut prev = probe.at(q0)?;
        for k in 1..=8 {
            let cur = probe.at(q0 + (q1 - q0) * k as f64 / 8.0)?;
            var += (cur.0 - prev.0).abs() + (cur.1 - prev.1).abs();
            prev = cur;
        }
        if !var.is_finite() {
            break;
        }
        let n_sub = ((var / MAX_LOG_STEP).ceil() as usize).max(4);
        if n_sub > STEEP_THRESHOLD {
            if let Some(p) = steep_panel(spec, &mut dens, &rule, q0, q1, offset, ln_ref)? {
                ln_ref = log_add(ln_ref, p.ln_scale);
                panels.push(p);
                continue;
            }
        }
        if n_sub > budget {
            break;
        }
        budget -= n_sub;

        let mut nodes = Vec::with_capacity(n_sub * rule.t.len());
        let mut ln_panel = f64::NEG_INFINITY;
        // log total of each subpanel
        let mut sub_totals = Vec::with_capacity(n_sub);
        for sub in 0..n_sub {
            let v0 = q0 + (q1 - q0) * sub as f64 / n_sub as f64;
            let v1 = q0 + (q1 - q0) * (sub + 1) as f64 / n_sub as f64;
            let h = 0.5 * (v1 - v0).abs();
            let mut ls = Vec::with_capacity(rule.t.len());
            let mut xs = Vec::with_capacity(rule.t.len());
            for &t in &rule.t {
                let x = v0 + 0.5 * (v1 - v0) * (t + 1.0);
                let (s, m) = dens.at(x)?;
                ls.push((s, m));
                xs.push(x);
            }
            let top = ls.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            let scaled: Vec<f64> = ls.iter().map(|p| (p.0 - top).exp()).collect();
            let total: f64 = rule.w.iter().zip(&scaled).map(|(w, s)| w * s).sum::<f64>() * h;
            for i in 0..rule.t.len() {
                let part: f64 = rule.q[i].iter().zip(&scaled).map(|(q, s)| q * s).sum::<f64>() * h;
                let ln_part = log_add(ln_panel, top + part.max(f64::MIN_POSITIVE).ln());
                nodes.push(Node {
                    ln_w: (rule.w[i] * h).ln(),
                    ln_from_ref: log_add(ln_ref, ln_part),
                    // within-subpanel remainder for now; later subpanels added below
                    ln_rem: top + (total - part).max(f64::MIN_POSITIVE * total).ln(),
                    ln_m: ls[i].1,
                    ln_one_k: spec.killing(xs[i]).abs().ln_1p(),
                    i_direct: None,
                    j_direct: None,
                });
            }
            sub_totals.push(top + total.ln());
            ln_panel = log_add(ln_panel, top + total.ln());
        }
        let per = rule.t.len();
        let mut later = f64::NEG_INFINITY;
        for sub in (0..n_sub).rev() {
            for nd in &mut nodes[sub * per..(sub + 1) * per] {
                nd.ln_rem = log_add(nd.ln_rem, later);
            }
            later = log_add(later, sub_totals[sub]);
        }
        ln_ref = log_add(ln_ref, ln_panel);
        panels.push(Panel { ln_scale: ln_panel, nodes });
    }
    Ok(panels)
}

/// A panel across which `log 𝔰` changes so fast that every partial integral
/// of `𝔰` is dominated by the end where `𝔰` is largest, so `∫𝔰 ≈ 𝔰/|γ|` with
/// `γ = (log 𝔰)′ = −2b/a²`. Then `𝒮·𝔪 ≈ 2/(a²|γ|) = 1/|b|`, which is smooth
/// even where `𝔰` and `𝔪` are not representable. `None` when `γ` changes
/// sign or varies too fast for the one-term estimate.
fn steep_panel(
    spec: &DiffusionSpec,
    dens: &mut LogDensities,
    rule: &Rule,
    q0: f64,
    q1: f64,
    offset: f64,
    ln_ref: f64,
) -> Result<Option<Panel>> {
    let gamma = |x: f64| {
        let a = (spec.a)(x);
        -2.0 * (spec.b)(x) / (a * a)
    };
    let width = q1 - q0;
    let dir = width.signum();
    let mut sign = 0.0;
    for k in 0..=8 {
        let x = q0 + width * k as f64 / 8.0;
        let g = gamma(x);
        let h = 1e-4 * width.abs();
        let dg = (gamma(x + h) - gamma(x - h)) / (2.0 * h);
        let ok = g.is_finite()
            && g != 0.0
            && (sign == 0.0 || g.signum() == sign)
            && (dg / (g * g)).abs() <= WATSON_MAX
            && g.abs() * width.abs() >= 100.0;
        if !ok {
            return Ok(None);
        }
        sign = g.signum();
    }
    // 𝔰 grows along the walk, toward the endpoint
    let growing = sign * dir > 0.0;
    let ln_two_over_a2 = |x: f64| std::f64::consts::LN_2 - 2.0 * (spec.a)(x).abs().ln() + offset;
    let end = if growing { q1 } else { q0 };
    let ln_scale = dens.at(end)?.0 - gamma(end).abs().ln();

    let mut nodes = Vec::with_capacity(STEEP_SUBPANELS * rule.t.len());
    for sub in 0..STEEP_SUBPANELS {
        let v0 = q0 + width * sub as f64 / STEEP_SUBPANELS as f64;
        let v1 = q0 + width * (sub + 1) as f64 / STEEP_SUBPANELS as f64;
        let h = 0.5 * (v1 - v0).abs();
        for (&t, &w) in rule.t.iter().zip(&rule.w) {
            let x = v0 + 0.5 * (v1 - v0) * (t + 1.0);
            let (ls, lm) = dens.at(x)?;
            let ln_g = gamma(x).abs().ln();
            let local = ln_two_over_a2(x) - ln_g;
            let (ln_from_ref, ln_rem, i_direct, j_direct) = if growing {
                // 𝒮 from x0 is dominated by the node itself
                (log_add(ln_ref, ls - ln_g), ln_scale, None, Some(log_add(ln_ref + lm, local)))
            } else {
                // 𝒮 toward the endpoint is dominated by the node itself
                (log_add(ln_ref, ln_scale), ls - ln_g, Some(local), None)
            };
            nodes.push(Node {
                ln_w: (w * h).ln(),
                ln_from_ref,
                ln_rem,
                ln_m: lm,
                ln_one_k: spec.killing(x).abs().ln_1p(),
                i_direct,
                j_direct,
            });
        }
    }
    Ok(Some(Panel { ln_scale, nodes }))
}

struct EndpointIntegrals {
    i: Limit,
    j: Limit,
    i0: Limit,
    j0: Limit,
}

fn endpoint_integrals(spec: &DiffusionSpec, toward: f64, endpoint: &'static str) -> Result<EndpointIntegrals> {
    let pts = panel_points(spec, toward);
    let panels = build_panels(spec, &pts)?;

    let j_series = |with_k: bool| -> Vec<f64> {
        panels
            .iter()
            .map(|p| {
                log_sum(p.nodes.iter().map(|n| {
                    n.ln_w + n.j_direct.unwrap_or(n.ln_from_ref + n.ln_m) + if with_k { n.ln_one_k } else { 0.0 }
                }))
            })
            .collect()
    };
    let j = limit_of(&j_series(true), endpoint, "J")?;
    let j0 = limit_of(&j_series(false), endpoint, "J without killing")?;

    let scale_incr: Vec<f64> = panels.iter().map(|p| p.ln_scale).collect();
    let (i, i0) = match limit_of(&scale_incr, endpoint, "scale function")? {
        Limit::Infinite => (Limit::Infinite, Limit::Infinite),
        Limit::Finite(ln_total) => {
            let n = panels.len();
            // log of Σ_{m > j} panel scale, plus the extrapolated remainder.
            let mut ln_cum = f64::NEG_INFINITY;
            for p in &panels {
                ln_cum = log_add(ln_cum, p.ln_scale);
            }
            let ln_rest = if ln_total > ln_cum {
                ln_total + (-(ln_cum - ln_total).exp()).ln_1p()
            } else {
                f64::NEG_INFINITY
            };
            let mut suffix = vec![ln_rest; n + 1];
            for m in (0..n).rev() {
                suffix[m] = log_add(suffix[m + 1], panels[m].ln_scale);
            }
            let i_series = |with_k: bool| -> Vec<f64> {
                panels
                    .iter()
                    .enumerate()
                    .map(|(m, p)| {
                        log_sum(p.nodes.iter().map(|nd| {
                            let ln_im = nd.i_direct.unwrap_or_else(|| log_add(suffix[m + 1], nd.ln_rem) + nd.ln_m);
                            nd.ln_w + ln_im + if with_k { nd.ln_one_k } else { 0.0 }
                        }))
                    })
                    .collect()
            };
            (limit_of(&i_series(true), endpoint, "I")?, limit_of(&i_series(false), endpoint, "I without killing")?)
        }
    };
    Ok(EndpointIntegrals { i, j, i0, j0 })
}

fn report(spec: &DiffusionSpec, toward: f64, endpoint: &'static str, behavior: RegularBehavior) -> Result<EndpointReport> {
    let e = endpoint_integrals(spec, toward, endpoint)?;
    let finite = |l: Limit| matches!(l, Limit::Finite(_));
    let value = |l: Limit| match l {
        Limit::Finite(v) => v.exp(),
        Limit::Infinite => f64::INFINITY,
    };
    let class = EndpointClass::from_finiteness(finite(e.i), finite(e.j));
    let condition = match class {
        EndpointClass::Natural => BoundaryCondition::None,
        EndpointClass::Exit => BoundaryCondition::DirichletZero,
        EndpointClass::Entrance => BoundaryCondition::ReflectingFluxZero,
        EndpointClass::Regular => match behavior {
            RegularBehavior::Killing => BoundaryCondition::DirichletZero,
            RegularBehavior::Reflecting => BoundaryCondition::ReflectingFluxZero,
        },
    };
    Ok(EndpointReport {
        location: toward,
        class,
        i: value(e.i),
        j: value(e.j),
        condition,
        class_without_killing: EndpointClass::from_finiteness(finite(e.i0), finite(e.j0)),
    })
}

/// Classifies both endpoints from the `I`/`J` integrals, with `1 + |k|`
/// weighting the speed measure.
pub fn classify_boundaries(spec: &DiffusionSpec) -> Result<BoundaryReport> {
    Ok(BoundaryReport {
        lower: report(spec, spec.lower, "lower", spec.lower_regular)?,
        upper: report(spec, spec.upper, "upper", spec.upper_regular)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::DiffusionSpec;

    fn classes(s: &DiffusionSpec) -> (EndpointClass, EndpointClass) {
        let r = classify_boundaries(s).unwrap();
        (r.lower.class, r.upper.class)
    }

    #[test]
    fn brownian_motion_on_line_is_natural() {
        let s = DiffusionSpec::new(|_| 1.0, |_| 0.0, f64::NEG_INFINITY, f64::INFINITY, 0.0).unwrap();
        assert_eq!(classes(&s), (EndpointClass::Natural, EndpointClass::Natural));
    }

    #[test]
    fn brownian_motion_on_interval_is_regular() {
        let s = DiffusionSpec::new(|_| 1.0, |_| 0.0, -1.0, 2.0, 0.3).unwrap();
        let r = classify_boundaries(&s).unwrap();
        assert_eq!((r.lower.class, r.upper.class), (EndpointClass::Regular, EndpointClass::Regular));
        // J₂ = ∫_y^{e₂} (x − y) 2 dx = (e₂ − y)²
        assert!((r.upper.j - 1.7f64.powi(2)).abs() < 1e-8, "{}", r.upper.j);
        assert_eq!(r.to_string(), "regular(killing) / regular(killing)");
    }

    #[test]
    fn bessel_origin_by_dimension() {
        // dX = (δ−1)/(2X) dt + dW: 0 is regular for δ < 2 (absent killing),
        // entrance for δ ≥ 2; +∞ is natural.
        for (delta, want) in [(1.5, EndpointClass::Regular), (3.0, EndpointClass::Entrance)] {
            let s = DiffusionSpec::new(|_| 1.0, move |x| (delta - 1.0) / (2.0 * x), 0.0, f64::INFINITY, 1.0).unwrap();
            assert_eq!(classes(&s), (want, EndpointClass::Natural), "delta = {delta}");
        }
        // δ ≤ 0: the origin is reached but the process cannot start there.
        let s = DiffusionSpec::new(|_| 1.0, |x| -0.75 / x, 0.0, f64::INFINITY, 1.0).unwrap();
        assert_eq!(classes(&s).0, EndpointClass::Exit);
    }

    #[test]
    fn feller_sqrt_diffusion() {
        // dX = (p − X)dt + √(2X) dW: 0 is entrance for p ≥ 1, regular for 0 < p < 1.
        for (p, want) in [(1.5, EndpointClass::Entrance), (0.5, EndpointClass::Regular)] {
            let s = DiffusionSpec::new(|x: f64| (2.0 * x).sqrt(), move |x| p - x, 0.0, f64::INFINITY, 1.0).unwrap();
            assert_eq!(classes(&s), (want, EndpointClass::Natural), "p = {p}");
        }
    }

    #[test]
    fn reflecting_choice_changes_condition_only() {
        let s = DiffusionSpec::new(|_| 1.0, |_| 0.0, 0.0, 1.0, 0.5)
            .unwrap()
            .with_regular_behavior(RegularBehavior::Reflecting, RegularBehavior::Killing);
        let r = classify_boundaries(&s).unwrap();
        assert_eq!(r.lower.condition, BoundaryCondition::ReflectingFluxZero);
        assert_eq!(r.upper.condition, BoundaryCondition::DirichletZero);
        assert_eq!(r.to_string(), "regular(reflecting) / regular(killing)");
    }

    #[test]
    fn repulsive_ou_infinity_is_natural() {
        // 𝔰 = e^{−x²}: both integrals grow like log x, through a scale
        // density that underflows across each panel
        let spec = DiffusionSpec::new(|_| 1.0, |x| x, f64::NEG_INFINITY, f64::INFINITY, 0.5).unwrap();
        assert_eq!(classes(&spec), (EndpointClass::Natural, EndpointClass::Natural));
    }

    #[test]
    fn narrow_ou_is_natural() {
        let spec = DiffusionSpec::new(|_| 1e-3, |x| 0.05 - x, f64::NEG_INFINITY, f64::INFINITY, 0.05).unwrap();
        assert_eq!(classes(&spec), (EndpointClass::Natural, EndpointClass::Natural));
    }

    #[test]
    fn cubic_restoring_drift_gives_entrance() {
        // 𝒮𝔪 ≈ 1/|b| = |x|⁻³ is integrable at both ends
        let spec = DiffusionSpec::new(|_| 1.0, |x| -x * x * x, f64::NEG_INFINITY, f64::INFINITY, 0.3).unwrap();
        assert_eq!(classes(&spec), (EndpointClass::Entrance, EndpointClass::Entrance));
    }

    #[test]
    fn series_rules() {
        let geometric: Vec<f64> = (0..40).map(|j| -(j as f64) * 2f64.ln()).collect();
        match limit_of(&geometric, "lower", "t").unwrap() {
            Limit::Finite(v) => assert!((v.exp() - 2.0).abs() < 1e-10),
            Limit::Infinite => panic!("geometric series converges"),
        }
        let flat = vec![0.0; 60];
        assert_eq!(limit_of(&flat, "lower", "t").unwrap(), Limit::Infinite);
        let doubling: Vec<f64> = (0..60).map(|j| j as f64 * 2f64.ln()).collect();
        assert_eq!(limit_of(&doubling, "lower", "t").unwrap(), Limit::Infinite);
        let wobble: Vec<f64> = (0..60).map(|j| if j % 2 == 0 { 0.0 } else { -3.0 }).collect();
        assert!(matches!(limit_of(&wobble, "upper", "t"), Err(Error::Indeterminate { .. })));
    }
}
