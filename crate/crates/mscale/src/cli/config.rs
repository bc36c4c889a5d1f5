//! Sectioned `key = value` run configuration.
//!
//! ```text
//! [model]
//! kind = barrier
//! rate = 0.05
//! lower = 1.5
//! upper = 2.5
//! strike = 2.0
//!
//! [factors]
//! sigma = 0.34
//! fast_beta = 1
//! rho_xy = -0.5
//!
//! [output]
//! t = 0.0833333333333
//! grid = 1.55:2.45:0.1
//! ```

use crate::averaging::Correlations;
use crate::error::{Error, Result};
use crate::mc::{ScaleConvention, SurvivalMode};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelConfig {
    Barrier { rate: f64, lower: f64, upper: f64, strike: f64 },
    Vasicek { kappa: f64, theta: f64 },
    Jdcev { mu: f64, c: f64, eta: f64, strike: f64 },
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Barrier { .. } => "barrier",
            Self::Vasicek { .. } => "vasicek",
            Self::Jdcev { .. } => "jdcev",
        }
    }
}

/// How the fast-factor volatility `σe^y/N` is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// `N = e^{−β²/2}`, as printed; gives `σ̄ = σe^{β²}`.
    #[default]
    Verbatim,
    /// `N = e^{β²/2}`, so that `σ̄ = σ`.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorConfig {
    pub sigma: f64,
    /// `β` of the fast factor `dY = −y/ε dt + …`, absent for no fast factor.
    pub fast_beta: Option<f64>,
    /// `g` of the slow factor, absent for no slow factor.
    pub slow_g: Option<f64>,
    pub y: f64,
    pub z: f64,
    /// Constant market price of risk `Ω`.
    pub omega: f64,
    pub corr: Correlations,
    pub epsilon: f64,
    pub delta: f64,
    pub normalization: Normalization,
    pub scaling: ScaleConvention,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericsConfig {
    pub terms: usize,
    pub tol_series: f64,
    pub paths: usize,
    /// Steps per unit time; `None` uses the default step rule.
    pub steps: Option<usize>,
    pub seed: u64,
    pub mc: bool,
    pub bridge: bool,
    pub antithetic: bool,
    pub survival: SurvivalMode,
    /// Halving grid for the convergence command.
    pub scales: Vec<f64>,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            terms: crate::spectral::MAX_TERMS,
            tol_series: 1e-8,
            paths: 100_000,
            steps: None,
            seed: 1,
            mc: false,
            bridge: false,
            antithetic: false,
            survival: SurvivalMode::Weight,
            scales: vec![0.04, 0.02, 0.01],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAxis {
    Spot,
    Maturity,
    Strike,
}

impl GridAxis {
    pub fn column(&self) -> &'static str {
        match self {
            Self::Spot => "x",
            Self::Maturity => "t",
            Self::Strike => "strike",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub axis: GridAxis,
    pub grid: Vec<f64>,
    /// Maturity when the grid is not over maturities.
    pub t: f64,
    /// Spot when the grid is not over spots.
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub model: ModelConfig,
    pub factors: FactorConfig,
    pub numerics: NumericsConfig,
    pub output: OutputConfig,
    /// Assumptions not stated by the source parameter set, echoed in output.
    pub assumptions: Vec<String>,
}

impl RunConfig {
    /// Grid value to `(t, x, strike)`.
    pub fn point(&self, g: f64) -> (f64, f64, Option<f64>) {
        let strike = match self.model {
            ModelConfig::Barrier { strike, .. } | ModelConfig::Jdcev { strike, .. } => Some(strike),
            ModelConfig::Vasicek { .. } => None,
        };
        match self.output.axis {
            GridAxis::Spot => (self.output.t, g, strike),
            GridAxis::Maturity => (g, self.output.x, strike),
            GridAxis::Strike => (self.output.t, self.output.x, Some(g)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.output.grid.is_empty() {
            return bad("empty output grid".into());
        }
        if self.output.axis == GridAxis::Strike && matches!(self.model, ModelConfig::Vasicek { .. }) {
            return bad("the bond has no strike to vary".into());
        }
        if self.numerics.terms == 0 || self.numerics.terms > crate::spectral::MAX_TERMS {
            return bad(format!("terms must be in 1..={}", crate::spectral::MAX_TERMS));
        }
        if !(self.numerics.tol_series > 0.0) {
            return bad("tol_series must be positive".into());
        }
        if !(self.factors.epsilon >= 0.0 && self.factors.delta >= 0.0) {
            return bad("epsilon and delta must be nonnegative".into());
        }
        if !(self.factors.sigma > 0.0) {
            return bad("sigma must be positive".into());
        }
        self.factors.corr.validate()?;
        for &g in &self.output.grid {
            let (t, x, k) = self.point(g);
            if !(t > 0.0) || !t.is_finite() {
                return bad(format!("maturity {t} must be positive"));
            }
            if !x.is_finite() {
                return bad(format!("spot {x} must be finite"));
            }
            if let Some(k) = k {
                if !(k > 0.0) {
                    return bad(format!("strike {k} must be positive"));
                }
            }
        }
        Ok(())
    }
}

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

/// Parsed but unconsumed `section.key` entries; keys left unconsumed are
/// reported as unknown.
struct Entries {
    map: BTreeMap<String, Entry>,
    sections: BTreeMap<String, usize>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut sections = BTreeMap::new();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.split(['#', ';']).next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config { line, msg: format!("malformed section header '{s}'") })?
                    .trim()
                    .to_ascii_lowercase();
                if !["model", "factors", "numerics", "output"].contains(&name.as_str()) {
                    return Err(Error::Config { line, msg: format!("unknown section [{name}]") });
                }
                if sections.insert(name.clone(), line).is_some() {
                    return Err(Error::Config { line, msg: format!("section [{name}] repeated") });
                }
                section = Some(name);
                continue;
            }
            let (k, v) = s.split_once('=').ok_or_else(|| Error::Config { line, msg: format!("expected key = value, got '{s}'") })?;
            let sec = section.as_ref().ok_or_else(|| Error::Config { line, msg: "key outside any section".into() })?;
            let key = format!("{sec}.{}", k.trim().to_ascii_lowercase());
            if map.contains_key(&key) {
                return Err(Error::Config { line, msg: format!("duplicate key {key}") });
            }
            map.insert(key, Entry { value: v.trim().to_string(), line, used: false });
        }
        Ok(Self { map, sections })
    }

    fn section_line(&self, key: &str) -> usize {
        let sec = key.split('.').next().unwrap_or("");
        self.sections.get(sec).copied().unwrap_or(0)
    }

    fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        self.map.get_mut(key).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    fn parse_with<T>(&mut self, key: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => f(&v).map(Some).map_err(|msg| Error::Config { line, msg: format!("{key}: {msg}") }),
        }
    }

    fn f64_opt(&mut self, key: &str) -> Result<Option<f64>> {
        self.parse_with(key, |v| {
            v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| format!("'{v}' is not a finite number"))
        })
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    fn f64_req(&mut self, key: &str) -> Result<f64> {
        let line = self.section_line(key);
        self.f64_opt(key)?.ok_or_else(|| Error::Config { line, msg: format!("missing required key {key}") })
    }

    fn uint_opt<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        self.parse_with(key, |v| v.parse::<T>().map_err(|_| format!("'{v}' is not a nonnegative integer")))
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool> {
        Ok(self
            .parse_with(key, |v| match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                _ => Err(format!("'{v}' is not a boolean")),
            })?
            .unwrap_or(default))
    }

    fn choice<T: Copy>(&mut self, key: &str, options: &[(&str, T)]) -> Result<Option<T>> {
        self.parse_with(key, |v| {
            let lv = v.to_ascii_lowercase();
            options.iter().find(|(n, _)| *n == lv).map(|(_, t)| *t).ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                format!("'{v}' is not one of {}", names.join(", "))
            })
        })
    }

    fn finish(self) -> Result<()> {
        match self.map.iter().filter(|(_, e)| !e.used).min_by_key(|(_, e)| e.line) {
            Some((k, e)) => Err(Error::Config { line: e.line, msg: format!("unknown key {k}") }),
            None => Ok(()),
        }
    }
}

/// `a:b:step` (inclusive) or a comma-separated list.
pub fn parse_grid(s: &str) -> std::result::Result<Vec<f64>, String> {
    let num = |p: &str| p.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| format!("'{p}' is not a number"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err("range grid must be start:stop:step".into());
        }
        let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(h > 0.0) || b < a {
            return Err("range grid needs start <= stop and step > 0".into());
        }
        let n = ((b - a) / h + 1e-9).floor() as usize;
        if n > 100_000 {
            return Err("range grid has too many points".into());
        }
        return Ok((0..=n).map(|i| a + i as f64 * h).collect());
    }
    s.split(',').map(num).collect()
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut e = Entries::parse(text)?;
    let kind_line = e.section_line("model.kind");
    let kind = e
        .choice("model.kind", &[("barrier", 0u8), ("vasicek", 1), ("jdcev", 2)])?
        .ok_or_else(|| Error::Config { line: kind_line, msg: "missing required key model.kind".into() })?;
    let model = match kind {
        0 => ModelConfig::Barrier {
            rate: e.f64_or("model.rate", 0.0)?,
            lower: e.f64_req("model.lower")?,
            upper: e.f64_req("model.upper")?,
            strike: e.f64_req("model.strike")?,
        },
        1 => ModelConfig::Vasicek { kappa: e.f64_or("model.kappa", 1.0)?, theta: e.f64_req("model.theta")? },
        _ => ModelConfig::Jdcev {
            mu: e.f64_req("model.mu")?,
            c: e.f64_req("model.c")?,
            eta: e.f64_req("model.eta")?,
            strike: e.f64_or("model.strike", 1.0)?,
        },
    };
    let mut assumptions = Vec::new();
    if let ModelConfig::Vasicek { .. } = model {
        if !e.map.contains_key("model.kappa") {
            assumptions.push("kappa=1 assumed".to_string());
        }
    }
    let factors = FactorConfig {
        sigma: e.f64_req("factors.sigma")?,
        fast_beta: e.f64_opt("factors.fast_beta")?,
        slow_g: e.f64_opt("factors.slow_g")?,
        y: e.f64_or("factors.y", 0.0)?,
        z: e.f64_or("factors.z", 0.0)?,
        omega: e.f64_or("factors.omega", 0.0)?,
        corr: Correlations {
            xy: e.f64_or("factors.rho_xy", 0.0)?,
            xz: e.f64_or("factors.rho_xz", 0.0)?,
            yz: e.f64_or("factors.rho_yz", 0.0)?,
        },
        epsilon: e.f64_or("factors.epsilon", 0.01)?,
        delta: e.f64_or("factors.delta", 0.01)?,
        normalization: e
            .choice("factors.normalization", &[("verbatim", Normalization::Verbatim), ("unit", Normalization::Unit)])?
            .unwrap_or_default(),
        scaling: e
            .choice("factors.scaling", &[("generator", ScaleConvention::Generator), ("printed", ScaleConvention::Printed)])?
            .unwrap_or_default(),
    };
    let d = NumericsConfig::default();
    let numerics = NumericsConfig {
        terms: e.uint_opt("numerics.terms")?.unwrap_or(d.terms),
        tol_series: e.f64_or("numerics.tol_series", d.tol_series)?,
        paths: e.uint_opt("numerics.paths")?.unwrap_or(d.paths),
        steps: e.uint_opt("numerics.steps")?,
        seed: e.uint_opt("numerics.seed")?.unwrap_or(d.seed),
        mc: e.bool_or("numerics.mc", d.mc)?,
        bridge: e.bool_or("numerics.bridge", d.bridge)?,
        antithetic: e.bool_or("numerics.antithetic", d.antithetic)?,
        survival: e
            .choice("numerics.survival", &[("sample", SurvivalMode::Sample), ("weight", SurvivalMode::Weight)])?
            .unwrap_or(d.survival),
        scales: e.parse_with("numerics.scales", parse_grid)?.unwrap_or(d.scales),
    };
    let default_axis = match model {
        ModelConfig::Barrier { .. } => GridAxis::Spot,
        ModelConfig::Vasicek { .. } => GridAxis::Maturity,
        ModelConfig::Jdcev { .. } => GridAxis::Strike,
    };
    let axis = e
        .choice("output.axis", &[("x", GridAxis::Spot), ("t", GridAxis::Maturity), ("strike", GridAxis::Strike)])?
        .unwrap_or(default_axis);
    let grid_line = e.section_line("output.grid");
    let grid = e
        .parse_with("output.grid", parse_grid)?
        .ok_or_else(|| Error::Config { line: grid_line, msg: "missing required key output.grid".into() })?;
    let output = OutputConfig {
        path: e.raw("output.path").map(|(v, _)| PathBuf::from(v)),
        axis,
        grid,
        t: e.f64_or("output.t", 1.0)?,
        x: e.f64_or("output.x", 1.0)?,
    };
    let name = e.raw("output.name").map(|(v, _)| v).unwrap_or_else(|| model.name().to_string());
    e.finish()?;
    let cfg = RunConfig { name, model, factors, numerics, output, assumptions };
    cfg.validate().map_err(|err| match err {
        Error::InvalidArgument(msg) => Error::Config { line: 0, msg },
        other => other,
    })?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BARRIER: &str = "\
[model]
kind = barrier
rate = 0.05
lower = 1.5
upper = 2.5
strike = 2.0   # at the money

[factors]
sigma = 0.34
fast_beta = 1
rho_xy = -0.5

[output]
t = 0.08333333333333333
grid = 1.6:2.4:0.2
";

    #[test]
    fn parses_a_barrier_run() {
        let c = parse_config(BARRIER).unwrap();
        assert_eq!(c.model, ModelConfig::Barrier { rate: 0.05, lower: 1.5, upper: 2.5, strike: 2.0 });
        assert_eq!(c.factors.fast_beta, Some(1.0));
        assert_eq!(c.factors.slow_g, None);
        assert_eq!(c.output.axis, GridAxis::Spot);
        assert_eq!(c.output.grid.len(), 5);
        assert!((c.output.grid[4] - 2.4).abs() < 1e-12);
        assert_eq!(c.numerics, NumericsConfig::default());
        assert_eq!(c.point(2.0), (0.08333333333333333, 2.0, Some(2.0)));
    }

    #[test]
    fn unknown_key_is_a_line_numbered_error() {
        let text = BARRIER.replace("rho_xy = -0.5", "rho_xy = -0.5\nrho_xq = 0.1");
        assert_eq!(parse_config(&text), Err(Error::Config { line: 12, msg: "unknown key factors.rho_xq".into() }));
    }

    #[test]
    fn malformed_lines_report_their_line() {
        let text = BARRIER.replace("sigma = 0.34", "sigma 0.34");
        assert!(matches!(parse_config(&text), Err(Error::Config { line: 9, .. })));
        let text = BARRIER.replace("sigma = 0.34", "sigma = abc");
        assert!(matches!(parse_config(&text), Err(Error::Config { line: 9, .. })));
        let text = BARRIER.replace("[output]", "[outputs]");
        assert!(matches!(parse_config(&text), Err(Error::Config { line: 13, .. })));
        let text = BARRIER.replace("lower = 1.5\n", "");
        assert!(matches!(parse_config(&text), Err(Error::Config { line: 1, .. })));
    }

    #[test]
    fn vasicek_without_kappa_is_flagged() {
        let text = "[model]\nkind = vasicek\ntheta = 0.05\n[factors]\nsigma = 0.02\n[output]\nx = 0.03\ngrid = 0.5, 1, 2\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.assumptions, vec!["kappa=1 assumed".to_string()]);
        assert_eq!(c.output.axis, GridAxis::Maturity);
        let with_strike_axis = format!("{text}axis = strike\n");
        assert!(parse_config(&with_strike_axis).is_err());
    }

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("1, 2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_grid("30:70:10").unwrap(), vec![30.0, 40.0, 50.0, 60.0, 70.0]);
        assert!(parse_grid("1:0:1").is_err());
        assert!(parse_grid("1:2").is_err());
    }
}
