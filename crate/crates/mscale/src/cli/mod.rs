//! Command-line front end.

pub mod config;
pub mod csv;
pub mod experiment;
pub mod presets;
pub mod selftest;

use crate::error::{Error, Result};
use crate::mc::{ScaleAxis, ScaleConvention, SurvivalMode};
use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{ModelConfig, Normalization, RunConfig};
use csv::{Cell, Table};
use experiment::Setup;
use presets::{Preset, Variant};
use std::path::PathBuf;

/// Exit status for a clean run.
pub const EXIT_CLEAN: i32 = 0;
/// Some row failed its convergence or inversion check.
pub const EXIT_FLAGGED: i32 = 2;
pub const EXIT_ERROR: i32 = 1;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "MSCALE_THREADS";

/// Row flag bits.
pub const FLAG_ASSUMED: u64 = 1;
pub const FLAG_UNCONVERGED: u64 = 2;
pub const FLAG_SMALL_T: u64 = 4;
pub const FLAG_NO_OBSERVABLE: u64 = 8;

#[derive(Debug, Parser)]
#[command(name = "mscale", version, about = "Multiscale eigenfunction-expansion pricer with a Monte Carlo oracle")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Boundary classification of the averaged operator.
    Classify(RunArgs),
    /// Prices (and yields or implied vols) over the output grid.
    Price(RunArgs),
    /// Error of the expansion against Monte Carlo over a halving scale grid.
    Convergence(RunArgs),
    /// Runs the invariant suites.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SurvivalArg {
    Sample,
    Weight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    Verbatim,
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScalingArg {
    Generator,
    Printed,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Fast-factor or slow-factor side of a preset.
    #[arg(long, value_enum, default_value = "fast", requires = "preset")]
    pub variant: Variant,
    #[arg(long, value_name = "N")]
    pub terms: Option<usize>,
    #[arg(long, value_name = "E")]
    pub epsilon: Option<f64>,
    #[arg(long, value_name = "D")]
    pub delta: Option<f64>,
    #[arg(long, value_name = "P")]
    pub paths: Option<usize>,
    /// Monte Carlo steps per unit time.
    #[arg(long, value_name = "S")]
    pub steps: Option<usize>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Append Monte Carlo columns.
    #[arg(long)]
    pub mc: bool,
    /// Brownian-bridge barrier correction.
    #[arg(long)]
    pub bridge: bool,
    #[arg(long)]
    pub antithetic: bool,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub survival: Option<SurvivalArg>,
    #[arg(long, value_name = "T")]
    pub tol_series: Option<f64>,
    /// Fast-factor volatility normalization.
    #[arg(long, value_enum)]
    pub normalization: Option<NormalizationArg>,
    /// Noise scaling of the simulated factors.
    #[arg(long, value_enum)]
    pub scaling: Option<ScalingArg>,
}

#[derive(Debug, Clone, Args)]
pub struct SelftestArgs {
    /// Multiplies every suite tolerance.
    #[arg(long, default_value_t = 1.0)]
    pub tol_scale: f64,
    /// Perturb the largest closed-form matrix element by 1e-3 (mutation check).
    #[arg(long, hide = true)]
    pub perturb_elements: bool,
}

/// Config file or preset, with flag overrides applied and revalidated.
pub fn resolve(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match (&args.config, args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            config::parse_config(&text)?
        }
        (None, Some(p)) => presets::preset(p, args.variant),
        (None, None) => return Err(Error::InvalidArgument("one of --config or --preset is required".into())),
    };
    let n = &mut cfg.numerics;
    if let Some(v) = args.terms {
        n.terms = v;
    }
    if let Some(v) = args.paths {
        n.paths = v;
    }
    if args.steps.is_some() {
        n.steps = args.steps;
    }
    if let Some(v) = args.seed {
        n.seed = v;
    }
    if let Some(v) = args.tol_series {
        n.tol_series = v;
    }
    if let Some(s) = args.survival {
        n.survival = match s {
            SurvivalArg::Sample => SurvivalMode::Sample,
            SurvivalArg::Weight => SurvivalMode::Weight,
        };
    }
    n.mc |= args.mc;
    n.bridge |= args.bridge;
    n.antithetic |= args.antithetic;
    let f = &mut cfg.factors;
    if let Some(v) = args.epsilon {
        f.epsilon = v;
    }
    if let Some(v) = args.delta {
        f.delta = v;
    }
    if let Some(v) = args.normalization {
        f.normalization = match v {
            NormalizationArg::Verbatim => Normalization::Verbatim,
            NormalizationArg::Unit => Normalization::Unit,
        };
    }
    if let Some(v) = args.scaling {
        f.scaling = match v {
            ScalingArg::Generator => ScaleConvention::Generator,
            ScalingArg::Printed => ScaleConvention::Printed,
        };
    }
    if args.out.is_some() {
        cfg.output.path = args.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn model_meta(t: &mut Table, cfg: &RunConfig, setup: &Setup) {
    t.meta("run", &cfg.name);
    match cfg.model {
        ModelConfig::Barrier { rate, lower, upper, strike } => {
            t.meta("model", format!("barrier rate={rate:?} lower={lower:?} upper={upper:?} strike={strike:?}"))
        }
        ModelConfig::Vasicek { kappa, theta } => t.meta("model", format!("vasicek kappa={kappa:?} theta={theta:?}")),
        ModelConfig::Jdcev { mu, c, eta, strike } => {
            t.meta("model", format!("jdcev mu={mu:?} c={c:?} eta={eta:?} strike={strike:?}"))
        }
    }
    let f = &cfg.factors;
    t.meta(
        "factors",
        format!(
            "sigma={:?} fast_beta={} slow_g={} y={:?} z={:?} omega={:?} rho_xy={:?} rho_xz={:?} rho_yz={:?}",
            f.sigma,
            f.fast_beta.map_or("none".into(), |v| format!("{v:?}")),
            f.slow_g.map_or("none".into(), |v| format!("{v:?}")),
            f.y,
            f.z,
            f.omega,
            f.corr.xy,
            f.corr.xz,
            f.corr.yz
        ),
    );
    t.meta("normalization", format!("{:?}", f.normalization).to_lowercase());
    t.meta("scaling", format!("{:?}", f.scaling).to_lowercase());
    let g = &setup.gp;
    t.meta(
        "group_params",
        format!(
            "sigma_bar={:?} fom_bar={:?} v3={:?} v2={:?} u2={:?} u1={:?} v1={:?} v0={:?} sigma_bar_prime={:?} fom_bar_prime={:?}",
            g.sigma_bar, g.fom_bar, g.v3, g.v2, g.u2, g.u1, g.v1, g.v0, g.sigma_bar_prime, g.fom_bar_prime
        ),
    );
    let n = &cfg.numerics;
    t.meta("series", format!("max_terms={} tol={:?}", n.terms, n.tol_series));
    if n.mc {
        t.meta(
            "mc",
            format!(
                "paths={} steps_per_unit={} seed={} survival={:?} bridge={} antithetic={}",
                n.paths,
                n.steps.map_or("default".into(), |s| s.to_string()),
                n.seed,
                n.survival,
                n.bridge,
                n.antithetic
            ),
        );
    }
    t.meta("assumptions", if cfg.assumptions.is_empty() { "none".to_string() } else { cfg.assumptions.join("; ") });
    t.meta("flags", "1=assumed parameter, 2=series unconverged, 4=small maturity, 8=no yield or implied vol");
}

/// Price table and whether any row was flagged.
pub fn price_table(cfg: &RunConfig) -> Result<(Table, bool)> {
    let setup = Setup::new(cfg)?;
    let (eps, del) = (cfg.factors.epsilon, cfg.factors.delta);
    let points = experiment::expansions(cfg, &setup.gp, eps, del)?;
    let mc = if cfg.numerics.mc { Some(experiment::mc_points(cfg, &setup)?) } else { None };
    let obs_names: Option<[&str; 2]> = match cfg.model {
        ModelConfig::Barrier { .. } => None,
        ModelConfig::Vasicek { .. } => Some(["yield00", "yield"]),
        ModelConfig::Jdcev { .. } => Some(["iv00", "iv"]),
    };
    let mut header = vec![cfg.output.axis.column(), "u00", "u10", "u01", "approx", "terms", "tail", "converged"];
    if let Some(n) = obs_names {
        header.extend(n);
    }
    if mc.is_some() {
        header.extend(["mc_mean", "mc_stderr", "mc_knocked_out", "mc_defaulted"]);
        match cfg.model {
            ModelConfig::Vasicek { .. } => header.extend(["mc_yield", "mc_yield_stderr"]),
            ModelConfig::Jdcev { .. } => header.extend(["mc_iv", "mc_iv_stderr"]),
            ModelConfig::Barrier { .. } => {}
        }
    }
    header.extend(["n_max", "epsilon", "delta", "seed", "flags"]);
    let mut t = Table::new(&header);
    model_meta(&mut t, cfg, &setup);
    let mut flagged = false;
    for (i, p) in points.iter().enumerate() {
        let e = &p.expansion;
        let mut row: Vec<Cell> = vec![
            p.grid.into(),
            e.u00.into(),
            e.u10.into(),
            e.u01.into(),
            e.combined.into(),
            e.terms.into(),
            e.tail_estimate.into(),
            e.converged.into(),
        ];
        let mut flags = 0;
        if !cfg.assumptions.is_empty() {
            flags |= FLAG_ASSUMED;
        }
        if !e.converged {
            flags |= FLAG_UNCONVERGED;
        }
        if e.warn_small_t {
            flags |= FLAG_SMALL_T;
        }
        if let Some(o) = p.observable {
            row.extend::<[Cell; _]>([o.leading.into(), o.approx.into()]);
            if o.failed {
                flags |= FLAG_NO_OBSERVABLE;
            }
        }
        if let Some(mc) = &mc {
            let m = &mc[i];
            let est = m.estimate;
            row.extend::<[Cell; _]>([est.mean.into(), est.std_error.into(), est.n_knocked_out.into(), est.n_defaulted.into()]);
            if let Some((v, se)) = m.observable {
                row.extend::<[Cell; _]>([v.into(), se.into()]);
                if v.is_nan() {
                    flags |= FLAG_NO_OBSERVABLE;
                }
            }
        }
        flagged |= flags & (FLAG_UNCONVERGED | FLAG_NO_OBSERVABLE) != 0;
        row.extend::<[Cell; _]>([cfg.numerics.terms.into(), eps.into(), del.into(), cfg.numerics.seed.into(), flags.into()]);
        t.push(row);
    }
    Ok((t, flagged))
}

pub fn convergence_table(cfg: &RunConfig) -> Result<(Table, bool)> {
    let setup = Setup::new(cfg)?;
    let study = experiment::convergence(cfg, &setup)?;
    let mut t = Table::new(&["scale", "mc_mean", "mc_stderr", "approx", "error", "n_paths", "seed"]);
    let mut mcfg = cfg.clone();
    mcfg.numerics.mc = true;
    model_meta(&mut t, &mcfg, &setup);
    let (tt, x, k) = cfg.point(cfg.output.grid[0]);
    t.meta("point", format!("t={tt:?} x={x:?} strike={}", k.map_or("none".into(), |k| format!("{k:?}"))));
    t.meta("axis", if study.axis == ScaleAxis::Epsilon { "epsilon" } else { "delta" });
    t.meta("slope", format!("{:?}", study.slope));
    t.meta("inconclusive", study.inconclusive);
    t.meta("recommended_paths", study.recommended_paths.map_or("none".into(), |p| p.to_string()));
    for r in &study.rows {
        t.push(vec![
            r.scale.into(),
            r.mc.mean.into(),
            r.mc.std_error.into(),
            r.approx.into(),
            r.error.into(),
            r.mc.n_paths.into(),
            cfg.numerics.seed.into(),
        ]);
    }
    Ok((t, study.inconclusive))
}

fn emit(table: &Table, cfg: &RunConfig) -> Result<()> {
    let text = table.render();
    match &cfg.output.path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn classify_text(cfg: &RunConfig) -> Result<String> {
    let setup = Setup::new(cfg)?;
    let (report, regime) = experiment::classify(cfg, &setup.gp)?;
    let mut s = format!("{report}\n");
    for (name, e) in [("lower", &report.lower), ("upper", &report.upper)] {
        s.push_str(&format!(
            "{name:<6} at {:<12?} {:<20} without killing: {}\n",
            e.location,
            e.label(),
            e.class_without_killing
        ));
    }
    if let Some(r) = regime {
        s.push_str(&format!("parameter-table regime of the origin: {:?}\n", r).to_lowercase());
    }
    Ok(s)
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV}={v} is not a count")))?;
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Runs one command and returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    let outcome = (|| -> Result<i32> {
        init_threads()?;
        match cli.command {
            Command::Classify(args) => {
                let cfg = resolve(&args)?;
                print!("{}", classify_text(&cfg)?);
                Ok(EXIT_CLEAN)
            }
            Command::Price(args) => {
                let cfg = resolve(&args)?;
                let (table, flagged) = price_table(&cfg)?;
                emit(&table, &cfg)?;
                Ok(if flagged { EXIT_FLAGGED } else { EXIT_CLEAN })
            }
            Command::Convergence(args) => {
                let cfg = resolve(&args)?;
                let (table, flagged) = convergence_table(&cfg)?;
                emit(&table, &cfg)?;
                Ok(if flagged { EXIT_FLAGGED } else { EXIT_CLEAN })
            }
            Command::Selftest(args) => {
                let results = selftest::run(selftest::SelftestOptions { tol_scale: args.tol_scale, perturb: args.perturb_elements })?;
                print!("{}", selftest::render(&results));
                Ok(if results.iter().all(|r| r.passed) { EXIT_CLEAN } else { EXIT_ERROR })
            }
        }
    })();
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use config::GridAxis;

    #[test]
    fn flags_override_presets() {
        let cli = Cli::try_parse_from(["mscale", "price", "--preset", "figure3", "--variant", "slow", "--epsilon", "0.02", "--seed", "9"]).unwrap();
        let Command::Price(args) = cli.command else { panic!() };
        let cfg = resolve(&args).unwrap();
        assert_eq!(cfg.factors.epsilon, 0.02);
        assert_eq!(cfg.numerics.seed, 9);
        assert_eq!(cfg.factors.slow_g, Some(2.0));
        assert_eq!(cfg.output.axis, GridAxis::Strike);
    }

    #[test]
    fn needs_a_source() {
        assert!(resolve(&RunArgs::default()).is_err());
        assert!(Cli::try_parse_from(["mscale", "price", "--preset", "figure1", "--config", "x.ini"]).is_err());
    }

    #[test]
    fn price_table_has_metadata_and_rows() {
        let mut cfg = presets::preset(Preset::Figure1, Variant::Fast);
        cfg.output.grid = vec![1.9, 2.1];
        let (t, flagged) = price_table(&cfg).unwrap();
        assert!(flagged);
        let text = t.render();
        assert!(text.starts_with("# run: figure1-fast\n"));
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body.len(), 3);
        assert!(body[0].starts_with("x,u00,u10,u01,approx"));
        assert!(body[1].ends_with(",200,0.01,0.01,1,2"), "{}", body[1]);

        cfg.numerics.tol_series = 1e-3;
        let (t, flagged) = price_table(&cfg).unwrap();
        assert!(!flagged);
        assert!(t.render().lines().last().unwrap().ends_with(",1,0"));
    }
}
