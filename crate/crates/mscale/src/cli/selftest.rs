//! Invariant suites run by `mscale selftest`.

use super::config::Normalization;
use super::experiment::Setup;
use super::presets::{preset, Preset, Variant};
use crate::averaging::GroupParams;
use crate::error::Result;
use crate::models::{BarrierModel, JdcevModel, VasicekModel};
use crate::observables::{bs_put, implied_vol, jdcev_put_assemble};
use crate::spectral::{
    eigen_residual, expand, gram_matrix, payoff_coefficients, EigenSystem,
    ExpansionData, MatrixElements, Truncation,
};
use crate::diffusion::quad::Tol;
use crate::spectral::quadrature::matrix_elements_with_tol;
use nalgebra::DMatrix;

/// Tighter than the library default so quadrature noise stays below the
/// comparison floor.
pub const QUAD_TOL: Tol = Tol { abs: 1e-12, rel: 1e-11, max_intervals: 50_000 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelftestOptions {
    /// Multiplies every tolerance.
    pub tol_scale: f64,
    /// Scale the largest closed-form `A` entry by `1 + 1e-3` before comparing.
    pub perturb: bool,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self { tol_scale: 1.0, perturb: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub suite: &'static str,
    pub case: String,
    /// Worst observed deviation.
    pub worst: f64,
    pub tol: f64,
    pub passed: bool,
}

fn result(suite: &'static str, case: impl Into<String>, worst: f64, tol: f64) -> SuiteResult {
    SuiteResult { suite, case: case.into(), worst, tol, passed: worst <= tol }
}

fn failed(suite: &'static str, case: impl Into<String>, err: impl std::fmt::Display) -> SuiteResult {
    SuiteResult { suite, case: format!("{}: {err}", case.into()), worst: f64::INFINITY, tol: 0.0, passed: false }
}

/// Group parameters of a figure preset with unit normalization.
pub fn figure_params(p: Preset, v: Variant) -> Result<GroupParams> {
    let mut cfg = preset(p, v);
    cfg.factors.normalization = Normalization::Unit;
    Ok(Setup::new(&cfg)?.gp)
}

/// The three models at the figure parameters, with group parameters that
/// exercise every matrix element each model supports.
pub struct Fixtures {
    pub barrier: (BarrierModel, GroupParams),
    pub vasicek: (VasicekModel, GroupParams),
    pub jdcev: (JdcevModel, GroupParams),
}

impl Fixtures {
    pub fn new() -> Result<Self> {
        let merge = |fast: GroupParams, slow: GroupParams| GroupParams {
            v1: slow.v1,
            v0: slow.v0,
            sigma_bar_prime: slow.sigma_bar_prime,
            fom_bar_prime: slow.fom_bar_prime,
            rho_xz: slow.rho_xz,
            ..fast
        };
        let b = merge(figure_params(Preset::Figure1, Variant::Fast)?, figure_params(Preset::Figure1, Variant::Slow)?);
        let v = merge(figure_params(Preset::Figure2, Variant::Fast)?, figure_params(Preset::Figure2, Variant::Slow)?);
        let j = merge(figure_params(Preset::Figure3, Variant::Fast)?, figure_params(Preset::Figure3, Variant::Slow)?);
        Ok(Self {
            barrier: (BarrierModel::new(0.05, b.sigma_bar, 1.5, 2.5)?, b),
            vasicek: (VasicekModel::new(1.0, 0.05, v.sigma_bar, v.fom_bar)?, v),
            jdcev: (JdcevModel::new(0.05, 0.5, -1.0, j.sigma_bar)?, j),
        })
    }
}

pub fn orthonormality<S: EigenSystem>(name: &str, m: &S, count: usize, tol: f64) -> SuiteResult {
    match gram_matrix(m, count) {
        Ok(g) => result("orthonormality", name, (g - DMatrix::identity(count, count)).amax(), tol),
        Err(e) => failed("orthonormality", name, e),
    }
}

pub fn residuals<S: EigenSystem>(name: &str, m: &S, points: &[f64], h: impl Fn(f64) -> f64, tol: f64) -> SuiteResult {
    let mut worst = 0.0f64;
    for j in 0..=10 {
        for &x in points {
            worst = worst.max(eigen_residual(m, j, x, h(x)));
        }
    }
    result("eigen-residual", name, worst, tol)
}

/// Largest `|a − b|/|b|` over entries whose difference exceeds `floor`.
pub fn worst_relative(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(x, y)| (*x - *y).abs() > floor)
        .map(|(x, y)| (x - y).abs() / y.abs())
        .fold(0.0, f64::max)
}

/// Worst relative mismatch among `A`, `B`, `B̃`, ignoring differences
/// below `floor` times the largest entry of each matrix.
pub fn element_mismatch(cf: &MatrixElements, q: &MatrixElements, floor: f64) -> f64 {
    let mut worst = 0.0f64;
    for (x, y) in [(&cf.a, &q.a), (&cf.b, &q.b), (&cf.bt, &q.bt)] {
        worst = worst.max(worst_relative(x.as_slice(), y.as_slice(), floor * y.amax()));
    }
    worst
}

pub fn closed_vs_quadrature<S: EigenSystem>(
    name: &str,
    m: &S,
    gp: &GroupParams,
    count: usize,
    perturb: bool,
    tol: f64,
) -> SuiteResult {
    let cf = match m.closed_form_elements(gp, count) {
        Some(Ok(cf)) => cf,
        Some(Err(e)) => return failed("closed-form-vs-quadrature", name, e),
        None => return failed("closed-form-vs-quadrature", name, "no closed form"),
    };
    let mut cf = cf;
    if perturb {
        let (idx, _) = cf.a.iter().enumerate().fold((0, 0.0f64), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        cf.a[idx] *= 1.0 + 1e-3;
    }
    match matrix_elements_with_tol(m, gp, count, QUAD_TOL) {
        Ok(q) => result("closed-form-vs-quadrature", format!("{name} elements"), element_mismatch(&cf, &q, 1e-9), tol),
        Err(e) => failed("closed-form-vs-quadrature", name, e),
    }
}

pub fn coefficients(name: &str, closed: Result<Vec<f64>>, quad: Result<Vec<f64>>, tol: f64) -> SuiteResult {
    match (closed, quad) {
        (Ok(c), Ok(q)) => {
            let floor = 1e-9 * q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            result("closed-form-vs-quadrature", format!("{name} coefficients"), worst_relative(&c, &q, floor), tol)
        }
        (Err(e), _) | (_, Err(e)) => failed("closed-form-vs-quadrature", name, e),
    }
}

/// Evenly spaced interior points of `(lo, hi)`.
pub fn interior(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
}

pub fn run(opts: SelftestOptions) -> Result<Vec<SuiteResult>> {
    let s = opts.tol_scale;
    let fx = Fixtures::new()?;
    let (bm, bgp) = &fx.barrier;
    let (vm, vgp) = &fx.vasicek;
    let (jm, jgp) = &fx.jdcev;
    let mut out = vec![
        orthonormality("barrier", bm, 20, 1e-8 * s),
        orthonormality("vasicek", vm, 20, 1e-8 * s),
        orthonormality("jdcev", jm, 20, 1e-8 * s),
    ];

    out.push(residuals("barrier", bm, &interior(1.5, 2.5, 50), |_| 1e-4, 1e-6 * s));
    let len = vm.sigma_bar / vm.kappa.sqrt();
    let (vlo, vhi) = vm.window(11);
    out.push(residuals("vasicek", vm, &interior(vlo, vhi, 50), |_| 1e-3 * len, 1e-6 * s));
    let ys = interior(0.02, 60.0, 50);
    let xs: Vec<f64> = ys.iter().map(|&y| jm.from_y(y)).collect();
    // steps kept below 0.01 in the Laguerre variable
    let p = 2.0 * jm.eta.abs();
    out.push(residuals("jdcev", jm, &xs, |x| x * (1e-2 / (p * jm.to_y(x))).min(1e-3), 1e-6 * s));

    let n = 12;
    let tol3 = 1e-6 * s;
    let bgp_cf = GroupParams { u2: 0.0, u1: 0.0, fom_bar_prime: 0.0, ..*bgp };
    out.push(closed_vs_quadrature("barrier", bm, &bgp_cf, n, opts.perturb, tol3));
    out.push(closed_vs_quadrature("vasicek", vm, vgp, n, opts.perturb, tol3));
    let jgp_cf = GroupParams { fom_bar_prime: 0.0, ..*jgp };
    out.push(closed_vs_quadrature("jdcev", jm, &jgp_cf, n, opts.perturb, tol3));
    out.push(coefficients(
        "barrier call",
        bm.call_coefficients(2.0, n),
        payoff_coefficients(bm, |x| (x - 2.0f64).max(0.0), &[2.0], n),
        tol3,
    ));
    out.push(coefficients("vasicek bond", Ok(vm.bond_coefficients(n)), payoff_coefficients(vm, |_| 1.0, &[], n), tol3));
    for k in [30.0, 50.0, 70.0] {
        out.push(coefficients(
            &format!("jdcev put K={k}"),
            jm.put_coefficients(k, n),
            payoff_coefficients(jm, move |x| (k - x).max(0.0), &[k], n),
            tol3,
        ));
    }

    out.push(survival_and_parity(jm, s));
    out.push(iv_round_trip(1e-9 * s));
    out.push(constant_vol(bm, vm, jm));
    Ok(out)
}

/// Survival in `[0, 1]` and nonincreasing in `t`; put-call parity bounds.
fn survival_and_parity(m: &JdcevModel, s: f64) -> SuiteResult {
    let mut worst = 0.0f64;
    let mut prev = 1.0;
    for &t in &[1.0, 1.5, 2.0, 3.0, 5.0] {
        let p = match jdcev_put_assemble(m, &GroupParams::leading(m.sigma_bar, 0.0), t, 50.0, 50.0, 200, 0.0, 0.0, Truncation::default()) {
            Ok(p) => p,
            Err(e) => return failed("survival-and-parity", "jdcev", e),
        };
        let q = p.survival.u00;
        worst = worst.max(-q).max(q - 1.0).max(q - prev);
        prev = q;
        // 0 ≤ C ≤ x and P ≥ (K − x)⁺
        worst = worst.max(-p.call).max(p.call - 50.0).max(-p.put.u00);
    }
    result("survival-and-parity", "jdcev", worst, 1e-8 * s)
}

pub fn iv_round_trip(tol: f64) -> SuiteResult {
    let mut worst = 0.0f64;
    // strikes within two standard deviations, where the price resolves the vol
    for &v in &[0.05, 0.2, 0.5, 1.2] {
        for k in [-2.0, -1.0, 0.0, 1.0, 2.0].map(|m: f64| 50.0 * (m * v).exp()) {
            let price = bs_put(1.0, 50.0, v, k, 0.0);
            match implied_vol(price, 1.0, 50.0, k, 0.0) {
                Ok(iv) => worst = worst.max((iv.value - v).abs()),
                Err(e) => return failed("implied-vol-round-trip", format!("v={v} K={k}"), e),
            }
        }
    }
    result("implied-vol-round-trip", "black-scholes put", worst, tol)
}

/// Constant volatility makes every correction exactly zero.
fn constant_vol(bm: &BarrierModel, vm: &VasicekModel, jm: &JdcevModel) -> SuiteResult {
    let gp = |m: f64| GroupParams { sigma_bar: m, rho_xy: -0.5, rho_xz: -0.5, ..Default::default() };
    let mut worst = 0.0f64;
    let check = |data: Result<ExpansionData>, e: &dyn Fn(&ExpansionData) -> Result<(f64, f64)>| -> Result<f64> {
        let (u10, u01) = e(&data?)?;
        Ok(u10.abs().max(u01.abs()))
    };
    let tr = Truncation::Fixed(40);
    let runs: [Result<f64>; 3] = [
        check(ExpansionData::build(bm, &gp(bm.sigma_bar), 40, |m| m.call_coefficients(2.0, 40)), &|d| {
            let e = expand(bm, d, 1.0 / 12.0, 2.0, 0.01, 0.01, tr)?;
            Ok((e.u10, e.u01))
        }),
        check(ExpansionData::build(vm, &GroupParams { fom_bar: vm.fom_bar, ..gp(vm.sigma_bar) }, 40, |m| Ok(m.bond_coefficients(40))), &|d| {
            let e = expand(vm, d, 1.0, 0.03, 0.01, 0.01, tr)?;
            Ok((e.u10, e.u01))
        }),
        jdcev_put_assemble(jm, &gp(jm.sigma_bar), 1.0, 50.0, 50.0, 40, 0.01, 0.01, tr).map(|p| p.put.u10.abs().max(p.put.u01.abs())),
    ];
    for (name, r) in ["barrier", "vasicek", "jdcev"].iter().zip(runs) {
        match r {
            Ok(w) => worst = worst.max(w),
            Err(e) => return failed("constant-vol-corrections", *name, e),
        }
    }
    result("constant-vol-corrections", "all models", worst, 0.0)
}

pub fn render(results: &[SuiteResult]) -> String {
    let mut s = String::new();
    for r in results {
        s.push_str(&format!(
            "{:<4} {:<28} {:<32} worst {:>10.3e}  tol {:>9.1e}\n",
            if r.passed { "PASS" } else { "FAIL" },
            r.suite,
            r.case,
            r.worst,
            r.tol
        ));
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.suite).collect();
    if failed.is_empty() {
        s.push_str("all suites passed\n");
    } else {
        let mut names = failed.clone();
        names.dedup();
        s.push_str(&format!("failed suites: {}\n", names.join(", ")));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perturbation_is_caught() {
        let fx = Fixtures::new().unwrap();
        let (vm, vgp) = &fx.vasicek;
        assert!(closed_vs_quadrature("vasicek", vm, vgp, 8, false, 1e-6).passed);
        let bad = closed_vs_quadrature("vasicek", vm, vgp, 8, true, 1e-6);
        assert!(!bad.passed);
        assert_eq!(bad.suite, "closed-form-vs-quadrature");
    }
}
