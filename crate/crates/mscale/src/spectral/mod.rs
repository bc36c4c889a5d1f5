//! Model-independent pricing engine: the eigen-system contract and the
//! leading-order price with its fast and slow first-order corrections.

pub mod quadrature;
pub mod time;

use crate::averaging::GroupParams;
use crate::diffusion::DiffusionSpec;
use crate::error::{invalid, Result};
use nalgebra::DMatrix;
use time::{t_factor, u_factor, v_factor};

pub use quadrature::matrix_elements_by_quadrature;

/// Hard cap on the number of retained eigenpairs.
pub const MAX_TERMS: usize = 200;
/// Below this maturity the price carries a warning flag.
pub const SMALL_T: f64 = 1e-6;

/// Coefficients of `⟨L₂⟩ = ½σ̄²a²∂xx + b̂∂x − k` and their x-derivatives,
/// where `b̂ = b − f̄Ω a` already folds in the averaged market price of risk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalCoeffs {
    pub a: f64,
    pub da: f64,
    pub b_hat: f64,
    pub db_hat: f64,
    pub k: f64,
    pub dk: f64,
}

/// Discrete spectrum of `−⟨L₂⟩` with eigenfunctions orthonormal in `L²(𝔪)`.
///
/// Positional index `j = 0, 1, …` maps to the model's label
/// `first_index() + j`.
pub trait EigenSystem: Send + Sync {
    fn first_index(&self) -> usize;
    fn sigma_bar(&self) -> f64;
    fn fom_bar(&self) -> f64;
    /// Eigenvalue at positional index `j`.
    fn lambda(&self, j: usize) -> f64;
    /// `ψ_j(x)` and `ψ_j′(x)` for `j < count`.
    fn psi_upto(&self, count: usize, x: f64) -> (Vec<f64>, Vec<f64>);
    fn local(&self, x: f64) -> LocalCoeffs;
    fn log_speed(&self, x: f64) -> f64;
    /// The averaged generator as a diffusion, with `a` scaled by `σ̄`.
    fn diffusion(&self) -> DiffusionSpec;
    /// Interval outside of which `ψ_j² 𝔪` is negligible for `j < count`.
    fn window(&self, count: usize) -> (f64, f64);
    /// The same model with different averaged coefficients.
    fn with_averages(&self, sigma_bar: f64, fom_bar: f64) -> Result<Self>
    where
        Self: Sized;

    fn psi(&self, j: usize, x: f64) -> f64 {
        self.psi_upto(j + 1, x).0[j]
    }

    fn lambdas(&self, count: usize) -> Vec<f64> {
        (0..count).map(|j| self.lambda(j)).collect()
    }

    /// Closed-form matrix elements, when the model has them.
    fn closed_form_elements(&self, _gp: &GroupParams, _count: usize) -> Option<Result<MatrixElements>> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    ClosedForm,
    Quadrature,
}

/// `A_{k,n} = (ψ_k, 𝒜ψₙ)`, `B_{k,n} = (ψ_k, ℬψₙ)` and `B̃_{k,n} = (ψ_k, ℬ∂_zψₙ)`,
/// row `k`, column `n`, positional indices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixElements {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub bt: DMatrix<f64>,
    pub a_source: Source,
    pub b_source: Source,
    pub bt_source: Source,
}

impl MatrixElements {
    pub fn zeros(count: usize, source: Source) -> Self {
        Self {
            a: DMatrix::zeros(count, count),
            b: DMatrix::zeros(count, count),
            bt: DMatrix::zeros(count, count),
            a_source: source,
            b_source: source,
            bt_source: source,
        }
    }

    pub fn count(&self) -> usize {
        self.a.nrows()
    }
}

/// First entry where `x` and `y` differ by more than
/// `max(rel·|y|, floor·max(1, max|y|))`, as `(k, n, x, y)`. The floor scales
/// with the largest entry since quadrature cannot resolve a structural zero
/// below the roundoff of the largest element.
pub fn first_mismatch(x: &DMatrix<f64>, y: &DMatrix<f64>, rel: f64, floor: f64) -> Option<(usize, usize, f64, f64)> {
    let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for n in 0..y.ncols() {
        for k in 0..y.nrows() {
            let (a, b) = (x[(k, n)], y[(k, n)]);
            if !((a - b).abs() <= (rel * b.abs()).max(floor * scale)) {
                return Some((k, n, a, b));
            }
        }
    }
    None
}

/// Closed forms when the model has them, quadrature otherwise.
pub fn matrix_elements<S: EigenSystem>(eig: &S, gp: &GroupParams, count: usize) -> Result<MatrixElements> {
    match eig.closed_form_elements(gp, count) {
        Some(m) => m,
        None => matrix_elements_by_quadrature(eig, gp, count),
    }
}

fn central_in_z<S: EigenSystem>(
    eig: &S,
    gp: &GroupParams,
    len: usize,
    f: impl Fn(&S) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; len];
    let (s, fo) = (eig.sigma_bar(), eig.fom_bar());
    if gp.sigma_bar_prime != 0.0 {
        let h = 1e-5 * s.abs();
        let up = f(&eig.with_averages(s + h, fo)?)?;
        let dn = f(&eig.with_averages(s - h, fo)?)?;
        for j in 0..len {
            out[j] += gp.sigma_bar_prime * (up[j] - dn[j]) / (2.0 * h);
        }
    }
    if gp.fom_bar_prime != 0.0 {
        let h = 1e-5 * fo.abs().max(1e-2 * s.abs());
        let up = f(&eig.with_averages(s, fo + h)?)?;
        let dn = f(&eig.with_averages(s, fo - h)?)?;
        for j in 0..len {
            out[j] += gp.fom_bar_prime * (up[j] - dn[j]) / (2.0 * h);
        }
    }
    Ok(out)
}

/// `∂_zλ_j = σ̄′∂_σ̄λ_j + f̄Ω′∂_f̄Ωλ_j` by central differences. Exactly zero
/// when both primes vanish.
pub fn dz_lambda<S: EigenSystem>(eig: &S, gp: &GroupParams, count: usize) -> Result<Vec<f64>> {
    central_in_z(eig, gp, count, |e| Ok(e.lambdas(count)))
}

/// `∂_z c_j` for payoff coefficients computed by `coeffs`.
pub fn dz_coefficients<S: EigenSystem>(
    eig: &S,
    gp: &GroupParams,
    count: usize,
    coeffs: impl Fn(&S) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    central_in_z(eig, gp, count, coeffs)
}

/// `cₙ = (ψₙ, H)` by quadrature over the model window, split at `breaks`
/// where `H` has kinks or jumps.
pub fn payoff_coefficients<S: EigenSystem + ?Sized>(
    eig: &S,
    payoff: impl Fn(f64) -> f64,
    breaks: &[f64],
    count: usize,
) -> Result<Vec<f64>> {
    let (lo, hi) = eig.window(count);
    let mut cuts = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().cloned().filter(|b| *b > lo && *b < hi).collect();
    inner.sort_by(f64::total_cmp);
    cuts.extend(inner);
    cuts.push(hi);
    let mut out = vec![0.0; count];
    for w in cuts.windows(2) {
        let (v, _) = quadrature::integrate_vector(
            |x, o: &mut [f64]| {
                let h = payoff(x);
                let m = eig.log_speed(x).exp();
                if h == 0.0 || m == 0.0 {
                    o.fill(0.0);
                    return;
                }
                let (psi, _) = eig.psi_upto(count, x);
                for j in 0..count {
                    o[j] = psi[j] * h * m;
                }
            },
            w[0],
            w[1],
            2 * count + 4,
            &[count],
            crate::diffusion::quad::Tol { abs: 1e-13, rel: 1e-11, max_intervals: 20_000 },
        )?;
        for j in 0..count {
            out[j] += v[j];
        }
    }
    Ok(out)
}

/// Everything needed to evaluate the expansion at any `(t, x)`.
#[derive(Debug, Clone)]
pub struct ExpansionData {
    pub lambda: Vec<f64>,
    pub c: Vec<f64>,
    pub dz_c: Vec<f64>,
    pub dz_lambda: Vec<f64>,
    /// `None` means both corrections are identically zero.
    pub elements: Option<MatrixElements>,
}

impl ExpansionData {
    /// Leading order only.
    pub fn leading<S: EigenSystem>(eig: &S, c: Vec<f64>) -> Self {
        let n = c.len();
        Self { lambda: eig.lambdas(n), c, dz_c: vec![0.0; n], dz_lambda: vec![0.0; n], elements: None }
    }

    /// Full first-order data. `coeffs` recomputes the payoff coefficients of
    /// a reparametrized model for the `∂_z cₙ` differences.
    pub fn build<S: EigenSystem>(
        eig: &S,
        gp: &GroupParams,
        count: usize,
        coeffs: impl Fn(&S) -> Result<Vec<f64>>,
    ) -> Result<Self> {
        if count == 0 || count > MAX_TERMS {
            return invalid(format!("term count {count} outside 1..={MAX_TERMS}"));
        }
        let c = coeffs(eig)?;
        if c.len() < count {
            return invalid(format!("{} payoff coefficients for {count} terms", c.len()));
        }
        let c = c[..count].to_vec();
        let dz_c = dz_coefficients(eig, gp, count, |e| coeffs(e).map(|v| v[..count].to_vec()))?;
        let dz_lambda = dz_lambda(eig, gp, count)?;
        let elements = matrix_elements(eig, gp, count)?;
        Ok(Self { lambda: eig.lambdas(count), c, dz_c, dz_lambda, elements: Some(elements) })
    }

    pub fn count(&self) -> usize {
        self.c.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    Fixed(usize),
    /// Smallest `N ≥ min` whose last two term groups fall below `tol·|u₀,₀|`.
    Adaptive { min: usize, tol: f64 },
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Adaptive { min: 10, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceExpansion {
    pub u00: f64,
    pub u10: f64,
    pub u01: f64,
    /// `u₀,₀ + √ε u₁,₀ + √δ u₀,₁`
    pub combined: f64,
    pub terms: usize,
    pub tail_estimate: f64,
    pub converged: bool,
    pub warn_small_t: bool,
    pub epsilon: f64,
    pub delta: f64,
}

/// Truncated sum with the magnitude of its last term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub tail: f64,
}

fn check_inputs(t: f64, terms: usize, available: usize) -> Result<()> {
    if !(t >= 0.0) {
        return invalid(format!("maturity {t} is negative"));
    }
    if terms == 0 || terms > available {
        return invalid(format!("{terms} terms requested, {available} available"));
    }
    Ok(())
}

/// `u₀,₀ = Σₙ cₙ ψₙ(x) Tₙ`.
pub fn price_u00<S: EigenSystem + ?Sized>(eig: &S, c: &[f64], t: f64, x: f64, terms: usize) -> Result<SeriesValue> {
    check_inputs(t, terms, c.len())?;
    let (psi, _) = eig.psi_upto(terms, x);
    let mut value = 0.0;
    let mut tail = 0.0;
    for j in 0..terms {
        tail = c[j] * psi[j] * t_factor(eig.lambda(j), t);
        value += tail;
    }
    Ok(SeriesValue { value, tail: tail.abs() })
}

/// `u₁,₀ = Σₙ Σ_k cₙ A_{k,n} ψ_k U_{k,n}`, diagonal terms included through the
/// confluent limit of `U`.
pub fn price_u10<S: EigenSystem + ?Sized>(
    eig: &S,
    c: &[f64],
    m: &MatrixElements,
    t: f64,
    x: f64,
    terms: usize,
) -> Result<SeriesValue> {
    check_inputs(t, terms, c.len().min(m.count()))?;
    let (psi, _) = eig.psi_upto(terms, x);
    let lambda = eig.lambdas(terms);
    let mut value = 0.0;
    let mut tail = 0.0;
    for n in 0..terms {
        let mut col = 0.0;
        for k in 0..terms {
            col += m.a[(k, n)] * psi[k] * u_factor(lambda[k], lambda[n], t);
        }
        tail = c[n] * col;
        value += tail;
    }
    Ok(SeriesValue { value, tail: tail.abs() })
}

/// `u₀,₁ = Σₙ Σ_k ψ_k [ (cₙ B̃_{k,n} + ∂_zcₙ B_{k,n}) U_{k,n} + cₙ ∂_zλₙ B_{k,n} V_{k,n} ]`.
#[allow(clippy::too_many_arguments)]
pub fn price_u01<S: EigenSystem + ?Sized>(
    eig: &S,
    c: &[f64],
    dz_c: &[f64],
    dz_lambda: &[f64],
    m: &MatrixElements,
    t: f64,
    x: f64,
    terms: usize,
) -> Result<SeriesValue> {
    check_inputs(t, terms, c.len().min(dz_c.len()).min(dz_lambda.len()).min(m.count()))?;
    let (psi, _) = eig.psi_upto(terms, x);
    let lambda = eig.lambdas(terms);
    let mut value = 0.0;
    let mut tail = 0.0;
    for n in 0..terms {
        tail = 0.0;
        for k in 0..terms {
            tail += u01_entry(k, n, &psi, &lambda, c, dz_c, dz_lambda, m, t);
        }
        value += tail;
    }
    Ok(SeriesValue { value, tail: tail.abs() })
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn u01_entry(
    k: usize,
    n: usize,
    psi: &[f64],
    lambda: &[f64],
    c: &[f64],
    dz_c: &[f64],
    dz_lambda: &[f64],
    m: &MatrixElements,
    t: f64,
) -> f64 {
    let b = m.b[(k, n)];
    let u_coef = c[n] * m.bt[(k, n)] + dz_c[n] * b;
    let v_coef = c[n] * dz_lambda[n] * b;
    let mut s = 0.0;
    if u_coef != 0.0 {
        s += u_coef * u_factor(lambda[k], lambda[n], t);
    }
    if v_coef != 0.0 {
        s += v_coef * v_factor(lambda[k], lambda[n], t);
    }
    psi[k] * s
}

/// Evaluates all three terms at `(t, x)`, growing the truncation one
/// eigenpair at a time so that both sums always share the same `N`.
pub fn expand<S: EigenSystem + ?Sized>(
    eig: &S,
    data: &ExpansionData,
    t: f64,
    x: f64,
    epsilon: f64,
    delta: f64,
    truncation: Truncation,
) -> Result<PriceExpansion> {
    let available = data.count();
    if !(epsilon >= 0.0 && delta >= 0.0) {
        return invalid("scale parameters must be nonnegative");
    }
    let (limit, min, tol) = match truncation {
        Truncation::Fixed(n) => (n, n, 1e-8),
        Truncation::Adaptive { min, tol } => (available, min.clamp(1, available.max(1)), tol),
    };
    check_inputs(t, limit, available)?;
    let (psi, _) = eig.psi_upto(limit, x);
    let lambda = &data.lambda;
    let (se, sd) = (epsilon.sqrt(), delta.sqrt());

    let (mut u00, mut u10, mut u01) = (0.0, 0.0, 0.0);
    let mut abs00 = 0.0;
    let mut group = f64::INFINITY;
    let mut used = 0;
    let small = |g: f64, u: f64, scale: f64| g <= tol * u.abs() || g <= 1e-15 * scale;
    for j in 0..limit {
        let d00 = data.c[j] * psi[j] * t_factor(lambda[j], t);
        let (mut d10, mut d01) = (0.0, 0.0);
        if let Some(m) = &data.elements {
            // new column n = j over k ≤ j, then new row k = j over n < j
            for k in 0..=j {
                d10 += data.c[j] * m.a[(k, j)] * psi[k] * u_factor(lambda[k], lambda[j], t);
                d01 += u01_entry(k, j, &psi, lambda, &data.c, &data.dz_c, &data.dz_lambda, m, t);
            }
            for n in 0..j {
                d10 += data.c[n] * m.a[(j, n)] * psi[j] * u_factor(lambda[j], lambda[n], t);
                d01 += u01_entry(j, n, &psi, lambda, &data.c, &data.dz_c, &data.dz_lambda, m, t);
            }
        }
        u00 += d00;
        u10 += d10;
        u01 += d01;
        abs00 += d00.abs();
        let prev_group = group;
        group = d00.abs() + se * d10.abs() + sd * d01.abs();
        used = j + 1;
        if matches!(truncation, Truncation::Adaptive { .. })
            && used >= min
            && small(group, u00, abs00)
            && small(prev_group, u00, abs00)
        {
            break;
        }
    }
    let converged = small(group, u00, abs00);
    Ok(PriceExpansion {
        u00,
        u10,
        u01,
        combined: u00 + se * u10 + sd * u01,
        terms: used,
        tail_estimate: group,
        converged,
        warn_small_t: t < SMALL_T,
        epsilon,
        delta,
    })
}

/// `(½σ̄²a²ψ″ + b̂ψ′ − kψ + λψ)` by five-point differences with step `h`,
/// divided by the largest of the four terms.
pub fn eigen_residual<S: EigenSystem + ?Sized>(eig: &S, j: usize, x: f64, h: f64) -> f64 {
    let p = |u: f64| eig.psi(j, u);
    let (fm2, fm1, f0, fp1, fp2) = (p(x - 2.0 * h), p(x - h), p(x), p(x + h), p(x + 2.0 * h));
    let d1 = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
    let d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h);
    let lc = eig.local(x);
    let s = eig.sigma_bar();
    let terms = [0.5 * s * s * lc.a * lc.a * d2, lc.b_hat * d1, -lc.k * f0, eig.lambda(j) * f0];
    let scale = terms.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    terms.iter().sum::<f64>().abs() / scale
}

/// `(ψ_i, ψ_j)` under the speed density over the model window.
pub fn gram_matrix<S: EigenSystem + ?Sized>(eig: &S, count: usize) -> Result<DMatrix<f64>> {
    let (lo, hi) = eig.window(count);
    let (v, _) = quadrature::integrate_vector(
        |x, out: &mut [f64]| {
            let w = eig.log_speed(x).exp();
            if !w.is_finite() || w == 0.0 {
                out.fill(0.0);
                return;
            }
            let (psi, _) = eig.psi_upto(count, x);
            for i in 0..count {
                for j in 0..count {
                    out[i * count + j] = psi[i] * psi[j] * w;
                }
            }
        },
        lo,
        hi,
        4 * count + 16,
        &[count * count],
        crate::diffusion::quad::Tol { abs: 1e-12, rel: 1e-10, max_intervals: 20_000 },
    )?;
    Ok(DMatrix::from_row_slice(count, count, &v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::DiffusionSpec;
    use approx::assert_relative_eq;

    /// Killed Brownian motion on (0, π) with a = 1, σ̄ = √2: λ_j = (j+1)²,
    /// ψ_j = sin((j+1)x)·√(2/π)/√... normalized under 𝔪 = 1.
    struct SineSystem;

    impl EigenSystem for SineSystem {
        fn first_index(&self) -> usize {
            1
        }
        fn sigma_bar(&self) -> f64 {
            2f64.sqrt()
        }
        fn fom_bar(&self) -> f64 {
            0.0
        }
        fn lambda(&self, j: usize) -> f64 {
            ((j + 1) * (j + 1)) as f64
        }
        fn psi_upto(&self, count: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
            let norm = (2.0 / std::f64::consts::PI).sqrt();
            let psi = (1..=count).map(|n| norm * (n as f64 * x).sin()).collect();
            let dpsi = (1..=count).map(|n| norm * n as f64 * (n as f64 * x).cos()).collect();
            (psi, dpsi)
        }
        fn local(&self, _x: f64) -> LocalCoeffs {
            LocalCoeffs { a: 1.0, da: 0.0, b_hat: 0.0, db_hat: 0.0, k: 0.0, dk: 0.0 }
        }
        fn log_speed(&self, _x: f64) -> f64 {
            0.0
        }
        fn diffusion(&self) -> DiffusionSpec {
            DiffusionSpec::new(|_| 2f64.sqrt(), |_| 0.0, 0.0, std::f64::consts::PI, 1.0)
                .unwrap()
                .with_log_densities(|_| 0.0, |_| 0.0)
        }
        fn window(&self, _count: usize) -> (f64, f64) {
            (0.0, std::f64::consts::PI)
        }
        fn with_averages(&self, _s: f64, _f: f64) -> Result<Self> {
            Ok(SineSystem)
        }
    }

    fn sine_coeffs(count: usize) -> Vec<f64> {
        // (ψₙ, 1) = √(2/π)(1 − (−1)ⁿ)/n
        let norm = (2.0 / std::f64::consts::PI).sqrt();
        (1..=count).map(|n| norm * (1.0 - (-1f64).powi(n as i32)) / n as f64).collect()
    }

    #[test]
    fn heat_equation_survival() {
        // P(τ > t) for BM started at π/2 with generator ∂xx on (0, π)
        let c = sine_coeffs(199);
        let data = ExpansionData::leading(&SineSystem, c.clone());
        let e = expand(&SineSystem, &data, 0.3, 1.2, 0.0, 0.0, Truncation::default()).unwrap();
        let mut want = 0.0;
        for n in (1..400).step_by(2) {
            let nf = n as f64;
            want += 4.0 / (std::f64::consts::PI * nf) * (nf * 1.2).sin() * (-nf * nf * 0.3).exp();
        }
        assert_relative_eq!(e.u00, want, max_relative = 1e-12);
        assert!(e.converged);
        assert!(e.terms < 20);
        let direct = price_u00(&SineSystem, &c, 0.3, 1.2, e.terms).unwrap();
        assert_relative_eq!(direct.value, e.u00, max_relative = 1e-14);
    }

    #[test]
    fn corrections_vanish_without_elements() {
        let data = ExpansionData::leading(&SineSystem, sine_coeffs(30));
        let e = expand(&SineSystem, &data, 0.5, 1.0, 0.04, 0.01, Truncation::Fixed(30)).unwrap();
        assert_eq!(e.u10, 0.0);
        assert_eq!(e.u01, 0.0);
        assert_eq!(e.combined, e.u00);
    }

    #[test]
    fn incremental_sum_matches_direct_sums() {
        let n = 12;
        let c = sine_coeffs(n);
        let mut m = MatrixElements::zeros(n, Source::Quadrature);
        for k in 0..n {
            for j in 0..n {
                m.a[(k, j)] = ((k * 3 + j) as f64).sin();
                m.b[(k, j)] = ((k + 2 * j) as f64).cos();
                m.bt[(k, j)] = ((k * j) as f64 * 0.1).sin();
            }
        }
        let dz_c: Vec<f64> = (0..n).map(|j| 0.1 * j as f64).collect();
        let dz_l: Vec<f64> = (0..n).map(|j| 0.3 - 0.01 * j as f64).collect();
        let data = ExpansionData {
            lambda: SineSystem.lambdas(n),
            c: c.clone(),
            dz_c: dz_c.clone(),
            dz_lambda: dz_l.clone(),
            elements: Some(m.clone()),
        };
        let e = expand(&SineSystem, &data, 0.2, 0.9, 0.01, 0.04, Truncation::Fixed(n)).unwrap();
        let u10 = price_u10(&SineSystem, &c, &m, 0.2, 0.9, n).unwrap();
        let u01 = price_u01(&SineSystem, &c, &dz_c, &dz_l, &m, 0.2, 0.9, n).unwrap();
        assert_relative_eq!(e.u10, u10.value, max_relative = 1e-12);
        assert_relative_eq!(e.u01, u01.value, max_relative = 1e-12);
        assert_relative_eq!(e.combined, e.u00 + 0.1 * e.u10 + 0.2 * e.u01, max_relative = 1e-14);
    }

    #[test]
    fn zero_maturity_corrections_vanish() {
        let n = 8;
        let mut m = MatrixElements::zeros(n, Source::Quadrature);
        m.a.fill(1.0);
        m.b.fill(1.0);
        m.bt.fill(1.0);
        let c = sine_coeffs(n);
        assert_eq!(price_u10(&SineSystem, &c, &m, 0.0, 1.0, n).unwrap().value, 0.0);
        assert_eq!(price_u01(&SineSystem, &c, &c, &c, &m, 0.0, 1.0, n).unwrap().value, 0.0);
    }

    #[test]
    fn gram_of_sines_is_identity() {
        let g = gram_matrix(&SineSystem, 6).unwrap();
        assert!((g - DMatrix::identity(6, 6)).amax() < 1e-10);
    }

    #[test]
    fn residual_of_exact_eigenfunctions_is_small() {
        for j in 0..5 {
            assert!(eigen_residual(&SineSystem, j, 1.1, 1e-3) < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let c = sine_coeffs(4);
        assert!(price_u00(&SineSystem, &c, -1.0, 1.0, 4).is_err());
        assert!(price_u00(&SineSystem, &c, 1.0, 1.0, 5).is_err());
        assert!(ExpansionData::build(&SineSystem, &GroupParams::default(), 0, |_| Ok(vec![])).is_err());
    }
}
