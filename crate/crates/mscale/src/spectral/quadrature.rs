//! Matrix elements `A`, `B`, `B̃` by quadrature against the speed density.

use super::{EigenSystem, MatrixElements, Source};
use crate::averaging::GroupParams;
use crate::diffusion::quad::{Tol, WG, WGK, XGK};
use crate::error::{invalid, Error, Result};
use nalgebra::DMatrix;

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: Vec<f64>,
}

fn gk21_vec(f: &mut impl FnMut(f64, &mut [f64]), a: f64, b: f64, dim: usize, buf: &mut [f64]) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    f(c, buf);
    for i in 0..dim {
        kron[i] = WGK[0] * buf[i];
    }
    for j in 1..11 {
        for &x in &[c - h * XGK[j], c + h * XGK[j]] {
            f(x, buf);
            for i in 0..dim {
                kron[i] += WGK[j] * buf[i];
                if j % 2 == 1 {
                    gauss[i] += WG[j / 2] * buf[i];
                }
            }
        }
    }
    let error = kron.iter().zip(&gauss).map(|(k, g)| (h * (k - g)).abs()).collect();
    let value = kron.iter().map(|k| h * k).collect();
    Panel { a, b, value, error }
}

/// Adaptive Gauss-Kronrod for a vector integrand whose components are split
/// into `groups` of consecutive entries. Component `i` converges once its
/// error is below `max(rel·|vᵢ|, abs·max_group|v|)`; every panel with an
/// unconverged component is bisected each round.
pub fn integrate_vector(
    mut f: impl FnMut(f64, &mut [f64]),
    a: f64,
    b: f64,
    initial_panels: usize,
    groups: &[usize],
    tol: Tol,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return invalid(format!("vector quadrature needs a finite interval, got ({a}, {b})"));
    }
    let dim: usize = groups.iter().sum();
    let mut buf = vec![0.0; dim];
    let n0 = initial_panels.max(1);
    let width = (b - a) / n0 as f64;
    let mut panels: Vec<Panel> = (0..n0)
        .map(|i| {
            let lo = a + i as f64 * width;
            let hi = if i + 1 == n0 { b } else { lo + width };
            gk21_vec(&mut f, lo, hi, dim, &mut buf)
        })
        .collect();
    loop {
        let mut total = vec![0.0; dim];
        let mut err = vec![0.0; dim];
        for p in &panels {
            for i in 0..dim {
                total[i] += p.value[i];
                err[i] += p.error[i];
            }
        }
        if let Some(i) = total.iter().position(|v| !v.is_finite()) {
            return Err(Error::Quadrature { a, b, detail: format!("component {i} is not finite") });
        }
        let mut thresh = vec![0.0; dim];
        let mut start = 0;
        for &g in groups {
            let scale = total[start..start + g].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in start..start + g {
                thresh[i] = (tol.rel * total[i].abs()).max(tol.abs * scale).max(f64::MIN_POSITIVE);
            }
            start += g;
        }
        if (0..dim).all(|i| err[i] <= thresh[i]) {
            return Ok((total, err));
        }
        // share each component's budget among panels by width
        let mut next = Vec::with_capacity(panels.len() * 2);
        let mut split_any = false;
        for p in panels {
            let share = (p.b - p.a) / (b - a);
            let bad = (0..dim).any(|i| p.error[i] > thresh[i] * share && err[i] > thresh[i]);
            if bad && p.b - p.a > 1e-14 * (b - a) {
                let m = 0.5 * (p.a + p.b);
                next.push(gk21_vec(&mut f, p.a, m, dim, &mut buf));
                next.push(gk21_vec(&mut f, m, p.b, dim, &mut buf));
                split_any = true;
            } else {
                next.push(p);
            }
        }
        panels = next;
        if !split_any || panels.len() > tol.max_intervals {
            let worst = (0..dim).max_by(|&i, &j| (err[i] / thresh[i]).total_cmp(&(err[j] / thresh[j]))).unwrap_or(0);
            return Err(Error::Quadrature {
                a,
                b,
                detail: format!("component {worst} error {:e} above {:e}", err[worst], thresh[worst]),
            });
        }
    }
}

/// `ψ″` from the eigen equation, then `ψ‴` from its derivative.
fn higher_derivatives(
    lambda: f64,
    psi: f64,
    dpsi: f64,
    lc: &super::LocalCoeffs,
    sigma_bar: f64,
) -> (f64, f64) {
    let d = sigma_bar * sigma_bar * lc.a * lc.a;
    let d2 = 2.0 * ((lc.k - lambda) * psi - lc.b_hat * dpsi) / d;
    let d3 = 2.0 * (lc.dk * psi + (lc.k - lambda - lc.db_hat) * dpsi - lc.b_hat * d2) / d - 2.0 * lc.da * d2 / lc.a;
    (d2, d3)
}

/// Fills `A`, `B`, `B̃` for the first `count` eigenfunctions by quadrature of
/// `ψ_k (op ψₙ) 𝔪` over the model window. `ψ″` and `ψ‴` come from the eigen
/// equation; `∂_zψₙ` from central differences of the reparametrized model.
pub fn matrix_elements_by_quadrature<S: EigenSystem>(eig: &S, gp: &GroupParams, count: usize) -> Result<MatrixElements> {
    matrix_elements_with_tol(eig, gp, count, Tol { abs: 1e-11, rel: 1e-9, max_intervals: 20_000 })
}

pub fn matrix_elements_with_tol<S: EigenSystem>(
    eig: &S,
    gp: &GroupParams,
    count: usize,
    tol: Tol,
) -> Result<MatrixElements> {
    if count == 0 {
        return invalid("matrix elements need at least one eigenfunction");
    }
    let (s, fo) = (eig.sigma_bar(), eig.fom_bar());
    // five-point central stencil: [+h, -h, +2h, -2h] with weight 1/(12h)
    let mut shifted: Vec<([S; 4], f64)> = Vec::new();
    if gp.sigma_bar_prime != 0.0 {
        let h = 1e-4 * s.abs();
        let at = |d: f64| eig.with_averages(s + d, fo);
        shifted.push(([at(h)?, at(-h)?, at(2.0 * h)?, at(-2.0 * h)?], gp.sigma_bar_prime / (12.0 * h)));
    }
    if gp.fom_bar_prime != 0.0 {
        let h = 1e-3 * fo.abs().max(1e-2 * s.abs());
        let at = |d: f64| eig.with_averages(s, fo + d);
        shifted.push(([at(h)?, at(-h)?, at(2.0 * h)?, at(-2.0 * h)?], gp.fom_bar_prime / (12.0 * h)));
    }
    let lambda = eig.lambdas(count);
    let nn = count * count;
    let (lo, hi) = eig.window(count);
    let want_bt = !shifted.is_empty() && (gp.v1 != 0.0 || gp.v0 != 0.0);

    let mut op_a = vec![0.0; count];
    let mut op_b = vec![0.0; count];
    let mut op_bt = vec![0.0; count];
    let integrand = |x: f64, out: &mut [f64]| {
        let lm = eig.log_speed(x);
        let m = lm.exp();
        if m == 0.0 {
            out.fill(0.0);
            return;
        }
        let (psi, dpsi) = eig.psi_upto(count, x);
        let lc = eig.local(x);
        let a = lc.a;
        for n in 0..count {
            let (d2, d3) = higher_derivatives(lambda[n], psi[n], dpsi[n], &lc, s);
            op_a[n] = -gp.v3 * (2.0 * a * a * lc.da * d2 + a * a * a * d3)
                - gp.v2 * a * a * d2
                - gp.u2 * (a * lc.da * dpsi[n] + a * a * d2)
                - gp.u1 * a * dpsi[n];
            op_b[n] = -gp.v1 * a * dpsi[n] - gp.v0 * psi[n];
            op_bt[n] = 0.0;
        }
        if want_bt {
            for (stencil, w) in &shifted {
                let [(p1, d1), (m1, e1), (p2, d2), (m2, e2)] = stencil.each_ref().map(|e| e.psi_upto(count, x));
                for n in 0..count {
                    let dz = w * (8.0 * (p1[n] - m1[n]) - (p2[n] - m2[n]));
                    let dzp = w * (8.0 * (d1[n] - e1[n]) - (d2[n] - e2[n]));
                    op_bt[n] += -gp.v1 * a * dzp - gp.v0 * dz;
                }
            }
        }
        for n in 0..count {
            for k in 0..count {
                let wk = psi[k] * m;
                out[k + n * count] = wk * op_a[n];
                out[nn + k + n * count] = wk * op_b[n];
                out[2 * nn + k + n * count] = wk * op_bt[n];
            }
        }
    };
    let (v, _) = integrate_vector(integrand, lo, hi, 4 * count + 8, &[nn, nn, nn], tol)?;
    let at = |off: usize| DMatrix::from_fn(count, count, |k, n| v[off + k + n * count]);
    Ok(MatrixElements {
        a: at(0),
        b: at(nn),
        bt: at(2 * nn),
        a_source: Source::Quadrature,
        b_source: Source::Quadrature,
        bt_source: Source::Quadrature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vector_integrator_handles_mixed_components() {
        let (v, _) = integrate_vector(
            |x, out| {
                out[0] = x.sin();
                out[1] = (-x * x).exp();
                out[2] = (40.0 * x).cos();
            },
            0.0,
            std::f64::consts::PI,
            2,
            &[3],
            Tol::new(1e-13, 1e-12),
        )
        .unwrap();
        assert_relative_eq!(v[0], 2.0, max_relative = 1e-12);
        let half_gauss = 0.5 * std::f64::consts::PI.sqrt() * libm::erf(std::f64::consts::PI);
        assert_relative_eq!(v[1], half_gauss, max_relative = 1e-12);
        assert!(v[2].abs() < 1e-12);
    }

    #[test]
    fn rejects_infinite_interval() {
        assert!(integrate_vector(|_, o| o[0] = 1.0, 0.0, f64::INFINITY, 1, &[1], Tol::default()).is_err());
    }
}
