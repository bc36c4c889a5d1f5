//! Time factors `Tₙ`, `U_{k,n}` and `V_{k,n}` with their confluent limits.

/// Gap below which `U` and `V` take their exact limits, relative to
/// `max(1, |λₙ|)`.
pub const CONFLUENT_GAP: f64 = 1e-9;
/// `|Δλ t|` below which the series branch is used.
pub const SERIES_GAP: f64 = 0.1;

pub fn t_factor(lambda: f64, t: f64) -> f64 {
    (-lambda * t).exp()
}

fn confluent(lk: f64, ln: f64) -> bool {
    (lk - ln).abs() < CONFLUENT_GAP * ln.abs().max(1.0)
}

/// `(T_k − Tₙ)/(λ_k − λₙ)`, with limit `−t Tₙ`.
pub fn u_factor(lk: f64, ln: f64, t: f64) -> f64 {
    if confluent(lk, ln) {
        return -t * t_factor(ln, t);
    }
    let x = (lk - ln) * t;
    if x.abs() < SERIES_GAP {
        u_series(lk, ln, t)
    } else if x.abs() <= 1.0 {
        t_factor(ln, t) * (-x).exp_m1() / (lk - ln)
    } else {
        u_direct(lk, ln, t)
    }
}

/// `(T_k − Tₙ)/(λ_k − λₙ)²  +  t Tₙ/(λ_k − λₙ)`, with limit `½t² Tₙ`.
pub fn v_factor(lk: f64, ln: f64, t: f64) -> f64 {
    if confluent(lk, ln) {
        return 0.5 * t * t * t_factor(ln, t);
    }
    let d = lk - ln;
    let x = d * t;
    if x.abs() < SERIES_GAP {
        v_series(lk, ln, t)
    } else if x.abs() <= 1.0 {
        t_factor(ln, t) * ((-x).exp_m1() + x) / (d * d)
    } else {
        v_direct(lk, ln, t)
    }
}

/// The ratio formula as written.
pub fn u_direct(lk: f64, ln: f64, t: f64) -> f64 {
    (t_factor(lk, t) - t_factor(ln, t)) / (lk - ln)
}

pub fn v_direct(lk: f64, ln: f64, t: f64) -> f64 {
    let d = lk - ln;
    (t_factor(lk, t) - t_factor(ln, t)) / (d * d) + t * t_factor(ln, t) / d
}

/// `−t Tₙ Σ_j (−x)^j/(j+1)!` with `x = (λ_k − λₙ) t`.
pub fn u_series(lk: f64, ln: f64, t: f64) -> f64 {
    let x = -(lk - ln) * t;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..14 {
        term *= x / (j + 1) as f64;
        sum += term;
    }
    -t * t_factor(ln, t) * sum
}

/// `t² Tₙ Σ_j (−x)^j/(j+2)!`.
pub fn v_series(lk: f64, ln: f64, t: f64) -> f64 {
    let x = -(lk - ln) * t;
    let mut term = 0.5;
    let mut sum = 0.5;
    for j in 1..14 {
        term *= x / (j + 2) as f64;
        sum += term;
    }
    t * t * t_factor(ln, t) * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn trivial_values() {
        assert_eq!(t_factor(3.0, 0.0), 1.0);
        let e = std::f64::consts::E;
        assert_relative_eq!(v_factor(2.0, 1.0, 1.0), e.powi(-2), max_relative = 1e-14);
        assert_relative_eq!(u_factor(1.0, 1.0, 0.7), -0.7 * (-0.7f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(v_factor(1.0, 1.0, 0.7), 0.5 * 0.49 * (-0.7f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn branches_agree() {
        for &(lk, ln, t) in &[(1.001, 1.0, 1.0), (1.0, 1.001, 2.0), (5.0, 4.95, 1.5), (0.2, 0.9, 1.0), (30.0, 1.0, 2.0)] {
            let x: f64 = (lk - ln) * t;
            if x.abs() < 0.5 {
                assert_relative_eq!(u_series(lk, ln, t), u_direct(lk, ln, t), max_relative = 1e-11);
                assert_relative_eq!(v_series(lk, ln, t), v_direct(lk, ln, t), max_relative = 1e-9);
            }
            assert_relative_eq!(u_factor(lk, ln, t), u_direct(lk, ln, t), max_relative = 1e-9);
            assert_relative_eq!(v_factor(lk, ln, t), v_direct(lk, ln, t), max_relative = 1e-7);
        }
    }

    #[test]
    fn no_overflow_for_wide_gaps() {
        let u = u_factor(0.0, 1000.0, 1.0);
        assert_relative_eq!(u, -1e-3, max_relative = 1e-12);
        assert!(v_factor(0.0, 1000.0, 1.0).is_finite());
    }
}
