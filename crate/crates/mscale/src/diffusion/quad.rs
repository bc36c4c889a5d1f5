//! Adaptive Gauss-Kronrod (10/21) and tanh-sinh quadrature.

use crate::error::{Error, Result};
use std::collections::BinaryHeap;

pub(crate) const XGK: [f64; 11] = [
    0.0,
    0.148_874_338_981_631_210_88,
    0.294_392_862_701_460_198_13,
    0.433_395_394_129_247_190_8,
    0.562_757_134_668_604_683_34,
    0.679_409_568_299_024_406_23,
    0.780_817_726_586_416_897_06,
    0.865_063_366_688_984_510_73,
    0.930_157_491_355_708_226,
    0.973_906_528_517_171_720_08,
    0.995_657_163_025_808_080_74,
];
pub(crate) const WGK: [f64; 11] = [
    0.149_445_554_002_916_905_66,
    0.147_739_104_901_338_491_37,
    0.142_775_938_577_060_080_8,
    0.134_709_217_311_473_325_93,
    0.123_491_976_262_065_851_08,
    0.109_387_158_802_297_641_9,
    0.093_125_454_583_697_605_535,
    0.075_039_674_810_919_952_767,
    0.054_755_896_574_351_996_031,
    0.032_558_162_307_964_727_479,
    0.011_694_638_867_371_874_278,
];
// Gauss weights for the odd-indexed Kronrod nodes.
pub(crate) const WG: [f64; 5] = [
    0.295_524_224_714_752_870_17,
    0.269_266_719_309_996_355_09,
    0.219_086_362_515_982_044,
    0.149_451_349_150_580_593_15,
    0.066_671_344_308_688_137_594,
];

#[derive(Debug, Clone, Copy)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tol {
    fn default() -> Self {
        Self { abs: 1e-10, rel: 1e-9, max_intervals: 2000 }
    }
}

impl Tol {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

fn gk21(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[0] * fc;
    let mut g = 0.0;
    for i in 1..11 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Segment {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&o.error)
    }
}

fn adaptive(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: Tol) -> Result<Quad> {
    let (v, e) = gk21(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e });
    let (mut total, mut err) = (v, e);
    while err > tol.abs.max(tol.rel * total.abs()) {
        if heap.len() >= tol.max_intervals {
            return Err(Error::Quadrature {
                a,
                b,
                detail: format!("no convergence after {} intervals (error {err:e})", heap.len()),
            });
        }
        let s = heap.pop().expect("heap is never empty");
        let m = 0.5 * (s.a + s.b);
        if m <= s.a || m >= s.b {
            return Err(Error::Quadrature { a, b, detail: format!("interval collapsed near {m}") });
        }
        let (v1, e1) = gk21(&mut f, s.a, m);
        let (v2, e2) = gk21(&mut f, m, s.b);
        total += v1 + v2 - s.value;
        err += e1 + e2 - s.error;
        heap.push(Segment { a: s.a, b: m, value: v1, error: e1 });
        heap.push(Segment { a: m, b: s.b, value: v2, error: e2 });
        if !total.is_finite() {
            return Err(Error::Quadrature { a, b, detail: "non-finite integrand".into() });
        }
    }
    // Re-sum to shed accumulated rounding from the running updates.
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    if !value.is_finite() {
        return Err(Error::Quadrature { a, b, detail: "non-finite integrand".into() });
    }
    Ok(Quad { value, error })
}

/// Integral of `f` over `[a, b]`; either limit may be infinite.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: Tol) -> Result<Quad> {
    if a == b {
        return Ok(Quad { value: 0.0, error: 0.0 });
    }
    if a > b {
        return integrate(f, b, a, tol).map(|q| Quad { value: -q.value, error: q.error });
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adaptive(f, a, b, tol),
        (true, false) => adaptive(|t| half_line(&f, a, t, 1.0), 0.0, 1.0, tol),
        (false, true) => adaptive(|t| half_line(&f, b, t, -1.0), 0.0, 1.0, tol),
        (false, false) => {
            let lo = adaptive(|t| half_line(&f, 0.0, t, -1.0), 0.0, 1.0, tol)?;
            let hi = adaptive(|t| half_line(&f, 0.0, t, 1.0), 0.0, 1.0, tol)?;
            Ok(Quad { value: lo.value + hi.value, error: lo.error + hi.error })
        }
    }
}

fn half_line(f: &impl Fn(f64) -> f64, origin: f64, t: f64, dir: f64) -> f64 {
    let u = 1.0 - t;
    let v = f(origin + dir * t / u);
    if v == 0.0 {
        0.0
    } else {
        v / (u * u)
    }
}

/// Integral over `[a, b]` split at interior `breaks`.
pub fn integrate_pieces(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], tol: Tol) -> Result<Quad> {
    let mut pts = vec![a];
    pts.extend(breaks.iter().cloned().filter(|&x| x > a && x < b));
    pts.push(b);
    let mut out = Quad { value: 0.0, error: 0.0 };
    for w in pts.windows(2) {
        let q = integrate(&f, w[0], w[1], tol)?;
        out.value += q.value;
        out.error += q.error;
    }
    Ok(out)
}

/// Tanh-sinh rule on a finite interval, for integrands with endpoint
/// singularities. The integrand is never evaluated at `a` or `b`; nodes are
/// resolved to full relative precision only near an endpoint at 0.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: Tol) -> Result<Quad> {
    let h0 = 0.5 * (b - a);
    let half_pi = std::f64::consts::FRAC_PI_2;
    // Beyond this the node distance to the endpoint underflows.
    let tmax = 6.5;
    // Nodes are placed by their distance to the nearer endpoint so that
    // points close to `a` or `b` keep full relative precision.
    let eval = |t: f64| -> f64 {
        let s = half_pi * t.sinh();
        let cs = s.cosh();
        let w = half_pi * t.cosh() / (cs * cs);
        // 1 - tanh|s| = 2 / (1 + e^{2|s|})
        let dist = h0 * 2.0 / (1.0 + (2.0 * s.abs()).exp());
        if dist <= 0.0 || w == 0.0 {
            return 0.0;
        }
        let x = if t >= 0.0 { b - dist } else { a + dist };
        if x <= a || x >= b {
            return 0.0;
        }
        f(x) * w * h0
    };
    let mut h = 1.0;
    let mut sum = eval(0.0);
    let mut k = 1;
    while (k as f64) * h <= tmax {
        sum += eval(k as f64 * h) + eval(-(k as f64) * h);
        k += 1;
    }
    let mut prev = sum * h;
    for _level in 0..12 {
        h *= 0.5;
        let mut add = 0.0;
        let mut k = 1;
        while (k as f64) * h <= tmax {
            let t = k as f64 * h;
            add += eval(t) + eval(-t);
            k += 2;
        }
        sum += add;
        let cur = sum * h;
        let err = (cur - prev).abs();
        if !cur.is_finite() {
            return Err(Error::Quadrature { a, b, detail: "non-finite integrand".into() });
        }
        if err <= tol.abs.max(tol.rel * cur.abs()) {
            return Ok(Quad { value: cur, error: err });
        }
        prev = cur;
    }
    Err(Error::Quadrature { a, b, detail: "tanh-sinh did not converge".into() })
}

/// Fixed Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let nf = n as f64;
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let p = if n == 0 { 1.0 } else { p1 };
                let pm1 = if n == 1 { 1.0 } else { p0 };
                dp = nf * (x * p - pm1) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes.push(x);
            weights.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
    }
}
