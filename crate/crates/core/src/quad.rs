//! One-dimensional quadrature used by the kernel moments and the continuum
//! Fourier symbol.
//!
//! Everything here reduces to an adaptive 7/15-point Gauss–Kronrod rule with
//! global bisection. Endpoint singularities are handled by the caller through
//! [`integrate_graded`], which maps `t ↦ a + (b - a) t^p` before integrating,
//! and oscillatory half-line integrals go through [`fourier_tail`], which sums
//! half-period contributions and accelerates the partial sums with Wynn's
//! epsilon algorithm.

use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{NlvcError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Values that can be integrated: closed under addition and real scaling,
/// with a norm for error control.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn norm(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn norm(&self) -> f64 {
        Complex64::norm(*self)
    }
}

/// Complex 3-vector, the value type of the symbol's angular integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CVec3(pub [Complex64; 3]);

impl Add for CVec3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        CVec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for CVec3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        CVec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Mul<f64> for CVec3 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        CVec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl QuadValue for CVec3 {
    fn zero() -> Self {
        CVec3([Complex64::new(0.0, 0.0); 3])
    }
    fn norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Tolerances for the adaptive rule.
#[derive(Clone, Copy, Debug)]
pub struct QuadTol {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for QuadTol {
    fn default() -> Self {
        QuadTol { abs: 1e-14, rel: 1e-11, max_intervals: 4000 }
    }
}

impl QuadTol {
    pub fn new(abs: f64, rel: f64) -> Self {
        QuadTol { abs, rel, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Integral<V> {
    pub value: V,
    pub error: f64,
    pub evaluations: usize,
}

/// Single 15-point Kronrod panel with the embedded 7-point Gauss estimate.
pub fn gk15<V: QuadValue, F: FnMut(f64) -> V>(f: &mut F, a: f64, b: f64) -> (V, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k = k + s * WGK[j];
        if j % 2 == 1 {
            g = g + s * WG[j / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    (k, (k - g).norm())
}

struct Panel<V> {
    a: f64,
    b: f64,
    value: V,
    error: f64,
}

impl<V> PartialEq for Panel<V> {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl<V> Eq for Panel<V> {}
impl<V> PartialOrd for Panel<V> {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl<V> Ord for Panel<V> {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration over `[a, b]`, starting from
/// the given breakpoints (which must lie inside `(a, b)`).
pub fn adaptive<V: QuadValue, F: FnMut(f64) -> V>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: QuadTol,
) -> Result<Integral<V>> {
    if a == b {
        return Ok(Integral { value: V::zero(), error: 0.0, evaluations: 0 });
    }
    let mut pts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a.min(b) && x < a.max(b)).collect();
    inner.sort_by(|x, y| x.total_cmp(y));
    if b < a {
        inner.reverse();
    }
    pts.extend(inner);
    pts.push(b);

    let mut heap = BinaryHeap::new();
    let mut total = V::zero();
    let mut err = 0.0;
    let mut evals = 0;
    for w in pts.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        let (v, e) = gk15(&mut f, w[0], w[1]);
        evals += 15;
        total = total + v;
        err += e;
        heap.push(Panel { a: w[0], b: w[1], value: v, error: e });
    }

    while err > tol.abs.max(tol.rel * total.norm()) {
        if heap.len() >= tol.max_intervals {
            return Err(NlvcError::QuadratureNotConverged {
                achieved: err,
                requested: tol.abs.max(tol.rel * total.norm()),
            });
        }
        let p = heap.pop().expect("heap holds at least one panel");
        let m = 0.5 * (p.a + p.b);
        if (p.b - p.a).abs() <= 4.0 * f64::EPSILON * p.a.abs().max(p.b.abs()).max(f64::MIN_POSITIVE) {
            // interval exhausted at machine resolution; accept what we have
            heap.push(p);
            break;
        }
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        evals += 30;
        total = total - p.value + v1 + v2;
        err = err - p.error + e1 + e2;
        heap.push(Panel { a: p.a, b: m, value: v1, error: e1 });
        heap.push(Panel { a: m, b: p.b, value: v2, error: e2 });
    }

    // re-sum to shed accumulated cancellation from the running updates
    let mut value = V::zero();
    let mut error = 0.0;
    for p in heap.iter() {
        value = value + p.value;
        error += p.error;
    }
    Ok(Integral { value, error, evaluations: evals })
}

/// Integrates over `[a, b]` after the substitution `x = a + (b - a) t^p` on
/// the left half and its mirror on the right half, clustering nodes at both
/// endpoints. Integrable algebraic endpoint singularities of order up to
/// `1 - 1/p` become bounded.
pub fn integrate_graded<V: QuadValue, F: FnMut(f64) -> V>(
    mut f: F,
    a: f64,
    b: f64,
    p: f64,
    grade_left: bool,
    grade_right: bool,
    tol: QuadTol,
) -> Result<Integral<V>> {
    if a == b {
        return Ok(Integral { value: V::zero(), error: 0.0, evaluations: 0 });
    }
    let half = 0.5 * (b - a);
    let left = |t: f64, f: &mut F| -> V {
        if grade_left {
            let x = a + half * t.powf(p);
            f(x) * (half * p * t.powf(p - 1.0))
        } else {
            f(a + half * t) * half
        }
    };
    let right = |t: f64, f: &mut F| -> V {
        if grade_right {
            let x = b - half * t.powf(p);
            f(x) * (half * p * t.powf(p - 1.0))
        } else {
            f(b - half * t) * half
        }
    };
    let l = adaptive(|t| left(t, &mut f), 0.0, 1.0, &[], tol)?;
    let r = adaptive(|t| right(t, &mut f), 0.0, 1.0, &[], tol)?;
    Ok(Integral {
        value: l.value + r.value,
        error: l.error + r.error,
        evaluations: l.evaluations + r.evaluations,
    })
}

/// Integral of a left-singular integrand `f(r) ~ r^{-sigma}` on `[0, b]`,
/// `sigma < 1`, via `r = b t^p` with `p = 2 / (1 - sigma)`.
pub fn integrate_from_singular<V: QuadValue, F: FnMut(f64) -> V>(
    mut f: F,
    b: f64,
    sigma: f64,
    tol: QuadTol,
) -> Result<Integral<V>> {
    if sigma <= 0.0 {
        return adaptive(f, 0.0, b, &[], tol);
    }
    if sigma >= 1.0 {
        return Err(NlvcError::InvalidKernel(format!(
            "endpoint singularity r^-{sigma} is not integrable"
        )));
    }
    let p = 2.0 / (1.0 - sigma);
    adaptive(
        |t: f64| {
            if t == 0.0 {
                return V::zero();
            }
            f(b * t.powf(p)) * (b * p * t.powf(p - 1.0))
        },
        0.0,
        1.0,
        &[],
        tol,
    )
}

/// Integral over `[a, b]` with `b / a` large, carried out in `log r`.
pub fn integrate_log<V: QuadValue, F: FnMut(f64) -> V>(mut f: F, a: f64, b: f64, tol: QuadTol) -> Result<Integral<V>> {
    debug_assert!(a > 0.0 && b > a);
    adaptive(
        |t: f64| {
            let r = t.exp();
            f(r) * r
        },
        a.ln(),
        b.ln(),
        &[],
        tol,
    )
}

/// `∫_a^∞ f` for a monotone, eventually decaying integrand, summed over the
/// geometric partition `[a 2^k, a 2^{k+1}]` and accelerated with Wynn's
/// epsilon algorithm (exact for geometric decay of the pieces).
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, tol: QuadTol) -> Result<f64> {
    debug_assert!(a > 0.0);
    let mut sums = Vec::with_capacity(64);
    let mut acc = 0.0;
    let mut lo = a;
    let mut last = f64::NAN;
    for k in 0..400 {
        let hi = 2.0 * lo;
        let piece = adaptive(&mut f, lo, hi, &[], tol)?.value;
        acc += piece;
        sums.push(acc);
        lo = hi;
        if piece.abs() <= 1e-17 * acc.abs() {
            return Ok(acc);
        }
        if k >= 6 {
            let window = sums.len().min(24);
            let (est, err) = wynn_epsilon(&sums[sums.len() - window..]);
            if err <= tol.rel * est.abs() + tol.abs && (est - last).abs() <= tol.rel * est.abs() + tol.abs {
                return Ok(est);
            }
            last = est;
        }
    }
    Err(NlvcError::QuadratureNotConverged { achieved: f64::NAN, requested: tol.rel })
}

/// Wynn's epsilon algorithm applied to a sequence of partial sums. Returns
/// the accelerated limit and the difference between the last two diagonal
/// estimates as an error indicator.
pub fn wynn_epsilon(sums: &[f64]) -> (f64, f64) {
    let n = sums.len();
    if n < 3 {
        let last = *sums.last().unwrap_or(&0.0);
        return (last, f64::INFINITY);
    }
    // e[k][j]: column k of the epsilon table
    let mut prev: Vec<f64> = vec![0.0; n + 1];
    let mut cur: Vec<f64> = sums.to_vec();
    let mut estimates: Vec<f64> = Vec::new();
    let mut col = 0usize;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        let mut ok = true;
        for j in 0..cur.len() - 1 {
            let d = cur[j + 1] - cur[j];
            if d == 0.0 || !d.is_finite() {
                ok = false;
                break;
            }
            next.push(prev[j + 1] + 1.0 / d);
        }
        if !ok {
            break;
        }
        prev = cur;
        cur = next;
        col += 1;
        if col % 2 == 0 {
            if let Some(&v) = cur.last() {
                if v.is_finite() {
                    estimates.push(v);
                }
            }
        }
    }
    match estimates.len() {
        0 => (sums[n - 1], (sums[n - 1] - sums[n - 2]).abs()),
        1 => (estimates[0], (estimates[0] - sums[n - 1]).abs()),
        k => {
            // the deepest even columns are the most accelerated but also the
            // noisiest; pick the pair of neighbours that agree best
            let mut best = (estimates[k - 1], (estimates[k - 1] - estimates[k - 2]).abs());
            for i in 1..k {
                let e = (estimates[i] - estimates[i - 1]).abs();
                if e < best.1 {
                    best = (estimates[i], e);
                }
            }
            best
        }
    }
}

/// `∫_{r0}^∞ g(r) e^{i k r} dr` for a positive, eventually monotone,
/// integrable-at-infinity weight `g` and `k ≠ 0`.
///
/// The half-line is cut at the zeros `m π / |k|` of `sin(k r)`; the sequence of
/// partial sums oscillates with period two and is accelerated componentwise.
pub fn fourier_tail<G: FnMut(f64) -> f64>(mut g: G, r0: f64, k: f64, tol: QuadTol) -> Result<Complex64> {
    if k == 0.0 {
        return Err(NlvcError::Numerical("fourier_tail needs a nonzero frequency".into()));
    }
    let sgn = k.signum();
    let k = k.abs();
    let period = std::f64::consts::PI / k;
    let mut m = (r0 / period).floor() + 1.0;
    let first_end = m * period;
    let panel_tol = QuadTol { abs: tol.abs * 1e-2, rel: tol.rel * 1e-2, max_intervals: tol.max_intervals };

    let mut integrand = |r: f64| -> Complex64 {
        let (s, c) = (k * r).sin_cos();
        Complex64::new(c, s) * g(r)
    };
    let first = if first_end / r0.max(f64::MIN_POSITIVE) > 8.0 && r0 > 0.0 {
        integrate_log(&mut integrand, r0, first_end, panel_tol)?.value
    } else {
        adaptive(&mut integrand, r0, first_end, &[], panel_tol)?.value
    };

    let mut re = Vec::with_capacity(64);
    let mut im = Vec::with_capacity(64);
    let mut acc = first;
    re.push(acc.re);
    im.push(acc.im);
    let mut last_est = (f64::NAN, f64::NAN);
    for iter in 0..200 {
        let a = m * period;
        let b = (m + 1.0) * period;
        let piece = adaptive(&mut integrand, a, b, &[], panel_tol)?.value;
        acc += piece;
        re.push(acc.re);
        im.push(acc.im);
        m += 1.0;
        if iter >= 12 && iter % 2 == 0 {
            let window = re.len().min(40);
            let (er, dr) = wynn_epsilon(&re[re.len() - window..]);
            let (ei, di) = wynn_epsilon(&im[im.len() - window..]);
            let scale = (er * er + ei * ei).sqrt().max(piece.norm());
            let settled = (er - last_est.0).abs().max((ei - last_est.1).abs());
            last_est = (er, ei);
            if dr.max(di) <= tol.rel * scale + tol.abs && settled <= 10.0 * (tol.rel * scale + tol.abs) {
                return Ok(Complex64::new(er, sgn * ei));
            }
        }
    }
    if last_est.0.is_finite() {
        return Ok(Complex64::new(last_est.0, sgn * last_est.1));
    }
    Err(NlvcError::QuadratureNotConverged { achieved: f64::NAN, requested: tol.rel })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton on the Legendre
/// recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                let jf = j as f64;
                p0 = ((2.0 * jf + 1.0) * z * p1 - jf * p2) / (jf + 1.0);
            }
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}
