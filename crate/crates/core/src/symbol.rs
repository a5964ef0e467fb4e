//! Continuum Fourier symbol `λ^ν(ξ) = ∫_{z·ν ≥ 0} ẑ w(z) (e^{2πiξ·z} - 1) dz`.
//!
//! Polar reduction gives `λ^ν(ξ) = ∫_{θ·ν ≥ 0} θ Φ(ξ·θ) dθ` with the radial
//! transform `Φ(a) = ∫_0^∞ r^{d-1} w(r) (e^{2πiar} - 1) dr`. `Φ` is computed
//! once per direction cosine; the angular integral is one-dimensional in every
//! dimension (the azimuth is integrated in closed form for `d = 3`).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NlvcError, Result};
use crate::kernel::{KernelMoments, KernelSpec, RadialProfile};
use crate::lattice::Direction;
use crate::quad::{self, QuadTol};

/// One evaluation of the continuum symbol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolSample {
    pub xi: Vec<f64>,
    /// `(re, im)` per component.
    pub lambda: Vec<(f64, f64)>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    /// `Λ_w(|ξ|)`.
    pub lambda_w: f64,
}

impl SymbolSample {
    pub fn xi_norm(&self) -> f64 {
        norm(&self.xi)
    }

    pub fn abs(&self) -> f64 {
        (norm(&self.re).powi(2) + norm(&self.im).powi(2)).sqrt()
    }

    /// `|Im λ - (Im λ · ξ̂) ξ̂| / max(|Im λ|, 1e-6 |λ|)`. The floor keeps the
    /// ratio meaningful where `Λ_w` has an exact zero.
    pub fn im_misalignment(&self) -> f64 {
        let r = self.xi_norm();
        let n = norm(&self.im).max(1e-6 * self.abs());
        if r == 0.0 || n == 0.0 {
            return 0.0;
        }
        let p: f64 = self.im.iter().zip(&self.xi).map(|(a, b)| a * b / r).sum();
        let res: f64 = self.im.iter().zip(&self.xi).map(|(a, b)| (a - p * b / r).powi(2)).sum::<f64>().sqrt();
        res / n
    }

    /// `Im λ · ξ̂`, which equals `Λ_w(|ξ|)`.
    pub fn im_projection(&self) -> f64 {
        let r = self.xi_norm();
        if r == 0.0 {
            return 0.0;
        }
        self.im.iter().zip(&self.xi).map(|(a, b)| a * b / r).sum()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `√2 (2π M1 |ξ| + M2)`.
pub fn symbol_bound(m: &KernelMoments, xi_norm: f64) -> f64 {
    std::f64::consts::SQRT_2 * (2.0 * PI * m.m1 * xi_norm + m.m2)
}

/// Evaluator bound to one kernel.
#[derive(Clone, Debug)]
pub struct SymbolEvaluator {
    pub spec: KernelSpec,
    profile: RadialProfile,
    d: usize,
    /// Exponent of `r^{d-1} w(r) r` at the origin, negated.
    sigma: f64,
    /// Start of the oscillatory tail for unbounded supports.
    tail_start: f64,
    /// `∫_X^∞ r^{d-1} w`.
    tail_mass: f64,
    radial_tol: QuadTol,
    angular_tol: QuadTol,
}

impl SymbolEvaluator {
    pub fn new(spec: &KernelSpec) -> Result<Self> {
        let profile = spec.profile()?;
        let d = spec.d;
        let sigma = if profile.singular_at_origin() { spec.singularity() } else { 0.0 };
        let support = profile.support();
        let tail_start = if support.is_finite() {
            support
        } else {
            profile.breakpoints().into_iter().fold(1.0f64, f64::max)
        };
        let tail_mass = if support.is_finite() {
            0.0
        } else {
            profile.radial_integral(d as f64 - 1.0, tail_start, f64::INFINITY)?
        };
        if !tail_mass.is_finite() {
            return Err(NlvcError::InvalidKernel("kernel tail is not integrable".into()));
        }
        Ok(SymbolEvaluator {
            spec: spec.clone(),
            profile,
            d,
            sigma,
            tail_start,
            tail_mass,
            radial_tol: QuadTol { abs: 1e-15, rel: 1e-12, max_intervals: 40_000 },
            angular_tol: QuadTol { abs: 1e-14, rel: 1e-11, max_intervals: 4000 },
        })
    }

    fn g(&self, r: f64) -> f64 {
        if r <= 0.0 {
            0.0
        } else {
            r.powi(self.d as i32 - 1) * self.profile.eval(r)
        }
    }

    /// `Φ(a) = ∫_0^∞ r^{d-1} w(r) (e^{2πiar} - 1) dr`.
    pub fn radial(&self, a: f64) -> Result<Complex64> {
        if a == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let k = 2.0 * PI * a;
        let half = PI / k.abs();
        let f = |r: f64| -> Complex64 {
            let gr = self.g(r);
            if gr == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let s = (0.5 * k * r).sin();
            Complex64::new(-2.0 * s * s, (k * r).sin()) * gr
        };
        let x = self.tail_start;
        let mut first = half.min(x);
        for b in self.profile.breakpoints() {
            if b > 0.0 && b < first {
                first = b;
            }
        }
        let mut total = quad::integrate_from_singular(f, first, self.sigma, self.radial_tol)?.value;
        if first < x {
            let mut breaks = self.profile.breakpoints();
            let mut m = (first / half).floor() + 1.0;
            while m * half < x {
                breaks.push(m * half);
                m += 1.0;
            }
            total += quad::adaptive(f, first, x, &breaks, self.radial_tol)?.value;
        }
        if self.profile.support().is_infinite() {
            let tail = quad::fourier_tail(|r| self.g(r), x, k, self.radial_tol)?;
            total += tail - self.tail_mass;
        }
        Ok(total)
    }

    /// `λ^ν(ξ)` as a complex `d`-vector, padded to three entries.
    pub fn lambda(&self, nu: &Direction, xi: &[f64]) -> Result<[Complex64; 3]> {
        let zero = Complex64::new(0.0, 0.0);
        if xi.len() != self.d || nu.d != self.d {
            return Err(NlvcError::Config(format!("frequency and direction must have {} components", self.d)));
        }
        let rho = norm(xi);
        if rho == 0.0 {
            return Ok([zero; 3]);
        }
        let mut xh = [0.0; 3];
        for a in 0..self.d {
            xh[a] = xi[a] / rho;
        }
        match self.d {
            1 => {
                let s = nu.v[0];
                let phi = self.radial(s * xi[0])?;
                Ok([phi * s, zero, zero])
            }
            2 => self.lambda2(nu, rho, xh),
            _ => self.lambda3(nu, rho, xh),
        }
    }

    fn lambda2(&self, nu: &Direction, rho: f64, xh: [f64; 3]) -> Result<[Complex64; 3]> {
        let ph = [-xh[1], xh[0], 0.0];
        let cpsi = nu.v[0] * xh[0] + nu.v[1] * xh[1];
        let spsi = nu.v[0] * ph[0] + nu.v[1] * ph[1];
        let psi = spsi.atan2(cpsi);
        let (lo, hi) = (psi - 0.5 * PI, psi + 0.5 * PI);
        let mut cuts = vec![lo];
        for kink in [-1.5 * PI, -0.5 * PI, 0.5 * PI, 1.5 * PI] {
            if kink > lo + 1e-14 && kink < hi - 1e-14 {
                cuts.push(kink);
            }
        }
        cuts.push(hi);
        let is_kink = |x: f64| (x.cos()).abs() < 1e-12;
        let mut acc = [Complex64::new(0.0, 0.0); 2];
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let part = quad::integrate_graded(
                |p: f64| -> Result2 {
                    let (s, c) = p.sin_cos();
                    let v = self.radial(rho * c).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
                    Result2([v * c, v * s])
                },
                a,
                b,
                3.0,
                is_kink(a),
                is_kink(b),
                self.angular_tol,
            )?;
            acc[0] += part.value.0[0];
            acc[1] += part.value.0[1];
        }
        check_finite(&acc)?;
        Ok([acc[0] * xh[0] + acc[1] * ph[0], acc[0] * xh[1] + acc[1] * ph[1], Complex64::new(0.0, 0.0)])
    }

    fn lambda3(&self, nu: &Direction, rho: f64, xh: [f64; 3]) -> Result<[Complex64; 3]> {
        let cpsi = nu.dot(xh).clamp(-1.0, 1.0);
        let mut pv = [nu.v[0] - cpsi * xh[0], nu.v[1] - cpsi * xh[1], nu.v[2] - cpsi * xh[2]];
        let spsi = norm(&pv);
        let degenerate = spsi < 1e-13;
        if !degenerate {
            for x in pv.iter_mut() {
                *x /= spsi;
            }
        }
        let psi = spsi.atan2(cpsi);
        // azimuthal measure of {φ : cos φ ≥ c} and ∫ cos φ over it
        let arcs = |th: f64| -> (f64, f64) {
            let (st, ct) = th.sin_cos();
            if degenerate {
                let side = ct * cpsi;
                return if side > 0.0 { (2.0 * PI, 0.0) } else if side < 0.0 { (0.0, 0.0) } else { (PI, 0.0) };
            }
            let c = if st == 0.0 {
                if ct * cpsi > 0.0 {
                    -1.0
                } else {
                    1.0
                }
            } else {
                (-ct * cpsi / (st * spsi)).clamp(-1.0, 1.0)
            };
            (2.0 * c.acos(), 2.0 * (1.0 - c * c).max(0.0).sqrt())
        };
        let t1 = (0.5 * PI - psi).abs();
        let mut cuts = vec![0.0, 0.5 * PI, t1, PI - t1, PI];
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut acc = [Complex64::new(0.0, 0.0); 2];
        for w in cuts.windows(2) {
            let part = quad::integrate_graded(
                |th: f64| -> Result2 {
                    let (st, ct) = th.sin_cos();
                    let (len, cosint) = arcs(th);
                    let v = self.radial(rho * ct).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
                    Result2([v * (st * ct * len), v * (st * st * cosint)])
                },
                w[0],
                w[1],
                3.0,
                w[0] > 0.0,
                w[1] < PI,
                self.angular_tol,
            )?;
            acc[0] += part.value.0[0];
            acc[1] += part.value.0[1];
        }
        check_finite(&acc)?;
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for a in 0..3 {
            out[a] = acc[0] * xh[a] + if degenerate { Complex64::new(0.0, 0.0) } else { acc[1] * pv[a] };
        }
        Ok(out)
    }

    /// `Λ_w(ρ) = ½ ∫ (w(z)/|z|) z_1 sin(2πρ z_1) dz`.
    pub fn big_lambda(&self, rho: f64) -> Result<f64> {
        if rho == 0.0 {
            return Ok(0.0);
        }
        let im = |a: f64| self.radial(a).map(|z| z.im).unwrap_or(f64::NAN);
        let v = match self.d {
            1 => im(rho),
            2 => quad::integrate_graded(|p: f64| p.cos() * im(rho * p.cos()), -0.5 * PI, 0.5 * PI, 3.0, true, true, self.angular_tol)?.value,
            _ => 2.0 * PI * quad::integrate_graded(|t: f64| t * im(rho * t), 0.0, 1.0, 3.0, true, false, self.angular_tol)?.value,
        };
        if !v.is_finite() {
            return Err(NlvcError::QuadratureNotConverged { achieved: f64::NAN, requested: self.angular_tol.rel });
        }
        Ok(v)
    }

    pub fn sample(&self, nu: &Direction, xi: &[f64]) -> Result<SymbolSample> {
        let l = self.lambda(nu, xi)?;
        let d = self.d;
        let lambda_w = self.big_lambda(norm(xi))?;
        Ok(SymbolSample {
            xi: xi.to_vec(),
            lambda: l[..d].iter().map(|z| (z.re, z.im)).collect(),
            re: l[..d].iter().map(|z| z.re).collect(),
            im: l[..d].iter().map(|z| z.im).collect(),
            lambda_w,
        })
    }
}

/// Pair of complex values for the angular quadrature.
#[derive(Clone, Copy, Debug)]
struct Result2([Complex64; 2]);

impl std::ops::Add for Result2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Result2([self.0[0] + o.0[0], self.0[1] + o.0[1]])
    }
}

impl std::ops::Sub for Result2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Result2([self.0[0] - o.0[0], self.0[1] - o.0[1]])
    }
}

impl std::ops::Mul<f64> for Result2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Result2([self.0[0] * s, self.0[1] * s])
    }
}

impl quad::QuadValue for Result2 {
    fn zero() -> Self {
        Result2([Complex64::new(0.0, 0.0); 2])
    }
    fn norm(&self) -> f64 {
        (self.0[0].norm_sqr() + self.0[1].norm_sqr()).sqrt()
    }
}

fn check_finite(v: &[Complex64]) -> Result<()> {
    if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(NlvcError::QuadratureNotConverged { achieved: f64::NAN, requested: 1e-8 })
    }
}

/// `λ^ν(ξ)` for a single frequency.
pub fn symbol_continuum(spec: &KernelSpec, nu: &Direction, xi: &[f64]) -> Result<SymbolSample> {
    SymbolEvaluator::new(spec)?.sample(nu, xi)
}

/// `d × d` orthogonal matrix stored row-major in a padded array.
pub type Orthogonal = [[f64; 3]; 3];

fn apply(r: &Orthogonal, d: usize, x: &[f64]) -> Vec<f64> {
    (0..d).map(|i| (0..d).map(|j| r[i][j] * x[j]).sum()).collect()
}

fn apply_t(r: &Orthogonal, d: usize, x: &[f64]) -> Vec<f64> {
    (0..d).map(|i| (0..d).map(|j| r[j][i] * x[j]).sum()).collect()
}

/// Checks `RᵀR = I` to `1e-14`.
pub fn is_orthogonal(r: &Orthogonal, d: usize) -> bool {
    (0..d).all(|i| {
        (0..d).all(|j| {
            let s: f64 = (0..d).map(|k| r[k][i] * r[k][j]).sum();
            (s - if i == j { 1.0 } else { 0.0 }).abs() <= 1e-14
        })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    /// `|λ^{Rν}(ξ) - R λ^ν(Rᵀξ)| / max(|λ^{Rν}(ξ)|, tiny)` per sample.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// `λ^{Rν}(ξ) = R λ^ν(Rᵀ ξ)` at every sample.
pub fn check_equivariance(ev: &SymbolEvaluator, nu: &Direction, r: &Orthogonal, xis: &[Vec<f64>]) -> Result<EquivarianceReport> {
    let d = ev.d;
    if !is_orthogonal(r, d) {
        return Err(NlvcError::Config("matrix is not orthogonal".into()));
    }
    let rnu = Direction::new(&apply(r, d, nu.as_slice()))?;
    let residuals = par_map(xis, |xi| -> Result<f64> {
        let lhs = ev.lambda(&rnu, xi)?;
        let inner = ev.lambda(nu, &apply_t(r, d, xi))?;
        let mut res = 0.0;
        let mut scale = 0.0;
        for i in 0..d {
            let mut rl = Complex64::new(0.0, 0.0);
            for j in 0..d {
                rl += inner[j] * r[i][j];
            }
            res += (lhs[i] - rl).norm_sqr();
            scale += lhs[i].norm_sqr();
        }
        Ok(res.sqrt() / scale.sqrt().max(1e-300))
    })?;
    let max_residual = residuals.iter().fold(0.0f64, |m, &x| m.max(x));
    Ok(EquivarianceReport { residuals, max_residual })
}

/// `|Re λ^ν(ξ) · ν|`, the quantity bounded below in the positivity argument.
pub fn positivity_witness(ev: &SymbolEvaluator, nu: &Direction, xi: &[f64]) -> Result<f64> {
    let l = ev.lambda(nu, xi)?;
    Ok((0..ev.d).map(|a| l[a].re * nu.v[a]).sum::<f64>().abs())
}

/// Frequencies `ρ θ` with log-spaced `ρ` and quasi-uniform directions `θ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiGrid {
    pub radii: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
}

impl XiGrid {
    pub fn log_polar(d: usize, rmin: f64, rmax: f64, n_radii: usize, n_dirs: usize) -> Result<Self> {
        if !(rmin > 0.0 && rmax > rmin && n_radii >= 2) {
            return Err(NlvcError::Config("frequency grid needs 0 < rmin < rmax and two radii".into()));
        }
        let radii = (0..n_radii)
            .map(|i| (rmin.ln() + (rmax.ln() - rmin.ln()) * i as f64 / (n_radii - 1) as f64).exp())
            .collect();
        let directions = match d {
            1 => vec![vec![1.0], vec![-1.0]],
            2 => (0..n_dirs)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / n_dirs as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect(),
            _ => {
                // Fibonacci lattice on the sphere
                let golden = PI * (3.0 - 5f64.sqrt());
                (0..n_dirs)
                    .map(|k| {
                        let z = 1.0 - (2.0 * k as f64 + 1.0) / n_dirs as f64;
                        let r = (1.0 - z * z).sqrt();
                        let t = golden * k as f64;
                        vec![r * t.cos(), r * t.sin(), z]
                    })
                    .collect()
            }
        };
        Ok(XiGrid { radii, directions })
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.radii.len() * self.directions.len());
        for &r in &self.radii {
            for dir in &self.directions {
                out.push(dir.iter().map(|x| x * r).collect());
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEstimate {
    /// `min_ξ |λ_w(ξ)| / |λ_φ(ξ)|`.
    pub c_est: f64,
    pub argmin: Vec<f64>,
    pub samples: usize,
}

/// Grid minimum of `|λ_w| / |λ_φ|` with `φ` the comparison kernel of `w`.
pub fn comparison_constant(spec: &KernelSpec, nu: &Direction, grid: &XiGrid) -> Result<ComparisonEstimate> {
    let phi = spec.comparison_kernel()?;
    let ew = SymbolEvaluator::new(spec)?;
    let same = phi == *spec;
    let ep = SymbolEvaluator::new(&phi)?;
    let pts = grid.points();
    let ratios = par_map(&pts, |xi| -> Result<f64> {
        let lw = ew.lambda(nu, xi)?;
        if same {
            return Ok(1.0);
        }
        let lp = ep.lambda(nu, xi)?;
        let nw: f64 = lw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let np: f64 = lp.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        Ok(nw / np)
    })?;
    let (k, c_est) = ratios
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bk, bv), (k, &v)| if v < bv { (k, v) } else { (bk, bv) });
    if !(c_est >= 1e-12) {
        return Err(NlvcError::Numerical(format!("symbol ratio {c_est:e} at ξ = {:?} contradicts the comparison bound", pts[k])));
    }
    Ok(ComparisonEstimate { c_est, argmin: pts[k].clone(), samples: pts.len() })
}

/// Deterministic map over samples, parallel when enabled.
pub(crate) fn par_map<T, U, F>(items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn indicator_line_closed_form() {
        let ev = SymbolEvaluator::new(&KernelSpec::indicator(1, 1.0)).unwrap();
        assert_relative_eq!(ev.big_lambda(0.5).unwrap(), 2.0 / PI, max_relative = 1e-10);
        for &x in &[0.1, 0.77, 3.3] {
            let k = 2.0 * PI * x;
            let want = Complex64::new(k.sin() / k - 1.0, (1.0 - k.cos()) / k);
            let got = ev.radial(x).unwrap();
            assert!((got - want).norm() < 1e-11);
        }
    }

    #[test]
    fn zero_frequency_gives_zero() {
        let s = symbol_continuum(&KernelSpec::indicator(2, 1.0), &Direction::axis(2, 0, 1.0), &[0.0, 0.0]).unwrap();
        assert_eq!(s.abs(), 0.0);
    }

    #[test]
    fn pure_fractional_line_matches_gamma_formula() {
        // ∫_0^∞ r^{-1-α}(e^{ikr} - 1) dr = Γ(-α) (-ik)^α
        let alpha: f64 = 0.5;
        let ev = SymbolEvaluator::new(&KernelSpec::fractional(1, alpha)).unwrap();
        let x = 0.3;
        let k = 2.0 * PI * x;
        let gamma = statrs::function::gamma::gamma(-alpha);
        let want = Complex64::new(0.0, -k).powf(alpha) * gamma;
        let got = ev.radial(x).unwrap();
        assert!((got - want).norm() < 1e-9 * want.norm(), "{got} vs {want}");
    }

    #[test]
    fn flipped_direction_conjugates() {
        let ev = SymbolEvaluator::new(&KernelSpec::indicator(2, 1.0)).unwrap();
        let nu = Direction::new(&[0.6, 0.8]).unwrap();
        let xi = [0.7, -0.4];
        let a = ev.lambda(&nu, &xi).unwrap();
        let b = ev.lambda(&nu.neg(), &xi).unwrap();
        for i in 0..2 {
            assert!((a[i] + b[i].conj()).norm() < 1e-10);
        }
    }
}
