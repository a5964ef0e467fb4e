//! Radial interaction kernels, their moments, and the comparison kernel.
//!
//! Every family is stored as a piecewise profile in `r = |x|`. Pure power-law
//! pieces `c r^p` admit closed-form radial integrals; tempered pieces are
//! integrated numerically. An optional `cap` clips the profile from above,
//! which is how the comparison kernel `min(1, w χ_{B_1})` is represented.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{NlvcError, Result};
use crate::quad::{self, QuadTol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `c0 r^{-s}` on `r <= delta`, `0 <= s < d`.
    CompactIntegrable,
    /// `c0 r^{-(d+s)}` on `r <= delta`.
    CompactSingular,
    /// `c0 r^{-(d+alpha)}` beyond `r_tail`, `c0 r_tail^{-(d+alpha)} (r/r_tail)^{-(d+s)}` inside.
    FractionalTail,
    /// `c0 e^{-lambda_t r} r^{-(d+alpha)}`.
    Tempered,
}

/// Radial kernel description. `delta = None` means unbounded support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub d: usize,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default)]
    pub lambda_t: f64,
    #[serde(default)]
    pub eps0: Option<f64>,
    #[serde(default)]
    pub r_tail: Option<f64>,
    #[serde(default)]
    pub cap: Option<f64>,
}

fn default_c0() -> f64 {
    1.0
}

/// One piece of the radial profile on `(a, b]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Piece {
    Power { a: f64, b: f64, coef: f64, pow: f64 },
    Tempered { a: f64, b: f64, c0: f64, lambda: f64, pow: f64 },
}

impl Piece {
    pub fn a(&self) -> f64 {
        match *self {
            Piece::Power { a, .. } | Piece::Tempered { a, .. } => a,
        }
    }

    pub fn b(&self) -> f64 {
        match *self {
            Piece::Power { b, .. } | Piece::Tempered { b, .. } => b,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Piece::Power { coef, pow, .. } => {
                if pow == 0.0 {
                    coef
                } else {
                    coef * r.powf(pow)
                }
            }
            Piece::Tempered { c0, lambda, pow, .. } => c0 * (-lambda * r).exp() * r.powf(pow),
        }
    }

    /// Exponent of the leading power near `r = a`.
    pub fn power(&self) -> f64 {
        match *self {
            Piece::Power { pow, .. } | Piece::Tempered { pow, .. } => pow,
        }
    }

    fn with_bounds(&self, na: f64, nb: f64) -> Piece {
        match *self {
            Piece::Power { coef, pow, .. } => Piece::Power { a: na, b: nb, coef, pow },
            Piece::Tempered { c0, lambda, pow, .. } => Piece::Tempered { a: na, b: nb, c0, lambda, pow },
        }
    }
}

/// Piecewise radial profile `w̄(r)`, nonincreasing in `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    pub d: usize,
    pub pieces: Vec<Piece>,
}

impl RadialProfile {
    pub fn eval(&self, r: f64) -> f64 {
        for p in &self.pieces {
            if r > p.a() && r <= p.b() {
                return p.eval(r);
            }
        }
        0.0
    }

    /// Interior breakpoints where the profile is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.pieces.iter().map(|p| p.b()).filter(|b| b.is_finite()).collect();
        v.dedup();
        v
    }

    pub fn support(&self) -> f64 {
        self.pieces.last().map(|p| p.b()).unwrap_or(0.0)
    }

    /// Whether the profile blows up at the origin.
    pub fn singular_at_origin(&self) -> bool {
        self.pieces.first().map(|p| p.power() < 0.0).unwrap_or(false)
    }

    /// `∫_lo^hi r^q w̄(r) dr`, closed form on power pieces, quadrature on
    /// tempered ones. Divergent integrals return `+∞`.
    pub fn radial_integral(&self, q: f64, lo: f64, hi: f64) -> Result<f64> {
        let mut total = 0.0;
        for p in &self.pieces {
            let a = p.a().max(lo);
            let b = p.b().min(hi);
            if b <= a {
                continue;
            }
            let part = match *p {
                Piece::Power { coef, pow, .. } => power_integral(coef, q + pow, a, b),
                Piece::Tempered { .. } => piece_quadrature(p, q, a, b)?,
            };
            if !part.is_finite() {
                return Ok(f64::INFINITY);
            }
            total += part;
        }
        Ok(total)
    }

    /// Same integral evaluated by adaptive quadrature on every piece; used to
    /// cross-check the closed forms.
    pub fn radial_integral_quadrature(&self, q: f64, lo: f64, hi: f64) -> Result<f64> {
        let mut total = 0.0;
        for p in &self.pieces {
            let a = p.a().max(lo);
            let b = p.b().min(hi);
            if b <= a {
                continue;
            }
            let e = q + p.power();
            if (a == 0.0 && e <= -1.0) || (b.is_infinite() && e >= -1.0 && matches!(p, Piece::Power { .. })) {
                return Ok(f64::INFINITY);
            }
            total += piece_quadrature(p, q, a, b)?;
        }
        Ok(total)
    }
}

/// `∫_a^b coef r^e dr`.
fn power_integral(coef: f64, e: f64, a: f64, b: f64) -> f64 {
    if (e + 1.0).abs() < 1e-15 {
        if a == 0.0 || b.is_infinite() {
            return f64::INFINITY;
        }
        return coef * (b.ln() - a.ln());
    }
    let k = e + 1.0;
    if a == 0.0 && k < 0.0 {
        return f64::INFINITY;
    }
    if b.is_infinite() && k > 0.0 {
        return f64::INFINITY;
    }
    let fb = if b.is_infinite() { 0.0 } else { b.powf(k) };
    let fa = if a == 0.0 { 0.0 } else { a.powf(k) };
    coef * (fb - fa) / k
}

fn piece_quadrature(p: &Piece, q: f64, a: f64, b: f64) -> Result<f64> {
    let tol = QuadTol::new(1e-300, 1e-12);
    let g = |r: f64| if r <= 0.0 { 0.0 } else { r.powf(q) * p.eval(r) };
    let e = q + p.power();
    let finite_end = if b.is_infinite() { (2.0 * a).max(1.0) } else { b };
    let mut total = if a == 0.0 && e < 0.0 {
        if e <= -1.0 {
            return Ok(f64::INFINITY);
        }
        quad::integrate_from_singular(g, finite_end, -e, tol)?.value
    } else {
        quad::adaptive(g, a, finite_end, &[], tol)?.value
    };
    if b.is_infinite() {
        total += quad::integrate_to_infinity(g, finite_end, tol)?;
    }
    Ok(total)
}

/// Surface area of the unit sphere `S^k` in `R^{k+1}`.
pub fn sphere_area(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        2 => 4.0 * PI,
        3 => 2.0 * PI * PI,
        _ => panic!("sphere_area only tabulated for k <= 3"),
    }
}

/// `∫_{S^{d-1} ∩ {η_1 > 0}} η_1 dη`.
pub fn half_sphere_cosine(d: usize) -> f64 {
    if d == 1 {
        1.0
    } else {
        sphere_area(d - 2) / (d as f64 - 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelMoments {
    /// `∫_{|x|<=1} |x| w dx`.
    pub m1: f64,
    /// `∫_{|x|>1} w dx`.
    pub m2: f64,
    /// `∫_{z_1 > 0} z_1/|z| w dz`; `None` when infinite.
    pub c_hat: Option<f64>,
    /// `∫ w dx`; `None` when infinite.
    pub total_mass: Option<f64>,
    /// `∫ |x| w dx`; `None` when infinite.
    pub first_moment: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionItem {
    pub id: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub items: Vec<AssumptionItem>,
    /// Which alternative of the comparison assumption holds: 1 for a finite
    /// first moment, 2 for an exact fractional tail.
    pub clause: Option<u8>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.items.iter().all(|i| i.pass) && self.clause.is_some()
    }
}

impl KernelSpec {
    pub fn constant(d: usize, c0: f64, delta: f64) -> Self {
        KernelSpec {
            family: KernelFamily::CompactIntegrable,
            d,
            delta: Some(delta),
            s: Some(0.0),
            alpha: None,
            c0,
            lambda_t: 0.0,
            eps0: None,
            r_tail: None,
            cap: None,
        }
    }

    /// Indicator of the ball of radius `delta`.
    pub fn indicator(d: usize, delta: f64) -> Self {
        Self::constant(d, 1.0, delta)
    }

    pub fn compact_power(d: usize, s: f64, delta: f64) -> Self {
        KernelSpec { s: Some(s), ..Self::constant(d, 1.0, delta) }
    }

    pub fn compact_singular(d: usize, s: f64, delta: f64) -> Self {
        KernelSpec { family: KernelFamily::CompactSingular, s: Some(s), ..Self::constant(d, 1.0, delta) }
    }

    /// `|x|^{-d-alpha}` everywhere.
    pub fn fractional(d: usize, alpha: f64) -> Self {
        KernelSpec {
            family: KernelFamily::FractionalTail,
            d,
            delta: None,
            s: None,
            alpha: Some(alpha),
            c0: 1.0,
            lambda_t: 0.0,
            eps0: None,
            r_tail: None,
            cap: None,
        }
    }

    /// Fractional tail beyond `r_tail` with a milder `r^{-(d+s)}` core.
    pub fn fractional_tail(d: usize, alpha: f64, s: f64, r_tail: f64) -> Self {
        KernelSpec { s: Some(s), r_tail: Some(r_tail), ..Self::fractional(d, alpha) }
    }

    pub fn tempered(d: usize, alpha: f64, lambda_t: f64) -> Self {
        KernelSpec { family: KernelFamily::Tempered, lambda_t, ..Self::fractional(d, alpha) }
    }

    /// Singularity exponent, defaulting to `alpha` for the fractional family.
    pub fn singularity(&self) -> f64 {
        match self.family {
            KernelFamily::FractionalTail => self.s.or(self.alpha).unwrap_or(0.0),
            _ => self.s.unwrap_or(0.0),
        }
    }

    pub fn eps0(&self) -> f64 {
        self.eps0.unwrap_or_else(|| 0.5 * self.delta.unwrap_or(1.0).min(1.0))
    }

    /// Parameter-range validation; integrability is left to
    /// [`check_assumptions`](Self::check_assumptions).
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NlvcError::InvalidKernel(m));
        if !(1..=3).contains(&self.d) {
            return bad(format!("dimension must be 1, 2 or 3, got {}", self.d));
        }
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return bad(format!("c0 must be positive, got {}", self.c0));
        }
        if let Some(dl) = self.delta {
            if !(dl > 0.0) {
                return bad(format!("delta must be positive, got {dl}"));
            }
        }
        if let Some(c) = self.cap {
            if !(c > 0.0) {
                return bad(format!("cap must be positive, got {c}"));
            }
        }
        if let Some(e) = self.eps0 {
            if !(e > 0.0 && e < 1.0) {
                return bad(format!("eps0 must lie in (0,1), got {e}"));
            }
        }
        if self.singularity() < 0.0 || !self.singularity().is_finite() {
            return bad(format!("s must be a finite nonnegative number, got {}", self.singularity()));
        }
        match self.family {
            KernelFamily::CompactIntegrable | KernelFamily::CompactSingular => {
                if self.delta.is_none() {
                    return bad("compact families need a finite delta".into());
                }
                if self.alpha.is_some() {
                    return bad("alpha only applies to fractional and tempered kernels".into());
                }
                if self.family == KernelFamily::CompactIntegrable && self.singularity() >= self.d as f64 {
                    return bad(format!(
                        "compact integrable kernel needs s < d, got s = {}",
                        self.singularity()
                    ));
                }
            }
            KernelFamily::FractionalTail => {
                let a = self.alpha.ok_or_else(|| NlvcError::InvalidKernel("fractional kernel needs alpha".into()))?;
                if !(a > 0.0 && a <= 1.0) {
                    return bad(format!("alpha must lie in (0, 1], got {a}"));
                }
                if let Some(r) = self.r_tail {
                    if !(r >= 0.0) {
                        return bad(format!("r_tail must be nonnegative, got {r}"));
                    }
                }
            }
            KernelFamily::Tempered => {
                let a = self.alpha.ok_or_else(|| NlvcError::InvalidKernel("tempered kernel needs alpha".into()))?;
                if !(a > 0.0 && a < 1.0) {
                    return bad(format!("tempered alpha must lie in (0, 1), got {a}"));
                }
                if !(self.lambda_t >= 0.0) {
                    return bad(format!("lambda_t must be nonnegative, got {}", self.lambda_t));
                }
            }
        }
        Ok(())
    }

    /// Piecewise profile after truncation at `delta` and clipping at `cap`.
    pub fn profile(&self) -> Result<RadialProfile> {
        self.validate()?;
        let d = self.d as f64;
        let s = self.singularity();
        let mut pieces = match self.family {
            KernelFamily::CompactIntegrable => {
                vec![Piece::Power { a: 0.0, b: f64::INFINITY, coef: self.c0, pow: -s }]
            }
            KernelFamily::CompactSingular => {
                vec![Piece::Power { a: 0.0, b: f64::INFINITY, coef: self.c0, pow: -(d + s) }]
            }
            KernelFamily::FractionalTail => {
                let alpha = self.alpha.unwrap_or(1.0);
                let r_tail = self.r_tail.unwrap_or(1.0);
                if r_tail == 0.0 || s == alpha {
                    vec![Piece::Power { a: 0.0, b: f64::INFINITY, coef: self.c0, pow: -(d + alpha) }]
                } else {
                    // continuity at r_tail fixes the inner coefficient
                    let inner = self.c0 * r_tail.powf(-(d + alpha)) * r_tail.powf(d + s);
                    vec![
                        Piece::Power { a: 0.0, b: r_tail, coef: inner, pow: -(d + s) },
                        Piece::Power { a: r_tail, b: f64::INFINITY, coef: self.c0, pow: -(d + alpha) },
                    ]
                }
            }
            KernelFamily::Tempered => {
                let alpha = self.alpha.unwrap_or(0.5);
                if self.lambda_t == 0.0 {
                    vec![Piece::Power { a: 0.0, b: f64::INFINITY, coef: self.c0, pow: -(d + alpha) }]
                } else {
                    vec![Piece::Tempered {
                        a: 0.0,
                        b: f64::INFINITY,
                        c0: self.c0,
                        lambda: self.lambda_t,
                        pow: -(d + alpha),
                    }]
                }
            }
        };
        if let Some(delta) = self.delta {
            pieces.retain(|p| p.a() < delta);
            for p in pieces.iter_mut() {
                if p.b() > delta {
                    *p = p.with_bounds(p.a(), delta);
                }
            }
        }
        if let Some(cap) = self.cap {
            pieces = apply_cap(&pieces, cap);
        }
        Ok(RadialProfile { d: self.d, pieces })
    }

    /// Radial representation `w̄(r)`.
    pub fn eval_radial(&self, r: f64) -> Result<f64> {
        let prof = self.profile()?;
        if r < 0.0 || r.is_nan() {
            return Err(NlvcError::InvalidKernel(format!("radius must be nonnegative, got {r}")));
        }
        if r == 0.0 {
            if prof.singular_at_origin() {
                return Err(NlvcError::InvalidKernel("profile diverges at r = 0".into()));
            }
            return Ok(prof.pieces.first().map(|p| p.eval(0.0)).unwrap_or(0.0));
        }
        Ok(prof.eval(r))
    }

    pub fn is_integrable(&self) -> bool {
        self.profile()
            .and_then(|p| p.radial_integral(self.d as f64 - 1.0, 0.0, f64::INFINITY))
            .map(|m| m.is_finite())
            .unwrap_or(false)
    }

    pub fn is_bounded(&self) -> bool {
        self.profile().map(|p| !p.singular_at_origin()).unwrap_or(false)
    }

    pub fn moments(&self) -> Result<KernelMoments> {
        let prof = self.profile()?;
        self.moments_with(|q, lo, hi| prof.radial_integral(q, lo, hi))
    }

    /// Moments computed purely by quadrature.
    pub fn moments_quadrature(&self) -> Result<KernelMoments> {
        let prof = self.profile()?;
        self.moments_with(|q, lo, hi| prof.radial_integral_quadrature(q, lo, hi))
    }

    fn moments_with<F: Fn(f64, f64, f64) -> Result<f64>>(&self, radial: F) -> Result<KernelMoments> {
        let d = self.d as f64;
        let area = sphere_area(self.d - 1);
        let m1 = area * radial(d, 0.0, 1.0)?;
        let m2 = area * radial(d - 1.0, 1.0, f64::INFINITY)?;
        if !m1.is_finite() || !m2.is_finite() {
            return Err(NlvcError::InvalidKernel(format!(
                "divergent moment: M1 = {m1}, M2 = {m2}"
            )));
        }
        let mass_radial = radial(d - 1.0, 0.0, f64::INFINITY)?;
        let finite = |x: f64| if x.is_finite() { Some(x) } else { None };
        let first = radial(d, 0.0, f64::INFINITY)?;
        Ok(KernelMoments {
            m1,
            m2,
            c_hat: finite(half_sphere_cosine(self.d) * mass_radial),
            total_mass: finite(area * mass_radial),
            first_moment: finite(area * first),
        })
    }

    /// `min(1, w χ_{B_1})`. Returns `self` unchanged when neither the clip nor
    /// the truncation is active.
    pub fn comparison_kernel(&self) -> Result<KernelSpec> {
        let prof = self.profile()?;
        let sup = if prof.singular_at_origin() {
            f64::INFINITY
        } else {
            prof.pieces.first().map(|p| p.eval(0.0)).unwrap_or(0.0)
        };
        let support = prof.support();
        if sup <= 1.0 && support <= 1.0 {
            return Ok(self.clone());
        }
        let mut phi = self.clone();
        phi.delta = Some(self.delta.unwrap_or(1.0).min(1.0));
        phi.cap = Some(self.cap.unwrap_or(1.0).min(1.0));
        phi.eps0 = Some(self.eps0().min(0.5));
        Ok(phi)
    }

    pub fn check_assumptions(&self) -> AssumptionReport {
        let mut items = Vec::new();
        let mut push = |id: &str, pass: bool, detail: String| {
            items.push(AssumptionItem { id: id.to_string(), pass, detail });
        };
        let prof = match self.profile() {
            Ok(p) => p,
            Err(e) => {
                push("parameters", false, e.to_string());
                return AssumptionReport { items, clause: None };
            }
        };
        push("parameters", true, "parameter ranges valid".into());
        push("radial-nonnegative", true, "profile is radial with c0 > 0".into());

        let eps0 = self.eps0();
        let w_eps = prof.eval(eps0);
        push(
            "positive-near-origin",
            eps0 > 0.0 && eps0 < 1.0 && w_eps > 0.0,
            format!("eps0 = {eps0}, w(eps0) = {w_eps:e}"),
        );

        let d = self.d as f64;
        let loc = prof.radial_integral(d, 0.0, 1.0).unwrap_or(f64::INFINITY);
        push(
            "first-moment-local",
            loc.is_finite(),
            format!("∫_0^1 r^d w dr = {loc:e}"),
        );
        let far = prof.radial_integral(d - 1.0, 1.0, f64::INFINITY).unwrap_or(f64::INFINITY);
        push(
            "moments-finite",
            loc.is_finite() && far.is_finite(),
            format!("M1 + M2 = {:e}", sphere_area(self.d - 1) * (loc + far)),
        );

        let first = prof.radial_integral(d, 0.0, f64::INFINITY).unwrap_or(f64::INFINITY);
        let clause = if !(loc.is_finite() && far.is_finite()) {
            None
        } else if first.is_finite() {
            Some(1)
        } else if self.has_exact_fractional_tail() {
            Some(2)
        } else {
            None
        };
        let detail = match clause {
            Some(1) => "finite first moment".to_string(),
            Some(2) => format!("exact tail c0 |x|^(-d-{})", self.alpha.unwrap_or(0.0)),
            _ => "neither a finite first moment nor an exact fractional tail".to_string(),
        };
        push("comparison-clause", clause.is_some(), detail);
        AssumptionReport { items, clause }
    }

    fn has_exact_fractional_tail(&self) -> bool {
        let alpha_ok = self.alpha.map(|a| a > 0.0 && a <= 1.0).unwrap_or(false);
        let untruncated = self.delta.is_none();
        match self.family {
            KernelFamily::FractionalTail => alpha_ok && untruncated,
            KernelFamily::Tempered => alpha_ok && untruncated && self.lambda_t == 0.0,
            _ => false,
        }
    }

    /// `w_δ(x) = δ^{-d-1} w(x/δ)`.
    pub fn scaled(&self, delta: f64) -> KernelSpec {
        let d = self.d as f64;
        let mut k = self.clone();
        let s = self.singularity();
        k.c0 = match self.family {
            KernelFamily::CompactIntegrable => self.c0 * delta.powf(-d - 1.0 + s),
            KernelFamily::CompactSingular => self.c0 * delta.powf(s - 1.0),
            KernelFamily::FractionalTail | KernelFamily::Tempered => {
                self.c0 * delta.powf(self.alpha.unwrap_or(0.0) - 1.0)
            }
        };
        k.delta = self.delta.map(|x| x * delta);
        k.r_tail = self.r_tail.map(|x| x * delta);
        k.cap = self.cap.map(|c| c * delta.powf(-d - 1.0));
        k.eps0 = self.eps0.map(|e| (e * delta).min(0.5));
        if self.family == KernelFamily::Tempered {
            k.lambda_t = self.lambda_t / delta;
        }
        k
    }
}

fn apply_cap(pieces: &[Piece], cap: f64) -> Vec<Piece> {
    let mut out = Vec::new();
    for p in pieces {
        let (a, b) = (p.a(), p.b());
        let rc = crossing(p, cap, a, b);
        if rc > a {
            out.push(Piece::Power { a, b: rc, coef: cap, pow: 0.0 });
        }
        if rc < b {
            out.push(p.with_bounds(rc, b));
        }
    }
    out
}

/// Radius in `[a, b]` where the decreasing piece meets `cap`.
fn crossing(p: &Piece, cap: f64, a: f64, b: f64) -> f64 {
    if let Piece::Power { coef, pow, .. } = *p {
        if pow == 0.0 {
            return if coef > cap { b } else { a };
        }
        let r = (cap / coef).powf(1.0 / pow);
        return r.clamp(a, b);
    }
    if b.is_finite() && p.eval(b) > cap {
        return b;
    }
    let mut hi = if b.is_finite() { b } else { a.max(1.0) };
    while p.eval(hi) > cap {
        hi *= 2.0;
    }
    let mut lo = if a == 0.0 { hi * 1e-300 } else { a };
    if p.eval(lo) <= cap {
        return a;
    }
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if p.eval(m) > cap {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eval_examples() {
        let k = KernelSpec::indicator(2, 1.0);
        assert_eq!(k.eval_radial(0.5).unwrap(), 1.0);
        assert_eq!(k.eval_radial(1.5).unwrap(), 0.0);
        let f = KernelSpec { r_tail: Some(0.0), ..KernelSpec::fractional(1, 0.5) };
        assert_relative_eq!(f.eval_radial(2.0).unwrap(), 2f64.powf(-1.5), max_relative = 1e-15);
        assert!(f.eval_radial(0.0).is_err());
    }

    #[test]
    fn moment_examples() {
        let m = KernelSpec::indicator(2, 1.0).moments().unwrap();
        assert_relative_eq!(m.m1, 2.0 * PI / 3.0, max_relative = 1e-14);
        assert_eq!(m.m2, 0.0);
        let m = KernelSpec::indicator(1, 1.0).moments().unwrap();
        assert_relative_eq!(m.c_hat.unwrap(), 1.0, max_relative = 1e-15);
        let f = KernelSpec::fractional(1, 0.5);
        let m = f.moments().unwrap();
        assert_relative_eq!(m.m1, 4.0, max_relative = 1e-14);
        assert_relative_eq!(m.m2, 4.0, max_relative = 1e-14);
        assert!(m.c_hat.is_none());
        let q = f.moments_quadrature().unwrap();
        assert_relative_eq!(q.m1, 4.0, max_relative = 1e-9);
        assert_relative_eq!(q.m2, 4.0, max_relative = 1e-9);
    }

    #[test]
    fn comparison_examples() {
        let f = KernelSpec::fractional(2, 0.5).comparison_kernel().unwrap();
        for r in [0.01, 0.3, 0.99, 1.0] {
            assert_eq!(f.eval_radial(r).unwrap(), 1.0);
        }
        assert_eq!(f.eval_radial(1.01).unwrap(), 0.0);
        let half = KernelSpec::constant(2, 0.5, 1.0);
        assert_eq!(half.comparison_kernel().unwrap(), half);
        let two = KernelSpec::constant(2, 2.0, 2.0).comparison_kernel().unwrap();
        assert_eq!(two.eval_radial(0.5).unwrap(), 1.0);
        assert_eq!(two.eval_radial(1.5).unwrap(), 0.0);
    }

    #[test]
    fn assumption_examples() {
        let r = KernelSpec::indicator(2, 0.5).check_assumptions();
        assert!(r.all_pass());
        assert_eq!(r.clause, Some(1));
        let r = KernelSpec::fractional(2, 0.5).check_assumptions();
        assert!(r.all_pass());
        assert_eq!(r.clause, Some(2));
        let r = KernelSpec::compact_singular(2, 1.5, 1.0).check_assumptions();
        assert!(!r.all_pass());
        assert!(r.items.iter().any(|i| i.id == "first-moment-local" && !i.pass));
        let r = KernelSpec::tempered(3, 0.5, 2.0).check_assumptions();
        assert!(r.all_pass());
        assert_eq!(r.clause, Some(1));
    }

    #[test]
    fn cap_splits_power_pieces() {
        let k = KernelSpec { cap: Some(4.0), ..KernelSpec::compact_singular(1, 0.5, 1.0) };
        let p = k.profile().unwrap();
        // r^{-1.5} = 4 at r = 4^{-2/3}
        let rc = 4f64.powf(-2.0 / 3.0);
        assert_eq!(p.pieces.len(), 2);
        assert_relative_eq!(p.pieces[0].b(), rc, max_relative = 1e-14);
        assert_eq!(p.eval(0.5 * rc), 4.0);
    }
}
