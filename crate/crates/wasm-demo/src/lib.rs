//! Browser bindings for three small demonstrations: the radial symbol
//! profile, a 2D Helmholtz split and the discrete Poincaré constant. Every
//! export returns JSON text so the page needs no generated type glue.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use nlvc::field::{Field, Rank};
use nlvc::helmholtz::decompose2d;
use nlvc::kernel::KernelSpec;
use nlvc::lattice::{fit_box_torus, Direction, DomainMask};
use nlvc::operators::{NonlocalOps, Sign};
use nlvc::poincare::{estimate_poincare, stencil_radius_cells};
use nlvc::symbol::{symbol_bound, SymbolEvaluator};

#[derive(Debug, Serialize)]
pub struct SymbolCurve {
    pub rho: Vec<f64>,
    /// `Λ_w(ρ)`.
    pub lambda_w: Vec<f64>,
    /// `|λ(ρ e₁)|` for `ν = e₁`.
    pub abs: Vec<f64>,
    pub bound: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Split {
    pub n: usize,
    /// Interleaved `(x, y)` per point, row-major with `x` fastest.
    pub input: Vec<f64>,
    pub gradient: Vec<f64>,
    pub rotational: Vec<f64>,
    pub residual: f64,
    pub orthogonality: f64,
    pub u_norm: f64,
}

#[derive(Debug, Serialize)]
pub struct Poincare {
    pub pi_h: f64,
    pub interior: usize,
    pub iterations: usize,
}

/// `fractional` uses `alpha` with a unit-radius softened core; any other
/// name gives the indicator of radius `delta`.
pub fn kernel(family: &str, d: usize, param: f64) -> KernelSpec {
    match family {
        "fractional" => KernelSpec::fractional_tail(d, param, param.min(0.9), 1.0),
        _ => KernelSpec::indicator(d, param),
    }
}

pub fn symbol_curve(family: &str, param: f64, rmax: f64, count: usize) -> nlvc::Result<SymbolCurve> {
    let spec = kernel(family, 2, param);
    let ev = SymbolEvaluator::new(&spec)?;
    let m = spec.moments()?;
    let nu = Direction::axis(2, 0, 1.0);
    let mut out = SymbolCurve { rho: vec![], lambda_w: vec![], abs: vec![], bound: vec![] };
    for k in 1..=count.max(2) {
        let rho = rmax * k as f64 / count.max(2) as f64;
        let s = ev.sample(&nu, &[rho, 0.0])?;
        out.rho.push(rho);
        out.lambda_w.push(s.lambda_w);
        out.abs.push(s.abs());
        out.bound.push(symbol_bound(&m, rho));
    }
    Ok(out)
}

/// A rotating vortex plus a radial source on the unit square, split into
/// its gradient and rotated-gradient parts.
pub fn helmholtz_split(n: usize, delta: f64) -> nlvc::Result<Split> {
    let h = 1.0 / n as f64;
    let spec = KernelSpec::indicator(2, delta);
    let radius = stencil_radius_cells(&spec, h, Default::default())?;
    let torus = fit_box_torus(&[0.0, 0.0], &[1.0, 1.0], h, radius)?;
    let ops = NonlocalOps::new(&spec, &torus, &Direction::axis(2, 0, 1.0), Default::default())?;
    let mask = DomainMask::build_box(&torus, &[0.0, 0.0], &[1.0, 1.0], ops.stencil(Sign::Plus).radius_cells())?;
    let mut u = Field::from_fn(&torus, Rank::Vector(2), |x, c| {
        let (a, b) = (x[0] - 0.5, x[1] - 0.5);
        let bump = (-(a * a + b * b) / 0.04).exp();
        if c == 0 {
            (-b + 0.6 * a) * bump
        } else {
            (a + 0.6 * b) * bump
        }
    });
    u.constrain(&mask);
    let r = decompose2d(&mask, &ops, &u, 1e-10)?;
    let pick = |f: &Field| -> Vec<f64> {
        let np = f.points();
        let mut v = Vec::with_capacity(2 * n * n);
        for &i in mask.interior_indices() {
            v.push(f.data[i]);
            v.push(f.data[np + i]);
        }
        v
    };
    Ok(Split {
        n: (mask.interior_count() as f64).sqrt().round() as usize,
        input: pick(&u),
        gradient: pick(&r.gradient_part),
        rotational: pick(&r.rotational_part),
        residual: r.report.residual,
        orthogonality: r.report.orthogonality,
        u_norm: r.report.u_norm,
    })
}

pub fn poincare(delta: f64, n: usize) -> nlvc::Result<Poincare> {
    let h = 1.0 / n as f64;
    let spec = KernelSpec::indicator(2, delta);
    let radius = stencil_radius_cells(&spec, h, Default::default())?;
    let torus = fit_box_torus(&[0.0, 0.0], &[1.0, 1.0], h, radius)?;
    let ops = NonlocalOps::new(&spec, &torus, &Direction::axis(2, 0, 1.0), Default::default())?.with_backend(nlvc::Backend::Fft);
    let mask = DomainMask::build_box(&torus, &[0.0, 0.0], &[1.0, 1.0], radius)?;
    let est = estimate_poincare(&mask, &ops, 1e-8)?;
    Ok(Poincare { pi_h: est.pi_h, interior: mask.interior_count(), iterations: est.iterations })
}

fn to_js<T: Serialize>(r: nlvc::Result<T>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = symbolCurve)]
pub fn symbol_curve_js(family: &str, param: f64, rmax: f64, count: usize) -> Result<String, JsError> {
    to_js(symbol_curve(family, param, rmax, count))
}

#[wasm_bindgen(js_name = helmholtzSplit)]
pub fn helmholtz_split_js(n: usize, delta: f64) -> Result<String, JsError> {
    to_js(helmholtz_split(n, delta))
}

#[wasm_bindgen(js_name = poincareConstant)]
pub fn poincare_js(delta: f64, n: usize) -> Result<String, JsError> {
    to_js(poincare(delta, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_reconstructs_input() {
        let s = helmholtz_split(12, 0.25).unwrap();
        assert_eq!(s.input.len(), 2 * s.n * s.n);
        assert!(s.residual <= 1e-9 * s.u_norm);
        assert!(s.orthogonality.abs() <= 1e-10 * s.u_norm * s.u_norm);
    }

    #[test]
    fn indicator_curve_stays_below_bound() {
        let c = symbol_curve("indicator", 0.5, 4.0, 4).unwrap();
        assert!(c.abs.iter().zip(&c.bound).all(|(a, b)| a <= b));
    }

    #[test]
    fn poincare_is_positive() {
        assert!(poincare(0.25, 8).unwrap().pi_h > 0.0);
    }
}
