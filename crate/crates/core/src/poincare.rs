//! Discrete Poincaré constant `Π_h = sup ‖u‖ / ‖G u‖` over fields vanishing
//! outside the domain, from the smallest eigenvalue of `A = -R L Rᵀ` on the
//! interior unknowns.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NlvcError, Result};
use crate::field::{Field, Rank};
use crate::kernel::KernelSpec;
use crate::krylov::{self, dot, norm};
use crate::lattice::{fit_box_torus, Direction, DomainMask};
use crate::operators::{Backend, NonlocalOps, Sign, StencilOptions};

/// Seed for start vectors and random spot checks.
pub const SEED: u64 = 0xA11CE;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareEstimate {
    #[serde(rename = "Pi_h")]
    pub pi_h: f64,
    pub sigma_min: f64,
    /// Outer inverse-power steps.
    pub iterations: usize,
    /// Inner conjugate-gradient steps over all outer steps.
    pub inner_iterations: usize,
    /// `‖A x - μ x‖ / μ` for the final unit iterate.
    pub residual: f64,
    /// `(h, Π_h)` per level when produced by a refinement study.
    pub history: Vec<(f64, f64)>,
}

/// `x ↦ -R L Rᵀ x` on interior unknowns of a scalar field.
pub fn constrained_normal_operator<'a>(mask: &'a DomainMask, ops: &'a NonlocalOps) -> impl FnMut(&[f64]) -> Vec<f64> + 'a {
    move |x: &[f64]| {
        let u = Field::extend(mask, Rank::Scalar, x);
        let lu = ops.vector_laplacian(&u).expect("scalar field on the operator torus");
        lu.restrict(mask).into_iter().map(|v| -v).collect()
    }
}

/// Inverse power iteration with conjugate-gradient inner solves. Stops when
/// the Rayleigh quotient changes by less than `tol` relatively.
pub fn estimate_poincare(mask: &DomainMask, ops: &NonlocalOps, tol: f64) -> Result<PoincareEstimate> {
    if !(tol > 0.0) {
        return Err(NlvcError::Config(format!("tolerance must be positive, got {tol}")));
    }
    if &mask.torus != ops.torus() {
        return Err(NlvcError::Config("mask and operator live on different tori".into()));
    }
    let m = mask.interior_count();
    let mut apply = constrained_normal_operator(mask, ops);
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let mut x = Field::random_constrained(mask, Rank::Scalar, &mut rng).restrict(mask);
    // a positive start overlaps the ground state
    for v in x.iter_mut() {
        *v = v.abs() + 1.0;
    }
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut ax = apply(&x);
    let mut mu = dot(&x, &ax);
    if !(mu > 0.0) {
        return Err(NlvcError::Numerical("constrained gradient has a null vector".into()));
    }
    let mut inner_total = 0;
    let mut change = 1.0f64;
    let mut residual = f64::INFINITY;
    let max_outer = 2000;
    for it in 1..=max_outer {
        let inner_tol = (1e-2 * change).min(1e-3).max(0.1 * tol);
        let guess: Vec<f64> = x.iter().map(|v| v / mu).collect();
        let (y, rep) = krylov::cg(&mut apply, &x, Some(&guess), inner_tol, 10 * m + 100);
        inner_total += rep.iterations;
        let ny = norm(&y);
        if !(ny.is_finite() && ny > 0.0) {
            return Err(NlvcError::Numerical("inverse iteration broke down".into()));
        }
        x = y.iter().map(|v| v / ny).collect();
        ax = apply(&x);
        let mu_new = dot(&x, &ax);
        if !(mu_new > 0.0) {
            return Err(NlvcError::Numerical(format!("Rayleigh quotient {mu_new:e} is not positive")));
        }
        change = ((mu_new - mu) / mu_new).abs();
        mu = mu_new;
        residual = ax.iter().zip(&x).map(|(a, b)| (a - mu * b).powi(2)).sum::<f64>().sqrt() / mu;
        if change <= tol && residual <= tol.sqrt() {
            return Ok(PoincareEstimate {
                pi_h: 1.0 / mu.sqrt(),
                sigma_min: mu.sqrt(),
                iterations: it,
                inner_iterations: inner_total,
                residual,
                history: Vec::new(),
            });
        }
    }
    Err(NlvcError::NotConverged { method: "inverse power iteration", iterations: max_outer, residual })
}

/// Largest `‖u‖ / (Π_h ‖G u‖)` over seeded random constrained fields.
pub fn spot_check(mask: &DomainMask, ops: &NonlocalOps, pi_h: f64, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let u = Field::random_constrained(mask, Rank::Scalar, &mut rng);
        let g = ops.grad(&u, Sign::Plus)?;
        worst = worst.max(u.norm() / (pi_h * g.norm()));
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    pub history: Vec<(f64, f64)>,
    /// Largest `|Π_{k+1} - Π_k| / Π_k` over successive levels.
    pub max_relative_change: f64,
    pub levels: Vec<PoincareEstimate>,
}

/// `Π_h` on the box `(lo, hi)` for each spacing in `hs`.
pub fn refinement_study(
    spec: &KernelSpec,
    nu: &Direction,
    lo: &[f64],
    hi: &[f64],
    hs: &[f64],
    opts: StencilOptions,
    backend: Backend,
    tol: f64,
) -> Result<RefinementStudy> {
    if hs.len() < 3 {
        return Err(NlvcError::Config("a refinement study needs at least three levels".into()));
    }
    let mut levels = Vec::with_capacity(hs.len());
    for &h in hs {
        let radius = stencil_radius_cells(spec, h, opts)?;
        let torus = fit_box_torus(lo, hi, h, radius)?;
        let ops = NonlocalOps::new(spec, &torus, nu, opts)?.with_backend(backend);
        let mask = DomainMask::build_box(&torus, lo, hi, ops.stencil(Sign::Plus).radius_cells())?;
        levels.push(estimate_poincare(&mask, &ops, tol)?);
    }
    let history: Vec<(f64, f64)> = hs.iter().zip(&levels).map(|(&h, e)| (h, e.pi_h)).collect();
    let max_relative_change = history.windows(2).map(|w| ((w[1].1 - w[0].1) / w[0].1).abs()).fold(0.0, f64::max);
    Ok(RefinementStudy { history, max_relative_change, levels })
}

/// Stencil reach in cells for spacing `h`, before any torus exists.
pub fn stencil_radius_cells(spec: &KernelSpec, h: f64, opts: StencilOptions) -> Result<usize> {
    let profile = spec.profile()?;
    let support = profile.support();
    let trunc = match (support.is_finite(), opts.trunc_radius) {
        (true, Some(t)) => t.min(support),
        (true, None) => support,
        (false, Some(t)) => t,
        (false, None) => {
            return Err(NlvcError::Config("unbounded kernels on a box domain need an explicit trunc_radius".into()));
        }
    };
    let singular = profile.singular_at_origin();
    let cell_average = match opts.rule {
        Some(crate::operators::WeightRule::CellAverage) => true,
        Some(crate::operators::WeightRule::Midpoint) => false,
        None => singular,
    };
    let reach = if cell_average { trunc + 0.5 * h * (spec.d as f64).sqrt() } else { trunc * (1.0 + 1e-12) };
    Ok((reach / h).floor() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Torus;

    #[test]
    fn single_point_domain_is_column_norm() {
        let t = Torus::cube(2, 16, 1.0 / 16.0).unwrap();
        let ops = NonlocalOps::new(&KernelSpec::indicator(2, 0.25), &t, &Direction::axis(2, 0, 1.0), Default::default()).unwrap();
        let mut interior = vec![false; t.len()];
        interior[t.index([8, 8, 0])] = true;
        let mask = DomainMask::from_interior(&t, interior, 4).unwrap();
        let est = estimate_poincare(&mask, &ops, 1e-13).unwrap();
        let mut e = Field::zeros(&t, Rank::Scalar);
        e.data[t.index([8, 8, 0])] = 1.0;
        let g = ops.grad(&e, Sign::Plus).unwrap();
        let want = e.norm() / g.norm();
        assert!((est.pi_h - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn fitted_torus_holds_box_and_collar() {
        let t = fit_box_torus(&[0.0, 0.0], &[1.0, 1.0], 1.0 / 16.0, 4).unwrap();
        assert_eq!(t.n, vec![24, 24]);
        assert!(DomainMask::build_box(&t, &[0.0, 0.0], &[1.0, 1.0], 4).is_ok());
    }
}
