//! Convection–diffusion: `-D^{-ν}(ε G^ν u) + b · G_φ^n u = f` in `Ω`, `u = 0`
//! outside, with `n = -b/|b|`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{NlvcError, Result};
use crate::field::{Field, Rank};
use crate::krylov::{self, KrylovReport};
use crate::lattice::DomainMask;
use crate::operators::var_dir::{check_direction_field, direction_field, div_var_dir, grad_var_dir};
use crate::operators::{LatticeKernel, NonlocalOps, Sign};
use crate::poincare::estimate_poincare;

use super::{dual_norm, expect_rank, inner_tolerance, require_constrained, SolveReport};

/// Relative threshold under which `max D_φ^{-n} b` counts as nonpositive.
pub const CLAUSE_ONE_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct CdProblem {
    pub mask: DomainMask,
    /// Diffusion operators for `w` and `ν`.
    pub ops: NonlocalOps,
    /// Integrable compactly supported kernel of the convection term.
    pub phi: Arc<LatticeKernel>,
    pub epsilon: Field,
    pub b: Field,
    pub n_field: Field,
}

impl CdProblem {
    pub fn new(mask: DomainMask, ops: NonlocalOps, phi: Arc<LatticeKernel>, epsilon: Field, b: Field) -> Result<Self> {
        let d = mask.torus.dim();
        if ops.torus() != &mask.torus || phi.torus != mask.torus || epsilon.torus != mask.torus || b.torus != mask.torus {
            return Err(NlvcError::Config("problem data must share one torus".into()));
        }
        expect_rank(&epsilon, Rank::Scalar, "diffusivity")?;
        expect_rank(&b, Rank::Vector(d), "velocity")?;
        if !phi.spec.is_integrable() || phi.spec.profile()?.support().is_infinite() {
            return Err(NlvcError::Config("the convection kernel must be integrable with compact support".into()));
        }
        let problem = CdProblem { n_field: direction_field(&b, ops.nu())?, mask, ops, phi, epsilon, b };
        if !(problem.epsilon_min() > 0.0) {
            return Err(NlvcError::Assumption(format!("diffusivity lower bound {} is not positive", problem.epsilon_min())));
        }
        check_direction_field(&problem.n_field, &problem.b)?;
        Ok(problem)
    }

    /// `ε_1 = min ε` over the torus.
    pub fn epsilon_min(&self) -> f64 {
        self.epsilon.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn has_velocity(&self) -> bool {
        self.b.data.iter().any(|&x| x != 0.0)
    }

    /// `-D^{-ν}(ε G^ν u) + b · G_φ^n u` on the interior, zero elsewhere.
    pub fn apply(&self, u: &Field) -> Result<Field> {
        u.expect_rank(Rank::Scalar)?;
        let n = u.points();
        let d = u.torus.dim();
        let mut g = self.ops.grad(u, Sign::Plus)?;
        for a in 0..d {
            for i in 0..n {
                g.data[a * n + i] *= self.epsilon.data[i];
            }
        }
        let mut out = self.ops.div(&g, Sign::Minus)?;
        out.scale(-1.0);
        if self.has_velocity() {
            let gp = grad_var_dir(&self.phi, u, &self.n_field)?;
            for i in 0..n {
                let mut s = 0.0;
                for a in 0..d {
                    s += self.b.data[a * n + i] * gp.data[a * n + i];
                }
                out.data[i] += s;
            }
        }
        out.constrain(&self.mask);
        Ok(out)
    }

    fn apply_interior(&self, x: &[f64]) -> Vec<f64> {
        let u = Field::extend(&self.mask, Rank::Scalar, x);
        self.apply(&u).expect("scalar field on the problem torus").restrict(&self.mask)
    }

    /// `(ε G u, G v)`.
    pub fn diffusion_form(&self, u: &Field, v: &Field) -> Result<f64> {
        let gu = self.ops.grad(u, Sign::Plus)?;
        let gv = self.ops.grad(v, Sign::Plus)?;
        let n = u.points();
        let d = u.torus.dim();
        let mut s = 0.0;
        for a in 0..d {
            for i in 0..n {
                s += self.epsilon.data[i] * gu.data[a * n + i] * gv.data[a * n + i];
            }
        }
        Ok(s * u.torus.cell_volume())
    }

    /// `b(u, v) = (ε G u, G v) + (b · G_φ^n u, v)`.
    pub fn bilinear(&self, u: &Field, v: &Field) -> Result<f64> {
        Ok(self.apply(u)?.dot(v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityClause {
    /// `D_φ^{-n} b <= 0` on the domain.
    NonPositive,
    /// `|D_φ^{-n} b| <= η < 2 ε_1 / Π²`.
    Bounded,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityCheck {
    pub clause: VelocityClause,
    /// `max_Ω |D_φ^{-n} b|`.
    pub eta: f64,
    /// `max_Ω D_φ^{-n} b`.
    pub max_value: f64,
    /// `2 ε_1 / Π²`.
    pub threshold: f64,
    pub pi_h: f64,
    pub epsilon_min: f64,
}

/// `D_φ^{-n} b` on the interior together with the clause it satisfies.
pub fn check_velocity_assumption(problem: &CdProblem, pi_h: f64) -> Result<VelocityCheck> {
    let db = div_var_dir(&problem.phi, &problem.b, &problem.n_field)?;
    let mut eta = 0.0f64;
    let mut max_value = f64::NEG_INFINITY;
    for &i in problem.mask.interior_indices() {
        eta = eta.max(db.data[i].abs());
        max_value = max_value.max(db.data[i]);
    }
    let mass: f64 = problem.phi.weights.iter().sum();
    let scale = problem.b.max_abs() * mass;
    let eps1 = problem.epsilon_min();
    let threshold = 2.0 * eps1 / (pi_h * pi_h);
    let clause = if max_value <= CLAUSE_ONE_TOL * scale {
        VelocityClause::NonPositive
    } else if eta < threshold {
        VelocityClause::Bounded
    } else {
        VelocityClause::Fail
    };
    Ok(VelocityCheck { clause, eta, max_value, threshold, pi_h, epsilon_min: eps1 })
}

/// `(b · G_φ^n v, v) + ½ (v², D_φ^{-n} b)`, nonnegative for constrained `v`,
/// returned together with the scale `‖b‖_∞ ‖φ‖_1 ‖v‖²`.
pub fn convection_inequality_check(phi: &LatticeKernel, b: &Field, n_field: &Field, v: &Field) -> Result<(f64, f64)> {
    let n = v.points();
    let d = v.torus.dim();
    let gv = grad_var_dir(phi, v, n_field)?;
    let db = div_var_dir(phi, b, n_field)?;
    let mut conv = 0.0;
    let mut flux = 0.0;
    for i in 0..n {
        let mut s = 0.0;
        for a in 0..d {
            s += b.data[a * n + i] * gv.data[a * n + i];
        }
        conv += s * v.data[i];
        flux += v.data[i] * v.data[i] * db.data[i];
    }
    let hd = v.torus.cell_volume();
    let margin = hd * (conv + 0.5 * flux);
    let mass: f64 = phi.weights.iter().sum();
    let scale = b.max_abs() * mass * v.dot(v);
    Ok((margin, scale))
}

/// Solves the weak form to relative solution accuracy about `tol`.
///
/// `pi_h` is estimated on demand when the velocity needs the bounded clause.
pub fn solve_cd(problem: &CdProblem, f: &Field, tol: f64, pi_h: Option<f64>) -> Result<(Field, SolveReport)> {
    if !(tol > 0.0) {
        return Err(NlvcError::Config(format!("tolerance must be positive, got {tol}")));
    }
    expect_rank(f, Rank::Scalar, "load")?;
    require_constrained(&problem.mask, f, "load")?;
    let eps1 = problem.epsilon_min();
    let (velocity, margin) = if problem.has_velocity() {
        let pi = match pi_h {
            Some(p) => p,
            None => estimate_poincare(&problem.mask, &problem.ops, 1e-10)?.pi_h,
        };
        let check = check_velocity_assumption(problem, pi)?;
        let margin = match check.clause {
            VelocityClause::NonPositive => eps1,
            VelocityClause::Bounded => eps1 - 0.5 * check.eta * pi * pi,
            VelocityClause::Fail => {
                return Err(NlvcError::Assumption(format!(
                    "velocity violates both clauses: max D b = {:e}, eta = {:e} >= {:e}",
                    check.max_value, check.eta, check.threshold
                )))
            }
        };
        (Some(check), margin)
    } else {
        (None, eps1)
    };
    let rhs = f.restrict(&problem.mask);
    let inner = inner_tolerance(tol);
    let cap = 20 * rhs.len() + 500;
    let (x, rep, method): (Vec<f64>, KrylovReport, &str) = if problem.has_velocity() {
        let (x, r) = krylov::gmres(|x| problem.apply_interior(x), &rhs, None, inner, 60, cap);
        (x, r, "gmres")
    } else {
        let (x, r) = krylov::cg(|x| problem.apply_interior(x), &rhs, None, inner, cap);
        (x, r, "cg")
    };
    if !rep.converged {
        return Err(NlvcError::NotConverged { method: if method == "cg" { "conjugate gradients" } else { "gmres" }, iterations: rep.iterations, residual: rep.residual });
    }
    let u = Field::extend(&problem.mask, Rank::Scalar, &x);
    let solution_norm = problem.ops.grad(&u, Sign::Plus)?.norm();
    let dual = dual_norm(&problem.mask, &problem.ops, f)?;
    let apriori_constant = 1.0 / margin;
    let report = SolveReport {
        method: method.into(),
        iterations: rep.iterations,
        residual: rep.residual,
        converged: rep.converged,
        solution_norm,
        dual_norm: dual,
        apriori_constant,
        apriori_holds: solution_norm <= apriori_constant * dual * (1.0 + 1e-8),
        energy: None,
        bilinear: Some(problem.bilinear(&u, &u)?),
        coercivity_margin: Some(margin),
        velocity,
    };
    Ok((u, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::lattice::{Direction, Torus};

    fn setup(b: impl Fn([f64; 3], usize) -> f64) -> CdProblem {
        let t = Torus::cube(2, 16, 1.0 / 8.0).unwrap();
        let spec = KernelSpec::indicator(2, 0.375);
        let ops = NonlocalOps::new(&spec, &t, &Direction::axis(2, 0, 1.0), Default::default()).unwrap();
        let mask = DomainMask::build_box(&t, &[0.0, 0.0], &[1.0, 1.0], 3).unwrap();
        let phi = ops.lattice().clone();
        let eps = Field::from_fn(&t, Rank::Scalar, |_, _| 1.0);
        let bf = Field::from_fn(&t, Rank::Vector(2), b);
        CdProblem::new(mask, ops, phi, eps, bf).unwrap()
    }

    #[test]
    fn zero_load_gives_zero() {
        let p = setup(|_, c| if c == 0 { 0.5 } else { 0.0 });
        let f = Field::zeros(&p.mask.torus, Rank::Scalar);
        let (u, rep) = solve_cd(&p, &f, 1e-10, Some(1.0)).unwrap();
        assert!(u.data.iter().all(|&x| x == 0.0));
        assert_eq!(rep.velocity.unwrap().clause, VelocityClause::NonPositive);
    }

    #[test]
    fn diffusion_only_reduces_to_laplacian() {
        let p = setup(|_, _| 0.0);
        let mut u = Field::zeros(&p.mask.torus, Rank::Scalar);
        let i = p.mask.interior_indices()[10];
        u.data[i] = 1.0;
        let a = p.apply(&u).unwrap();
        let mut l = p.ops.vector_laplacian(&u).unwrap();
        l.scale(-1.0);
        l.constrain(&p.mask);
        assert!(a.sub(&l).max_abs() < 1e-14);
    }
}
