//! Linear peridynamic-type elasticity `P u = -μ L u - (λ+μ) G^ν D^{-ν} u = f`
//! with `u = 0` outside the domain.

use crate::error::{NlvcError, Result};
use crate::field::{Field, Rank};
use crate::krylov;
use crate::lattice::DomainMask;
use crate::operators::{NonlocalOps, Sign};

use super::{dual_norm, expect_rank, inner_tolerance, require_constrained, SolveReport};

#[derive(Clone, Debug)]
pub struct ElasticityProblem {
    pub mask: DomainMask,
    pub ops: NonlocalOps,
    pub lame_lambda: f64,
    pub lame_mu: f64,
}

impl ElasticityProblem {
    /// Requires `μ > 0` and `λ + 2μ > 0`.
    pub fn new(mask: DomainMask, ops: NonlocalOps, lame_lambda: f64, lame_mu: f64) -> Result<Self> {
        if !(lame_mu > 0.0) || !(lame_lambda + 2.0 * lame_mu > 0.0) {
            return Err(NlvcError::Assumption(format!(
                "Lamé parameters need mu > 0 and lambda + 2 mu > 0, got lambda = {lame_lambda}, mu = {lame_mu}"
            )));
        }
        if ops.torus() != &mask.torus {
            return Err(NlvcError::Config("mask and operator live on different tori".into()));
        }
        Ok(ElasticityProblem { mask, ops, lame_lambda, lame_mu })
    }

    pub fn dim(&self) -> usize {
        self.mask.torus.dim()
    }

    /// `min(λ + 2μ, μ)`.
    pub fn korn_constant(&self) -> f64 {
        (self.lame_lambda + 2.0 * self.lame_mu).min(self.lame_mu)
    }

    /// Symmetric part `e(u) = (G u + (G u)ᵀ) / 2`.
    pub fn strain(&self, u: &Field) -> Result<Field> {
        let d = self.dim();
        u.expect_rank(Rank::Vector(d))?;
        let g = self.ops.grad(u, Sign::Plus)?;
        let n = u.points();
        let mut e = Field::zeros(&u.torus, Rank::Matrix(d, d));
        for i in 0..d {
            for j in 0..d {
                let (a, b) = ((i * d + j) * n, (j * d + i) * n);
                for p in 0..n {
                    e.data[a + p] = 0.5 * (g.data[a + p] + g.data[b + p]);
                }
            }
        }
        Ok(e)
    }

    /// `E(u) = ½ λ ‖D^{-ν} u‖² + μ ‖e(u)‖²`.
    pub fn energy(&self, u: &Field) -> Result<f64> {
        let dv = self.ops.div(u, Sign::Minus)?;
        let e = self.strain(u)?;
        Ok(0.5 * self.lame_lambda * dv.dot(&dv) + self.lame_mu * e.dot(&e))
    }

    /// `B(u, v) = μ Σ_j (G u_j, G v_j) + (λ+μ) (D^{-ν} u, D^{-ν} v)`.
    pub fn bilinear(&self, u: &Field, v: &Field) -> Result<f64> {
        let gu = self.ops.grad(u, Sign::Plus)?;
        let gv = self.ops.grad(v, Sign::Plus)?;
        let du = self.ops.div(u, Sign::Minus)?;
        let dv = self.ops.div(v, Sign::Minus)?;
        Ok(self.lame_mu * gu.dot(&gv) + (self.lame_lambda + self.lame_mu) * du.dot(&dv))
    }

    /// `P u` on the whole torus.
    pub fn navier(&self, u: &Field) -> Result<Field> {
        u.expect_rank(Rank::Vector(self.dim()))?;
        let mut out = self.ops.vector_laplacian(u)?;
        out.scale(-self.lame_mu);
        let gd = self.ops.grad(&self.ops.div(u, Sign::Minus)?, Sign::Plus)?;
        out.axpy(-(self.lame_lambda + self.lame_mu), &gd);
        Ok(out)
    }

    fn apply_interior(&self, x: &[f64]) -> Vec<f64> {
        let u = Field::extend(&self.mask, Rank::Vector(self.dim()), x);
        self.navier(&u).expect("vector field on the problem torus").restrict(&self.mask)
    }
}

/// Conjugate gradients on the interior system `R P Rᵀ x = R f`.
pub fn solve_elasticity(problem: &ElasticityProblem, f: &Field, tol: f64) -> Result<(Field, SolveReport)> {
    if !(tol > 0.0) {
        return Err(NlvcError::Config(format!("tolerance must be positive, got {tol}")));
    }
    let d = problem.dim();
    expect_rank(f, Rank::Vector(d), "load")?;
    require_constrained(&problem.mask, f, "load")?;
    let rhs = f.restrict(&problem.mask);
    let (x, rep) = krylov::cg(|x| problem.apply_interior(x), &rhs, None, inner_tolerance(tol), 20 * rhs.len() + 500);
    if !rep.converged {
        return Err(NlvcError::NotConverged { method: "conjugate gradients", iterations: rep.iterations, residual: rep.residual });
    }
    let u = Field::extend(&problem.mask, Rank::Vector(d), &x);
    let solution_norm = problem.ops.grad(&u, Sign::Plus)?.norm();
    let dual = dual_norm(&problem.mask, &problem.ops, f)?;
    let k = problem.korn_constant();
    let report = SolveReport {
        method: "cg".into(),
        iterations: rep.iterations,
        residual: rep.residual,
        converged: rep.converged,
        solution_norm,
        dual_norm: dual,
        apriori_constant: 1.0 / k,
        apriori_holds: solution_norm <= dual / k * (1.0 + 1e-8),
        energy: Some(problem.energy(&u)?),
        bilinear: Some(problem.bilinear(&u, &u)?),
        coercivity_margin: Some(k),
        velocity: None,
    };
    Ok((u, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::lattice::{Direction, Torus};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn problem(lambda: f64, mu: f64) -> ElasticityProblem {
        let t = Torus::cube(2, 16, 1.0 / 8.0).unwrap();
        let ops = NonlocalOps::new(&KernelSpec::indicator(2, 0.375), &t, &Direction::axis(2, 0, 1.0), Default::default()).unwrap();
        let mask = DomainMask::build_box(&t, &[0.0, 0.0], &[1.0, 1.0], 3).unwrap();
        ElasticityProblem::new(mask, ops, lambda, mu).unwrap()
    }

    #[test]
    fn bilinear_is_twice_energy() {
        let p = problem(2.0, 0.7);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let u = Field::random_constrained(&p.mask, Rank::Vector(2), &mut rng);
        let b = p.bilinear(&u, &u).unwrap();
        assert!((b - 2.0 * p.energy(&u).unwrap()).abs() <= 1e-12 * b);
    }

    #[test]
    fn navier_is_symmetric() {
        let p = problem(-0.5, 1.0);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let u = Field::random_constrained(&p.mask, Rank::Vector(2), &mut rng);
        let v = Field::random_constrained(&p.mask, Rank::Vector(2), &mut rng);
        let a = p.navier(&u).unwrap().dot(&v);
        let b = p.bilinear(&u, &v).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn rejects_bad_lame_parameters() {
        let p = problem(1.0, 1.0);
        assert!(ElasticityProblem::new(p.mask.clone(), p.ops.clone(), -3.0, 1.0).is_err());
        assert!(ElasticityProblem::new(p.mask, p.ops, 1.0, 0.0).is_err());
    }
}
