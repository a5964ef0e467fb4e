//! Dirichlet problems in weak form on the interior unknowns of a domain.

pub mod cd;
pub mod elasticity;

use serde::{Deserialize, Serialize};

use crate::error::{NlvcError, Result};
use crate::field::{Field, Rank};
use crate::krylov;
use crate::lattice::DomainMask;
use crate::operators::{NonlocalOps, Sign};

pub use cd::{check_velocity_assumption, convection_inequality_check, solve_cd, CdProblem, VelocityCheck, VelocityClause};
pub use elasticity::{solve_elasticity, ElasticityProblem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: String,
    pub iterations: usize,
    /// Relative residual of the interior system.
    pub residual: f64,
    pub converged: bool,
    /// `‖G u‖`.
    pub solution_norm: f64,
    /// `‖f‖_* = sup_v <f, v> / ‖G v‖`.
    pub dual_norm: f64,
    /// Constant `c` in `‖G u‖ <= c ‖f‖_*`.
    pub apriori_constant: f64,
    pub apriori_holds: bool,
    /// Elastic energy `E(u)`.
    pub energy: Option<f64>,
    /// `B(u, u)`.
    pub bilinear: Option<f64>,
    /// Lower bound of `b(v, v) / ‖G v‖²` used for the a-priori constant.
    pub coercivity_margin: Option<f64>,
    pub velocity: Option<VelocityCheck>,
}

/// Residual target handed to the Krylov method for a requested solution
/// tolerance `tol`.
pub(crate) fn inner_tolerance(tol: f64) -> f64 {
    (1e-4 * tol).max(1e-15)
}

/// `‖f‖_* = ‖G g‖` with `-L g = f` on the interior.
pub fn dual_norm(mask: &DomainMask, ops: &NonlocalOps, f: &Field) -> Result<f64> {
    let rank = f.rank;
    let rhs = f.restrict(mask);
    if rhs.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let apply = |x: &[f64]| -> Vec<f64> {
        let u = Field::extend(mask, rank, x);
        let lu = ops.vector_laplacian(&u).expect("field on the operator torus");
        lu.restrict(mask).into_iter().map(|v| -v).collect()
    };
    let (g, rep) = krylov::cg(apply, &rhs, None, 1e-12, 20 * rhs.len() + 200);
    if !rep.converged {
        return Err(NlvcError::NotConverged { method: "conjugate gradients", iterations: rep.iterations, residual: rep.residual });
    }
    let gf = Field::extend(mask, rank, &g);
    Ok(ops.grad(&gf, Sign::Plus)?.norm())
}

pub(crate) fn require_constrained(mask: &DomainMask, f: &Field, what: &str) -> Result<()> {
    if &f.torus != &mask.torus {
        return Err(NlvcError::Config(format!("{what} lives on a different torus")));
    }
    if !f.is_constrained(mask) {
        return Err(NlvcError::Config(format!("{what} must vanish outside the domain")));
    }
    Ok(())
}

pub(crate) fn expect_rank(f: &Field, rank: Rank, what: &str) -> Result<()> {
    f.expect_rank(rank).map_err(|e| NlvcError::Config(format!("{what}: {e}")))
}
