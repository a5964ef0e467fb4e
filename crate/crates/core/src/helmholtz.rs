//! Helmholtz split of a constrained vector field `u` through `-L f = u` on the
//! interior: `u = G^ν p + J G^{-ν} q` in 2D and `u = G^ν p + C^{-ν} v` in 3D.

use serde::{Deserialize, Serialize};

use crate::error::{NlvcError, Result};
use crate::field::{Field, Rank};
use crate::krylov::{self, KrylovReport};
use crate::lattice::DomainMask;
use crate::operators::{NonlocalOps, Sign};

#[derive(Clone, Debug)]
pub struct HelmholtzResult2D {
    /// `p = -D^{-ν} f`.
    pub p: Field,
    /// `q = D^ν (J f)`.
    pub q: Field,
    pub f: Field,
    pub gradient_part: Field,
    /// `J G^{-ν} q`.
    pub rotational_part: Field,
    pub report: HelmholtzReport,
}

#[derive(Clone, Debug)]
pub struct HelmholtzResult3D {
    pub p: Field,
    /// `v = C^ν f`.
    pub v: Field,
    pub f: Field,
    pub gradient_part: Field,
    /// `C^{-ν} v`.
    pub rotational_part: Field,
    pub report: HelmholtzReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HelmholtzReport {
    pub solver: KrylovReport,
    pub u_norm: f64,
    /// `‖u - G p - rotational‖` over the interior.
    pub residual: f64,
    /// `(G p, rotational)` over the torus.
    pub orthogonality: f64,
    pub gradient_norm: f64,
    /// Rotational part restricted to the interior.
    pub rotational_norm: f64,
    /// `‖D^ν v‖`, 3D only.
    pub divfree_norm: Option<f64>,
    /// Scale for `divfree_norm`: `‖v‖ Σ|β|`.
    pub divfree_scale: Option<f64>,
}

/// `J (a, b) = (b, -a)`, applied as a signed permutation.
pub fn rotate_j(v: &Field) -> Result<Field> {
    v.expect_rank(Rank::Vector(2))?;
    let n = v.points();
    let mut out = Field::zeros(&v.torus, v.rank);
    out.data[..n].copy_from_slice(&v.data[n..]);
    for i in 0..n {
        out.data[n + i] = -v.data[i];
    }
    Ok(out)
}

/// Solves `-R L Rᵀ f = R u` componentwise.
fn vector_potential(mask: &DomainMask, ops: &NonlocalOps, u: &Field, tol: f64) -> Result<(Field, KrylovReport)> {
    if !(tol > 0.0) {
        return Err(NlvcError::Config(format!("tolerance must be positive, got {tol}")));
    }
    if ops.torus() != &mask.torus || u.torus != mask.torus {
        return Err(NlvcError::Config("field, mask and operator must share one torus".into()));
    }
    if !u.is_constrained(mask) {
        return Err(NlvcError::Config("the field must vanish outside the domain".into()));
    }
    let rank = u.rank;
    let rhs = u.restrict(mask);
    let apply = |x: &[f64]| -> Vec<f64> {
        let f = Field::extend(mask, rank, x);
        ops.vector_laplacian(&f).expect("vector field on the operator torus").restrict(mask).into_iter().map(|v| -v).collect()
    };
    let (x, rep) = krylov::cg(apply, &rhs, None, tol, 20 * rhs.len() + 500);
    if !rep.converged {
        return Err(NlvcError::NotConverged { method: "conjugate gradients", iterations: rep.iterations, residual: rep.residual });
    }
    Ok((Field::extend(mask, rank, &x), rep))
}

fn summarize(mask: &DomainMask, u: &Field, grad: &Field, rot: &Field, solver: KrylovReport) -> HelmholtzReport {
    let mut rec = u.sub(&grad.add(rot));
    rec.constrain(mask);
    let mut rot_in = rot.clone();
    rot_in.constrain(mask);
    HelmholtzReport {
        solver,
        u_norm: u.norm(),
        residual: rec.norm(),
        orthogonality: grad.dot(rot),
        gradient_norm: grad.norm(),
        rotational_norm: rot_in.norm(),
        divfree_norm: None,
        divfree_scale: None,
    }
}

pub fn decompose2d(mask: &DomainMask, ops: &NonlocalOps, u: &Field, tol: f64) -> Result<HelmholtzResult2D> {
    if mask.torus.dim() != 2 {
        return Err(NlvcError::Config("decompose2d needs d = 2".into()));
    }
    u.expect_rank(Rank::Vector(2))?;
    let (f, solver) = vector_potential(mask, ops, u, tol)?;
    let mut p = ops.div(&f, Sign::Minus)?;
    p.scale(-1.0);
    let q = ops.div(&rotate_j(&f)?, Sign::Plus)?;
    let gradient_part = ops.grad(&p, Sign::Plus)?;
    let rotational_part = rotate_j(&ops.grad(&q, Sign::Minus)?)?;
    let report = summarize(mask, u, &gradient_part, &rotational_part, solver);
    Ok(HelmholtzResult2D { p, q, f, gradient_part, rotational_part, report })
}

pub fn decompose3d(mask: &DomainMask, ops: &NonlocalOps, u: &Field, tol: f64) -> Result<HelmholtzResult3D> {
    if mask.torus.dim() != 3 {
        return Err(NlvcError::Config("decompose3d needs d = 3".into()));
    }
    u.expect_rank(Rank::Vector(3))?;
    let (f, solver) = vector_potential(mask, ops, u, tol)?;
    let mut p = ops.div(&f, Sign::Minus)?;
    p.scale(-1.0);
    let v = ops.curl(&f, Sign::Plus)?;
    let gradient_part = ops.grad(&p, Sign::Plus)?;
    let rotational_part = ops.curl(&v, Sign::Minus)?;
    let mut report = summarize(mask, u, &gradient_part, &rotational_part, solver);
    let beta_sum: f64 = ops.stencil(Sign::Plus).beta.iter().map(|b| b.iter().map(|x| x * x).sum::<f64>().sqrt()).sum();
    report.divfree_norm = Some(ops.div(&v, Sign::Plus)?.norm());
    report.divfree_scale = Some(v.norm() * beta_sum);
    Ok(HelmholtzResult3D { p, v, f, gradient_part, rotational_part, report })
}
