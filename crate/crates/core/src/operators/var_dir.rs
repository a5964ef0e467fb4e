//! Operators whose half-space follows a unit vector field `n(x)`.

use crate::error::{NlvcError, Result};
use crate::field::{Field, Rank};
use crate::lattice::{halfspace_factor_f, Direction};

use super::direct::{map_points, neighbour};
use super::stencil::LatticeKernel;

/// Tolerance on `|n(x)| = 1`.
pub const UNIT_TOL: f64 = 1e-12;

/// `n = -b/|b|` where `b ≠ 0`, `ν` elsewhere.
pub fn direction_field(b: &Field, nu: &Direction) -> Result<Field> {
    let d = b.torus.dim();
    b.expect_rank(Rank::Vector(d))?;
    let n = b.points();
    let mut out = Field::zeros(&b.torus, Rank::Vector(d));
    for i in 0..n {
        let norm = (0..d).map(|a| b.data[a * n + i].powi(2)).sum::<f64>().sqrt();
        for a in 0..d {
            out.data[a * n + i] = if norm > 0.0 { -b.data[a * n + i] / norm } else { nu.v[a] };
        }
    }
    Ok(out)
}

fn directions(n_field: &Field, b: Option<&Field>) -> Result<Vec<Direction>> {
    let d = n_field.torus.dim();
    n_field.expect_rank(Rank::Vector(d))?;
    let n = n_field.points();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut v = [0.0; 3];
        for a in 0..d {
            v[a] = n_field.data[a * n + i];
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let active = b.map(|b| (0..d).any(|a| b.data[a * n + i] != 0.0)).unwrap_or(true);
        if active && (norm - 1.0).abs() > UNIT_TOL {
            return Err(NlvcError::Assumption(format!("direction field has |n| = {norm} at point {i}")));
        }
        out.push(Direction { v, d });
    }
    Ok(out)
}

fn same_torus(lk: &LatticeKernel, f: &Field) -> Result<()> {
    if lk.torus != f.torus {
        return Err(NlvcError::Config("field and kernel live on different tori".into()));
    }
    Ok(())
}

/// `(G^n u)(x) = Σ_z χ_{n(x)}(z) ẑ w_h(z) (u(x+z) - u(x))` for scalar `u`.
pub fn grad_var_dir(lk: &LatticeKernel, u: &Field, n_field: &Field) -> Result<Field> {
    same_torus(lk, u)?;
    u.expect_rank(Rank::Scalar)?;
    let dirs = directions(n_field, None)?;
    let d = lk.torus.dim();
    let s = lk.torus.shape3();
    let data = map_points(&lk.torus, d, |c, i| {
        let mut acc = [0.0; 9];
        let nx = &dirs[i];
        for (k, z) in lk.offsets.iter().enumerate() {
            let f = halfspace_factor_f([z[0] as f64, z[1] as f64, z[2] as f64], nx);
            if f == 0.0 {
                continue;
            }
            let un = lk.units[k];
            let w = lk.weights[k];
            let b = [f * un[0] * w, f * un[1] * w, f * un[2] * w];
            let diff = u.data[neighbour(s, c, *z)] - u.data[i];
            for a in 0..d {
                acc[a] += b[a] * diff;
            }
        }
        acc
    });
    Field::from_data(&u.torus, Rank::Vector(d), data)
}

/// Negative adjoint of [`grad_var_dir`]:
/// `(D^{-n} V)(x) = Σ_z ẑ w_h(z) · (χ_{n(x+z)}(-z) V(x+z) + χ_{n(x)}(z) V(x))`.
pub fn div_var_dir(lk: &LatticeKernel, v: &Field, n_field: &Field) -> Result<Field> {
    same_torus(lk, v)?;
    let d = lk.torus.dim();
    v.expect_rank(Rank::Vector(d))?;
    let dirs = directions(n_field, None)?;
    let n = v.points();
    let s = lk.torus.shape3();
    let data = map_points(&lk.torus, 1, |c, i| {
        let mut acc = 0.0;
        for (k, z) in lk.offsets.iter().enumerate() {
            let zf = [z[0] as f64, z[1] as f64, z[2] as f64];
            let j = neighbour(s, c, *z);
            let fy = halfspace_factor_f([-zf[0], -zf[1], -zf[2]], &dirs[j]);
            let fx = halfspace_factor_f(zf, &dirs[i]);
            let un = lk.units[k];
            let mut t = 0.0;
            for a in 0..d {
                t += un[a] * (fy * v.data[a * n + j] + fx * v.data[a * n + i]);
            }
            acc += lk.weights[k] * t;
        }
        let mut out = [0.0; 9];
        out[0] = acc;
        out
    });
    Field::from_data(&v.torus, Rank::Scalar, data)
}

/// Validates `n` only where `b ≠ 0`.
pub fn check_direction_field(n_field: &Field, b: &Field) -> Result<()> {
    directions(n_field, Some(b)).map(|_| ())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::lattice::Torus;
    use crate::operators::stencil::StencilWeights;
    use crate::operators::direct;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::sync::Arc;

    #[test]
    fn constant_direction_reduces_to_fixed() {
        let t = Torus::cube(2, 16, 1.0 / 16.0).unwrap();
        let nu = Direction::axis(2, 0, 1.0);
        let st = StencilWeights::build(&KernelSpec::indicator(2, 0.25), &t, &nu, Default::default()).unwrap();
        let nf = Field::from_fn(&t, Rank::Vector(2), |_, c| nu.v[c]);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let u = Field::random(&t, Rank::Scalar, &mut rng);
        assert_eq!(grad_var_dir(&st.lattice, &u, &nf).unwrap(), direct::grad(&st, &u).unwrap());
        let v = Field::random(&t, Rank::Vector(2), &mut rng);
        let a = div_var_dir(&st.lattice, &v, &nf).unwrap();
        let b = direct::div(&st.flipped(), &v).unwrap();
        assert!(a.sub(&b).max_abs() < 1e-12 * b.max_abs());
    }

    #[test]
    fn explicit_transpose_on_small_torus() {
        let t = Torus::cube(2, 8, 0.25).unwrap();
        let lk = Arc::new(LatticeKernel::build(&KernelSpec::indicator(2, 0.5), &t, Default::default()).unwrap());
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let b = Field::random(&t, Rank::Vector(2), &mut rng);
        let nf = direction_field(&b, &Direction::axis(2, 0, 1.0)).unwrap();
        let n = t.len();
        // columns of G^n against unit impulses
        let mut g = vec![vec![0.0; 2 * n]; n];
        for (j, col) in g.iter_mut().enumerate() {
            let mut e = Field::zeros(&t, Rank::Scalar);
            e.data[j] = 1.0;
            *col = grad_var_dir(&lk, &e, &nf).unwrap().data;
        }
        let v = Field::random(&t, Rank::Vector(2), &mut rng);
        let dv = div_var_dir(&lk, &v, &nf).unwrap();
        for j in 0..n {
            let gtv: f64 = g[j].iter().zip(&v.data).map(|(a, b)| a * b).sum();
            assert!((gtv + dv.data[j]).abs() < 1e-12 * (1.0 + gtv.abs()));
        }
    }
}
