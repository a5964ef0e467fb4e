//! Direct stencil sums. Every output point is an independent serial sum over
//! the stencil, so results do not depend on how points are scheduled.

use crate::error::{NlvcError, Result};
use crate::field::{Field, Rank};
use crate::lattice::Torus;

use super::stencil::StencilWeights;

/// Wrapped coordinate `c + z` for `|z| < n`.
#[inline]
pub(crate) fn wrap(c: usize, z: i64, n: usize) -> usize {
    let v = c as i64 + z;
    if v < 0 {
        (v + n as i64) as usize
    } else if v >= n as i64 {
        (v - n as i64) as usize
    } else {
        v as usize
    }
}

#[inline]
pub(crate) fn neighbour(s: [usize; 3], c: [usize; 3], z: [i64; 3]) -> usize {
    wrap(c[0], z[0], s[0]) + s[0] * (wrap(c[1], z[1], s[1]) + s[1] * wrap(c[2], z[2], s[2]))
}

/// Evaluates `f` at every lattice point and scatters the first `comps`
/// entries into a component-major buffer.
pub(crate) fn map_points<F>(torus: &Torus, comps: usize, f: F) -> Vec<f64>
where
    F: Fn([usize; 3], usize) -> [f64; 9] + Sync + Send,
{
    let n = torus.len();
    let s = torus.shape3();
    let at = |i: usize| {
        let c = [i % s[0], (i / s[0]) % s[1], i / (s[0] * s[1])];
        f(c, i)
    };
    #[cfg(feature = "parallel")]
    let vals: Vec<[f64; 9]> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(at).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let vals: Vec<[f64; 9]> = (0..n).map(at).collect();
    let mut out = vec![0.0; n * comps];
    for (i, v) in vals.iter().enumerate() {
        for c in 0..comps {
            out[c * n + i] = v[c];
        }
    }
    out
}

fn same_torus(st: &StencilWeights, f: &Field) -> Result<()> {
    if st.torus() != &f.torus {
        return Err(NlvcError::Config("field and stencil live on different tori".into()));
    }
    Ok(())
}

/// Input components and output rank of the gradient.
pub(crate) fn grad_shape(d: usize, rank: Rank) -> Result<(usize, Rank)> {
    match rank {
        Rank::Scalar => Ok((1, Rank::Vector(d))),
        Rank::Vector(n) if n <= 3 => Ok((n, Rank::Matrix(d, n))),
        other => Err(NlvcError::RankMismatch { expected: "scalar or vector".into(), found: other.to_string() }),
    }
}

/// Columns and output rank of the divergence.
pub(crate) fn div_shape(d: usize, rank: Rank) -> Result<(usize, Rank)> {
    match rank {
        Rank::Vector(n) if n == d => Ok((1, Rank::Scalar)),
        Rank::Matrix(r, n) if r == d => Ok((n, Rank::Vector(n))),
        other => Err(NlvcError::RankMismatch { expected: format!("vector({d}) or matrix({d}xN)"), found: other.to_string() }),
    }
}

/// `(G u)(x) = Σ_z β(z) ⊗ (u(x+z) - u(x))`.
pub fn grad(st: &StencilWeights, u: &Field) -> Result<Field> {
    same_torus(st, u)?;
    let d = st.torus().dim();
    let (nc, out_rank) = grad_shape(d, u.rank)?;
    let n = u.points();
    let s = st.torus().shape3();
    let offs = st.offsets();
    let data = map_points(st.torus(), d * nc, |c, i| {
        let mut acc = [0.0; 9];
        for (k, z) in offs.iter().enumerate() {
            if st.factors[k] == 0.0 {
                continue;
            }
            let b = st.beta[k];
            let j = neighbour(s, c, *z);
            for comp in 0..nc {
                let diff = u.data[comp * n + j] - u.data[comp * n + i];
                for a in 0..d {
                    acc[a * nc + comp] += b[a] * diff;
                }
            }
        }
        acc
    });
    Field::from_data(&u.torus, out_rank, data)
}

/// `(D V)(x) = Σ_z β(z) · (V(x+z) - V(x))`, columnwise for matrices.
pub fn div(st: &StencilWeights, v: &Field) -> Result<Field> {
    same_torus(st, v)?;
    let d = st.torus().dim();
    let (nc, out_rank) = div_shape(d, v.rank)?;
    let n = v.points();
    let s = st.torus().shape3();
    let offs = st.offsets();
    let data = map_points(st.torus(), nc, |c, i| {
        let mut acc = [0.0; 9];
        for (k, z) in offs.iter().enumerate() {
            if st.factors[k] == 0.0 {
                continue;
            }
            let b = st.beta[k];
            let j = neighbour(s, c, *z);
            for col in 0..nc {
                for a in 0..d {
                    let comp = a * nc + col;
                    acc[col] += b[a] * (v.data[comp * n + j] - v.data[comp * n + i]);
                }
            }
        }
        acc
    });
    Field::from_data(&v.torus, out_rank, data)
}

/// Divergence written as `Σ_z ẑ w · (χ(z) V(x+z) + χ(-z) V(x))`.
pub fn div_alternative(st: &StencilWeights, v: &Field) -> Result<Field> {
    same_torus(st, v)?;
    let d = st.torus().dim();
    let (nc, out_rank) = div_shape(d, v.rank)?;
    let n = v.points();
    let s = st.torus().shape3();
    let lk = &st.lattice;
    let data = map_points(st.torus(), nc, |c, i| {
        let mut acc = [0.0; 9];
        for (k, z) in lk.offsets.iter().enumerate() {
            let f = st.factors[k];
            let u = lk.units[k];
            let w = lk.weights[k];
            let j = neighbour(s, c, *z);
            for col in 0..nc {
                for a in 0..d {
                    let comp = a * nc + col;
                    acc[col] += u[a] * w * (f * v.data[comp * n + j] + (1.0 - f) * v.data[comp * n + i]);
                }
            }
        }
        acc
    });
    Field::from_data(&v.torus, out_rank, data)
}

/// `(C V)(x) = Σ_z β(z) × (V(x+z) - V(x))`, three dimensions only.
pub fn curl(st: &StencilWeights, v: &Field) -> Result<Field> {
    same_torus(st, v)?;
    if st.torus().dim() != 3 {
        return Err(NlvcError::Config(format!("curl needs d = 3, torus has d = {}", st.torus().dim())));
    }
    v.expect_rank(Rank::Vector(3))?;
    let n = v.points();
    let s = st.torus().shape3();
    let offs = st.offsets();
    let data = map_points(st.torus(), 3, |c, i| {
        let mut acc = [0.0; 9];
        for (k, z) in offs.iter().enumerate() {
            if st.factors[k] == 0.0 {
                continue;
            }
            let b = st.beta[k];
            let j = neighbour(s, c, *z);
            let e = [
                v.data[j] - v.data[i],
                v.data[n + j] - v.data[n + i],
                v.data[2 * n + j] - v.data[2 * n + i],
            ];
            acc[0] += b[1] * e[2] - b[2] * e[1];
            acc[1] += b[2] * e[0] - b[0] * e[2];
            acc[2] += b[0] * e[1] - b[1] * e[0];
        }
        acc
    });
    Field::from_data(&v.torus, Rank::Vector(3), data)
}

/// Remainder of the product rule for `D^{-ν}(φ Φ)`:
/// `S(x) = Σ_z ẑ w · (χ(-z) Φ(x+z) - χ(z) Φ(x)) (φ(x+z) - φ(x))`,
/// with `χ` taken from the `+ν` stencil `st`.
pub fn product_rule_remainder(st: &StencilWeights, phi: &Field, big_phi: &Field) -> Result<Field> {
    same_torus(st, phi)?;
    same_torus(st, big_phi)?;
    let d = st.torus().dim();
    phi.expect_rank(Rank::Scalar)?;
    big_phi.expect_rank(Rank::Vector(d))?;
    let n = phi.points();
    let s = st.torus().shape3();
    let lk = &st.lattice;
    let data = map_points(st.torus(), 1, |c, i| {
        let mut acc = 0.0;
        for (k, z) in lk.offsets.iter().enumerate() {
            let f = st.factors[k];
            let u = lk.units[k];
            let w = lk.weights[k];
            let j = neighbour(s, c, *z);
            let dphi = phi.data[j] - phi.data[i];
            let mut t = 0.0;
            for a in 0..d {
                t += u[a] * ((1.0 - f) * big_phi.data[a * n + j] - f * big_phi.data[a * n + i]);
            }
            acc += w * t * dphi;
        }
        let mut out = [0.0; 9];
        out[0] = acc;
        out
    });
    Field::from_data(&phi.torus, Rank::Scalar, data)
}
