//! Matrix-free Krylov solvers on plain vectors. All reductions are serial so
//! iterates are reproducible bit for bit.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrylovReport {
    pub iterations: usize,
    /// `‖b - A x‖ / ‖b‖`, recomputed from the returned iterate.
    pub residual: f64,
    pub converged: bool,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn true_residual<F: FnMut(&[f64]) -> Vec<f64>>(apply: &mut F, b: &[f64], x: &[f64]) -> f64 {
    let ax = apply(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

/// Conjugate gradients for a symmetric positive definite `A`.
pub fn cg<F: FnMut(&[f64]) -> Vec<f64>>(
    mut apply: F,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, KrylovReport) {
    let n = b.len();
    let nb = norm(b);
    if nb == 0.0 {
        return (vec![0.0; n], KrylovReport { iterations: 0, residual: 0.0, converged: true });
    }
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut r: Vec<f64> = if x0.is_some() {
        let ax = apply(&x);
        b.iter().zip(&ax).map(|(p, q)| p - q).collect()
    } else {
        b.to_vec()
    };
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut it = 0;
    while it < max_iter && rr.sqrt() > tol * nb {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
        it += 1;
        // guard against drift of the recursive residual
        if rr.sqrt() <= tol * nb {
            let ax = apply(&x);
            r = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
            rr = dot(&r, &r);
            p = r.clone();
        }
    }
    let residual = true_residual(&mut apply, b, &x);
    (x, KrylovReport { iterations: it, residual, converged: residual <= tol })
}

/// Restarted GMRES(m) with modified Gram–Schmidt, one reorthogonalisation
/// pass and Givens rotations.
pub fn gmres<F: FnMut(&[f64]) -> Vec<f64>>(
    mut apply: F,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> (Vec<f64>, KrylovReport) {
    let n = b.len();
    let nb = norm(b);
    if nb == 0.0 {
        return (vec![0.0; n], KrylovReport { iterations: 0, residual: 0.0, converged: true });
    }
    let m = restart.max(1);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut total = 0;
    loop {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm(&r);
        if beta <= tol * nb || total >= max_iter {
            break;
        }
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|x| x / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && total < max_iter {
            let mut w = apply(&v[k]);
            for _pass in 0..2 {
                for (j, vj) in v.iter().enumerate() {
                    let c = dot(&w, vj);
                    h[j][k] += c;
                    axpy(&mut w, -c, vj);
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let den = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if den == 0.0 {
                break;
            }
            cs[k] = h[k][k] / den;
            sn[k] = h[k + 1][k] / den;
            h[k][k] = den;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            if g[k].abs() <= 0.5 * tol * nb || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }
        // back substitution
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            axpy(&mut x, *yj, &v[j]);
        }
        if k == 0 {
            break;
        }
    }
    let residual = true_residual(&mut apply, b, &x);
    (x, KrylovReport { iterations: total, residual, converged: residual <= tol })
}
