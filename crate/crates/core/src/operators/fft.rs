//! Periodic FFT backend. Forward transforms use `e^{-2πi k·x/n}`, so the
//! operators act as the multipliers `λ_h(k) = Σ_z β(z)(e^{2πi k·z/n} - 1)`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{NlvcError, Result};
use crate::field::{Field, Rank};
use crate::lattice::Torus;

use super::direct::{div_shape, grad_shape};
use super::stencil::StencilWeights;

/// Plans for every axis of a torus.
pub struct FftPlan {
    shape: [usize; 3],
    dim: usize,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan").field("shape", &self.shape).finish()
    }
}

impl FftPlan {
    pub fn new(torus: &Torus) -> Self {
        let mut planner = FftPlanner::new();
        let shape = torus.shape3();
        let dim = torus.dim();
        let forward = (0..dim).map(|a| planner.plan_fft_forward(shape[a])).collect();
        let inverse = (0..dim).map(|a| planner.plan_fft_inverse(shape[a])).collect();
        FftPlan { shape, dim, forward, inverse }
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let s = self.shape;
        let strides = [1, s[0], s[0] * s[1]];
        for a in 0..self.dim {
            let plan = if inverse { &self.inverse[a] } else { &self.forward[a] };
            let len = s[a];
            let stride = strides[a];
            let mut line = vec![Complex64::new(0.0, 0.0); len];
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            let total = buf.len();
            for start in 0..total {
                // first element of each line along axis a
                if (start / stride) % len != 0 {
                    continue;
                }
                for (t, l) in line.iter_mut().enumerate() {
                    *l = buf[start + t * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (t, l) in line.iter().enumerate() {
                    buf[start + t * stride] = *l;
                }
            }
        }
    }

    /// `û(k) = Σ_x u(x) e^{-2πi k·x/n}`.
    pub fn forward(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut buf, false);
        buf
    }

    /// Real part of the normalised inverse transform.
    pub fn inverse_real(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut buf, true);
        let scale = 1.0 / buf.len() as f64;
        buf.iter().map(|z| z.re * scale).collect()
    }

    /// Unnormalised `Σ_x a(x) e^{+2πi k·x/n}`.
    fn synthesize(&self, mut buf: Vec<Complex64>) -> Vec<Complex64> {
        self.transform(&mut buf, true);
        buf
    }
}

/// Lattice symbol `λ_h(k)` at every torus frequency, indexed like the field.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSymbol {
    pub torus: Torus,
    pub lambda: Vec<[Complex64; 3]>,
}

impl DiscreteSymbol {
    pub fn from_stencil(st: &StencilWeights, plan: &FftPlan) -> Self {
        let torus = st.torus().clone();
        let n = torus.len();
        let s = torus.shape3();
        let zero = Complex64::new(0.0, 0.0);
        let mut lambda = vec![[zero; 3]; n];
        for a in 0..torus.dim() {
            let mut buf = vec![zero; n];
            for (k, z) in st.offsets().iter().enumerate() {
                let idx = super::direct::neighbour(s, [0, 0, 0], *z);
                buf[idx] += Complex64::new(st.beta[k][a], 0.0);
            }
            let hat = plan.synthesize(buf);
            for i in 0..n {
                lambda[i][a] = hat[i] - st.c_nu[a];
            }
        }
        // exact conjugate symmetry and λ_h(0) = 0
        for i in 0..n {
            let c = torus.coords(i);
            let m = torus.index([(s[0] - c[0]) % s[0], (s[1] - c[1]) % s[1], (s[2] - c[2]) % s[2]]);
            if m > i {
                for a in 0..3 {
                    let avg = 0.5 * (lambda[i][a] + lambda[m][a].conj());
                    lambda[i][a] = avg;
                    lambda[m][a] = avg.conj();
                }
            } else if m == i {
                for a in 0..3 {
                    lambda[i][a] = Complex64::new(lambda[i][a].re, 0.0);
                }
            }
        }
        lambda[0] = [zero; 3];
        DiscreteSymbol { torus, lambda }
    }

    /// Physical frequency `ξ_k = k / (n h)` with `k` in the symmetric range.
    pub fn frequency(&self, idx: usize) -> [f64; 3] {
        let c = self.torus.coords(idx);
        let mut xi = [0.0; 3];
        for a in 0..self.torus.dim() {
            let n = self.torus.n[a] as i64;
            let mut k = c[a] as i64;
            if k > n / 2 {
                k -= n;
            }
            xi[a] = k as f64 / (n as f64 * self.torus.h);
        }
        xi
    }

    pub fn norm_at(&self, idx: usize) -> f64 {
        self.lambda[idx].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn check(plan: &FftPlan, f: &Field) -> Result<()> {
    if plan.shape != f.torus.shape3() {
        return Err(NlvcError::Config("field does not match the FFT plan".into()));
    }
    Ok(())
}

pub fn grad(plan: &FftPlan, sym: &DiscreteSymbol, u: &Field) -> Result<Field> {
    check(plan, u)?;
    let d = u.torus.dim();
    let (nc, rank) = grad_shape(d, u.rank)?;
    let n = u.points();
    let mut out = vec![0.0; n * d * nc];
    for j in 0..nc {
        let hat = plan.forward(u.component(j));
        for a in 0..d {
            let prod: Vec<Complex64> = hat.iter().zip(&sym.lambda).map(|(x, l)| l[a] * x).collect();
            let comp = a * nc + j;
            out[comp * n..(comp + 1) * n].copy_from_slice(&plan.inverse_real(prod));
        }
    }
    Field::from_data(&u.torus, rank, out)
}

pub fn div(plan: &FftPlan, sym: &DiscreteSymbol, v: &Field) -> Result<Field> {
    check(plan, v)?;
    let d = v.torus.dim();
    let (nc, rank) = div_shape(d, v.rank)?;
    let n = v.points();
    let mut out = vec![0.0; n * nc];
    for j in 0..nc {
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        for a in 0..d {
            let hat = plan.forward(v.component(a * nc + j));
            for (s, (x, l)) in acc.iter_mut().zip(hat.iter().zip(&sym.lambda)) {
                *s += l[a] * x;
            }
        }
        out[j * n..(j + 1) * n].copy_from_slice(&plan.inverse_real(acc));
    }
    Field::from_data(&v.torus, rank, out)
}

pub fn curl(plan: &FftPlan, sym: &DiscreteSymbol, v: &Field) -> Result<Field> {
    check(plan, v)?;
    if v.torus.dim() != 3 {
        return Err(NlvcError::Config(format!("curl needs d = 3, torus has d = {}", v.torus.dim())));
    }
    v.expect_rank(Rank::Vector(3))?;
    let hats: Vec<Vec<Complex64>> = (0..3).map(|a| plan.forward(v.component(a))).collect();
    let n = v.points();
    let mut out = vec![0.0; 3 * n];
    for a in 0..3 {
        let (p, q) = ((a + 1) % 3, (a + 2) % 3);
        let prod: Vec<Complex64> = (0..n).map(|i| sym.lambda[i][p] * hats[q][i] - sym.lambda[i][q] * hats[p][i]).collect();
        out[a * n..(a + 1) * n].copy_from_slice(&plan.inverse_real(prod));
    }
    Field::from_data(&v.torus, Rank::Vector(3), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::lattice::Direction;

    #[test]
    fn round_trip_and_zero_frequency() {
        let t = Torus::new(vec![8, 6], 0.5).unwrap();
        let plan = FftPlan::new(&t);
        let data: Vec<f64> = (0..48).map(|i| (i as f64 * 0.37).sin()).collect();
        let back = plan.inverse_real(plan.forward(&data));
        for (a, b) in data.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
        let st = StencilWeights::build(&KernelSpec::indicator(2, 1.0), &t, &Direction::axis(2, 0, 1.0), Default::default()).unwrap();
        let sym = DiscreteSymbol::from_stencil(&st, &plan);
        assert_eq!(sym.lambda[0], [Complex64::new(0.0, 0.0); 3]);
    }

    #[test]
    fn symbol_matches_direct_sum() {
        let t = Torus::cube(2, 12, 0.25).unwrap();
        let st = StencilWeights::build(&KernelSpec::indicator(2, 1.0), &t, &Direction::new(&[1.0, 1.0]).unwrap(), Default::default()).unwrap();
        let plan = FftPlan::new(&t);
        let sym = DiscreteSymbol::from_stencil(&st, &plan);
        for idx in [1usize, 5, 13, 77, 143] {
            let c = t.coords(idx);
            let mut want = [Complex64::new(0.0, 0.0); 3];
            for (k, z) in st.offsets().iter().enumerate() {
                let ph = 2.0 * std::f64::consts::PI * (c[0] as f64 * z[0] as f64 + c[1] as f64 * z[1] as f64) / 12.0;
                let e = Complex64::new(ph.cos() - 1.0, ph.sin());
                for a in 0..2 {
                    want[a] += e * st.beta[k][a];
                }
            }
            for a in 0..2 {
                assert!((want[a] - sym.lambda[idx][a]).norm() < 1e-12);
            }
        }
    }
}
