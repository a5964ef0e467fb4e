//! Lattice quadrature of the kernel: offsets, weights `w_h(z) h^d`, and the
//! directional stencil `β^ν(z) = χ_ν(z) ẑ w_h(z) h^d`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{NlvcError, Result};
use crate::kernel::{half_sphere_cosine, KernelSpec, RadialProfile};
use crate::lattice::{halfspace_factor, Direction, Torus};
use crate::quad::gauss_legendre;

/// How `w_h(z)` is obtained from the continuum kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// `w(|z| h)`.
    Midpoint,
    /// Mean of `w` over the cell `z h + [-h/2, h/2]^d`.
    CellAverage,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StencilOptions {
    /// Defaults to midpoint for bounded kernels and cell averages otherwise.
    #[serde(default)]
    pub rule: Option<WeightRule>,
    /// Physical truncation radius for unbounded supports.
    #[serde(default)]
    pub trunc_radius: Option<f64>,
}

/// Direction-independent lattice kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeKernel {
    pub torus: Torus,
    pub spec: KernelSpec,
    pub rule: WeightRule,
    pub offsets: Vec<[i64; 3]>,
    /// `z / |z|`.
    pub units: Vec<[f64; 3]>,
    /// `w_h(z) h^d`.
    pub weights: Vec<f64>,
    /// Largest `|z_a|` over the stencil, in cells.
    pub radius_cells: usize,
    /// Physical radius beyond which the kernel is dropped.
    pub trunc_radius: f64,
    /// `κ_d ∫_{R}^∞ r^{d-1} w dr`, the part of `ĉ` lost to truncation.
    pub tail_correction: f64,
}

impl LatticeKernel {
    pub fn build(spec: &KernelSpec, torus: &Torus, opts: StencilOptions) -> Result<Self> {
        let profile = spec.profile()?;
        if spec.d != torus.dim() {
            return Err(NlvcError::Config(format!(
                "kernel dimension {} does not match torus dimension {}",
                spec.d,
                torus.dim()
            )));
        }
        let d = torus.dim();
        let h = torus.h;
        let rule = opts.rule.unwrap_or(if profile.singular_at_origin() {
            WeightRule::CellAverage
        } else {
            WeightRule::Midpoint
        });
        let max_cells: Vec<i64> = torus.n.iter().map(|&n| ((n - 1) / 2) as i64).collect();
        let support = profile.support();
        let trunc = if support.is_finite() {
            if let Some(t) = opts.trunc_radius {
                t.min(support)
            } else {
                support
            }
        } else {
            let fit = *max_cells.iter().min().unwrap() as f64 * h;
            opts.trunc_radius.unwrap_or(fit)
        };
        // cell averages pick up cells that straddle the truncation sphere
        let reach = match rule {
            WeightRule::Midpoint => trunc * (1.0 + 1e-12),
            WeightRule::CellAverage => trunc + 0.5 * h * (d as f64).sqrt(),
        };
        let rc = (reach / h).floor() as i64;
        for a in 0..d {
            if rc > max_cells[a] {
                return Err(NlvcError::Sizing { axis: a, required: 2 * rc as usize + 1, available: torus.n[a] });
            }
        }
        let span = |a: usize| if a < d { -rc..=rc } else { 0..=0 };
        let mut cache: HashMap<[i64; 3], f64> = HashMap::new();
        let (gx, gw) = gauss_legendre(6);
        let mut offsets = Vec::new();
        let mut units = Vec::new();
        let mut weights = Vec::new();
        let mut radius_cells = 0usize;
        for z2 in span(2) {
            for z1 in span(1) {
                for z0 in span(0) {
                    let z = [z0, z1, z2];
                    if z == [0, 0, 0] {
                        continue;
                    }
                    let r2 = (z0 * z0 + z1 * z1 + z2 * z2) as f64;
                    let r = r2.sqrt() * h;
                    if r > reach {
                        continue;
                    }
                    // reflections and axis permutations share one weight
                    let mut key = [z0.abs(), z1.abs(), z2.abs()];
                    key[..d].sort_unstable();
                    let w = *cache.entry(key).or_insert_with(|| match rule {
                        WeightRule::Midpoint => profile.eval(r) * torus.cell_volume(),
                        WeightRule::CellAverage => {
                            let c = [key[0] as f64 * h, key[1] as f64 * h, key[2] as f64 * h];
                            cell_integral(&profile, d, c, 0.5 * h, trunc, &gx, &gw, 0)
                        }
                    });
                    if w == 0.0 {
                        continue;
                    }
                    let norm = r2.sqrt();
                    offsets.push(z);
                    units.push([z0 as f64 / norm, z1 as f64 / norm, z2 as f64 / norm]);
                    weights.push(w);
                    radius_cells = radius_cells.max(z0.unsigned_abs().max(z1.unsigned_abs()).max(z2.unsigned_abs()) as usize);
                }
            }
        }
        let tail_correction = if support > trunc {
            half_sphere_cosine(d) * profile.radial_integral(d as f64 - 1.0, trunc, f64::INFINITY)?
        } else {
            0.0
        };
        Ok(LatticeKernel {
            torus: torus.clone(),
            spec: spec.clone(),
            rule,
            offsets,
            units,
            weights,
            radius_cells,
            trunc_radius: trunc,
            tail_correction,
        })
    }

    /// `Σ |z| w_h(z) h^d`, the lattice first moment of the whole stencil.
    pub fn first_moment(&self) -> f64 {
        let h = self.torus.h;
        self.offsets
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| ((z[0] * z[0] + z[1] * z[1] + z[2] * z[2]) as f64).sqrt() * h * w)
            .sum()
    }

    /// Lattice counterpart of `M1`: offsets with `|z| h <= 1`.
    pub fn m1(&self) -> f64 {
        let h = self.torus.h;
        self.offsets
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| {
                let r = ((z[0] * z[0] + z[1] * z[1] + z[2] * z[2]) as f64).sqrt() * h;
                if r <= 1.0 + 1e-12 {
                    r * w
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Lattice counterpart of `M2`.
    pub fn m2(&self) -> f64 {
        let h = self.torus.h;
        self.offsets
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| {
                let r = ((z[0] * z[0] + z[1] * z[1] + z[2] * z[2]) as f64).sqrt() * h;
                if r > 1.0 + 1e-12 {
                    *w
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// `∫_{c + [-a, a]^d} w(|y|) dy`, subdividing cells that meet a profile
/// breakpoint or lie close to the origin.
#[allow(clippy::too_many_arguments)]
fn cell_integral(
    profile: &RadialProfile,
    d: usize,
    c: [f64; 3],
    a: f64,
    trunc: f64,
    gx: &[f64],
    gw: &[f64],
    depth: usize,
) -> f64 {
    let (rmin, rmax) = cell_radius_range(d, c, a);
    if rmin >= trunc {
        return 0.0;
    }
    let mut breaks = profile.breakpoints();
    breaks.push(trunc);
    let straddles = breaks.iter().any(|&b| rmin < b && b < rmax);
    let near_origin = rmin < 2.0 * a;
    let max_depth = match d {
        1 => 12,
        2 => 6,
        _ => 4,
    };
    if (straddles || near_origin) && depth < max_depth {
        let half = 0.5 * a;
        let mut total = 0.0;
        let signs: &[f64] = &[-1.0, 1.0];
        let s1: &[f64] = if d > 1 { signs } else { &[0.0] };
        let s2: &[f64] = if d > 2 { signs } else { &[0.0] };
        for &t2 in s2 {
            for &t1 in s1 {
                for &t0 in signs {
                    let cc = [c[0] + t0 * half, c[1] + t1 * half, c[2] + t2 * half];
                    total += cell_integral(profile, d, cc, half, trunc, gx, gw, depth + 1);
                }
            }
        }
        return total;
    }
    let m = gx.len();
    let idx2 = if d > 2 { m } else { 1 };
    let idx1 = if d > 1 { m } else { 1 };
    let mut total = 0.0;
    for k in 0..idx2 {
        for j in 0..idx1 {
            for i in 0..m {
                let y0 = c[0] + a * gx[i];
                let y1 = if d > 1 { c[1] + a * gx[j] } else { 0.0 };
                let y2 = if d > 2 { c[2] + a * gx[k] } else { 0.0 };
                let r = (y0 * y0 + y1 * y1 + y2 * y2).sqrt();
                if r == 0.0 || r > trunc {
                    continue;
                }
                let mut wt = gw[i];
                if d > 1 {
                    wt *= gw[j];
                }
                if d > 2 {
                    wt *= gw[k];
                }
                total += wt * profile.eval(r);
            }
        }
    }
    total * a.powi(d as i32)
}

fn cell_radius_range(d: usize, c: [f64; 3], a: f64) -> (f64, f64) {
    let mut lo2 = 0.0;
    let mut hi2 = 0.0;
    for &x in c.iter().take(d) {
        let (l, u) = (x - a, x + a);
        let near = if l <= 0.0 && u >= 0.0 { 0.0 } else { l.abs().min(u.abs()) };
        let far = l.abs().max(u.abs());
        lo2 += near * near;
        hi2 += far * far;
    }
    (lo2.sqrt(), hi2.sqrt())
}

/// Directional stencil for a fixed `ν`.
#[derive(Clone, Debug, PartialEq)]
pub struct StencilWeights {
    pub lattice: std::sync::Arc<LatticeKernel>,
    pub nu: Direction,
    /// `χ_ν(z)` with ties at ½.
    pub factors: Vec<f64>,
    /// `χ_ν(z) ẑ w_h(z) h^d`.
    pub beta: Vec<[f64; 3]>,
    /// `Σ β`.
    pub c_nu: [f64; 3],
}

impl StencilWeights {
    pub fn build(spec: &KernelSpec, torus: &Torus, nu: &Direction, opts: StencilOptions) -> Result<Self> {
        let lattice = LatticeKernel::build(spec, torus, opts)?;
        Self::from_lattice(std::sync::Arc::new(lattice), nu)
    }

    pub fn from_lattice(lattice: std::sync::Arc<LatticeKernel>, nu: &Direction) -> Result<Self> {
        if nu.d != lattice.torus.dim() {
            return Err(NlvcError::Config(format!(
                "direction has {} components, torus is {}-dimensional",
                nu.d,
                lattice.torus.dim()
            )));
        }
        let mut factors = Vec::with_capacity(lattice.len());
        let mut beta = Vec::with_capacity(lattice.len());
        let mut c_nu = [0.0; 3];
        for k in 0..lattice.len() {
            let f = halfspace_factor(lattice.offsets[k], nu)?;
            let u = lattice.units[k];
            let w = lattice.weights[k];
            let b = [f * u[0] * w, f * u[1] * w, f * u[2] * w];
            for a in 0..3 {
                c_nu[a] += b[a];
            }
            factors.push(f);
            beta.push(b);
        }
        Ok(StencilWeights { lattice, nu: *nu, factors, beta, c_nu })
    }

    /// Stencil for `-ν` on the same lattice kernel.
    pub fn flipped(&self) -> Self {
        Self::from_lattice(self.lattice.clone(), &self.nu.neg()).expect("same lattice, valid direction")
    }

    pub fn torus(&self) -> &Torus {
        &self.lattice.torus
    }

    pub fn offsets(&self) -> &[[i64; 3]] {
        &self.lattice.offsets
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    /// `c_ν · ν`.
    pub fn c_hat_discrete(&self) -> f64 {
        self.nu.dot(self.c_nu)
    }

    /// `|c_ν - (c_ν·ν) ν| / |c_ν|`.
    pub fn c_nu_misalignment(&self) -> f64 {
        let p = self.c_hat_discrete();
        let r: f64 = (0..3).map(|a| (self.c_nu[a] - p * self.nu.v[a]).powi(2)).sum::<f64>().sqrt();
        let n: f64 = self.c_nu.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            0.0
        } else {
            r / n
        }
    }

    pub fn tail_correction(&self) -> f64 {
        self.lattice.tail_correction
    }

    pub fn trunc_radius(&self) -> f64 {
        self.lattice.trunc_radius
    }

    pub fn radius_cells(&self) -> usize {
        self.lattice.radius_cells
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn one_dimensional_indicator_stencil() {
        let t = Torus::cube(1, 8, 1.0).unwrap();
        let st = StencilWeights::build(&KernelSpec::indicator(1, 2.0), &t, &Direction::axis(1, 0, 1.0), Default::default()).unwrap();
        assert_eq!(st.len(), 4);
        for (z, b) in st.offsets().iter().zip(&st.beta) {
            let expect = if z[0] > 0 { 1.0 } else { 0.0 };
            assert_eq!(b[0], expect);
        }
        assert_eq!(st.c_nu[0], 2.0);
    }

    #[test]
    fn axis_and_diagonal_c_nu_parallel() {
        let t = Torus::cube(2, 32, 1.0 / 16.0).unwrap();
        for nu in [Direction::axis(2, 1, -1.0), Direction::new(&[1.0, 1.0]).unwrap()] {
            let st = StencilWeights::build(&KernelSpec::indicator(2, 0.25), &t, &nu, Default::default()).unwrap();
            assert!(st.c_nu_misalignment() < 1e-12, "{}", st.c_nu_misalignment());
        }
    }

    #[test]
    fn weights_symmetric_under_reflection() {
        let t = Torus::cube(2, 32, 1.0 / 16.0).unwrap();
        let lk = LatticeKernel::build(&KernelSpec::compact_singular(2, 0.5, 0.25), &t, Default::default()).unwrap();
        let map: HashMap<[i64; 3], f64> = lk.offsets.iter().copied().zip(lk.weights.iter().copied()).collect();
        for (z, w) in &map {
            assert_eq!(map[&[-z[0], z[1], z[2]]], *w);
            assert_eq!(map[&[z[1], z[0], z[2]]], *w);
        }
    }

    #[test]
    fn cell_average_matches_fine_midpoint() {
        let t = Torus::cube(2, 64, 1.0 / 64.0).unwrap();
        let k = KernelSpec::compact_singular(2, 0.5, 0.25);
        let lk = LatticeKernel::build(&k, &t, Default::default()).unwrap();
        assert_eq!(lk.rule, WeightRule::CellAverage);
        let prof = k.profile().unwrap();
        let h = t.h;
        for target in [[1i64, 0, 0], [2, 1, 0], [11, 11, 0]] {
            let pos = lk.offsets.iter().position(|z| *z == target).unwrap();
            let m = 800;
            let mut fine = 0.0;
            for i in 0..m {
                for j in 0..m {
                    let x = (target[0] as f64 - 0.5 + (i as f64 + 0.5) / m as f64) * h;
                    let y = (target[1] as f64 - 0.5 + (j as f64 + 0.5) / m as f64) * h;
                    fine += prof.eval((x * x + y * y).sqrt());
                }
            }
            fine *= h * h / (m * m) as f64;
            assert_relative_eq!(lk.weights[pos], fine, max_relative = 1e-3);
        }
    }

    #[test]
    fn singular_first_moment_deficit_shrinks() {
        // the origin cell holds ∫ |x| w ~ h^{1-s}, which the lattice drops
        let k = KernelSpec::compact_singular(2, 0.5, 0.25);
        let m1 = k.moments().unwrap().m1;
        let deficit = |n: usize| {
            let t = Torus::cube(2, n, 1.0 / n as f64).unwrap();
            m1 - LatticeKernel::build(&k, &t, Default::default()).unwrap().first_moment()
        };
        let (a, b) = (deficit(32), deficit(128));
        assert!(a > 0.0 && b > 0.0);
        assert_relative_eq!(a / b, 2.0, max_relative = 0.05);
    }
}
