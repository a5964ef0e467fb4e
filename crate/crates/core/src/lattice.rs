//! Embedding torus, box domains with their interaction collar, directions,
//! and the discrete half-space indicator.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{NlvcError, Result};

/// Periodic lattice `h Z^d / (n h) Z^d`; axis 0 varies fastest in linear
/// indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Torus {
    pub n: Vec<usize>,
    pub h: f64,
}

impl Torus {
    pub fn new(n: Vec<usize>, h: f64) -> Result<Self> {
        if n.is_empty() || n.len() > 3 {
            return Err(NlvcError::Config(format!("torus dimension must be 1..=3, got {}", n.len())));
        }
        if n.iter().any(|&k| k < 4) {
            return Err(NlvcError::Config(format!("torus needs at least 4 points per axis, got {n:?}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(NlvcError::Config(format!("grid spacing must be positive, got {h}")));
        }
        Ok(Torus { n, h })
    }

    pub fn cube(d: usize, n: usize, h: f64) -> Result<Self> {
        Self::new(vec![n; d], h)
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `h^d`, the lattice volume element.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.n[axis] as f64 * self.h
    }

    /// Padded shape, unused axes set to 1.
    pub fn shape3(&self) -> [usize; 3] {
        let mut s = [1; 3];
        for (a, &k) in self.n.iter().enumerate() {
            s[a] = k;
        }
        s
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let s = self.shape3();
        [idx % s[0], (idx / s[0]) % s[1], idx / (s[0] * s[1])]
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        let s = self.shape3();
        c[0] + s[0] * (c[1] + s[1] * c[2])
    }

    /// Linear index of `c + z` with periodic wrap.
    pub fn shifted(&self, c: [usize; 3], z: [i64; 3]) -> usize {
        let s = self.shape3();
        let mut out = [0usize; 3];
        for a in 0..3 {
            let m = s[a] as i64;
            out[a] = (c[a] as i64 + z[a]).rem_euclid(m) as usize;
        }
        self.index(out)
    }

    /// Physical position `i h` of a lattice point.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        [c[0] as f64 * self.h, c[1] as f64 * self.h, c[2] as f64 * self.h]
    }
}

/// Smallest torus with spacing `h` holding the box `(lo, hi)` and a collar of
/// `radius` cells on every side. Axis lengths have only the factors 2, 3, 5.
pub fn fit_box_torus(lo: &[f64], hi: &[f64], h: f64, radius: usize) -> Result<Torus> {
    if lo.len() != hi.len() || lo.is_empty() || lo.len() > 3 {
        return Err(NlvcError::Config("box corners need matching lengths in 1..=3".into()));
    }
    if !(h > 0.0) {
        return Err(NlvcError::Config(format!("grid spacing must be positive, got {h}")));
    }
    let mut n = Vec::with_capacity(lo.len());
    for a in 0..lo.len() {
        if !(lo[a] >= 0.0 && hi[a] > lo[a]) {
            return Err(NlvcError::Config(format!("box axis {a} must satisfy 0 <= lo < hi")));
        }
        let eps = 1e-9 * h;
        let first = ((lo[a] + eps) / h).floor() as usize + 1;
        let last = ((hi[a] - eps) / h).ceil() as usize - 1;
        let count = (last + 1).saturating_sub(first);
        let need = (count + 2 * radius).max(last + 1).max(4);
        n.push((need..).find(|&k| is_smooth(k)).expect("smooth numbers are unbounded"));
    }
    Torus::new(n, h)
}

fn is_smooth(mut k: usize) -> bool {
    for p in [2, 3, 5] {
        while k % p == 0 {
            k /= p;
        }
    }
    k == 1
}

/// Unit vector `ν`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub v: [f64; 3],
    pub d: usize,
}

impl Direction {
    pub fn new(components: &[f64]) -> Result<Self> {
        let d = components.len();
        if !(1..=3).contains(&d) {
            return Err(NlvcError::Config(format!("direction needs 1..=3 components, got {d}")));
        }
        let norm = components.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(NlvcError::Config("direction must be a nonzero finite vector".into()));
        }
        let mut v = [0.0; 3];
        for (i, &c) in components.iter().enumerate() {
            v[i] = c / norm;
        }
        // axis-aligned inputs stay exact
        if let Some(k) = components.iter().position(|&c| c != 0.0) {
            if components.iter().filter(|&&c| c != 0.0).count() == 1 {
                v = [0.0; 3];
                v[k] = components[k].signum();
            }
        }
        let dir = Direction { v, d };
        let n2: f64 = dir.v.iter().map(|x| x * x).sum();
        if (n2.sqrt() - 1.0).abs() > 1e-14 {
            return Err(NlvcError::Numerical(format!("direction normalisation failed: |ν| = {}", n2.sqrt())));
        }
        Ok(dir)
    }

    /// `±e_k`.
    pub fn axis(d: usize, k: usize, sign: f64) -> Self {
        let mut v = [0.0; 3];
        v[k] = sign.signum();
        Direction { v, d }
    }

    pub fn neg(&self) -> Self {
        Direction { v: [-self.v[0], -self.v[1], -self.v[2]], d: self.d }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.v[..self.d]
    }

    pub fn dot(&self, z: [f64; 3]) -> f64 {
        self.v[0] * z[0] + self.v[1] * z[1] + self.v[2] * z[2]
    }
}

/// Relative tolerance deciding that `z·ν` vanishes.
pub const TIE_TOL: f64 = 1e-12;

/// Half-space weight of a lattice offset: 1 strictly on the `ν` side, 0 on the
/// opposite side, ½ on the hyperplane. `factor(z) + factor(-z) = 1` exactly.
pub fn halfspace_factor(z: [i64; 3], nu: &Direction) -> Result<f64> {
    if z == [0, 0, 0] {
        return Err(NlvcError::Config("halfspace factor undefined at z = 0".into()));
    }
    let zf = [z[0] as f64, z[1] as f64, z[2] as f64];
    Ok(halfspace_factor_f(zf, nu))
}

/// Same rule for a real offset; the caller guarantees `z ≠ 0`.
pub fn halfspace_factor_f(z: [f64; 3], nu: &Direction) -> f64 {
    let norm = (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt();
    let p = nu.dot(z);
    if p > TIE_TOL * norm {
        1.0
    } else if p < -TIE_TOL * norm {
        0.0
    } else {
        0.5
    }
}

/// Interior `Ω` and collar on a torus.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainMask {
    pub torus: Torus,
    pub interior: Vec<bool>,
    pub collar: Vec<bool>,
    /// Lattice coordinates of the lower corner of the interior bounding box.
    pub origin_offset: [usize; 3],
    pub stencil_radius: usize,
    interior_indices: Vec<usize>,
}

impl DomainMask {
    /// Points strictly inside the box `(lo, hi)`; the box must be given in
    /// physical coordinates within `[0, n h)`.
    pub fn build_box(torus: &Torus, lo: &[f64], hi: &[f64], stencil_radius: usize) -> Result<Self> {
        let d = torus.dim();
        if lo.len() != d || hi.len() != d {
            return Err(NlvcError::Config(format!("box corners need {d} components")));
        }
        let mut ranges = [(0usize, 1usize); 3];
        for a in 0..d {
            if !(lo[a] < hi[a]) {
                return Err(NlvcError::Config(format!("box axis {a} is empty: lo = {}, hi = {}", lo[a], hi[a])));
            }
            let eps = 1e-9 * torus.h;
            let first = ((lo[a] + eps) / torus.h).floor() as i64 + 1;
            let last = ((hi[a] - eps) / torus.h).ceil() as i64 - 1;
            if last < first {
                return Err(NlvcError::Config(format!("box axis {a} contains no lattice points")));
            }
            let count = (last - first + 1) as usize;
            let required = count + 2 * stencil_radius;
            if first < 0 || last >= torus.n[a] as i64 || required > torus.n[a] {
                return Err(NlvcError::Sizing { axis: a, required: required.max(last as usize + 1), available: torus.n[a] });
            }
            ranges[a] = (first as usize, count);
        }
        let mut interior = vec![false; torus.len()];
        for (idx, slot) in interior.iter_mut().enumerate() {
            let c = torus.coords(idx);
            *slot = (0..d).all(|a| c[a] >= ranges[a].0 && c[a] < ranges[a].0 + ranges[a].1);
        }
        Self::from_interior(torus, interior, stencil_radius)
    }

    /// Arbitrary interior mask. The interior must be nonempty, connected, and
    /// its bounding box plus the collar must not wrap.
    pub fn from_interior(torus: &Torus, interior: Vec<bool>, stencil_radius: usize) -> Result<Self> {
        if interior.len() != torus.len() {
            return Err(NlvcError::Config("mask length does not match torus".into()));
        }
        let interior_indices: Vec<usize> = (0..interior.len()).filter(|&i| interior[i]).collect();
        if interior_indices.is_empty() {
            return Err(NlvcError::Config("domain interior is empty".into()));
        }
        let d = torus.dim();
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        for &i in &interior_indices {
            let c = torus.coords(i);
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        for a in 0..d {
            let required = hi[a] - lo[a] + 1 + 2 * stencil_radius;
            if required > torus.n[a] {
                return Err(NlvcError::Sizing { axis: a, required, available: torus.n[a] });
            }
        }
        let mask = DomainMask {
            torus: torus.clone(),
            collar: dilate(torus, &interior, stencil_radius)
                .into_iter()
                .zip(&interior)
                .map(|(g, &i)| g && !i)
                .collect(),
            interior,
            origin_offset: [lo[0], if d > 1 { lo[1] } else { 0 }, if d > 2 { lo[2] } else { 0 }],
            stencil_radius,
            interior_indices,
        };
        if !mask.is_connected() {
            return Err(NlvcError::Config("domain interior is not connected".into()));
        }
        Ok(mask)
    }

    pub fn interior_count(&self) -> usize {
        self.interior_indices.len()
    }

    pub fn interior_indices(&self) -> &[usize] {
        &self.interior_indices
    }

    pub fn collar_count(&self) -> usize {
        self.collar.iter().filter(|&&c| c).count()
    }

    /// Flood fill over axis neighbours.
    pub fn is_connected(&self) -> bool {
        let Some(&start) = self.interior_indices.first() else {
            return false;
        };
        let mut seen = vec![false; self.interior.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut count = 1;
        let d = self.torus.dim();
        while let Some(i) = queue.pop_front() {
            let c = self.torus.coords(i);
            for a in 0..d {
                for s in [-1i64, 1] {
                    let mut z = [0i64; 3];
                    z[a] = s;
                    let j = self.torus.shifted(c, z);
                    if self.interior[j] && !seen[j] {
                        seen[j] = true;
                        count += 1;
                        queue.push_back(j);
                    }
                }
            }
        }
        count == self.interior_indices.len()
    }

    /// Interior coordinates as CSV rows `x0,x1,...`.
    pub fn to_csv(&self) -> String {
        let d = self.torus.dim();
        let mut out = String::new();
        for &i in &self.interior_indices {
            let p = self.torus.position(i);
            let row: Vec<String> = p[..d].iter().map(|x| format!("{x}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Chebyshev dilation by `r` cells, separable along axes.
fn dilate(torus: &Torus, mask: &[bool], r: usize) -> Vec<bool> {
    let mut cur = mask.to_vec();
    if r == 0 {
        return cur;
    }
    for a in 0..torus.dim() {
        let mut next = cur.clone();
        for (idx, slot) in next.iter_mut().enumerate() {
            if *slot {
                continue;
            }
            let c = torus.coords(idx);
            for k in 1..=r as i64 {
                let mut z = [0i64; 3];
                z[a] = k;
                let mut zm = [0i64; 3];
                zm[a] = -k;
                if cur[torus.shifted(c, z)] || cur[torus.shifted(c, zm)] {
                    *slot = true;
                    break;
                }
            }
        }
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_examples() {
        let e1 = Direction::axis(2, 0, 1.0);
        assert_eq!(halfspace_factor([1, 0, 0], &e1).unwrap(), 1.0);
        assert_eq!(halfspace_factor([0, 1, 0], &e1).unwrap(), 0.5);
        assert_eq!(halfspace_factor([-1, 0, 0], &e1).unwrap(), 0.0);
        assert!(halfspace_factor([0, 0, 0], &e1).is_err());
    }

    #[test]
    fn box_domain_examples() {
        let t = Torus::cube(2, 32, 1.0 / 16.0).unwrap();
        let m = DomainMask::build_box(&t, &[0.0, 0.0], &[1.0, 1.0], 4).unwrap();
        assert_eq!(m.interior_count(), 225);
        assert_eq!(m.origin_offset, [1, 1, 0]);
        // collar is the 23x23 dilation minus the 15x15 core
        assert_eq!(m.collar_count(), 23 * 23 - 225);
        let m0 = DomainMask::build_box(&t, &[0.0, 0.0], &[1.0, 1.0], 0).unwrap();
        assert_eq!(m0.collar_count(), 0);
        let err = DomainMask::build_box(&t, &[0.0, 0.0], &[2.0, 2.0], 1).unwrap_err();
        assert!(matches!(err, NlvcError::Sizing { .. }));
    }

    #[test]
    fn disconnected_mask_rejected() {
        let t = Torus::cube(1, 16, 1.0).unwrap();
        let mut interior = vec![false; 16];
        interior[2] = true;
        interior[5] = true;
        assert!(DomainMask::from_interior(&t, interior, 1).is_err());
    }

    #[test]
    fn direction_normalises() {
        let d = Direction::new(&[3.0, 4.0]).unwrap();
        assert!((d.v[0] - 0.6).abs() < 1e-16 && (d.v[1] - 0.8).abs() < 1e-16);
        let a = Direction::new(&[0.0, -2.0, 0.0]).unwrap();
        assert_eq!(a.v, [0.0, -1.0, 0.0]);
    }
}
