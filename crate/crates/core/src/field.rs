//! Lattice fields: scalar, vector and matrix valued, stored component-major.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{NlvcError, Result};
use crate::lattice::{DomainMask, Torus};

/// Value shape per lattice point. `Matrix(d, n)` stores entry `(i, j)` as
/// component `i * n + j`, with `i` the gradient direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rank {
    Scalar,
    Vector(usize),
    Matrix(usize, usize),
}

impl Rank {
    pub fn components(&self) -> usize {
        match *self {
            Rank::Scalar => 1,
            Rank::Vector(n) => n,
            Rank::Matrix(d, n) => d * n,
        }
    }
}

impl std::fmt::Display for Rank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rank::Scalar => write!(f, "scalar"),
            Rank::Vector(n) => write!(f, "vector({n})"),
            Rank::Matrix(d, n) => write!(f, "matrix({d}x{n})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub torus: Torus,
    pub rank: Rank,
    pub data: Vec<f64>,
}

impl Field {
    pub fn zeros(torus: &Torus, rank: Rank) -> Self {
        Field { torus: torus.clone(), rank, data: vec![0.0; torus.len() * rank.components()] }
    }

    pub fn from_data(torus: &Torus, rank: Rank, data: Vec<f64>) -> Result<Self> {
        let expected = torus.len() * rank.components();
        if data.len() != expected {
            return Err(NlvcError::Format(format!(
                "field of rank {rank} on {} points needs {expected} values, got {}",
                torus.len(),
                data.len()
            )));
        }
        Ok(Field { torus: torus.clone(), rank, data })
    }

    /// Samples `f(position, component)`.
    pub fn from_fn<F: Fn([f64; 3], usize) -> f64>(torus: &Torus, rank: Rank, f: F) -> Self {
        let n = torus.len();
        let mut out = Self::zeros(torus, rank);
        for c in 0..rank.components() {
            for i in 0..n {
                out.data[c * n + i] = f(torus.position(i), c);
            }
        }
        out
    }

    /// Independent standard normal values at every point.
    pub fn random<R: Rng>(torus: &Torus, rank: Rank, rng: &mut R) -> Self {
        let mut out = Self::zeros(torus, rank);
        for x in out.data.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        out
    }

    /// Random values on the interior of `mask`, zero elsewhere.
    pub fn random_constrained<R: Rng>(mask: &DomainMask, rank: Rank, rng: &mut R) -> Self {
        let mut out = Self::zeros(&mask.torus, rank);
        let n = mask.torus.len();
        for c in 0..rank.components() {
            for &i in mask.interior_indices() {
                out.data[c * n + i] = rng.sample(StandardNormal);
            }
        }
        out
    }

    pub fn points(&self) -> usize {
        self.torus.len()
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.points();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.points();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Single component as a scalar field.
    pub fn extract(&self, c: usize) -> Field {
        Field { torus: self.torus.clone(), rank: Rank::Scalar, data: self.component(c).to_vec() }
    }

    /// Lattice inner product `Σ u v h^d`.
    pub fn dot(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.torus.cell_volume() * self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn scale(&mut self, s: f64) {
        for x in self.data.iter_mut() {
            *x *= s;
        }
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &Field) {
        for (y, xv) in self.data.iter_mut().zip(&x.data) {
            *y += a * xv;
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    /// Zero every value outside the interior.
    pub fn constrain(&mut self, mask: &DomainMask) {
        let n = self.points();
        for c in 0..self.rank.components() {
            for i in 0..n {
                if !mask.interior[i] {
                    self.data[c * n + i] = 0.0;
                }
            }
        }
    }

    pub fn is_constrained(&self, mask: &DomainMask) -> bool {
        let n = self.points();
        (0..self.rank.components()).all(|c| (0..n).all(|i| mask.interior[i] || self.data[c * n + i] == 0.0))
    }

    /// Interior values, component-major.
    pub fn restrict(&self, mask: &DomainMask) -> Vec<f64> {
        let n = self.points();
        let mut out = Vec::with_capacity(mask.interior_count() * self.rank.components());
        for c in 0..self.rank.components() {
            for &i in mask.interior_indices() {
                out.push(self.data[c * n + i]);
            }
        }
        out
    }

    /// Inverse of [`restrict`](Self::restrict): zero outside the interior.
    pub fn extend(mask: &DomainMask, rank: Rank, values: &[f64]) -> Field {
        let mut out = Field::zeros(&mask.torus, rank);
        let n = mask.torus.len();
        let m = mask.interior_count();
        for c in 0..rank.components() {
            for (k, &i) in mask.interior_indices().iter().enumerate() {
                out.data[c * n + i] = values[c * m + k];
            }
        }
        out
    }

    pub fn expect_rank(&self, rank: Rank) -> Result<()> {
        if self.rank != rank {
            return Err(NlvcError::RankMismatch { expected: rank.to_string(), found: self.rank.to_string() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn restrict_extend_round_trip() {
        let t = Torus::cube(2, 16, 0.125).unwrap();
        let m = DomainMask::build_box(&t, &[0.0, 0.0], &[1.0, 1.0], 2).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let f = Field::random_constrained(&m, Rank::Vector(2), &mut rng);
        assert!(f.is_constrained(&m));
        let g = Field::extend(&m, Rank::Vector(2), &f.restrict(&m));
        assert_eq!(f, g);
    }

    #[test]
    fn inner_product_uses_cell_volume() {
        let t = Torus::cube(2, 4, 0.5).unwrap();
        let f = Field::from_fn(&t, Rank::Scalar, |_, _| 1.0);
        assert_eq!(f.dot(&f), 16.0 * 0.25);
    }
}
