//! Half-ball gradient, divergence and curl on a torus.
//!
//! `D^{-ν}` uses the stencil of `-ν`, which makes it the exact negative
//! adjoint of `G^ν` under the lattice inner product.

pub mod direct;
pub mod fft;
pub mod stencil;
pub mod var_dir;

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::Field;
use crate::kernel::KernelSpec;
use crate::lattice::{Direction, Torus};

pub use fft::{DiscreteSymbol, FftPlan};
pub use stencil::{LatticeKernel, StencilOptions, StencilWeights, WeightRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Direct,
    Fft,
}

/// Which half-space: `+ν` or `-ν`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

struct Spectral {
    plan: FftPlan,
    plus: DiscreteSymbol,
    minus: DiscreteSymbol,
}

/// Operators for one kernel, torus and direction.
pub struct NonlocalOps {
    plus: StencilWeights,
    minus: StencilWeights,
    backend: Backend,
    spectral: OnceLock<Spectral>,
}

impl Clone for NonlocalOps {
    fn clone(&self) -> Self {
        NonlocalOps::from_stencil(self.plus.clone()).with_backend(self.backend)
    }
}

impl std::fmt::Debug for NonlocalOps {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NonlocalOps")
            .field("nu", &self.plus.nu)
            .field("offsets", &self.plus.len())
            .field("backend", &self.backend)
            .finish()
    }
}

impl NonlocalOps {
    pub fn new(spec: &KernelSpec, torus: &Torus, nu: &Direction, opts: StencilOptions) -> Result<Self> {
        Ok(Self::from_stencil(StencilWeights::build(spec, torus, nu, opts)?))
    }

    pub fn from_stencil(plus: StencilWeights) -> Self {
        let minus = plus.flipped();
        NonlocalOps { plus, minus, backend: Backend::Direct, spectral: OnceLock::new() }
    }

    pub fn from_lattice(lattice: Arc<LatticeKernel>, nu: &Direction) -> Result<Self> {
        Ok(Self::from_stencil(StencilWeights::from_lattice(lattice, nu)?))
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn torus(&self) -> &Torus {
        self.plus.torus()
    }

    pub fn nu(&self) -> &Direction {
        &self.plus.nu
    }

    pub fn lattice(&self) -> &Arc<LatticeKernel> {
        &self.plus.lattice
    }

    pub fn stencil(&self, sign: Sign) -> &StencilWeights {
        match sign {
            Sign::Plus => &self.plus,
            Sign::Minus => &self.minus,
        }
    }

    fn spectral(&self) -> &Spectral {
        self.spectral.get_or_init(|| {
            let plan = FftPlan::new(self.torus());
            let plus = DiscreteSymbol::from_stencil(&self.plus, &plan);
            let minus = DiscreteSymbol::from_stencil(&self.minus, &plan);
            Spectral { plan, plus, minus }
        })
    }

    pub fn fft_plan(&self) -> &FftPlan {
        &self.spectral().plan
    }

    /// `λ_h` of `G^{±ν}`.
    pub fn symbol(&self, sign: Sign) -> &DiscreteSymbol {
        let s = self.spectral();
        match sign {
            Sign::Plus => &s.plus,
            Sign::Minus => &s.minus,
        }
    }

    /// `G^{±ν}` on scalar or vector fields.
    pub fn grad(&self, u: &Field, sign: Sign) -> Result<Field> {
        match self.backend {
            Backend::Direct => direct::grad(self.stencil(sign), u),
            Backend::Fft => fft::grad(self.fft_plan(), self.symbol(sign), u),
        }
    }

    /// `D^{±ν}` on vector or matrix fields.
    pub fn div(&self, v: &Field, sign: Sign) -> Result<Field> {
        match self.backend {
            Backend::Direct => direct::div(self.stencil(sign), v),
            Backend::Fft => fft::div(self.fft_plan(), self.symbol(sign), v),
        }
    }

    /// `C^{±ν}` on three-dimensional vector fields.
    pub fn curl(&self, v: &Field, sign: Sign) -> Result<Field> {
        match self.backend {
            Backend::Direct => direct::curl(self.stencil(sign), v),
            Backend::Fft => fft::curl(self.fft_plan(), self.symbol(sign), v),
        }
    }

    /// `L = D^{-ν} G^ν`, negative semidefinite.
    pub fn vector_laplacian(&self, u: &Field) -> Result<Field> {
        self.div(&self.grad(u, Sign::Plus)?, Sign::Minus)
    }

    /// Direct evaluation of the alternative divergence form.
    pub fn div_alternative(&self, v: &Field, sign: Sign) -> Result<Field> {
        direct::div_alternative(self.stencil(sign), v)
    }

    /// `S(φ, Φ)` with `D^{-ν}(φΦ) = φ D^{-ν}Φ + G^ν φ · Φ + S(φ, Φ)`.
    pub fn product_rule_remainder(&self, phi: &Field, big_phi: &Field) -> Result<Field> {
        direct::product_rule_remainder(&self.plus, phi, big_phi)
    }
}
