//! Nonlocal half-ball vector calculus on periodic lattices.
//!
//! Kernels ([`kernel`]) are sampled into directional stencils
//! ([`operators`]) acting on [`field::Field`]s over an embedding
//! [`lattice::Torus`]. On top of the operators sit the continuum and lattice
//! Fourier symbols ([`symbol`]), the Poincaré estimator ([`poincare`]),
//! Dirichlet solvers ([`solvers`]), the Helmholtz split ([`helmholtz`]) and
//! a seeded verification harness ([`verify`]).

pub mod error;
pub mod field;
pub mod helmholtz;
pub mod io;
pub mod kernel;
pub mod krylov;
pub mod lattice;
pub mod operators;
pub mod poincare;
pub mod quad;
pub mod solvers;
pub mod symbol;
pub mod verify;

pub use error::{NlvcError, Result};
pub use field::{Field, Rank};
pub use kernel::{KernelFamily, KernelMoments, KernelSpec};
pub use lattice::{Direction, DomainMask, Torus};
pub use operators::{Backend, NonlocalOps, Sign, StencilWeights};
