//! Numerical Bloch spectral theory for one-dimensional PT-symmetric periodic
//! Schrödinger operators `L = -d²/dx² + u(x)` with `u(x) = conj(u(-x))`.

pub mod conic;
pub mod divisor;
pub mod dubrovin;
pub mod error;
pub mod linalg;
pub mod monodromy;
pub mod newton;
pub mod ode;
pub mod perturbation;
pub mod potential;
pub mod spectrum;

pub use error::{Error, Result};
pub use potential::{Potential, PotentialSpec, SampledPotential};
