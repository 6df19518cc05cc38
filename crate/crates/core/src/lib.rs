//! Spectral-Galerkin variational toolkit for `T`-periodic solutions of
//! second-order Hamiltonian systems
//!
//! ```text
//! ü + U(t)u + ∇_u W(t, u) = 0,    u(0) = u(T), u̇(0) = u̇(T).
//! ```
//!
//! Loops are sampled on a uniform grid; the operator `A = -d²/dt² - U(t)` is
//! discretized with the Fourier spectral second-derivative matrix and fully
//! diagonalized. Periodic solutions are critical points of the action
//! functional `Φ(u) = ½‖u⁺‖² - ½‖u⁻‖² - ∫W(t,u)`, which the solver locates on
//! Galerkin subspaces `Y_k` spanned by the leading eigenvectors.

pub mod audit;
pub mod error;
pub mod expr;
pub mod fourier;
pub mod functional;
pub mod geometry;
pub mod ode;
pub mod potential;
pub mod solver;
pub mod spectral;
pub mod validation;

pub use error::{Error, Result};
pub use functional::{FunctionalContext, Subspace};
pub use potential::{FnPotential, Hypotheses, Mode, Potential, PowerPotential};
pub use spectral::{GridFunction, MatrixPath, Part, SpectralDecomposition, TimeGrid};
