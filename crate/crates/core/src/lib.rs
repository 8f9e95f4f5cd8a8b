//! Finite-dimensional Kähler functional calculus on projective Hilbert space.
//!
//! Operators A on C^n are represented as expectation functions
//! f_A([x]) = ⟨x|Ax⟩ on CP^{n−1}. The Fubini–Study geometry turns those
//! functions into a C*-algebra under a star product whose commutator is
//! √−1 times the Poisson bracket, and every algebraic statement about
//! operators becomes a geometric statement about functions. On top of that
//! calculus this crate builds infinitesimal crossed products of Hamiltonian
//! vector fields with **R**, their dual action, the second crossed product,
//! and a numerical end-to-end verification of the infinitesimal Takesaki-type
//! duality: (𝔛_H ⋊_β R) ⋊_β̂ R ≅ 𝔛_H ⋊_δ H₁ with H₁ the Heisenberg algebra.
//!
//! Module map:
//! - [`projective`]: points, charts, the Fubini–Study metric, gradients and
//!   the symplectic pairing on CP^{n−1};
//! - [`star`]: expectation functions, star product, C*-norm, Poisson
//!   brackets and commutants;
//! - [`dynamics`]: unitary flows, pullbacks, infinitesimal actions and
//!   Hamiltonian vector fields;
//! - [`lie`]: a generic numerical Lie-algebra engine (structure constants,
//!   Jacobi/derivation checks, semidirect products, isomorphism tests);
//! - [`line`]: the discretized line — self-dual grid, Fourier transform,
//!   w/l multiplication and derivative operators, Hermite interior
//!   projection, ladder operators;
//! - [`crossed`]: covariant systems, the first crossed product, the dual
//!   action and the second crossed product on tensor spaces;
//! - [`duality`]: the conjugation chain and the final Lie-algebra
//!   isomorphism check;
//! - [`report`], [`matfile`], [`config`]: verification reports, matrix file
//!   I/O and run configuration for the CLI.

pub mod config;
pub mod crossed;
pub mod duality;
pub mod dynamics;
pub mod error;
pub mod lie;
pub mod linalg;
pub mod line;
pub mod matfile;
pub mod projective;
pub mod report;
pub mod star;
pub mod suites;

pub use error::{Error, Result};
