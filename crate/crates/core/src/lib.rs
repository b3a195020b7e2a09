//! Numerical toolkit for a stochastic delayed reaction–diffusion equation
//!
//! ```text
//! du/dt = Δu − μu − σu(t−τ) + F(u) + f(u(t−τ)) + Σ_j g_j dω_j/dt,   x ∈ (0, π)
//! ```
//!
//! with Dirichlet boundary conditions. The crate covers the whole chain from
//! noise generation to a closed-form upper bound on the Hausdorff dimension of
//! the random pullback attractor:
//!
//! * [`noise`]: seeded Wiener paths, stationary Ornstein–Uhlenbeck processes and
//!   the spatial noise field `z(θ_t ω)`.
//! * [`spectral`]: Laplacian spectrum, roots of the delay characteristic equation,
//!   spectral projections of the history space and the dichotomy constants `K`, `M`.
//! * [`solver`]: sine-Galerkin integration of the transformed random equation and
//!   the cocycle `Φ(t, ω, φ)`.
//! * [`attractor`]: pullback sampling of the attractor and the squeezing audit.
//! * [`bound`]: majorant process `R`, ergodic averages, feasibility condition and
//!   the dimension bounds.
//! * [`geometry`]: covering numbers and box-counting / correlation dimension.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attractor;
pub mod bound;
mod error;
pub mod galerkin;
pub mod geometry;
pub mod noise;
pub mod segment;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use segment::HistorySegment;
