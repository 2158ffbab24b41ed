//! kinreg — a numerical laboratory for degenerate convection–diffusion equations
//! with multiplicative stochastic forcing,
//!
//! ```text
//!     ∂_t u + div_x 𝔣(u) = div_x (a(u) ∇_x u) + B(u) dW/dt,
//! ```
//!
//! built around the quantitative link between how degenerate the coefficients
//! are and how much fractional smoothness solutions gain.
//!
//! The crate provides, end to end:
//!
//! * coefficient models (flux 𝔣, diffusion matrix a = σ², their primitives) and
//!   numerical validation of the structural assumptions ([`coeffs`]);
//! * the kinetic symbol `|ξ0 + ⟨f(λ)|ξ̃⟩|² + ⟨a(λ)ξ̃|ξ̃⟩`, measurement of its
//!   near-degenerate λ-sets, a fitted non-degeneracy exponent α, and the closed
//!   form regularity exponents q*(α,d), s*(α,d) ([`nondeg`]);
//! * a dyadic Littlewood–Paley partition with polynomial bump profiles, the
//!   associated cutoff family and modified symbol, and frequency-annulus block
//!   filters for gridded data ([`lpdecomp`]);
//! * a truncated cylindrical Wiener forcing with reproducible counter-based
//!   increments and pathwise Itô integrals ([`noise`]);
//! * an entropy-stable explicit finite-volume solver (local Lax–Friedrichs flux
//!   plus conservative differencing of the diffusion primitive A(u)) on a
//!   periodic box in one or two dimensions ([`solver`]);
//! * kinetic χ-densities, velocity averages and the parabolic dissipation field
//!   ([`kinetic`]);
//! * fractional-regularity estimation of sampled fields via Littlewood–Paley
//!   block-norm decay, with a direct Sobolev–Slobodetskii seminorm as a
//!   small-grid cross-check ([`regularity`]);
//! * configuration, orchestration and file formats for the `kinreg` command
//!   line tool ([`harness`]).
//!
//! Everything is deterministic given a configuration and seeds: reruns produce
//! byte-identical output files.

pub mod coeffs;
pub mod error;
pub mod field;
pub mod harness;
pub mod kinetic;
pub mod lpdecomp;
pub mod noise;
pub mod nondeg;
pub mod regularity;
pub mod solver;

pub(crate) mod numeric;
pub(crate) mod spectral;

pub use error::{Error, Result};
pub use field::Field;
