//! Numerical core for obstacle-constrained semilinear elliptic problems in a
//! steep potential well.
//!
//! The target problem is a variational inequality on `R^N` (`N = 2, 3`):
//! find `u >= phi` on the well `Omega` with
//!
//! ```text
//! ∫ ∇u·∇(v-u) + ∫ (1 + λV) u (v-u) >= ∫ f(u) (v-u)     for all admissible v.
//! ```
//!
//! It is attacked through two nested penalizations. The obstacle constraint is
//! replaced by the monotone term `-(1/ε)(φ-u)⁺ χ_Ω`, and the critical
//! nonlinearity is truncated to linear growth outside a neighbourhood `Ω̃` of
//! the well. The resulting smooth functional `I_{λ,ε}` has mountain-pass
//! geometry; its critical points are located by a path-deformation method with
//! Newton refinement, and the limits `ε → 0` and `λ → ∞` are followed by
//! continuation.
//!
//! Module map:
//!
//! * [`domain`]: truncated box grid, nodal fields, quadrature and stencils.
//! * [`model`]: potential, obstacle, nonlinearities and their truncation.
//! * [`energy`]: the penalized functional, its gradient and the penalty operator.
//! * [`solver`]: geometry checks, mountain-pass search, Newton, Sobolev estimate.
//! * [`continuation`]: `ε` and `λ` sweeps and the inequality verifiers.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Sweep failures carry the partial report.
#![allow(clippy::result_large_err)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod continuation;
pub mod domain;
pub mod energy;
pub mod linalg;
pub mod model;
pub mod solver;

mod math;
pub mod sample;

pub use continuation::{SweepReport, SweepStep};
pub use domain::{Field, GridSpec, Region, RegionMask};
pub use energy::{EnergyBreakdown, ProblemSpec};
pub use model::{NonlinearitySpec, ObstacleSpec, PotentialSpec, TruncationParams};
pub use solver::{MountainPassResult, SolverConfig};
