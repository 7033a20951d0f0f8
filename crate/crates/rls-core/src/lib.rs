//! Parameter-free, projection-free solver for constrained convex
//! optimization built on a restarting level-set scheme.
//!
//! The solver maintains one first-order subroutine per level parameter of a
//! level-set sequence and restarts them on subproblem progress, so it needs
//! neither the optimal value nor growth constants, and it only ever projects
//! onto the simple feasible set. Two subroutines are provided: projected
//! subgradient descent for non-smooth problems and an accelerated gradient
//! method on an exponentially smoothed objective for smooth ones.
//!
//! Entry points:
//! - [`problem`]: instance types and oracles
//! - [`levelset`]: the level-set function, smoothing, and sizing surrogates
//! - [`fom`]: the restartable subroutines behind one trait
//! - [`rls`]: the restarting solver and the oracle reference solver
//! - [`experiments`]: benchmark builders, brute-force oracles, metrics

pub mod error;
pub mod experiments;
pub mod fom;
pub mod levelset;
pub mod passes;
pub mod problem;
pub mod rls;
pub mod trace;

pub use error::{Error, Result};
