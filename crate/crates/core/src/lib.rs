//! Sticky and splitting particle dynamics for one-dimensional pressureless
//! Euler systems with Poisson interaction, an external field, linear damping
//! and quadratic confinement.
//!
//! The crate has two independent views of the same evolution:
//!
//! - [`dynamics`] runs an event-driven particle simulation in Lagrangian
//!   (mass-coordinate) form, merging particles on impact and splitting
//!   lumps when the entropy condition would otherwise be violated.
//! - [`claw`] treats the cumulative distribution function as the entropy
//!   solution of a scalar conservation law and checks simulator output against
//!   the Rankine-Hugoniot and Oleinik conditions.
//!
//! [`cone`] holds the projection machinery both views are built on, [`forces`]
//! the closed-form kernels of each force model, [`oracles`] closed-form
//! reference solutions and [`diagnostics`] energy and Lyapunov functionals.

// Negated comparisons are deliberate: NaN must fail range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod claw;
pub mod cone;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod forces;
pub mod measures;
pub mod oracles;
pub mod tol;

pub use error::{Error, Result};
