//! Nonholonomic Lagrangian dynamics in a foliated chart.
//!
//! The crate assembles and integrates the equations of motion of a
//! Lagrangian subject to a velocity constraint `y^u = C^u(x, ȳ[, t])`
//! relating leaf velocities to transverse ones. Constraints may be
//! linear, affine, explicitly nonlinear, or given implicitly as zeros of
//! a vector- or covector-valued map and solved by Newton iteration.
//!
//! Everything is computed with second-order forward-mode jets
//! ([`scalar::Jet2`]), so curvature tensors, the bilinear form `h`, force
//! terms and the transverse semispray come out with exact derivatives.
//! Independent oracles (finite differences, off-shell algebraic
//! identities and the raw constrained Lagrange equations) cross-check
//! every assembled quantity.

pub mod dynamics;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod implicit;
pub mod integrate;
mod linalg;
pub mod model;
pub mod scalar;
pub mod scenarios;
pub mod schema;

pub use error::{Error, Result};
