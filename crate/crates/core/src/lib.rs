//! Differentiable convex optimization layers.
//!
//! A parametrized problem is checked against the disciplined parametrized
//! programming rules, compiled once to an affine map from parameters to
//! cone-program data, solved with an operator-splitting cone solver, and
//! differentiated through the solution map in forward and adjoint mode.

pub mod array;
pub mod canon;
pub mod cone;
pub mod diff;
pub mod expr;
pub mod fixtures;
pub mod io;
pub mod layer;
pub mod shape;
pub mod solver;
pub mod sparse;
