//! Jacobi elliptic functions for complex argument and parameter, a
//! data-driven catalog of modulus and phase transformations, the phase
//! criterion for equivalence of elliptic solutions, and mKdV solution checks.

// Negated comparisons such as `!(x < bound)` are used so that NaN fails too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod complex;
pub mod elliptic_core;
pub mod equivalence;
pub mod expr;
pub mod mkdv;

pub use complex::{Cx, C64};
pub use elliptic_core::{
    complete_k, complete_kprime, eval_base, eval_kind, ode_oracle, EllipticError, EllipticKind, Parameter,
};
pub mod seed;
pub mod transform_catalog;
