//! Jacobi elliptic functions and complete elliptic integrals for complex
//! argument and complex parameter.
//!
//! The parameter convention is used throughout: `dn^2 + lambda sn^2 = 1`
//! (the modulus is `sqrt(lambda)`).

mod kind;
mod lattice;
mod ode;
mod param;
mod theta;

pub use kind::{EllipticKind, Letter, UnknownKind};
pub use lattice::Lattice;
pub use ode::{ode_oracle, ode_oracle_with_step, ODE_MAX_STEP};
pub use param::{agm, complete_k, complete_kprime, Parameter};

use crate::complex::C64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EllipticError {
    #[error("parameter {0} is singular for this operation")]
    SingularParameter(C64),
    #[error("branch failure: {0}")]
    BranchFailure(String),
    #[error("inadmissible parameter: {0}")]
    InadmissibleParameter(String),
    #[error("{kind}({x}) is within {distance:.3e} of a pole (exclusion radius {radius:.3e})")]
    NearPole { kind: EllipticKind, x: C64, distance: f64, radius: f64 },
    #[error("path from 0 to {x} passes within {distance:.3e} of a pole (radius {radius:.3e})")]
    PathThroughPole { x: C64, distance: f64, radius: f64 },
}

fn check_pole(kind: EllipticKind, x: C64, param: &Parameter) -> Result<(), EllipticError> {
    let radius = param.pole_radius();
    let distance = Lattice::of(param).pole_distance(kind, x);
    if distance <= radius {
        Err(EllipticError::NearPole { kind, x, distance, radius })
    } else {
        Ok(())
    }
}

/// `(sn, cn, dn)` at `(x | lambda)`.
pub fn eval_base(x: C64, param: &Parameter) -> Result<[C64; 3], EllipticError> {
    check_pole(EllipticKind::Sn, x, param)?;
    let l = theta::letters(x, param);
    Ok([l[0] / l[3], l[1] / l[3], l[2] / l[3]])
}

/// Any of the twelve functions at `(x | lambda)`.
pub fn eval_kind(kind: EllipticKind, x: C64, param: &Parameter) -> Result<C64, EllipticError> {
    check_pole(kind, x, param)?;
    let (p, q) = kind.letters();
    Ok(theta::ratio(&theta::letters(x, param), p, q))
}

/// `eval_kind` without the pole-exclusion check, for callers that manage
/// their own margins (e.g. finite-difference stencils).
pub fn eval_kind_unchecked(kind: EllipticKind, x: C64, param: &Parameter) -> C64 {
    let (p, q) = kind.letters();
    theta::ratio(&theta::letters(x, param), p, q)
}
