//! Independent oracle: RK4 integration of `S' = CD, C' = -SD, D' = -lambda SC`.

use super::kind::EllipticKind;
use super::lattice::Lattice;
use super::param::Parameter;
use super::EllipticError;
use crate::complex::{C64, ONE};

pub const ODE_MAX_STEP: f64 = 1e-4;

fn rhs(lambda: C64, y: [C64; 3]) -> [C64; 3] {
    let [s, c, d] = y;
    [c * d, -s * d, -lambda * s * c]
}

fn axpy(y: [C64; 3], h: C64, k: [C64; 3]) -> [C64; 3] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]]
}

/// Integrates from `init` at 0 to `x` along the straight segment with steps
/// no longer than `max_step`.
pub fn ode_oracle_with_step(
    x: C64,
    param: &Parameter,
    init: [C64; 3],
    max_step: f64,
) -> Result<[C64; 3], EllipticError> {
    let zero = C64::new(0.0, 0.0);
    if x == zero {
        return Ok(init);
    }
    let delta = param.pole_radius();
    if init == [zero, ONE, ONE] {
        let d = Lattice::of(param).segment_pole_distance(EllipticKind::Sn, zero, x);
        if d <= delta {
            return Err(EllipticError::PathThroughPole { x, distance: d, radius: delta });
        }
    }
    let n = (x.norm() / max_step).ceil().max(1.0) as usize;
    let h = x / n as f64;
    let lambda = param.lambda();
    let bound = 1.0 / (delta * delta);
    let mut y = init;
    for _ in 0..n {
        let k1 = rhs(lambda, y);
        let k2 = rhs(lambda, axpy(y, 0.5 * h, k1));
        let k3 = rhs(lambda, axpy(y, 0.5 * h, k2));
        let k4 = rhs(lambda, axpy(y, h, k3));
        for i in 0..3 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if y.iter().any(|v| !(v.norm() < bound)) {
            return Err(EllipticError::PathThroughPole { x, distance: 0.0, radius: delta });
        }
    }
    Ok(y)
}

pub fn ode_oracle(x: C64, param: &Parameter, init: [C64; 3]) -> Result<[C64; 3], EllipticError> {
    ode_oracle_with_step(x, param, init, ODE_MAX_STEP)
}
