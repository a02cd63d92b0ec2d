//! Complex scalar helpers shared by every module.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

/// Replaces negative zeros by positive ones so that principal branches
/// always take the upper side of the negative real cut.
pub fn canonical(z: C64) -> C64 {
    C64::new(z.re + 0.0, z.im + 0.0)
}

pub fn principal_sqrt(z: C64) -> C64 {
    canonical(z).sqrt()
}

pub fn principal_ln(z: C64) -> C64 {
    canonical(z).ln()
}

/// Principal power `z^w`. Integer exponents use repeated multiplication,
/// so `(-1)^n` is exact.
pub fn principal_pow(z: C64, w: C64) -> C64 {
    if w.im == 0.0 && w.re.fract() == 0.0 && w.re.abs() <= 64.0 {
        return z.powi(w.re as i32);
    }
    if z == ZERO {
        return if w.re > 0.0 { ZERO } else { C64::new(f64::NAN, f64::NAN) };
    }
    (w * principal_ln(z)).exp()
}

pub fn is_finite(z: C64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// `|a - b| / max(1, |a|, |b|)`.
pub fn rel_err(a: C64, b: C64) -> f64 {
    (a - b).norm() / 1f64.max(a.norm()).max(b.norm())
}

/// Serialized form of a complex scalar: `{"re": .., "im": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cx {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for Cx {
    fn from(z: C64) -> Self {
        Cx { re: z.re, im: z.im }
    }
}

impl From<Cx> for C64 {
    fn from(z: Cx) -> Self {
        C64::new(z.re, z.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_of_negative_real_is_upper_branch() {
        let z = C64::new(-4.0, -0.0);
        assert_eq!(principal_sqrt(z), C64::new(0.0, 2.0));
    }

    #[test]
    fn integer_powers_are_exact() {
        assert_eq!(principal_pow(C64::new(-1.0, 0.0), C64::new(3.0, 0.0)), C64::new(-1.0, 0.0));
        assert_eq!(principal_pow(I, C64::new(2.0, 0.0)), C64::new(-1.0, 0.0));
    }

    #[test]
    fn fractional_power_is_principal() {
        let r = principal_pow(C64::new(-1.0, 0.0), C64::new(1.5, 0.0));
        assert!((r - C64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn rel_err_floor_is_one() {
        assert!((rel_err(C64::new(1e-3, 0.0), ZERO) - 1e-3).abs() < 1e-18);
    }
}
