use std::f64::consts::FRAC_PI_2;

use super::theta;
use super::EllipticError;
use crate::complex::{is_finite, principal_sqrt, C64, I, ONE};

const AGM_MAX_ITER: usize = 64;

/// Arithmetic-geometric mean with the "right choice" of square root at
/// every step (the root closer to the arithmetic mean).
pub fn agm(a0: C64, b0: C64) -> Result<C64, EllipticError> {
    let (mut a, mut b) = (a0, b0);
    for _ in 0..AGM_MAX_ITER {
        let an = 0.5 * (a + b);
        let mut bn = principal_sqrt(a * b);
        if (an - bn).norm() > (an + bn).norm() {
            bn = -bn;
        }
        a = an;
        b = bn;
        if (a - b).norm() <= 4.0 * f64::EPSILON * a.norm() {
            return if is_finite(a) && a.norm() > 0.0 {
                Ok(0.5 * (a + b))
            } else {
                Err(EllipticError::BranchFailure(format!("AGM({a0}, {b0}) degenerated")))
            };
        }
    }
    Err(EllipticError::BranchFailure(format!("AGM({a0}, {b0}) did not converge")))
}

/// Complete elliptic integral of the first kind, parameter convention.
pub fn complete_k(lambda: C64) -> Result<C64, EllipticError> {
    if !is_finite(lambda) {
        return Err(EllipticError::InadmissibleParameter(format!("non-finite parameter {lambda}")));
    }
    if lambda == ONE {
        return Err(EllipticError::SingularParameter(lambda));
    }
    if lambda == C64::new(0.0, 0.0) {
        return Ok(C64::new(FRAC_PI_2, 0.0));
    }
    let m = agm(ONE, principal_sqrt(ONE - lambda))?;
    Ok(C64::new(FRAC_PI_2, 0.0) / m)
}

/// `K(1 - lambda)`.
pub fn complete_kprime(lambda: C64) -> Result<C64, EllipticError> {
    if lambda == C64::new(0.0, 0.0) {
        return Err(EllipticError::SingularParameter(lambda));
    }
    complete_k(ONE - lambda)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Regime {
    /// `lambda = 0`: circular functions.
    Circular,
    /// `lambda = 1`: hyperbolic functions.
    Hyperbolic,
    Theta,
}

/// An elliptic parameter with its derived periods and theta constants.
///
/// At `lambda = 1` the quarter period `K` is infinite and the nome is 1;
/// such a parameter is still constructible and evaluates through the
/// hyperbolic limit. Likewise `lambda = 0` has infinite `K'` and nome 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parameter {
    lambda: C64,
    complement: C64,
    k: C64,
    kp: C64,
    nome: C64,
    pub(crate) regime: Regime,
    /// `theta3(0)/theta2(0)`, `theta4(0)/theta2(0)`, `theta4(0)/theta3(0)` without the `q^(1/4)` factor.
    pub(crate) scales: [C64; 3],
}

impl Parameter {
    pub fn new(lambda: C64) -> Result<Parameter, EllipticError> {
        if !is_finite(lambda) {
            return Err(EllipticError::InadmissibleParameter(format!("non-finite parameter {lambda}")));
        }
        let complement = ONE - lambda;
        let inf = C64::new(f64::INFINITY, 0.0);
        if lambda == C64::new(0.0, 0.0) {
            return Ok(Parameter {
                lambda,
                complement,
                k: C64::new(FRAC_PI_2, 0.0),
                kp: inf,
                nome: C64::new(0.0, 0.0),
                regime: Regime::Circular,
                scales: [ONE; 3],
            });
        }
        if lambda == ONE {
            return Ok(Parameter {
                lambda,
                complement,
                k: inf,
                kp: C64::new(FRAC_PI_2, 0.0),
                nome: ONE,
                regime: Regime::Hyperbolic,
                scales: [ONE; 3],
            });
        }
        let k = complete_k(lambda)?;
        let kp = complete_k(complement)?;
        let tau = I * kp / k;
        if !(tau.im > 0.0) {
            return Err(EllipticError::InadmissibleParameter(format!(
                "nome of parameter {lambda} is not inside the unit disk"
            )));
        }
        let nome = (I * std::f64::consts::PI * tau).exp();
        if !(nome.norm() < 1.0) {
            return Err(EllipticError::InadmissibleParameter(format!(
                "nome of parameter {lambda} is not inside the unit disk"
            )));
        }
        let th = theta::theta_all(C64::new(0.0, 0.0), nome);
        let (t2, t3, t4) = (th[1], th[2], th[3]);
        // Consistency of the period pair with the parameter: lambda = (theta2/theta3)^4.
        let q4 = nome.sqrt().sqrt();
        let back = (q4 * t2 / t3).powi(4);
        if (back - lambda).norm() > 1e-9 * lambda.norm().max(1.0) {
            return Err(EllipticError::BranchFailure(format!(
                "period pair for parameter {lambda} is inconsistent (theta ratio gives {back})"
            )));
        }
        Ok(Parameter { lambda, complement, k, kp, nome, regime: Regime::Theta, scales: [t3 / t2, t4 / t2, t4 / t3] })
    }

    pub fn real(lambda: f64) -> Result<Parameter, EllipticError> {
        Parameter::new(C64::new(lambda, 0.0))
    }

    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    pub fn complement(&self) -> C64 {
        self.complement
    }

    /// Quarter period `K`.
    pub fn quarter_period(&self) -> C64 {
        self.k
    }

    /// Quarter period `K'`.
    pub fn quarter_period_prime(&self) -> C64 {
        self.kp
    }

    pub fn nome(&self) -> C64 {
        self.nome
    }

    /// Pole-exclusion radius `1e-3 * min(|2K|, |2K'|)`.
    pub fn pole_radius(&self) -> f64 {
        1e-3 * (2.0 * self.k.norm()).min(2.0 * self.kp.norm())
    }
}
