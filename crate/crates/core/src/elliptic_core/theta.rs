//! Theta series and the letter values `s, c, d, n` from which all twelve
//! functions are ratios.

use super::kind::Letter;
use super::lattice::Lattice;
use super::param::{Parameter, Regime};
use crate::complex::{C64, ONE};

const MAX_TERMS: usize = 400;

/// `[theta1, theta2, theta3, theta4]` at `z` for nome `q`, with the common
/// factor `q^(1/4)` dropped from `theta1` and `theta2`.
pub(crate) fn theta_all(z: C64, q: C64) -> [C64; 4] {
    let mut t1 = C64::new(0.0, 0.0);
    let mut t2 = C64::new(0.0, 0.0);
    let mut t3 = ONE;
    let mut t4 = ONE;
    // q^(n(n+1)) and q^(n^2)
    let mut p_odd = ONE;
    let mut p_even = ONE;
    let mut sign = 1.0;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        let w = (2.0 * nf + 1.0) * z;
        let a1 = sign * p_odd * w.sin();
        let a2 = p_odd * w.cos();
        t1 += a1;
        t2 += a2;
        let mut small = a1.norm() <= 1e-17 * t1.norm().max(1e-300) && a2.norm() <= 1e-17 * t2.norm().max(1e-300);
        if n >= 1 {
            let c = p_even * (2.0 * nf * z).cos();
            t3 += c;
            t4 += sign * c;
            small &= c.norm() <= 1e-17 * t3.norm().min(t4.norm()).max(1e-300);
        }
        if n >= 1 && small {
            break;
        }
        p_odd *= q.powi(2 * (n as i32 + 1));
        p_even *= q.powi(2 * n as i32 + 1);
        sign = -sign;
    }
    [2.0 * t1, 2.0 * t2, 2.0 * t3 - ONE, 2.0 * t4 - ONE]
}

/// Values proportional to `(s, c, d, n)` so that e.g. `sn = s/n`, `cd = c/d`.
pub(crate) fn letters(u: C64, p: &Parameter) -> [C64; 4] {
    match p.regime {
        Regime::Circular => [u.sin(), u.cos(), ONE, ONE],
        Regime::Hyperbolic => [u.sinh(), ONE, ONE, u.cosh()],
        Regime::Theta => {
            let lat = Lattice::of(p);
            let (ur, na, nb) = lat.reduce(u);
            let z = std::f64::consts::FRAC_PI_2 * ur / p.quarter_period();
            let th = theta_all(z, p.nome());
            let sa = if na % 2 == 0 { 1.0 } else { -1.0 };
            let sb = if nb % 2 == 0 { 1.0 } else { -1.0 };
            [sa * p.scales[0] * th[0], sa * sb * p.scales[1] * th[1], sb * p.scales[2] * th[2], th[3]]
        }
    }
}

pub(crate) fn ratio(l: &[C64; 4], num: Letter, den: Letter) -> C64 {
    l[num.index()] / l[den.index()]
}
