//! The period lattice `2K Z + 2iK' Z` and the pole sets of the twelve functions.

use super::kind::{EllipticKind, Letter};
use super::param::Parameter;
use crate::complex::{C64, I};

#[derive(Debug, Clone, Copy)]
pub struct Lattice {
    k: C64,
    ikp: C64,
}

impl Lattice {
    pub fn of(p: &Parameter) -> Lattice {
        Lattice { k: p.quarter_period(), ikp: I * p.quarter_period_prime() }
    }

    fn finite_k(&self) -> bool {
        self.k.re.is_finite() && self.k.im.is_finite()
    }

    fn finite_kp(&self) -> bool {
        self.ikp.re.is_finite() && self.ikp.im.is_finite()
    }

    /// Real coordinates `(a, b)` with `z = a*2K + b*2iK'`.
    pub fn coords(&self, z: C64) -> (f64, f64) {
        let (w1, w2) = (2.0 * self.k, 2.0 * self.ikp);
        let det = w1.re * w2.im - w2.re * w1.im;
        let a = (z.re * w2.im - w2.re * z.im) / det;
        let b = (w1.re * z.im - z.re * w1.im) / det;
        (a, b)
    }

    pub fn point(&self, a: f64, b: f64) -> C64 {
        2.0 * a * self.k + 2.0 * b * self.ikp
    }

    /// Reduces `z` to the cell centred at 0; returns the reduced value and
    /// the numbers of `2K` and `2iK'` periods removed.
    pub fn reduce(&self, z: C64) -> (C64, i64, i64) {
        let (a, b) = self.coords(z);
        let (na, nb) = (a.round(), b.round());
        (z - self.point(na, nb), na as i64, nb as i64)
    }

    /// Offset of the pole coset of the letter `q` in `p/q`:
    /// `s -> 0`, `c -> K`, `d -> K + iK'`, `n -> iK'`. `None` if that coset
    /// lies at infinity.
    fn pole_offset(&self, den: Letter) -> Option<C64> {
        let zero = C64::new(0.0, 0.0);
        match den {
            Letter::S => Some(zero),
            Letter::C => self.finite_k().then_some(self.k),
            Letter::D => (self.finite_k() && self.finite_kp()).then_some(self.k + self.ikp),
            Letter::N => self.finite_kp().then_some(self.ikp),
        }
    }

    /// Distance from `z` to the nearest pole of `kind`.
    pub fn pole_distance(&self, kind: EllipticKind, z: C64) -> f64 {
        match self.pole_offset(kind.letters().1) {
            Some(o) => self.coset_distance(z - o),
            None => f64::INFINITY,
        }
    }

    /// Distance from `z` to the nearest lattice point.
    fn coset_distance(&self, z: C64) -> f64 {
        match (self.finite_k(), self.finite_kp()) {
            (true, true) => {
                let (a, b) = self.coords(z);
                let (a0, b0) = (a.floor(), b.floor());
                let mut best = f64::INFINITY;
                for da in -1..=2 {
                    for db in -1..=2 {
                        let d = (z - self.point(a0 + da as f64, b0 + db as f64)).norm();
                        best = best.min(d);
                    }
                }
                best
            }
            (true, false) => {
                let w = 2.0 * self.k;
                let n = (z / w).re.round();
                (z - n * w).norm()
            }
            (false, true) => {
                let w = 2.0 * self.ikp;
                let n = (z / w).re.round();
                (z - n * w).norm()
            }
            (false, false) => z.norm(),
        }
    }

    /// Distance from the segment `[a, b]` to the nearest pole of `kind`.
    pub fn segment_pole_distance(&self, kind: EllipticKind, a: C64, b: C64) -> f64 {
        let Some(o) = self.pole_offset(kind.letters().1) else {
            return f64::INFINITY;
        };
        let (a, b) = (a - o, b - o);
        let seg = |p: C64| {
            let d = b - a;
            let l2 = d.norm_sqr();
            let t = if l2 == 0.0 { 0.0 } else { (((p - a) * d.conj()).re / l2).clamp(0.0, 1.0) };
            (p - (a + t * d)).norm()
        };
        match (self.finite_k(), self.finite_kp()) {
            (true, true) => {
                let (a1, b1) = self.coords(a);
                let (a2, b2) = self.coords(b);
                let (lo_a, hi_a) = (a1.min(a2).floor() as i64 - 1, a1.max(a2).ceil() as i64 + 1);
                let (lo_b, hi_b) = (b1.min(b2).floor() as i64 - 1, b1.max(b2).ceil() as i64 + 1);
                let mut best = f64::INFINITY;
                for i in lo_a..=hi_a {
                    for j in lo_b..=hi_b {
                        best = best.min(seg(self.point(i as f64, j as f64)));
                    }
                }
                best
            }
            (fk, _) => {
                let w = if fk { 2.0 * self.k } else { 2.0 * self.ikp };
                if !(w.re.is_finite() && w.im.is_finite()) {
                    return seg(C64::new(0.0, 0.0));
                }
                let (t1, t2) = ((a / w).re, (b / w).re);
                let mut best = f64::INFINITY;
                for n in (t1.min(t2).floor() as i64 - 1)..=(t1.max(t2).ceil() as i64 + 1) {
                    best = best.min(seg(n as f64 * w));
                }
                best
            }
        }
    }
}
