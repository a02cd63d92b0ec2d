//! Uniform (x, t) grids and finite-difference residuals.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::{FieldFn, MkdvError};
use crate::complex::{is_finite, C64, I, ONE};
use crate::transform_catalog::Status;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub x0: f64,
    pub x1: f64,
    pub t0: f64,
    pub t1: f64,
    pub hx: f64,
    pub ht: f64,
}

impl GridSpec {
    pub fn new(x: (f64, f64), t: (f64, f64), hx: f64, ht: f64) -> Self {
        GridSpec { x0: x.0, x1: x.1, t0: t.0, t1: t.1, hx, ht }
    }

    pub fn nx(&self) -> usize {
        ((self.x1 - self.x0) / self.hx + 1e-9).floor() as usize + 1
    }

    pub fn nt(&self) -> usize {
        ((self.t1 - self.t0) / self.ht + 1e-9).floor() as usize + 1
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.hx
    }

    pub fn t(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.ht
    }

    pub fn with_hx(self, hx: f64) -> Self {
        GridSpec { hx, ..self }
    }

    /// Positive spacings, a non-empty window and at least 7 x-nodes.
    pub fn check(&self) -> Result<(), MkdvError> {
        if !(self.hx > 0.0 && self.ht > 0.0) {
            return Err(MkdvError::InvalidGrid(format!("spacings must be positive (hx {}, ht {})", self.hx, self.ht)));
        }
        if !(self.x1 >= self.x0 && self.t1 >= self.t0) {
            return Err(MkdvError::InvalidGrid("empty window".into()));
        }
        if self.nx() < 7 {
            return Err(MkdvError::InvalidGrid(format!("{} x-nodes, at least 7 needed", self.nx())));
        }
        Ok(())
    }

    fn nodes(&self) -> Vec<(f64, f64)> {
        let (nx, nt) = (self.nx(), self.nt());
        (0..nt).flat_map(|j| (0..nx).map(move |i| (self.x(i), self.t(j)))).collect()
    }

    /// The window shrunk by `f` about its centre and shifted by `dx`.
    fn moved(&self, f: f64, dx: f64) -> Self {
        let (cx, wx) = (0.5 * (self.x0 + self.x1) + dx, 0.5 * (self.x1 - self.x0) * f);
        let (ct, wt) = (0.5 * (self.t0 + self.t1), 0.5 * (self.t1 - self.t0) * f);
        GridSpec { x0: cx - wx, x1: cx + wx, t0: ct - wt, t1: ct + wt, ..*self }
    }
}

/// Values of a field on a grid, stored row by row in `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    pub x_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub hx: f64,
    pub ht: f64,
    /// `values[j][i]` is the value at `(x_grid[i], t_grid[j])`.
    pub values: Vec<Vec<C64>>,
}

impl Field2D {
    pub fn sample(f: &FieldFn, spec: &GridSpec) -> Result<Field2D, MkdvError> {
        spec.check()?;
        let x_grid: Vec<f64> = (0..spec.nx()).map(|i| spec.x(i)).collect();
        let t_grid: Vec<f64> = (0..spec.nt()).map(|j| spec.t(j)).collect();
        let values = t_grid
            .par_iter()
            .map(|&t| {
                x_grid
                    .iter()
                    .map(|&x| f(x.into(), t).filter(|v| is_finite(*v)).ok_or(MkdvError::PoleOnGrid { x, t }))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Field2D { x_grid, t_grid, hx: spec.hx, ht: spec.ht, values })
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "x,t,re,im")?;
        for (j, row) in self.values.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                writeln!(w, "{},{},{},{}", self.x_grid[i], self.t_grid[j], v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Nonlinear term of the phi-equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiOperator {
    /// `6 phi_x (phi_x^2 - phi phi_xx)`, which follows from substituting
    /// `u = 2 sqrt(nu) (arctan phi)_x` into the mKdV equation.
    #[default]
    Derived,
    /// `6 phi_x (phi^2 - phi phi_xx)`.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualConfig {
    pub tol_phi: f64,
    pub tol_mkdv: f64,
    /// `|1 + phi^2|` below this counts as a pole.
    pub pole_tol: f64,
    /// Step of the eighth-order difference inside [`reconstruct_u`].
    pub h_u: f64,
    /// Shrink-and-shift attempts before giving up on a window.
    pub window_attempts: usize,
    pub operator: PhiOperator,
}

impl Default for ResidualConfig {
    fn default() -> Self {
        ResidualConfig {
            tol_phi: 1e-4,
            tol_mkdv: 1e-3,
            pole_tol: 1e-8,
            h_u: 1e-2,
            window_attempts: 8,
            operator: PhiOperator::Derived,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub report: &'static str,
    pub equation: &'static str,
    pub form: String,
    pub rule_id: Option<String>,
    pub window: GridSpec,
    pub window_attempts: usize,
    pub nodes: usize,
    pub max_residual: f64,
    pub scale: f64,
    pub normalized_residual: f64,
    pub max_abs_value: f64,
    pub max_imag: f64,
    pub tolerance: f64,
    pub status: Status,
}

/// Fourth-order central differences: first, second and third x-derivatives
/// from the samples at `x - 3h .. x + 3h` (index 3 is the centre).
fn x_derivs(f: &[C64; 7], h: f64) -> (C64, C64, C64) {
    let d1 = (f[1] - 8.0 * f[2] + 8.0 * f[4] - f[5]) / (12.0 * h);
    let d2 = (-f[1] + 16.0 * f[2] - 30.0 * f[3] + 16.0 * f[4] - f[5]) / (12.0 * h * h);
    let d3 = (f[0] - 8.0 * f[1] + 13.0 * f[2] - 13.0 * f[4] + 8.0 * f[5] - f[6]) / (8.0 * h * h * h);
    (d1, d2, d3)
}

/// Third x-derivative by the fourth-order stencil alone.
fn stencil_xxx(f: &FieldFn, x: f64, t: f64, h: f64) -> Option<C64> {
    let s = stencil(f, x, t, h)?;
    Some(x_derivs(&s, h).2)
}

fn stencil(f: &FieldFn, x: f64, t: f64, h: f64) -> Option<[C64; 7]> {
    let mut s = [C64::new(0.0, 0.0); 7];
    for (n, v) in s.iter_mut().enumerate() {
        *v = f(C64::new(x + (n as f64 - 3.0) * h, 0.0), t).filter(|z| is_finite(*z))?;
    }
    Some(s)
}

struct NodeValues {
    residual: f64,
    value: C64,
}

fn scan(
    f: &FieldFn,
    spec: &GridSpec,
    node: impl Fn(&[C64; 7], C64) -> Option<C64> + Sync,
    pole: impl Fn(C64) -> bool + Sync,
) -> Result<Vec<NodeValues>, MkdvError> {
    spec.check()?;
    spec.nodes()
        .par_iter()
        .map(|&(x, t)| {
            let err = MkdvError::PoleOnGrid { x, t };
            let s = stencil(f, x, t, spec.hx).ok_or(err.clone())?;
            if pole(s[3]) {
                return Err(err);
            }
            let tp = f(x.into(), t + spec.ht).filter(|z| is_finite(*z)).ok_or(err.clone())?;
            let tm = f(x.into(), t - spec.ht).filter(|z| is_finite(*z)).ok_or(err.clone())?;
            let ft = (tp - tm) / (2.0 * spec.ht);
            let r = node(&s, ft).ok_or(err)?;
            Ok(NodeValues { residual: r.norm(), value: s[3] })
        })
        .collect()
}

fn summarize(
    equation: &'static str,
    nodes: Vec<NodeValues>,
    spec: GridSpec,
    attempts: usize,
    tol: f64,
) -> ResidualReport {
    let max_residual = nodes.iter().map(|n| n.residual).fold(0.0, f64::max);
    let max_abs_value = nodes.iter().map(|n| n.value.norm()).fold(0.0, f64::max);
    let max_imag = nodes.iter().map(|n| n.value.im.abs()).fold(0.0, f64::max);
    let scale = max_abs_value.max(1.0).powi(3);
    let normalized = max_residual / scale;
    ResidualReport {
        report: "residual",
        equation,
        form: String::new(),
        rule_id: None,
        window: spec,
        window_attempts: attempts,
        nodes: nodes.len(),
        max_residual,
        scale,
        normalized_residual: normalized,
        max_abs_value,
        max_imag,
        tolerance: tol,
        status: if normalized < tol { Status::Pass } else { Status::Fail },
    }
}

/// Tries `spec`, then up to `attempts - 1` shrunk and shifted windows,
/// returning the first on which `run` does not hit a pole.
pub fn find_window<T>(
    spec: &GridSpec,
    attempts: usize,
    mut run: impl FnMut(&GridSpec) -> Result<T, MkdvError>,
) -> Result<(T, GridSpec, usize), MkdvError> {
    let width = spec.x1 - spec.x0;
    let mut last = None;
    for n in 0..attempts.max(1) {
        let w = if n == 0 {
            *spec
        } else {
            let shift = [0.37, -0.61, 0.83, -0.29, 1.13, -1.07, 0.51][(n - 1) % 7] * width;
            spec.moved(0.85f64.powi(n as i32), shift)
        };
        match run(&w) {
            Ok(v) => return Ok((v, w, n + 1)),
            Err(e @ MkdvError::PoleOnGrid { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// `(1+phi^2)(phi_t + phi_xxx) + N` at every node, with `N` per
/// `cfg.operator`, normalised by `max(1, max|phi|)^3`.
pub fn phi_equation_residual(
    phi: &FieldFn,
    spec: &GridSpec,
    cfg: &ResidualConfig,
) -> Result<ResidualReport, MkdvError> {
    let op = cfg.operator;
    let pole_tol = cfg.pole_tol;
    let (nodes, w, attempts) = find_window(spec, cfg.window_attempts, |w| {
        let h = w.hx;
        scan(
            phi,
            w,
            move |s, ft| {
                let p = s[3];
                let (px, pxx, pxxx) = x_derivs(s, h);
                let nonlinear = match op {
                    PhiOperator::Derived => 6.0 * px * (px * px - p * pxx),
                    PhiOperator::Printed => 6.0 * px * (p * p - p * pxx),
                };
                Some((ONE + p * p) * (ft + pxxx) + nonlinear)
            },
            move |p| (ONE + p * p).norm() < pole_tol,
        )
    })?;
    Ok(summarize("phi", nodes, w, attempts, cfg.tol_phi))
}

/// `u = 2 sqrt(nu) phi_x / (1 + phi^2)`, `phi_x` by an eighth-order
/// central difference with step `h`. Yields `None` where `|1+phi^2|` is
/// below `pole_tol`.
pub fn reconstruct_u(phi: FieldFn, nu: i8, h: f64, pole_tol: f64) -> FieldFn {
    const W: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    let root_nu = if nu < 0 { I } else { ONE };
    Arc::new(move |x: C64, t: f64| {
        let p = phi(x, t)?;
        let den = ONE + p * p;
        if den.norm() < pole_tol {
            return None;
        }
        let mut px = C64::new(0.0, 0.0);
        for (n, w) in W.iter().enumerate() {
            let dx = (n + 1) as f64 * h;
            px += *w * (phi(x + dx, t)? - phi(x - dx, t)?);
        }
        let v = 2.0 * root_nu * (px / h) / den;
        is_finite(v).then_some(v)
    })
}

/// `u_t + 6 nu u^2 u_x + u_xxx` at every node, normalised by
/// `max(1, max|u|)^3`. The report's `max_imag` is the largest `|Im u|`.
pub fn mkdv_residual(u: &FieldFn, nu: i8, spec: &GridSpec, cfg: &ResidualConfig) -> Result<ResidualReport, MkdvError> {
    let nu = f64::from(nu);
    let (nodes, w, attempts) = find_window(spec, cfg.window_attempts, |w| {
        let h = w.hx;
        scan(
            u,
            w,
            move |s, ut| {
                let (ux, _, uxxx) = x_derivs(s, h);
                Some(ut + 6.0 * nu * s[3] * s[3] * ux + uxxx)
            },
            |_| false,
        )
    })?;
    Ok(summarize("mkdv", nodes, w, attempts, cfg.tol_mkdv))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderReport {
    pub report: &'static str,
    pub hx: f64,
    pub err_h: f64,
    pub err_half: f64,
    pub ratio: f64,
    pub status: Status,
}

/// Third x-derivative by the Cauchy integral over a circle of radius `r`
/// with `n` trapezoid nodes.
fn cauchy_xxx(f: &FieldFn, x: f64, t: f64, r: f64, n: usize) -> Option<C64> {
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..n {
        let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / n as f64);
        acc += f(x + r * w, t)? * w.powi(-3);
    }
    Some(6.0 * acc / (n as f64 * r.powi(3)))
}

/// Error of the fourth-order `phi_xxx` stencil at `h` and `h/2` against a
/// Cauchy-integral reference, at every 8th x-node of the first time row.
/// The ratio should approach 16.
pub fn x_stencil_order(phi: &FieldFn, spec: &GridSpec, radius: f64) -> Result<OrderReport, MkdvError> {
    spec.check()?;
    let t = spec.t0;
    let (mut eh, mut eh2) = (0f64, 0f64);
    for i in (0..spec.nx()).step_by(8) {
        let x = spec.x(i);
        let pole = MkdvError::PoleOnGrid { x, t };
        let exact = cauchy_xxx(phi, x, t, radius, 128).ok_or(pole.clone())?;
        let a = stencil_xxx(phi, x, t, spec.hx).ok_or(pole.clone())?;
        let b = stencil_xxx(phi, x, t, spec.hx / 2.0).ok_or(pole)?;
        eh = eh.max((a - exact).norm());
        eh2 = eh2.max((b - exact).norm());
    }
    let ratio = eh / eh2;
    Ok(OrderReport {
        report: "order",
        hx: spec.hx,
        err_h: eh,
        err_half: eh2,
        ratio,
        status: if ratio >= 8.0 { Status::Pass } else { Status::Fail },
    })
}
