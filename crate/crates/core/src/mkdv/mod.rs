//! Binary elliptic solutions of the mKdV equation `u_t + 6 nu u^2 u_x + u_xxx = 0`
//! through the potential `u = 2 sqrt(nu) d/dx arctan(phi)`, with
//! `xi = a x + b t + a0`, `eta = c x + d t + c0`.
//!
//! Two closed forms are built in:
//! - `phi0 = (i a sqrt(k) sigma / c) sn(xi|k) sn(eta|m)`,
//!   with `c^4/a^4 = k/m`, `b = a((k+1)a^2 + 3c^2(m+1))`, `d/c = 3(k+1)a^2 + c^2(m+1)`;
//! - `phi1 = sigma (a/c) sqrt(k'k) sd(xi|k) sd(eta|m)`,
//!   with `c^4/a^4 = k'k/(m'm)`, `b/a = (1-2k)a^2 + 3c^2(1-2m)`, `d/c = (3-6k)a^2 + c^2(1-2m)`.
//!
//! Further forms come from applying an sn-rule of the catalog to both factors
//! of `phi0`.

mod grid;

pub use grid::{
    find_window, mkdv_residual, phi_equation_residual, reconstruct_u, x_stencil_order, Field2D, GridSpec, OrderReport,
    PhiOperator, ResidualConfig, ResidualReport,
};

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{is_finite, principal_sqrt, rel_err, Cx, C64, I, ONE};
use crate::elliptic_core::{eval_kind_unchecked, EllipticKind, Lattice, Parameter};
use crate::seed::SeedHasher;
use crate::transform_catalog::{BranchAssignment, BranchSymbol, RuleInstance, RuleSet, Status, TransformRule};

/// Field evaluator `(x, t) -> phi`. `x` may be complex; `None` marks a
/// point that cannot be evaluated. Must be pure and thread-safe.
pub type FieldFn = Arc<dyn Fn(C64, f64) -> Option<C64> + Send + Sync>;

/// Id of the rule `sn(sqrt(k') x | -k/k') = sqrt(k') sd(x|k)` that turns
/// `phi0` into `phi1`.
pub const SD_RULE_ID: &str = "S2.E21";

/// Default distance, in argument units, kept between residual grids and
/// the poles of the elliptic factors.
pub const POLE_MARGIN: f64 = 0.5;

/// Tolerance on the constraint relations.
pub const CONSTRAINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MkdvError {
    #[error("{form}: constraint {relation} violated (residual {residual:.3e})")]
    ConstraintViolation { form: String, relation: &'static str, residual: f64 },
    #[error("constraints cannot be solved: {0}")]
    ConstraintUnsolvable(String),
    #[error("rule not applicable: {0}")]
    RuleNotApplicable(String),
    #[error("pole on grid at x = {x}, t = {t}")]
    PoleOnGrid { x: f64, t: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("{0} must be +1 or -1")]
    InvalidSign(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Form {
    Phi0,
    Phi1,
    /// `phi0` with both factors rewritten by an sn-rule.
    Generated {
        rule: Arc<TransformRule>,
        branches: BranchAssignment,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MkdvSolution {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub a0: f64,
    pub c0: f64,
    pub k: C64,
    pub m: C64,
    pub sigma: i8,
    pub nu: i8,
    pub form: Form,
    /// Rule that produced this solution, if any.
    pub origin_rule: Option<String>,
}

fn check_sign(v: i8, name: &'static str) -> Result<(), MkdvError> {
    if v == 1 || v == -1 {
        Ok(())
    } else {
        Err(MkdvError::InvalidSign(name))
    }
}

fn real_part(z: C64, what: &str) -> Result<f64, MkdvError> {
    if z.im.abs() <= CONSTRAINT_TOL * z.norm().max(1.0) && z.re.is_finite() {
        Ok(z.re)
    } else {
        Err(MkdvError::ConstraintUnsolvable(format!("{what} = {z} is not real")))
    }
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// `phi0` data with possibly complex wave numbers; the image of any form
/// under its generating rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phi0Params {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
    pub a0: C64,
    pub c0: C64,
    pub k: C64,
    pub m: C64,
    pub sigma: f64,
}

impl Phi0Params {
    fn residuals(&self) -> Vec<(&'static str, f64)> {
        let Phi0Params { a, b, c, d, k, m, .. } = *self;
        vec![
            ("c^4/a^4 = k/m", rel(c.powi(4) / a.powi(4), k / m)),
            ("b = a((k+1)a^2 + 3c^2(m+1))", rel(b, a * ((k + 1.0) * a * a + 3.0 * c * c * (m + 1.0)))),
            ("d/c = 3(k+1)a^2 + c^2(m+1)", rel(d / c, 3.0 * (k + 1.0) * a * a + c * c * (m + 1.0))),
        ]
    }

    pub fn evaluator(&self) -> Option<FieldFn> {
        let pk = Parameter::new(self.k).ok()?;
        let pm = Parameter::new(self.m).ok()?;
        let p = *self;
        let coef = I * p.a * principal_sqrt(p.k) * p.sigma / p.c;
        Some(Arc::new(move |x, t| {
            let xi = p.a * x + p.b * t + p.a0;
            let eta = p.c * x + p.d * t + p.c0;
            let v =
                coef * eval_kind_unchecked(EllipticKind::Sn, xi, &pk) * eval_kind_unchecked(EllipticKind::Sn, eta, &pm);
            is_finite(v).then_some(v)
        }))
    }
}

/// A rule bound to one parameter, owning its rule.
#[derive(Debug, Clone)]
struct BoundRule {
    k: C64,
    branches: BranchAssignment,
    base: Parameter,
    new: Parameter,
    scale: C64,
    phase: C64,
}

impl BoundRule {
    fn new(rule: &TransformRule, k: C64, branches: &BranchAssignment) -> Result<Self, MkdvError> {
        let inst = RuleInstance::new(rule, k, branches)
            .map_err(|e| MkdvError::RuleNotApplicable(format!("{} at parameter {k}: {e}", rule.id)))?;
        Ok(BoundRule {
            k,
            branches: branches.clone(),
            base: inst.base,
            new: inst.new,
            scale: inst.scale,
            phase: inst.phase,
        })
    }

    fn rhs(&self, rule: &TransformRule, x: C64) -> Option<C64> {
        let inst = RuleInstance {
            rule,
            k: self.k,
            branches: self.branches.clone(),
            base: self.base,
            new: self.new,
            scale: self.scale,
            phase: self.phase,
        };
        inst.rhs(x).ok().filter(|v| is_finite(*v))
    }
}

impl MkdvSolution {
    /// `phi0` with `b`, `d` derived from `(a, c, k, m)`.
    pub fn phi0(k: f64, m: f64, a: f64, c: f64, sigma: i8, nu: i8) -> Result<Self, MkdvError> {
        let (kk, mm) = (k, m);
        let b = a * ((kk + 1.0) * a * a + 3.0 * c * c * (mm + 1.0));
        let d = c * (3.0 * (kk + 1.0) * a * a + c * c * (mm + 1.0));
        let s = Self::raw(Form::Phi0, a, b, c, d, k, m, sigma, nu);
        s.validate()?;
        Ok(s)
    }

    /// `phi1` with `b`, `d` derived from `(a, c, k, m)`.
    pub fn phi1(k: f64, m: f64, a: f64, c: f64, sigma: i8, nu: i8) -> Result<Self, MkdvError> {
        let b = a * ((1.0 - 2.0 * k) * a * a + 3.0 * c * c * (1.0 - 2.0 * m));
        let d = c * ((3.0 - 6.0 * k) * a * a + c * c * (1.0 - 2.0 * m));
        let s = Self::raw(Form::Phi1, a, b, c, d, k, m, sigma, nu);
        s.validate()?;
        Ok(s)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn raw(form: Form, a: f64, b: f64, c: f64, d: f64, k: f64, m: f64, sigma: i8, nu: i8) -> Self {
        MkdvSolution {
            a,
            b,
            c,
            d,
            a0: 0.0,
            c0: 0.0,
            k: C64::new(k, 0.0),
            m: C64::new(m, 0.0),
            sigma,
            nu,
            form,
            origin_rule: None,
        }
    }

    pub fn with_phases(mut self, a0: f64, c0: f64) -> Self {
        self.a0 = a0;
        self.c0 = c0;
        self
    }

    pub fn form_id(&self) -> String {
        match &self.form {
            Form::Phi0 => "phi0".into(),
            Form::Phi1 => "phi1".into(),
            Form::Generated { rule, branches } if branches.0.is_empty() => rule.id.clone(),
            Form::Generated { rule, branches } => format!("{} {branches}", rule.id),
        }
    }

    /// The `phi0` whose evaluation this solution equals under its rule's
    /// argument/parameter map (itself for `phi0`).
    pub fn as_phi0(&self) -> Result<Phi0Params, MkdvError> {
        let own = Phi0Params {
            a: self.a.into(),
            b: self.b.into(),
            c: self.c.into(),
            d: self.d.into(),
            a0: self.a0.into(),
            c0: self.c0.into(),
            k: self.k,
            m: self.m,
            sigma: f64::from(self.sigma),
        };
        match &self.form {
            Form::Phi0 => Ok(own),
            Form::Phi1 => {
                let rules = RuleSet::shipped();
                let rule = rules.get(SD_RULE_ID).expect("shipped catalog has the sd rule");
                // The sd substitution yields -sigma (a/c) sqrt(k'k) sd sd; phi1 absorbs the sign.
                map_phi0(&own, rule, &BranchAssignment::new(), -own.sigma)
            }
            Form::Generated { rule, branches } => map_phi0(&own, rule, branches, own.sigma),
        }
    }

    /// Residual of each constraint relation of this form.
    pub fn constraint_residuals(&self) -> Result<Vec<(&'static str, f64)>, MkdvError> {
        let (a, b, c, d) = (C64::from(self.a), C64::from(self.b), C64::from(self.c), C64::from(self.d));
        let (k, m) = (self.k, self.m);
        Ok(match &self.form {
            Form::Phi0 => self.as_phi0()?.residuals(),
            Form::Phi1 => {
                let (kp, mp) = (ONE - k, ONE - m);
                vec![
                    ("c^4/a^4 = k'k/(m'm)", rel(c.powi(4) / a.powi(4), kp * k / (mp * m))),
                    (
                        "b/a = (1-2k)a^2 + 3c^2(1-2m)",
                        rel(b / a, (1.0 - 2.0 * k) * a * a + 3.0 * c * c * (1.0 - 2.0 * m)),
                    ),
                    ("d/c = (3-6k)a^2 + c^2(1-2m)", rel(d / c, (3.0 - 6.0 * k) * a * a + c * c * (1.0 - 2.0 * m))),
                ]
            }
            Form::Generated { .. } => self.as_phi0()?.residuals(),
        })
    }

    pub fn validate(&self) -> Result<(), MkdvError> {
        check_sign(self.sigma, "sigma")?;
        check_sign(self.nu, "nu")?;
        if self.a == 0.0 || self.c == 0.0 {
            return Err(MkdvError::ConstraintViolation {
                form: self.form_id(),
                relation: "a, c nonzero",
                residual: f64::INFINITY,
            });
        }
        for (relation, residual) in self.constraint_residuals()? {
            if !(residual <= CONSTRAINT_TOL) {
                return Err(MkdvError::ConstraintViolation { form: self.form_id(), relation, residual });
            }
        }
        Ok(())
    }

    /// The field `phi(x, t)`; fails if the constraints do not hold.
    pub fn build(&self) -> Result<FieldFn, MkdvError> {
        self.validate()?;
        self.evaluator()
    }

    /// Like [`build`](Self::build), but the field is undefined wherever `xi`
    /// or `eta` lies within `margin` of a pole of one of the elliptic
    /// factors, so that residual windows stay clear of them.
    pub fn build_guarded(&self, margin: f64) -> Result<FieldFn, MkdvError> {
        let f = self.build()?;
        if margin <= 0.0 {
            return Ok(f);
        }
        // Every form equals phi0 at its mapped parameters, whose only
        // singularities are the sn poles of the mapped arguments.
        let p = self.as_phi0()?;
        let lattice = |z: C64| {
            Parameter::new(z).map(|p| Lattice::of(&p)).map_err(|e| MkdvError::ConstraintUnsolvable(e.to_string()))
        };
        let (lk, lm) = (lattice(p.k)?, lattice(p.m)?);
        let (sk, sm) = ((p.a / self.a).norm(), (p.c / self.c).norm());
        Ok(Arc::new(move |x, t| {
            let (xi, eta) = (p.a * x + p.b * t + p.a0, p.c * x + p.d * t + p.c0);
            let near = lk.pole_distance(EllipticKind::Sn, xi) < margin * sk
                || lm.pole_distance(EllipticKind::Sn, eta) < margin * sm;
            if near {
                None
            } else {
                f(x, t)
            }
        }))
    }

    fn evaluator(&self) -> Result<FieldFn, MkdvError> {
        let admissible =
            |z: C64| Parameter::new(z).map_err(|e| MkdvError::ConstraintUnsolvable(format!("parameter {z}: {e}")));
        let (pk, pm) = (admissible(self.k)?, admissible(self.m)?);
        let (a, b, c, d, a0, c0) = (self.a, self.b, self.c, self.d, self.a0, self.c0);
        let sigma = f64::from(self.sigma);
        let arg = move |x: C64, t: f64| (a * x + b * t + a0, c * x + d * t + c0);
        match &self.form {
            Form::Phi0 => {
                let coef = I * a * principal_sqrt(self.k) * sigma / c;
                Ok(Arc::new(move |x, t| {
                    let (xi, eta) = arg(x, t);
                    let v = coef
                        * eval_kind_unchecked(EllipticKind::Sn, xi, &pk)
                        * eval_kind_unchecked(EllipticKind::Sn, eta, &pm);
                    is_finite(v).then_some(v)
                }))
            }
            Form::Phi1 => {
                let coef = sigma * (a / c) * principal_sqrt((ONE - self.k) * self.k);
                Ok(Arc::new(move |x, t| {
                    let (xi, eta) = arg(x, t);
                    let v = coef
                        * eval_kind_unchecked(EllipticKind::Sd, xi, &pk)
                        * eval_kind_unchecked(EllipticKind::Sd, eta, &pm);
                    is_finite(v).then_some(v)
                }))
            }
            Form::Generated { rule, branches } => {
                let rk = BoundRule::new(rule, self.k, branches)?;
                let rm = BoundRule::new(rule, self.m, branches)?;
                let mapped = self.as_phi0()?;
                let coef = I * mapped.a * principal_sqrt(mapped.k) * mapped.sigma / mapped.c;
                let rule = Arc::clone(rule);
                Ok(Arc::new(move |x, t| {
                    let (xi, eta) = arg(x, t);
                    let v = coef * rk.rhs(&rule, xi)? * rm.rhs(&rule, eta)?;
                    is_finite(v).then_some(v)
                }))
            }
        }
    }
}

/// Image of `own` under `rule`: `a -> scale(k) a`, `a0 -> scale(k) a0 + phase(k)`,
/// `k -> new(k)`, likewise for `(c, d, c0, m)`.
fn map_phi0(
    own: &Phi0Params,
    rule: &TransformRule,
    branches: &BranchAssignment,
    sigma: f64,
) -> Result<Phi0Params, MkdvError> {
    let rk = BoundRule::new(rule, own.k, branches)?;
    let rm = BoundRule::new(rule, own.m, branches)?;
    Ok(Phi0Params {
        a: rk.scale * own.a,
        b: rk.scale * own.b,
        a0: rk.scale * own.a0 + rk.phase,
        c: rm.scale * own.c,
        d: rm.scale * own.d,
        c0: rm.scale * own.c0 + rm.phase,
        k: rk.new.lambda(),
        m: rm.new.lambda(),
        sigma,
    })
}

fn is_identity(rule: &TransformRule, bound: &BoundRule, k: C64) -> bool {
    if (bound.scale - ONE).norm() > 1e-14 || bound.phase.norm() > 1e-14 || (bound.new.lambda() - k).norm() > 1e-14 {
        return false;
    }
    [C64::new(0.3, 0.1), C64::new(-0.7, 0.05), C64::new(1.1, -0.2)].iter().all(|&x| {
        let sn = eval_kind_unchecked(EllipticKind::Sn, x, &bound.base);
        bound.rhs(rule, x).is_some_and(|v| rel_err(v, sn) < 1e-14)
    })
}

/// Applies an sn-rule to both factors of a `phi0` solution: the `phi0`
/// family is re-parametrised through the rule's argument and parameter
/// map, keeping `(a, k, m, a0, c0)` and re-solving `c`, `b`, `d` so that
/// the mapped data satisfy the `phi0` constraints. The sd rule yields the
/// `phi1` form (with the sign of `sigma` flipped to absorb the `-1` of the
/// substitution).
pub fn transform_solution(
    sol: &MkdvSolution,
    rule: &TransformRule,
    branches: &BranchAssignment,
) -> Result<MkdvSolution, MkdvError> {
    if sol.form != Form::Phi0 {
        return Err(MkdvError::RuleNotApplicable(format!("source form {} is not phi0", sol.form_id())));
    }
    if rule.base_kind != EllipticKind::Sn {
        return Err(MkdvError::RuleNotApplicable(format!("{} rewrites {}, not sn", rule.id, rule.base_kind)));
    }
    sol.validate()?;
    let rk = BoundRule::new(rule, sol.k, branches)?;
    let rm = BoundRule::new(rule, sol.m, branches)?;
    if is_identity(rule, &rk, sol.k) && is_identity(rule, &rm, sol.m) {
        return Ok(sol.clone());
    }
    let (kt, mt) = (rk.new.lambda(), rm.new.lambda());
    let at = rk.scale * sol.a;
    // c^4 from the mapped relation c~^4 / a~^4 = k~ / m~.
    let c4 = at.powi(4) * kt / (mt * rm.scale.powi(4));
    let root = c4.sqrt().sqrt();
    let c = (0..4)
        .map(|j| root * I.powi(j))
        .filter(|z| z.im.abs() <= 1e-9 * z.norm())
        .map(|z| z.re)
        .min_by(|x, y| (x - sol.c).abs().total_cmp(&(y - sol.c).abs()))
        .ok_or_else(|| MkdvError::ConstraintUnsolvable(format!("c^4 = {c4} has no real root")))?;
    let ct = rm.scale * c;
    let b = real_part(at * ((kt + 1.0) * at * at + 3.0 * ct * ct * (mt + 1.0)) / rk.scale, "b")?;
    let d = real_part(ct * (3.0 * (kt + 1.0) * at * at + ct * ct * (mt + 1.0)) / rm.scale, "d")?;
    let (form, sigma) = if rule.id == SD_RULE_ID && branches.0.is_empty() {
        (Form::Phi1, -sol.sigma)
    } else {
        (Form::Generated { rule: Arc::new(rule.clone()), branches: branches.clone() }, sol.sigma)
    };
    let out = MkdvSolution { b, c, d, sigma, form, origin_rule: Some(rule.id.clone()), ..sol.clone() };
    out.validate().map_err(|e| MkdvError::ConstraintUnsolvable(format!("transformed constraints fail: {e}")))?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessReport {
    pub report: &'static str,
    pub form_a: String,
    pub form_b: String,
    pub rule_id: Option<String>,
    pub sample_count: usize,
    pub max_err: f64,
    pub tolerance: f64,
    pub equivalent: bool,
    pub status: Status,
    pub reason: Option<String>,
}

pub const WITNESS_TOL: f64 = 1e-7;

/// Samples `(x, t)` in `window` and compares `b` with its reference: when
/// `b` was generated from a `phi0` family by a rule and `a` is `phi0`, the
/// reference is the `phi0` formula at `b`'s mapped parameters (the
/// substitution that produced `b`); otherwise it is `a` itself.
pub fn equivalence_witness(
    a: &MkdvSolution,
    b: &MkdvSolution,
    window: &GridSpec,
    n_samples: usize,
    seed: u64,
) -> WitnessReport {
    let mut rep = WitnessReport {
        report: "witness",
        form_a: a.form_id(),
        form_b: b.form_id(),
        rule_id: b.origin_rule.clone(),
        sample_count: 0,
        max_err: f64::INFINITY,
        tolerance: WITNESS_TOL,
        equivalent: false,
        status: Status::Fail,
        reason: None,
    };
    let mapped = a.form == Form::Phi0 && b.form != Form::Phi0 && b.origin_rule.is_some();
    let reference = if mapped { b.as_phi0().ok().and_then(|p| p.evaluator()) } else { a.build().ok() };
    let (Some(fa), Ok(fb)) = (reference, b.build()) else {
        rep.reason = Some("a solution cannot be built".into());
        return rep;
    };
    let mut rng =
        ChaCha8Rng::seed_from_u64(SeedHasher::new(seed).str("witness").str(&rep.form_a).str(&rep.form_b).finish());
    let mut worst = 0f64;
    for _ in 0..n_samples {
        let x = rng.gen_range(window.x0..=window.x1);
        let t = rng.gen_range(window.t0..=window.t1);
        let (Some(va), Some(vb)) = (fa(x.into(), t), fb(x.into(), t)) else { continue };
        rep.sample_count += 1;
        worst = worst.max(rel_err(va, vb));
    }
    if rep.sample_count * 10 < n_samples * 9 {
        rep.reason = Some(format!("only {} of {n_samples} samples evaluable", rep.sample_count));
    }
    rep.max_err = worst;
    rep.equivalent = rep.reason.is_none() && worst < WITNESS_TOL;
    rep.status = if rep.equivalent { Status::Pass } else { Status::Fail };
    if !rep.equivalent && rep.reason.is_none() {
        rep.reason = Some("sampled values differ".into());
    }
    rep
}

/// Serialized solution spec, `[[solution]]` tables in TOML.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionSpec {
    pub form: String,
    pub k: f64,
    pub m: f64,
    pub a: f64,
    pub c: f64,
    pub b: Option<f64>,
    pub d: Option<f64>,
    #[serde(default)]
    pub a0: f64,
    #[serde(default)]
    pub c0: f64,
    #[serde(default = "one")]
    pub sigma: i8,
    #[serde(default = "one")]
    pub nu: i8,
    /// Rule applied to the `phi0` built from the other fields.
    pub rule: Option<String>,
    #[serde(default)]
    pub branches: std::collections::BTreeMap<String, i8>,
}

fn one() -> i8 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolutionFile {
    #[serde(default)]
    solution: Vec<SolutionSpec>,
}

pub fn parse_solution_specs(text: &str) -> Result<Vec<SolutionSpec>, String> {
    toml::from_str::<SolutionFile>(text).map(|f| f.solution).map_err(|e| e.to_string())
}

impl SolutionSpec {
    pub fn build(&self, rules: &RuleSet) -> Result<MkdvSolution, MkdvError> {
        let base = match self.form.as_str() {
            "phi0" => MkdvSolution::raw(Form::Phi0, self.a, 0.0, self.c, 0.0, self.k, self.m, self.sigma, self.nu),
            "phi1" => MkdvSolution::raw(Form::Phi1, self.a, 0.0, self.c, 0.0, self.k, self.m, self.sigma, self.nu),
            other => return Err(MkdvError::RuleNotApplicable(format!("unknown form {other}"))),
        }
        .with_phases(self.a0, self.c0);
        let derived = match base.form {
            Form::Phi0 => MkdvSolution::phi0(self.k, self.m, self.a, self.c, self.sigma, self.nu),
            _ => MkdvSolution::phi1(self.k, self.m, self.a, self.c, self.sigma, self.nu),
        };
        let mut sol = match (self.b, self.d) {
            (Some(b), Some(d)) => MkdvSolution { b, d, ..base },
            _ => MkdvSolution { a0: self.a0, c0: self.c0, ..derived? },
        };
        sol.validate()?;
        if let Some(id) = &self.rule {
            let rule = rules.get(id).ok_or_else(|| MkdvError::RuleNotApplicable(format!("unknown rule {id}")))?;
            let mut br = BranchAssignment::new();
            for (name, v) in &self.branches {
                let s = BranchSymbol::parse(name)
                    .ok_or_else(|| MkdvError::RuleNotApplicable(format!("unknown branch symbol {name}")))?;
                br = br.with(s, *v);
            }
            sol = transform_solution(&sol, rule, &br)?;
        }
        Ok(sol)
    }
}

impl From<&MkdvSolution> for SolutionSummary {
    fn from(s: &MkdvSolution) -> Self {
        SolutionSummary {
            form: s.form_id(),
            rule_id: s.origin_rule.clone(),
            a: s.a,
            b: s.b,
            c: s.c,
            d: s.d,
            a0: s.a0,
            c0: s.c0,
            k: s.k.into(),
            m: s.m.into(),
            sigma: s.sigma,
            nu: s.nu,
        }
    }
}

/// Serializable description of a solution, for reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionSummary {
    pub form: String,
    pub rule_id: Option<String>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub a0: f64,
    pub c0: f64,
    pub k: Cx,
    pub m: Cx,
    pub sigma: i8,
    pub nu: i8,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi0_derives_dispersion() {
        let s = MkdvSolution::phi0(0.5, 0.5, 1.0, 1.0, 1, 1).unwrap();
        assert_eq!((s.b, s.d), (6.0, 6.0));
        let f = s.build().unwrap();
        assert_eq!(f(C64::new(0.0, 0.0), 0.0).unwrap().norm(), 0.0);
    }

    #[test]
    fn phi0_rejects_mismatched_ratio() {
        let e = MkdvSolution::phi0(0.5, 0.3, 1.0, 1.0, 1, 1).unwrap_err();
        assert!(matches!(e, MkdvError::ConstraintViolation { relation: "c^4/a^4 = k/m", .. }), "{e}");
    }

    #[test]
    fn phi1_examples() {
        let s = MkdvSolution::phi1(0.5, 0.5, 1.0, 1.0, 1, 1).unwrap();
        assert_eq!((s.b, s.d), (0.0, 0.0));
        assert!(MkdvSolution::phi1(0.2, 0.2, 1.0, 1.0, 1, 1).is_ok());
        assert!(matches!(MkdvSolution::phi1(0.2, 0.5, 1.0, 1.0, 1, 1), Err(MkdvError::ConstraintViolation { .. })));
    }

    #[test]
    fn signs_are_checked() {
        assert!(matches!(MkdvSolution::phi0(0.5, 0.5, 1.0, 1.0, 2, 1), Err(MkdvError::InvalidSign("sigma"))));
        assert!(matches!(MkdvSolution::phi0(0.5, 0.5, 1.0, 1.0, 1, 0), Err(MkdvError::InvalidSign("nu"))));
    }

    #[test]
    fn perturbed_b_is_a_violation() {
        let mut s = MkdvSolution::phi0(0.5, 0.5, 1.0, 1.0, 1, 1).unwrap();
        s.b += 0.1;
        assert!(s.build().is_err());
    }

    #[test]
    fn sd_rule_gives_phi1_constraints() {
        let rules = RuleSet::shipped();
        let src = MkdvSolution::phi0(0.3, 0.3, 1.0, 1.0, 1, -1).unwrap();
        let out = transform_solution(&src, rules.get(SD_RULE_ID).unwrap(), &BranchAssignment::new()).unwrap();
        assert_eq!(out.form, Form::Phi1);
        assert_eq!(out.sigma, -1);
        let direct = MkdvSolution::phi1(0.3, 0.3, 1.0, out.c, -1, -1).unwrap();
        assert!((direct.b - out.b).abs() < 1e-12 && (direct.d - out.d).abs() < 1e-12);
    }

    #[test]
    fn identity_rule_leaves_solution_unchanged() {
        let rules = RuleSet::shipped();
        let src = MkdvSolution::phi0(0.5, 0.5, 1.0, 1.0, 1, 1).unwrap();
        let br = BranchAssignment::new().with(BranchSymbol::P, 0).with(BranchSymbol::Q, 0);
        let out = transform_solution(&src, rules.get("A.E68").unwrap(), &br).unwrap();
        assert_eq!(out, src);
    }

    #[test]
    fn non_sn_rules_and_non_phi0_sources_are_rejected() {
        let rules = RuleSet::shipped();
        let src = MkdvSolution::phi0(0.5, 0.5, 1.0, 1.0, 1, 1).unwrap();
        let e = transform_solution(&src, rules.get("S2.E4").unwrap(), &BranchAssignment::new()).unwrap_err();
        assert!(matches!(e, MkdvError::RuleNotApplicable(_)));
        let p1 = MkdvSolution::phi1(0.5, 0.5, 1.0, 1.0, 1, 1).unwrap();
        let e = transform_solution(&p1, rules.get(SD_RULE_ID).unwrap(), &BranchAssignment::new()).unwrap_err();
        assert!(matches!(e, MkdvError::RuleNotApplicable(_)));
    }

    #[test]
    fn solution_specs_parse() {
        let text = r#"
[[solution]]
form = "phi0"
k = 0.5
m = 0.5
a = 1.0
c = 1.0
nu = -1

[[solution]]
form = "phi0"
k = 0.5
m = 0.5
a = 1.0
c = 1.0
rule = "S2.E21"
"#;
        let specs = parse_solution_specs(text).unwrap();
        let rules = RuleSet::shipped();
        let s0 = specs[0].build(&rules).unwrap();
        assert_eq!((s0.b, s0.nu), (6.0, -1));
        let s1 = specs[1].build(&rules).unwrap();
        assert_eq!(s1.form, Form::Phi1);
        assert!(parse_solution_specs("[[solution]]\nform = 1").is_err());
    }
}
