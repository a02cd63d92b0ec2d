//! Data-driven catalog of argument, phase and parameter transformations.

mod load;
mod verify;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use load::{load_catalog, Diagnostic, SHIPPED_CATALOG};
pub use verify::{natural_key, verify_all, verify_rule, Status, VerificationReport, VerifyConfig, DEFAULT_K_GRID};

use crate::complex::{is_finite, C64};
use crate::elliptic_core::{eval_kind, EllipticError, EllipticKind, Lattice, Parameter};
use crate::expr::{Continuation, Env, Expr, ExprError, Sym};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchSymbol {
    Eps,
    P,
    Q,
    Sigma,
}

impl BranchSymbol {
    pub fn name(self) -> &'static str {
        match self {
            BranchSymbol::Eps => "eps",
            BranchSymbol::P => "p",
            BranchSymbol::Q => "q",
            BranchSymbol::Sigma => "sigma",
        }
    }

    pub fn parse(s: &str) -> Option<BranchSymbol> {
        Some(match s {
            "eps" => BranchSymbol::Eps,
            "p" => BranchSymbol::P,
            "q" => BranchSymbol::Q,
            "sigma" => BranchSymbol::Sigma,
            _ => return None,
        })
    }

    pub fn values(self) -> [i8; 2] {
        match self {
            BranchSymbol::Eps | BranchSymbol::Sigma => [1, -1],
            BranchSymbol::P | BranchSymbol::Q => [0, 1],
        }
    }

    fn sym(self) -> Sym {
        match self {
            BranchSymbol::Eps => Sym::Eps,
            BranchSymbol::P => Sym::P,
            BranchSymbol::Q => Sym::Q,
            BranchSymbol::Sigma => Sym::Sigma,
        }
    }
}

/// Values of the branch symbols of one rule instance.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BranchAssignment(pub BTreeMap<BranchSymbol, i8>);

impl BranchAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, s: BranchSymbol, v: i8) -> Self {
        self.0.insert(s, v);
        self
    }

    pub fn get(&self, s: BranchSymbol) -> Option<i8> {
        self.0.get(&s).copied()
    }

    /// Every assignment of the given symbols.
    pub fn all(symbols: &[BranchSymbol]) -> Vec<BranchAssignment> {
        let mut out = vec![BranchAssignment::new()];
        for s in symbols {
            out = out.into_iter().flat_map(|a| s.values().map(move |v| a.clone().with(*s, v))).collect();
        }
        out
    }
}

impl fmt::Display for BranchAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<_> = self.0.iter().map(|(s, v)| format!("{}={v}", s.name())).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Both sides agree pointwise.
    #[default]
    Exact,
    /// Radicals are continued along a path; the sides agree up to a sign
    /// that is constant along the path.
    PathConstant,
}

/// A published form that differs from the verified rule.
#[derive(Debug, Clone, PartialEq)]
pub struct PrintedForm {
    pub arg_scale: Option<Expr>,
    pub phase_offset: Option<Expr>,
    pub new_param: Option<Expr>,
    pub rhs: Option<Expr>,
    pub note: String,
}

/// `base_kind(arg_scale * x + phase_offset | new_param) = rhs(x | k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformRule {
    pub id: String,
    pub base_kind: EllipticKind,
    pub arg_scale: Expr,
    pub phase_offset: Expr,
    pub new_param: Expr,
    pub rhs: Expr,
    /// Named sub-expressions, each may refer to the ones before it.
    pub defs: Vec<(String, Expr)>,
    pub branch_params: Vec<BranchSymbol>,
    pub policy: Policy,
    pub printed: Option<PrintedForm>,
    /// Line of the rule in its source file (1-based, 0 if unknown).
    pub line: usize,
}

impl TransformRule {
    /// The published form with the differing fields substituted.
    pub fn printed_variant(&self) -> Option<TransformRule> {
        let p = self.printed.as_ref()?;
        let mut r = self.clone();
        r.id = format!("{}.printed", self.id);
        if let Some(e) = &p.arg_scale {
            r.arg_scale = e.clone();
        }
        if let Some(e) = &p.phase_offset {
            r.phase_offset = e.clone();
        }
        if let Some(e) = &p.new_param {
            r.new_param = e.clone();
        }
        if let Some(e) = &p.rhs {
            r.rhs = e.clone();
        }
        r.printed = None;
        Some(r)
    }

    /// The rule with its right side multiplied by `1 + rel`.
    pub fn perturbed(&self, rel: f64) -> TransformRule {
        let mut r = self.clone();
        r.rhs = self.rhs.scaled(rel);
        r
    }

    /// The rule with its argument scale multiplied by `1 + rel`.
    pub fn perturbed_scale(&self, rel: f64) -> TransformRule {
        let mut r = self.clone();
        r.arg_scale = self.arg_scale.scaled(rel);
        r
    }

    /// Elliptic kinds evaluated at `k` on the right side (including definitions).
    pub fn rhs_kinds(&self) -> Vec<EllipticKind> {
        let mut v = self.rhs.kinds();
        for (_, d) in &self.defs {
            v.extend(d.kinds());
        }
        v.sort();
        v.dedup();
        v
    }

    pub fn describe(&self) -> String {
        let phase = self.phase_offset.source();
        let arg = if phase == "0" {
            format!("({})*x", self.arg_scale)
        } else {
            format!("({})*x + {}", self.arg_scale, phase)
        };
        let mut s = format!("{}({} | {}) = {}", self.base_kind, arg, self.new_param, self.rhs);
        if !self.defs.is_empty() {
            let defs: Vec<_> = self.defs.iter().map(|(n, e)| format!("{n} = {e}")).collect();
            s.push_str(&format!(" where {}", defs.join(", ")));
        }
        s
    }

    fn check_branches(&self, b: &BranchAssignment) -> Result<(), CatalogError> {
        for s in &self.branch_params {
            if b.get(*s).is_none() {
                return Err(CatalogError::MissingBranch { rule: self.id.clone(), symbol: s.name() });
            }
        }
        Ok(())
    }

    fn uses(&self, s: Sym) -> bool {
        [&self.arg_scale, &self.phase_offset, &self.new_param, &self.rhs]
            .into_iter()
            .chain(self.defs.iter().map(|(_, e)| e))
            .any(|e| e.uses_symbol(s))
    }

    pub(crate) fn free_branch_symbols(&self) -> Vec<BranchSymbol> {
        [BranchSymbol::Eps, BranchSymbol::P, BranchSymbol::Q, BranchSymbol::Sigma]
            .into_iter()
            .filter(|s| self.uses(s.sym()))
            .collect()
    }
}

/// An ordered, id-unique collection of rules.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    pub rules: Vec<TransformRule>,
    pub source: String,
}

impl RuleSet {
    /// The catalog compiled into the library.
    pub fn shipped() -> RuleSet {
        load::parse_catalog(SHIPPED_CATALOG, "<shipped>").expect("shipped catalog is valid")
    }

    pub fn parse(text: &str, source: &str) -> Result<RuleSet, CatalogError> {
        load::parse_catalog(text, source)
    }

    pub fn get(&self, id: &str) -> Option<&TransformRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// A copy with rule `id` replaced.
    pub fn replacing(&self, rule: TransformRule) -> RuleSet {
        let mut s = self.clone();
        for r in &mut s.rules {
            if r.id == rule.id {
                *r = rule.clone();
            }
        }
        s
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("cannot read catalog {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("catalog {source_name} is invalid:\n{}", diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    CatalogParse { source_name: String, diagnostics: Vec<Diagnostic> },
    #[error("duplicate rule id `{id}` (lines {lines:?})")]
    DuplicateId { id: String, lines: Vec<usize> },
    #[error("rule `{rule}` needs a value for branch symbol `{symbol}`")]
    MissingBranch { rule: String, symbol: &'static str },
    #[error("no admissible samples for rule `{rule}`: {reason}")]
    NoAdmissibleSamples { rule: String, reason: String },
    #[error("inadmissible instance: {0}")]
    Inadmissible(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

impl From<EllipticError> for CatalogError {
    fn from(e: EllipticError) -> Self {
        CatalogError::Expr(ExprError::Elliptic(e))
    }
}

/// A rule bound to a parameter value and branch assignment, with the
/// constant parts evaluated.
#[derive(Debug, Clone)]
pub struct RuleInstance<'r> {
    pub rule: &'r TransformRule,
    pub k: C64,
    pub branches: BranchAssignment,
    pub base: Parameter,
    pub new: Parameter,
    pub scale: C64,
    pub phase: C64,
}

impl<'r> RuleInstance<'r> {
    /// Fails with `Inadmissible` when the new parameter or the constant
    /// parts cannot be formed.
    pub fn new(rule: &'r TransformRule, k: C64, branches: &BranchAssignment) -> Result<Self, CatalogError> {
        rule.check_branches(branches)?;
        let base = Parameter::new(k).map_err(|e| CatalogError::Inadmissible(format!("parameter k: {e}")))?;
        let mut env = env_for(k, branches, &base, None);
        let defs = eval_defs(rule, &env, None)?;
        let m = rule.new_param.eval(&env, &defs)?;
        if !is_finite(m) {
            return Err(CatalogError::Inadmissible(format!("new parameter is not finite ({m})")));
        }
        let new = Parameter::new(m).map_err(|e| CatalogError::Inadmissible(format!("new parameter {m}: {e}")))?;
        env.new = Some(&new);
        let defs = eval_defs(rule, &env, None)?;
        let scale = rule.arg_scale.eval(&env, &defs)?;
        let phase = rule.phase_offset.eval(&env, &defs)?;
        if !is_finite(scale) || !is_finite(phase) || scale == C64::new(0.0, 0.0) {
            return Err(CatalogError::Inadmissible(format!("argument map {scale}*x + {phase} is degenerate")));
        }
        Ok(RuleInstance { rule, k, branches: branches.clone(), base, new, scale, phase })
    }

    pub fn lhs_arg(&self, x: C64) -> C64 {
        self.scale * x + self.phase
    }

    pub fn lhs(&self, x: C64) -> Result<C64, CatalogError> {
        Ok(eval_kind(self.rule.base_kind, self.lhs_arg(x), &self.new)?)
    }

    pub fn rhs(&self, x: C64) -> Result<C64, CatalogError> {
        self.rhs_tracked(x, None)
    }

    /// Right side with radicals continued from the tracker's last values.
    pub fn rhs_tracked(&self, x: C64, mut track: Option<&mut Continuation>) -> Result<C64, CatalogError> {
        let mut env = env_for(self.k, &self.branches, &self.base, Some(&self.new));
        env.x = x;
        let defs = eval_defs(self.rule, &env, track.as_deref_mut())?;
        Ok(match track {
            Some(t) => self.rule.rhs.eval_continued(&env, &defs, t, 0)?,
            None => self.rule.rhs.eval(&env, &defs)?,
        })
    }

    /// Smallest distance from `x` to a pole of any function on either side,
    /// in units of the respective exclusion radius.
    pub fn pole_margin(&self, x: C64) -> f64 {
        let lb = Lattice::of(&self.base);
        let mut m = Lattice::of(&self.new).pole_distance(self.rule.base_kind, self.lhs_arg(x)) / self.new.pole_radius();
        for kind in self.rule.rhs_kinds() {
            m = m.min(lb.pole_distance(kind, x) / self.base.pole_radius());
        }
        m
    }

    /// As `pole_margin` for the segment `[a, b]`.
    pub fn segment_pole_margin(&self, a: C64, b: C64) -> f64 {
        let lb = Lattice::of(&self.base);
        let mut m = Lattice::of(&self.new).segment_pole_distance(self.rule.base_kind, self.lhs_arg(a), self.lhs_arg(b))
            / self.new.pole_radius();
        for kind in self.rule.rhs_kinds() {
            m = m.min(lb.segment_pole_distance(kind, a, b) / self.base.pole_radius());
        }
        m
    }
}

fn env_for<'a>(k: C64, b: &BranchAssignment, base: &'a Parameter, new: Option<&'a Parameter>) -> Env<'a> {
    let get = |s, d: f64| b.get(s).map(f64::from).unwrap_or(d);
    Env {
        k,
        eps: get(BranchSymbol::Eps, 1.0),
        p: get(BranchSymbol::P, 0.0),
        q: get(BranchSymbol::Q, 0.0),
        sigma: get(BranchSymbol::Sigma, 1.0),
        x: C64::new(0.0, 0.0),
        base: Some(base),
        new,
    }
}

fn eval_defs(rule: &TransformRule, env: &Env, mut track: Option<&mut Continuation>) -> Result<Vec<C64>, ExprError> {
    let mut vals = Vec::with_capacity(rule.defs.len());
    for (i, (_, e)) in rule.defs.iter().enumerate() {
        let v = match track.as_deref_mut() {
            Some(t) => e.eval_continued(env, &vals, t, i as u32 + 1)?,
            None => e.eval(env, &vals)?,
        };
        vals.push(v);
    }
    Ok(vals)
}

/// `base_kind(arg_scale * x + phase_offset | new_param)`.
pub fn eval_lhs(rule: &TransformRule, x: C64, k: C64, branches: &BranchAssignment) -> Result<C64, CatalogError> {
    RuleInstance::new(rule, k, branches)?.lhs(x)
}

/// The right side at `(x | k)` with principal radicals.
pub fn eval_rhs(rule: &TransformRule, x: C64, k: C64, branches: &BranchAssignment) -> Result<C64, CatalogError> {
    RuleInstance::new(rule, k, branches)?.rhs(x)
}

/// Rules whose left side is `kind`, with a readable form of each.
pub fn find_equivalents(kind: EllipticKind, ruleset: &RuleSet) -> Vec<(String, String)> {
    ruleset.rules.iter().filter(|r| r.base_kind == kind).map(|r| (r.id.clone(), r.describe())).collect()
}
