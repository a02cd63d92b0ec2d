use std::collections::HashMap;
use std::fmt;

use serde::Deserialize;
use toml::Spanned;

use super::{BranchSymbol, CatalogError, Policy, PrintedForm, RuleSet, TransformRule};
use crate::elliptic_core::EllipticKind;
use crate::expr::{Expr, Sym};

pub const SHIPPED_CATALOG: &str = include_str!("../../catalog/rules.toml");

/// One schema violation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub rule: Option<String>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "  line {}", self.line)?;
        if let Some(r) = &self.rule {
            write!(f, " rule `{r}`")?;
        }
        write!(f, " field `{}`: {}", self.field, self.message)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCatalog {
    #[serde(default)]
    rule: Vec<RawRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    id: Spanned<String>,
    base: Spanned<String>,
    scale: Spanned<String>,
    phase: Option<Spanned<String>>,
    param: Spanned<String>,
    rhs: Spanned<String>,
    #[serde(default)]
    branches: Vec<Spanned<String>>,
    policy: Option<Spanned<Policy>>,
    #[serde(default)]
    defs: Vec<RawDef>,
    printed: Option<RawPrinted>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDef {
    name: Spanned<String>,
    expr: Spanned<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrinted {
    scale: Option<Spanned<String>>,
    phase: Option<Spanned<String>>,
    param: Option<Spanned<String>>,
    rhs: Option<Spanned<String>>,
    note: String,
}

struct Lines(Vec<usize>);

impl Lines {
    fn new(text: &str) -> Lines {
        Lines(text.match_indices('\n').map(|(i, _)| i).collect())
    }

    fn of(&self, offset: usize) -> usize {
        self.0.partition_point(|&nl| nl < offset) + 1
    }
}

/// Where an expression may appear; restricts the symbols it may use.
#[derive(Clone, Copy, PartialEq)]
enum Slot {
    Param,
    Constant,
    Rhs,
}

struct Checker<'a> {
    lines: &'a Lines,
    rule: Option<String>,
    diags: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn push(&mut self, span: std::ops::Range<usize>, field: &str, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            line: self.lines.of(span.start),
            rule: self.rule.clone(),
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn expr(&mut self, s: &Spanned<String>, field: &str, defs: &[String], slot: Slot) -> Option<Expr> {
        match Expr::parse_with_defs(s.get_ref(), defs) {
            Ok(e) => {
                if slot != Slot::Rhs && (e.uses_symbol(Sym::X) || !e.kinds().is_empty()) {
                    self.push(s.span(), field, "must not depend on x");
                }
                if slot == Slot::Param && (e.uses_symbol(Sym::BigKN) || e.uses_symbol(Sym::BigKNp)) {
                    self.push(s.span(), field, "the new parameter cannot refer to its own periods");
                }
                Some(e)
            }
            Err(err) => {
                self.push(s.span(), field, format!("`{}`: {err}", s.get_ref()));
                None
            }
        }
    }
}

pub(super) fn parse_catalog(text: &str, source: &str) -> Result<RuleSet, CatalogError> {
    let lines = Lines::new(text);
    let parse_err = |line, message: String| CatalogError::CatalogParse {
        source_name: source.to_string(),
        diagnostics: vec![Diagnostic { line, rule: None, field: "-".into(), message }],
    };
    let raw: RawCatalog = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| lines.of(s.start)).unwrap_or(0);
        parse_err(line, e.message().to_string())
    })?;
    if raw.rule.is_empty() {
        return Err(parse_err(1, "catalog contains no [[rule]] entries".into()));
    }
    let mut ck = Checker { lines: &lines, rule: None, diags: Vec::new() };
    let mut rules = Vec::new();
    for r in &raw.rule {
        ck.rule = Some(r.id.get_ref().clone());
        let line = lines.of(r.id.span().start);
        if r.id.get_ref().trim().is_empty() {
            ck.push(r.id.span(), "id", "must not be empty");
        }
        let base = match r.base.get_ref().parse::<EllipticKind>() {
            Ok(k) if k.is_base() => Some(k),
            Ok(k) => {
                ck.push(r.base.span(), "base", format!("`{k}` is not one of sn, cn, dn"));
                None
            }
            Err(e) => {
                ck.push(r.base.span(), "base", e.to_string());
                None
            }
        };
        let mut names: Vec<String> = Vec::new();
        let mut defs = Vec::new();
        for d in &r.defs {
            let name = d.name.get_ref();
            let valid = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
                && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !valid {
                ck.push(d.name.span(), "defs.name", format!("`{name}` is not an identifier"));
            } else if names.contains(name) || Expr::parse(name).is_ok() || name.parse::<EllipticKind>().is_ok() {
                ck.push(d.name.span(), "defs.name", format!("`{name}` shadows an existing name"));
            }
            if let Some(e) = ck.expr(&d.expr, "defs.expr", &names, Slot::Rhs) {
                defs.push((name.clone(), e));
            }
            names.push(name.clone());
        }
        let scale = ck.expr(&r.scale, "scale", &names, Slot::Constant);
        let phase = match &r.phase {
            Some(p) => ck.expr(p, "phase", &names, Slot::Constant),
            None => Expr::parse("0").ok(),
        };
        let param = ck.expr(&r.param, "param", &names, Slot::Param);
        let rhs = ck.expr(&r.rhs, "rhs", &names, Slot::Rhs);
        let mut branch_params = Vec::new();
        for b in &r.branches {
            match BranchSymbol::parse(b.get_ref()) {
                Some(s) if !branch_params.contains(&s) => branch_params.push(s),
                Some(_) => ck.push(b.span(), "branches", format!("`{}` listed twice", b.get_ref())),
                None => ck.push(b.span(), "branches", format!("unknown branch symbol `{}`", b.get_ref())),
            }
        }
        let printed = r.printed.as_ref().map(|p| {
            let mut opt = |s: &Option<Spanned<String>>, field: &str, slot| {
                s.as_ref().and_then(|s| ck.expr(s, field, &names, slot))
            };
            PrintedForm {
                arg_scale: opt(&p.scale, "printed.scale", Slot::Constant),
                phase_offset: opt(&p.phase, "printed.phase", Slot::Constant),
                new_param: opt(&p.param, "printed.param", Slot::Param),
                rhs: opt(&p.rhs, "printed.rhs", Slot::Rhs),
                note: p.note.clone(),
            }
        });
        if defs.len() != r.defs.len() {
            continue;
        }
        let (Some(base_kind), Some(arg_scale), Some(phase_offset), Some(new_param), Some(rhs)) =
            (base, scale, phase, param, rhs)
        else {
            continue;
        };
        let rule = TransformRule {
            id: r.id.get_ref().clone(),
            base_kind,
            arg_scale,
            phase_offset,
            new_param,
            rhs,
            defs,
            branch_params,
            policy: r.policy.as_ref().map(|p| *p.get_ref()).unwrap_or_default(),
            printed,
            line,
        };
        for s in rule.free_branch_symbols() {
            if !rule.branch_params.contains(&s) {
                ck.push(r.id.span(), "branches", format!("symbol `{}` is used but not declared", s.name()));
            }
        }
        rules.push(rule);
    }
    if !ck.diags.is_empty() {
        return Err(CatalogError::CatalogParse { source_name: source.to_string(), diagnostics: ck.diags });
    }
    let mut seen: HashMap<&str, Vec<usize>> = HashMap::new();
    for r in &rules {
        seen.entry(r.id.as_str()).or_default().push(r.line);
    }
    for r in &rules {
        let lines = &seen[r.id.as_str()];
        if lines.len() > 1 {
            return Err(CatalogError::DuplicateId { id: r.id.clone(), lines: lines.clone() });
        }
    }
    Ok(RuleSet { rules, source: source.to_string() })
}

/// Reads and validates a catalog file.
pub fn load_catalog(path: impl AsRef<std::path::Path>) -> Result<RuleSet, CatalogError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| CatalogError::Io { path: path.display().to_string(), source })?;
    parse_catalog(&text, &path.display().to_string())
}
