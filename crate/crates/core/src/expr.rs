//! Closed expression grammar used by catalog rules.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' unary)?
//! atom  := number | symbol | name '(' expr ')' | '(' expr ')'
//! ```
//!
//! Symbols: `i pi x k kp eps p q sigma K Kp KN KNp` and named definitions.
//! `K, Kp` are the quarter periods at `k`; `KN, KNp` those at the rule's new
//! parameter. Functions: `sqrt root4 root8` (principal roots) and the twelve
//! elliptic kinds, which are evaluated at parameter `k`. `^` is the
//! principal power.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use crate::complex::{canonical, principal_pow, principal_sqrt, C64, I};
use crate::elliptic_core::{eval_kind, EllipticError, EllipticKind, Parameter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sym {
    I,
    Pi,
    X,
    K,
    Kp,
    Eps,
    P,
    Q,
    Sigma,
    BigK,
    BigKp,
    BigKN,
    BigKNp,
}

impl Sym {
    fn parse(name: &str) -> Option<Sym> {
        Some(match name {
            "i" => Sym::I,
            "pi" => Sym::Pi,
            "x" => Sym::X,
            "k" => Sym::K,
            "kp" => Sym::Kp,
            "eps" => Sym::Eps,
            "p" => Sym::P,
            "q" => Sym::Q,
            "sigma" => Sym::Sigma,
            "K" => Sym::BigK,
            "Kp" => Sym::BigKp,
            "KN" => Sym::BigKN,
            "KNp" => Sym::BigKNp,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Root4,
    Root8,
    Kind(EllipticKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Sym(Sym),
    Def(usize),
    Neg(usize),
    Bin(BinOp, usize, usize),
    Call(Func, usize),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at column {col}: {msg}")]
    Syntax { col: usize, msg: String },
    #[error("unknown name `{name}` at column {col}")]
    UnknownName { name: String, col: usize },
    #[error("symbol `{0}` is not available in this context")]
    Unavailable(&'static str),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
}

/// A parsed expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    nodes: Vec<Node>,
    root: usize,
    source: String,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    defs: &'a [String],
    nodes: Vec<Node>,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax { col: self.pos + 1, msg: msg.into() })
    }

    fn push(&mut self, n: Node) -> usize {
        self.nodes.push(n);
        self.nodes.len() - 1
    }

    fn expr(&mut self) -> Result<usize, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == b'+' { BinOp::Add } else { BinOp::Sub };
            lhs = self.push(Node::Bin(op, lhs, rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<usize, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == b'*' { BinOp::Mul } else { BinOp::Div };
            lhs = self.push(Node::Bin(op, lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<usize, ExprError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                let e = self.unary()?;
                Ok(self.push(Node::Neg(e)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<usize, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let e = self.unary()?;
            return Ok(self.push(Node::Bin(BinOp::Pow, base, e)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<usize, ExprError> {
        match self.peek() {
            None => self.err("unexpected end of expression"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.err("expected `)`");
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
                    self.pos += 1;
                }
                if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
                    let save = self.pos;
                    self.pos += 1;
                    if self.pos < self.src.len() && (self.src[self.pos] == b'-' || self.src[self.pos] == b'+') {
                        self.pos += 1;
                    }
                    let digits = self.pos;
                    while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                    if digits == self.pos {
                        self.pos = save;
                    }
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                match text.parse::<f64>() {
                    Ok(v) => Ok(self.push(Node::Num(v))),
                    Err(_) => {
                        self.pos = start;
                        self.err(format!("malformed number `{text}`"))
                    }
                }
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
                if self.peek() == Some(b'(') {
                    let func = match name.as_str() {
                        "sqrt" => Func::Sqrt,
                        "root4" => Func::Root4,
                        "root8" => Func::Root8,
                        other => match other.parse::<EllipticKind>() {
                            Ok(k) => Func::Kind(k),
                            Err(_) => return Err(ExprError::UnknownName { name, col: start + 1 }),
                        },
                    };
                    self.pos += 1;
                    let arg = self.expr()?;
                    if self.peek() != Some(b')') {
                        return self.err("expected `)` after function argument");
                    }
                    self.pos += 1;
                    return Ok(self.push(Node::Call(func, arg)));
                }
                if let Some(ix) = self.defs.iter().position(|d| *d == name) {
                    return Ok(self.push(Node::Def(ix)));
                }
                match Sym::parse(&name) {
                    Some(s) => Ok(self.push(Node::Sym(s))),
                    None => Err(ExprError::UnknownName { name, col: start + 1 }),
                }
            }
            Some(c) => self.err(format!("unexpected character `{}`", c as char)),
        }
    }
}

/// Values of the free symbols.
#[derive(Debug, Clone, Copy)]
pub struct Env<'a> {
    pub k: C64,
    pub eps: f64,
    pub p: f64,
    pub q: f64,
    pub sigma: f64,
    pub x: C64,
    /// Parameter at `k`; required for `K`, `Kp` and function calls.
    pub base: Option<&'a Parameter>,
    /// Parameter at the rule's new parameter; required for `KN`, `KNp`.
    pub new: Option<&'a Parameter>,
}

impl<'a> Env<'a> {
    pub fn constants(k: C64) -> Env<'a> {
        Env { k, eps: 1.0, p: 0.0, q: 0.0, sigma: 1.0, x: C64::new(0.0, 0.0), base: None, new: None }
    }
}

/// Remembers the last value of every multivalued node so that radicals can be
/// continued analytically along a path instead of jumping across cuts.
#[derive(Debug, Default, Clone)]
pub struct Continuation {
    last: HashMap<(u32, usize), C64>,
    ambiguity: f64,
}

impl Continuation {
    pub fn new() -> Self {
        Self::default()
    }

    /// Largest ratio (closest candidate distance)/(second closest) seen
    /// since the last reset; values near 1 mean the step was too coarse to
    /// tell branches apart.
    pub fn ambiguity(&self) -> f64 {
        self.ambiguity
    }

    pub fn reset_ambiguity(&mut self) {
        self.ambiguity = 0.0;
    }

    fn pick(&mut self, key: (u32, usize), candidates: impl Iterator<Item = C64>, principal: C64) -> C64 {
        let v = match self.last.get(&key) {
            Some(prev) => {
                let (mut best, mut d1, mut d2) = (principal, f64::INFINITY, f64::INFINITY);
                for c in candidates {
                    let d = (c - prev).norm();
                    if d < d1 {
                        d2 = d1;
                        d1 = d;
                        best = c;
                    } else if d < d2 {
                        d2 = d;
                    }
                }
                if d2 > 0.0 && d2.is_finite() {
                    self.ambiguity = self.ambiguity.max(d1 / d2);
                }
                best
            }
            None => principal,
        };
        self.last.insert(key, v);
        v
    }
}

fn nth_root_candidates(principal: C64, n: u32) -> impl Iterator<Item = C64> {
    (0..n).map(move |j| principal * C64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64))
}

impl Expr {
    /// Parses `src`, resolving names against the earlier definitions `defs`.
    pub fn parse_with_defs(src: &str, defs: &[String]) -> Result<Expr, ExprError> {
        let mut p = Parser { src: src.as_bytes(), pos: 0, defs, nodes: Vec::new() };
        let root = p.expr()?;
        if p.peek().is_some() {
            return p.err("unexpected trailing input");
        }
        Ok(Expr { nodes: p.nodes, root, source: src.trim().to_string() })
    }

    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        Expr::parse_with_defs(src, &[])
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Elliptic kinds applied anywhere in the expression.
    pub fn kinds(&self) -> Vec<EllipticKind> {
        let mut v: Vec<_> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Call(Func::Kind(k), _) => Some(*k),
                _ => None,
            })
            .collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn uses_symbol(&self, s: Sym) -> bool {
        self.nodes.contains(&Node::Sym(s))
    }

    /// Named definitions referenced directly.
    pub fn def_refs(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Def(i) => Some(*i),
                _ => None,
            })
            .collect()
    }

    /// `(1 + rel) * (self)`.
    pub fn scaled(&self, rel: f64) -> Expr {
        let mut nodes = self.nodes.clone();
        nodes.push(Node::Num(1.0 + rel));
        let c = nodes.len() - 1;
        nodes.push(Node::Bin(BinOp::Mul, c, self.root));
        let root = nodes.len() - 1;
        Expr { nodes, root, source: format!("{} * ({})", 1.0 + rel, self.source) }
    }

    pub fn eval(&self, env: &Env, defs: &[C64]) -> Result<C64, ExprError> {
        self.eval_node(self.root, env, defs, None)
    }

    /// Evaluates with analytic continuation of radicals; `slot` separates the
    /// expressions sharing one tracker.
    pub fn eval_continued(
        &self,
        env: &Env,
        defs: &[C64],
        track: &mut Continuation,
        slot: u32,
    ) -> Result<C64, ExprError> {
        self.eval_node(self.root, env, defs, Some((track, slot)))
    }

    fn eval_node(
        &self,
        id: usize,
        env: &Env,
        defs: &[C64],
        mut track: Option<(&mut Continuation, u32)>,
    ) -> Result<C64, ExprError> {
        let sub = |n: usize, t: &mut Option<(&mut Continuation, u32)>| -> Result<C64, ExprError> {
            let t2 = t.as_mut().map(|(c, s)| (&mut **c, *s));
            self.eval_node(n, env, defs, t2)
        };
        Ok(match &self.nodes[id] {
            Node::Num(v) => C64::new(*v, 0.0),
            Node::Def(i) => defs[*i],
            Node::Sym(s) => match s {
                Sym::I => I,
                Sym::Pi => C64::new(PI, 0.0),
                Sym::X => env.x,
                Sym::K => env.k,
                Sym::Kp => C64::new(1.0, 0.0) - env.k,
                Sym::Eps => C64::new(env.eps, 0.0),
                Sym::P => C64::new(env.p, 0.0),
                Sym::Q => C64::new(env.q, 0.0),
                Sym::Sigma => C64::new(env.sigma, 0.0),
                Sym::BigK => env.base.ok_or(ExprError::Unavailable("K"))?.quarter_period(),
                Sym::BigKp => env.base.ok_or(ExprError::Unavailable("Kp"))?.quarter_period_prime(),
                Sym::BigKN => env.new.ok_or(ExprError::Unavailable("KN"))?.quarter_period(),
                Sym::BigKNp => env.new.ok_or(ExprError::Unavailable("KNp"))?.quarter_period_prime(),
            },
            Node::Neg(a) => -sub(*a, &mut track)?,
            Node::Bin(op, a, b) => {
                let va = sub(*a, &mut track)?;
                let vb = sub(*b, &mut track)?;
                match op {
                    BinOp::Add => va + vb,
                    BinOp::Sub => va - vb,
                    BinOp::Mul => va * vb,
                    BinOp::Div => va / vb,
                    BinOp::Pow => {
                        let principal = principal_pow(va, vb);
                        let integral = vb.im == 0.0 && vb.re.fract() == 0.0;
                        match track {
                            Some((t, slot)) if !integral => {
                                let ln = canonical(va).ln();
                                let cands =
                                    (-3..=3).map(move |j| (vb * (ln + C64::new(0.0, 2.0 * PI * j as f64))).exp());
                                t.pick((slot, id), cands, principal)
                            }
                            _ => principal,
                        }
                    }
                }
            }
            Node::Call(f, a) => {
                let v = sub(*a, &mut track)?;
                match f {
                    Func::Kind(kind) => {
                        let base = env.base.ok_or(ExprError::Unavailable("elliptic function"))?;
                        eval_kind(*kind, v, base)?
                    }
                    Func::Sqrt | Func::Root4 | Func::Root8 => {
                        let n: u32 = match f {
                            Func::Sqrt => 2,
                            Func::Root4 => 4,
                            _ => 8,
                        };
                        let mut principal = v;
                        for _ in 0..n.trailing_zeros() {
                            principal = principal_sqrt(principal);
                        }
                        match track {
                            Some((t, slot)) => t.pick((slot, id), nth_root_candidates(principal, n), principal),
                            None => principal,
                        }
                    }
                }
            }
        })
    }
}
