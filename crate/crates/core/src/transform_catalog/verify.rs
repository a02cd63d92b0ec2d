use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{BranchAssignment, CatalogError, Policy, RuleInstance, RuleSet, TransformRule};
use crate::complex::{is_finite, Cx, C64, I};
use crate::expr::Continuation;
use crate::seed::SeedHasher;

/// Parameter values swept by default.
pub const DEFAULT_K_GRID: [C64; 4] = [C64::new(0.2, 0.0), C64::new(0.5, 0.0), C64::new(0.8, 0.0), C64::new(0.3, 0.2)];

/// Sub-steps between consecutive samples on a continuation path.
const PATH_SUBSTEPS: usize = 16;
/// Branch choices with closest/second-closest distance ratio above this are
/// refined by halving the step.
const AMBIGUITY_LIMIT: f64 = 0.25;
const MAX_REFINE_DEPTH: u32 = 24;
const MAX_PATHS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Relative tolerance for `Policy::Exact` rules.
    pub tol_exact: f64,
    /// Relative tolerance for `Policy::PathConstant` rules.
    pub tol_path: f64,
    /// Minimum number of samples for a pass; `None` means all requested.
    pub min_samples: Option<usize>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { seed: 0x5EED, tol_exact: 1e-8, tol_path: 1e-8, min_samples: None }
    }
}

impl VerifyConfig {
    pub fn tolerance(&self, p: Policy) -> f64 {
        match p {
            Policy::Exact => self.tol_exact,
            Policy::PathConstant => self.tol_path,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

/// Sampled error statistics for one rule instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub report: &'static str,
    pub rule_id: String,
    pub param_value: Cx,
    pub branch_assignment: BranchAssignment,
    pub new_param: Option<Cx>,
    pub policy: Policy,
    pub sample_count: usize,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub tolerance: f64,
    /// Sign relating the two sides along the path (`PathConstant` only).
    pub sign: Option<i8>,
    pub status: Status,
    pub reason: Option<String>,
}

impl VerificationReport {
    fn empty(rule: &TransformRule, k: C64, b: &BranchAssignment, tol: f64) -> Self {
        VerificationReport {
            report: "identity",
            rule_id: rule.id.clone(),
            param_value: k.into(),
            branch_assignment: b.clone(),
            new_param: None,
            policy: rule.policy,
            sample_count: 0,
            max_abs_err: 0.0,
            max_rel_err: 0.0,
            tolerance: tol,
            sign: None,
            status: Status::Skipped,
            reason: None,
        }
    }
}

fn job_seed(seed: u64, rule: &str, k: C64, b: &BranchAssignment) -> u64 {
    let mut h = SeedHasher::new(seed).str(rule).f64(k.re).f64(k.im);
    for (s, v) in &b.0 {
        h = h.str(s.name()).bytes(&v.to_le_bytes());
    }
    h.finish()
}

fn sample_point(rng: &mut ChaCha8Rng, inst: &RuleInstance, shrink: f64) -> C64 {
    let s: f64 = rng.gen_range(-shrink..shrink);
    let t: f64 = rng.gen_range(-shrink..shrink);
    2.0 * s * inst.base.quarter_period() + t * I * inst.base.quarter_period_prime()
}

fn err_pair(l: C64, r: C64) -> (f64, f64) {
    let abs = (l - r).norm();
    (abs, abs / 1f64.max(l.norm()).max(r.norm()))
}

/// Samples `x` over `Re in (-2K, 2K)`, `Im in (-K', K')` (lattice coordinates
/// for complex `k`) avoiding every pole by the exclusion radius, and
/// compares both sides of the rule.
pub fn verify_rule(
    rule: &TransformRule,
    k: C64,
    branches: &BranchAssignment,
    n_samples: usize,
    cfg: &VerifyConfig,
) -> Result<VerificationReport, CatalogError> {
    assert!(n_samples >= 1, "n_samples must be positive");
    let tol = cfg.tolerance(rule.policy);
    let mut rep = VerificationReport::empty(rule, k, branches, tol);
    let inst = match RuleInstance::new(rule, k, branches) {
        Ok(i) => i,
        Err(CatalogError::Inadmissible(reason)) => {
            rep.reason = Some(reason);
            return Ok(rep);
        }
        Err(e) => return Err(e),
    };
    rep.new_param = Some(inst.new.lambda().into());
    let mut rng = ChaCha8Rng::seed_from_u64(job_seed(cfg.seed, &rule.id, k, branches));
    let outcome = match rule.policy {
        Policy::Exact => sample_exact(&inst, n_samples, &mut rng),
        Policy::PathConstant => sample_path(&inst, n_samples, &mut rng),
    };
    match outcome {
        Sampled::Errors { count, abs, rel, sign } => {
            rep.sample_count = count;
            rep.max_abs_err = abs;
            rep.max_rel_err = rel;
            rep.sign = sign;
            let min = cfg.min_samples.unwrap_or(n_samples);
            rep.status = if rel < tol && count >= min { Status::Pass } else { Status::Fail };
            if count < min {
                rep.reason = Some(format!("only {count} admissible samples, {min} required"));
            }
            Ok(rep)
        }
        Sampled::NonFinite => {
            rep.reason = Some("right-hand side is not finite for this parameter and branch".into());
            Ok(rep)
        }
        Sampled::NoSamples(reason) => Err(CatalogError::NoAdmissibleSamples { rule: rule.id.clone(), reason }),
    }
}

enum Sampled {
    Errors { count: usize, abs: f64, rel: f64, sign: Option<i8> },
    NonFinite,
    NoSamples(String),
}

fn sample_exact(inst: &RuleInstance, n: usize, rng: &mut ChaCha8Rng) -> Sampled {
    let (mut count, mut abs, mut rel) = (0, 0f64, 0f64);
    let (mut attempts, mut nonfinite) = (0usize, 0usize);
    let max_attempts = 100 * n + 1000;
    while count < n && attempts < max_attempts {
        attempts += 1;
        if attempts == 200 && nonfinite == attempts - 1 && count == 0 {
            return Sampled::NonFinite;
        }
        let x = sample_point(rng, inst, 1.0);
        if inst.pole_margin(x) <= 1.0 {
            continue;
        }
        let (Ok(l), Ok(r)) = (inst.lhs(x), inst.rhs(x)) else { continue };
        if !is_finite(l) || !is_finite(r) {
            nonfinite += 1;
            continue;
        }
        let (a, e) = err_pair(l, r);
        abs = abs.max(a);
        rel = rel.max(e);
        count += 1;
    }
    match (count, nonfinite) {
        (0, nf) if nf > 0 => Sampled::NonFinite,
        (0, _) => Sampled::NoSamples(format!("{attempts} candidates all fell inside pole exclusion zones")),
        _ => Sampled::Errors { count, abs, rel, sign: None },
    }
}

/// Right side at `x(t1)`, continuing the tracker from its state at `t0`,
/// halving the step wherever the branch choice is ambiguous.
fn advance(
    inst: &RuleInstance,
    track: &mut Continuation,
    seg: (C64, C64),
    t0: f64,
    t1: f64,
    depth: u32,
) -> Option<C64> {
    let at = |t: f64| seg.0 + t * (seg.1 - seg.0);
    let saved = track.clone();
    track.reset_ambiguity();
    let v = inst.rhs_tracked(at(t1), Some(track)).ok()?;
    if track.ambiguity() > AMBIGUITY_LIMIT && depth < MAX_REFINE_DEPTH {
        *track = saved;
        let mid = 0.5 * (t0 + t1);
        advance(inst, track, seg, t0, mid, depth + 1)?;
        return advance(inst, track, seg, mid, t1, depth + 1);
    }
    Some(v)
}

fn sample_path(inst: &RuleInstance, n: usize, rng: &mut ChaCha8Rng) -> Sampled {
    let mut nonfinite = 0;
    for _ in 0..MAX_PATHS {
        let (a, b) = (sample_point(rng, inst, 0.9), sample_point(rng, inst, 0.9));
        if inst.segment_pole_margin(a, b) <= 1.0 {
            continue;
        }
        let mut track = Continuation::new();
        let mut pairs = Vec::with_capacity(n);
        let mut t_prev = 0.0;
        let mut ok = true;
        for j in 0..n {
            let t = if n == 1 { 0.0 } else { j as f64 / (n - 1) as f64 };
            let mut r = None;
            if j == 0 {
                r = inst.rhs_tracked(a, Some(&mut track)).ok();
            } else {
                for s in 1..=PATH_SUBSTEPS {
                    let ts = t_prev + (t - t_prev) * s as f64 / PATH_SUBSTEPS as f64;
                    let tp = t_prev + (t - t_prev) * (s - 1) as f64 / PATH_SUBSTEPS as f64;
                    r = advance(inst, &mut track, (a, b), tp, ts, 0);
                    if r.is_none() {
                        break;
                    }
                }
            }
            t_prev = t;
            let x = a + t * (b - a);
            match (inst.lhs(x), r) {
                (Ok(l), Some(r)) if is_finite(l) && is_finite(r) => pairs.push((l, r)),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            nonfinite += 1;
            continue;
        }
        let (l0, r0) = pairs[0];
        let sign: i8 = if (l0 - r0).norm() <= (l0 + r0).norm() { 1 } else { -1 };
        let (mut abs, mut rel) = (0f64, 0f64);
        for (l, r) in pairs {
            let (ae, re) = err_pair(l, f64::from(sign) * r);
            abs = abs.max(ae);
            rel = rel.max(re);
        }
        return Sampled::Errors { count: n, abs, rel, sign: Some(sign) };
    }
    if nonfinite == MAX_PATHS {
        Sampled::NonFinite
    } else {
        Sampled::NoSamples(format!("no pole-free path found in {MAX_PATHS} attempts"))
    }
}

/// Splits an id into text and number chunks so that `S2.E9 < S2.E10`.
/// Sort key that orders embedded numbers numerically (`S2.E9` before `S2.E10`).
pub fn natural_key(id: &str) -> Vec<(String, u64)> {
    let mut out = Vec::new();
    let mut text = String::new();
    let mut num: Option<u64> = None;
    for c in id.chars() {
        if let Some(d) = c.to_digit(10) {
            num = Some(num.unwrap_or(0).saturating_mul(10).saturating_add(u64::from(d)));
        } else {
            if let Some(n) = num.take() {
                out.push((std::mem::take(&mut text), n));
            }
            text.push(c);
        }
    }
    out.push((text, num.unwrap_or(0)));
    out
}

/// Every rule at every `k` and every branch assignment; failures become
/// report statuses. Output is sorted by rule id, `k`, then branch.
pub fn verify_all(ruleset: &RuleSet, k_grid: &[C64], n_samples: usize, cfg: &VerifyConfig) -> Vec<VerificationReport> {
    let jobs: Vec<_> = ruleset
        .rules
        .iter()
        .flat_map(|r| {
            k_grid
                .iter()
                .flat_map(move |&k| BranchAssignment::all(&r.branch_params).into_iter().map(move |b| (r, k, b)))
        })
        .collect();
    let mut out: Vec<_> = jobs
        .par_iter()
        .map(|(r, k, b)| {
            verify_rule(r, *k, b, n_samples, cfg).unwrap_or_else(|e| {
                let mut rep = VerificationReport::empty(r, *k, b, cfg.tolerance(r.policy));
                rep.status = Status::Fail;
                rep.reason = Some(e.to_string());
                rep
            })
        })
        .collect();
    out.sort_by(|a, b| {
        natural_key(&a.rule_id)
            .cmp(&natural_key(&b.rule_id))
            .then(a.param_value.re.total_cmp(&b.param_value.re))
            .then(a.param_value.im.total_cmp(&b.param_value.im))
            .then(a.branch_assignment.cmp(&b.branch_assignment))
    });
    out
}
