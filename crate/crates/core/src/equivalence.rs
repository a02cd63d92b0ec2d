//! Solution triples `(S, C, D)` of the system
//! `S' = r C D`, `C' = -r S D`, `D' = -r lambda S C` with
//! `S^2 + C^2 = 1`, `D^2 + lambda S^2 = 1`, and the phase criterion that
//! identifies two such triples.
//!
//! Evaluators are shared across threads; callers must supply functions that
//! are safe to call concurrently (pure functions of their argument).

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::complex::{is_finite, rel_err, Cx, C64, I, ONE, ZERO};
use crate::elliptic_core::{eval_kind_unchecked, EllipticError, EllipticKind, Lattice, Parameter};
use crate::seed::SeedHasher;
use crate::transform_catalog::Status;

/// A pointwise evaluator; `None` marks a point where the function cannot be
/// evaluated (pole, branch failure). Must be pure and thread-safe.
pub type Evaluator = Arc<dyn Fn(C64) -> Option<C64> + Send + Sync>;

#[derive(Clone)]
pub struct SolutionTriple {
    pub label: String,
    pub s: Evaluator,
    pub c: Evaluator,
    pub d: Evaluator,
    pub lambda: C64,
    /// Derivative rate `r` in `S' = r C D`; 1 for the plain system.
    pub rate: C64,
    /// Expected argument offset: the triple is presumed to behave like
    /// `(sn, cn, dn)(rate*x + offset | lambda)`. Only used to seed the phase
    /// search in [`are_equivalent`]; every result is verified numerically.
    pub offset: C64,
}

impl fmt::Debug for SolutionTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolutionTriple")
            .field("label", &self.label)
            .field("lambda", &self.lambda)
            .field("rate", &self.rate)
            .field("offset", &self.offset)
            .finish_non_exhaustive()
    }
}

impl SolutionTriple {
    pub fn new(label: impl Into<String>, s: Evaluator, c: Evaluator, d: Evaluator, lambda: C64) -> Self {
        SolutionTriple { label: label.into(), s, c, d, lambda, rate: ONE, offset: ZERO }
    }

    pub fn with_rate(mut self, rate: C64) -> Self {
        self.rate = rate;
        self
    }

    pub fn with_offset(mut self, offset: C64) -> Self {
        self.offset = offset;
        self
    }

    /// `(sn, cn, dn)(x | lambda)`.
    pub fn jacobi(param: Parameter) -> Self {
        Self::jacobi_affine(param, ONE, ZERO)
    }

    /// `(sn, cn, dn)(scale*x + phase | lambda)`, with rate `scale`.
    pub fn jacobi_affine(param: Parameter, scale: C64, phase: C64) -> Self {
        let f = |kind: EllipticKind| -> Evaluator {
            Arc::new(move |x: C64| {
                let u = scale * x + phase;
                let v = eval_kind_unchecked(kind, u, &param);
                is_finite(v).then_some(v)
            })
        };
        let label = if scale == ONE && phase == ZERO {
            format!("jacobi({})", param.lambda())
        } else {
            format!("jacobi({}; ({scale})x + {phase})", param.lambda())
        };
        SolutionTriple {
            label,
            s: f(EllipticKind::Sn),
            c: f(EllipticKind::Cn),
            d: f(EllipticKind::Dn),
            lambda: param.lambda(),
            rate: scale,
            offset: phase,
        }
    }

    pub fn eval(&self, x: C64) -> Option<[C64; 3]> {
        Some([(self.s)(x)?, (self.c)(x)?, (self.d)(x)?]).filter(|v| v.iter().all(|z| is_finite(*z)))
    }

    pub fn initial_values(&self) -> Option<[C64; 3]> {
        self.eval(ZERO)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceConfig {
    pub seed: u64,
    /// Tolerance on `|S^2+C^2-1|` and `|D^2+lambda S^2-1|`.
    pub tol_algebraic: f64,
    /// Tolerance on the central-difference derivative relation.
    pub tol_derivative: f64,
    /// Tolerance on the sampled error in [`are_equivalent`].
    pub tol_equivalence: f64,
    /// Central-difference step.
    pub step: f64,
    /// Samples are drawn from `|Re x| < region.0`, `|Im x| < region.1`.
    pub region: (f64, f64),
    /// Largest tolerated fraction of skipped samples.
    pub max_skipped_fraction: f64,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        EquivalenceConfig {
            seed: 0x5EED,
            tol_algebraic: 1e-8,
            tol_derivative: 1e-6,
            tol_equivalence: 1e-7,
            step: 1e-5,
            region: (1.0, 0.5),
            max_skipped_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EquivalenceError {
    #[error(
        "initial values are inconsistent: |S0^2+C0^2-1| = {pythagorean:.3e}, |D0^2+lambda S0^2-1| = {modulus:.3e}"
    )]
    InconsistentInitialValues { pythagorean: f64, modulus: f64 },
    #[error("no phase reproduces ({s0}, {c0}, {d0}) at parameter {lambda}")]
    PhaseNotFound { s0: C64, c0: C64, d0: C64, lambda: C64 },
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemReport {
    pub report: &'static str,
    pub label: String,
    pub lambda: Cx,
    pub rate: Cx,
    pub sample_count: usize,
    pub skipped: usize,
    pub max_pythagorean_err: f64,
    pub max_modulus_err: f64,
    pub max_derivative_err: f64,
    pub tol_algebraic: f64,
    pub tol_derivative: f64,
    pub status: Status,
    pub reason: Option<String>,
}

fn sample(rng: &mut ChaCha8Rng, region: (f64, f64)) -> C64 {
    C64::new(rng.gen_range(-region.0..region.0), rng.gen_range(-region.1..region.1))
}

/// Samples the algebraic constraints and the derivative relation
/// `(S(x+h)-S(x-h))/2h = r C D`. The derivative error is normalised by
/// `max(1, |r C D|)`.
pub fn check_system(triple: &SolutionTriple, n_samples: usize, cfg: &EquivalenceConfig) -> SystemReport {
    let mut rep = SystemReport {
        report: "system",
        label: triple.label.clone(),
        lambda: triple.lambda.into(),
        rate: triple.rate.into(),
        sample_count: 0,
        skipped: 0,
        max_pythagorean_err: 0.0,
        max_modulus_err: 0.0,
        max_derivative_err: 0.0,
        tol_algebraic: cfg.tol_algebraic,
        tol_derivative: cfg.tol_derivative,
        status: Status::Fail,
        reason: None,
    };
    if n_samples == 0 {
        rep.reason = Some("n_samples must be at least 1".into());
        return rep;
    }
    let seed = SeedHasher::new(cfg.seed).str("system").str(&triple.label).finish();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = C64::new(cfg.step, 0.0);
    for _ in 0..n_samples {
        let x = sample(&mut rng, cfg.region);
        let (Some([s, c, d]), Some(sp), Some(sm)) = (triple.eval(x), (triple.s)(x + h), (triple.s)(x - h)) else {
            rep.skipped += 1;
            continue;
        };
        if !is_finite(sp) || !is_finite(sm) {
            rep.skipped += 1;
            continue;
        }
        rep.sample_count += 1;
        rep.max_pythagorean_err = rep.max_pythagorean_err.max((s * s + c * c - ONE).norm());
        rep.max_modulus_err = rep.max_modulus_err.max((d * d + triple.lambda * s * s - ONE).norm());
        let exact = triple.rate * c * d;
        let fd = (sp - sm) / (2.0 * h);
        rep.max_derivative_err = rep.max_derivative_err.max((fd - exact).norm() / exact.norm().max(1.0));
    }
    let skipped_ok = (rep.skipped as f64) <= cfg.max_skipped_fraction * n_samples as f64;
    let algebraic_ok = rep.max_pythagorean_err < cfg.tol_algebraic && rep.max_modulus_err < cfg.tol_algebraic;
    let derivative_ok = rep.max_derivative_err < cfg.tol_derivative;
    rep.status =
        if skipped_ok && algebraic_ok && derivative_ok && rep.sample_count > 0 { Status::Pass } else { Status::Fail };
    if !skipped_ok {
        rep.reason = Some(format!("{} of {} samples could not be evaluated", rep.skipped, n_samples));
    } else if !algebraic_ok {
        rep.reason = Some(if rep.max_pythagorean_err >= cfg.tol_algebraic {
            "S^2 + C^2 = 1 violated".into()
        } else {
            "D^2 + lambda S^2 = 1 violated".into()
        });
    } else if !derivative_ok {
        rep.reason = Some("dS/dx = C D violated".into());
    }
    rep
}

/// Result of inverting `(sn, cn, dn)(phi | lambda) = (S0, C0, D0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSolution {
    pub phi: C64,
    /// `phi` lies in `Re in [0, 4K)`, `Im in [0, 2K')` (lattice coordinates).
    /// Solutions are unique modulo `4K, 4iK'`, so half of them lie in the
    /// upper half `[2K', 4K')` instead.
    pub cell_representative: bool,
    /// All distinct solutions modulo `(4K, 4iK')`, `phi` first.
    pub candidates: Vec<C64>,
    /// More than one distinct candidate satisfied all three conditions.
    pub ambiguous: bool,
}

/// Canonical lattice coordinates `(s, t)` of `phi = s K + t iK'`,
/// `s, t in [0, 4)`.
pub fn cell_coords(phi: C64, param: &Parameter) -> (f64, f64) {
    let (a, b) = Lattice::of(param).coords(phi);
    (wrap4(2.0 * a), wrap4(2.0 * b))
}

fn wrap4(v: f64) -> f64 {
    let w = v.rem_euclid(4.0);
    if 4.0 - w < 1e-10 {
        0.0
    } else {
        w
    }
}

/// Reduces `phi` modulo `(4K, 4iK')` into `s, t in [0, 4)`.
pub fn canonicalize(phi: C64, param: &Parameter) -> C64 {
    let (s, t) = cell_coords(phi, param);
    s * param.quarter_period() + t * I * param.quarter_period_prime()
}

fn consistency(s0: C64, c0: C64, d0: C64, lambda: C64) -> (f64, f64) {
    ((s0 * s0 + c0 * c0 - ONE).norm(), (d0 * d0 + lambda * s0 * s0 - ONE).norm())
}

fn triple_at(u: C64, p: &Parameter) -> [C64; 3] {
    [
        eval_kind_unchecked(EllipticKind::Sn, u, p),
        eval_kind_unchecked(EllipticKind::Cn, u, p),
        eval_kind_unchecked(EllipticKind::Dn, u, p),
    ]
}

fn matches(v: [C64; 3], target: [C64; 3], tol: f64) -> bool {
    v.iter().zip(target.iter()).all(|(a, b)| is_finite(*a) && rel_err(*a, *b) <= tol)
}

const MATCH_TOL: f64 = 1e-8;

/// Complex Newton for `f(u) = target`, where `f` and `f'` are supplied
/// together. Steps are clipped to `bound`.
fn newton(f: impl Fn(C64) -> Option<(C64, C64)>, target: C64, seed: C64, bound: f64) -> Option<C64> {
    let mut u = seed;
    let scale = target.norm().max(1.0);
    for _ in 0..100 {
        let (v, dv) = f(u)?;
        let r = v - target;
        if !is_finite(r) || !is_finite(dv) || dv.norm() == 0.0 {
            return None;
        }
        let mut step = r / dv;
        if step.norm() > bound {
            step *= bound / step.norm();
        }
        u -= step;
        if step.norm() <= 1e-15 * u.norm().max(1.0) && r.norm() <= 1e-12 * scale {
            break;
        }
    }
    let (v, _) = f(u)?;
    ((v - target).norm() <= 1e-10 * scale).then_some(u)
}

/// Index of the component whose derivative is largest at the target,
/// i.e. the best-conditioned equation to invert.
fn best_component(t: [C64; 3], lambda: C64, rate: C64) -> usize {
    let [s, c, d] = t;
    let g = [(rate * c * d).norm(), (rate * s * d).norm(), (rate * lambda * s * c).norm()];
    (0..3).fold(0, |b, i| if g[i] > g[b] { i } else { b })
}

fn component_with_derivative(v: [C64; 3], lambda: C64, rate: C64, comp: usize) -> (C64, C64) {
    let [s, c, d] = v;
    match comp {
        0 => (s, rate * c * d),
        1 => (c, -rate * s * d),
        _ => (d, -rate * lambda * s * c),
    }
}

fn asin(z: C64) -> C64 {
    -I * (I * z + (ONE - z * z).sqrt()).ln()
}

/// Finds `phi` with `sn(phi|lambda) = S0`, `cn = C0`, `dn = D0`.
///
/// One equation (whichever has the largest derivative at the target) is
/// inverted by bounded Newton, seeded first by `arcsin(S0)` and then by a
/// grid over the cell. The eight images `+-u + 2mK + 2niK'` of a root are
/// then tested against all three values; survivors are reduced modulo
/// `(4K, 4iK')` and deduplicated.
pub fn solve_phase(s0: C64, c0: C64, d0: C64, lambda: C64) -> Result<PhaseSolution, EquivalenceError> {
    let (pyth, modu) = consistency(s0, c0, d0, lambda);
    let scale = s0.norm().max(1.0).powi(2);
    if pyth > MATCH_TOL * scale || modu > MATCH_TOL * scale {
        return Err(EquivalenceError::InconsistentInitialValues { pythagorean: pyth, modulus: modu });
    }
    let not_found = || EquivalenceError::PhaseNotFound { s0, c0, d0, lambda };
    let target = [s0, c0, d0];
    let param = Parameter::new(lambda)?;
    if lambda == ZERO {
        // sin/cos: phi = -i ln(C0 + i S0), unique modulo 2 pi = 4K.
        let phi = -I * (c0 + I * s0).ln();
        let phi = C64::new(phi.re.rem_euclid(4.0 * param.quarter_period().re), phi.im);
        let phi = if (4.0 * param.quarter_period().re - phi.re) < 1e-10 { C64::new(0.0, phi.im) } else { phi };
        return verified_single(phi, target, &param).ok_or_else(not_found);
    }
    if lambda == ONE {
        // tanh/sech: not periodic in the real direction.
        let phi = 0.5 * ((ONE + s0) / (ONE - s0)).ln();
        let phi = C64::new(phi.re, phi.im.rem_euclid(2.0 * std::f64::consts::PI));
        return verified_single(phi, target, &param).ok_or_else(not_found);
    }
    let k = param.quarter_period();
    let ikp = I * param.quarter_period_prime();
    let bound = 0.25 * k.norm().min(ikp.norm());
    let comp = best_component(target, lambda, ONE);
    let f = |u: C64| {
        let v = triple_at(u, &param);
        let r = component_with_derivative(v, lambda, ONE, comp);
        (is_finite(r.0) && is_finite(r.1)).then_some(r)
    };
    let mut seeds = vec![asin(s0)];
    for t in [0.0, 0.5, 1.5, 2.5, 3.5] {
        for s in [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5] {
            seeds.push(s * k + t * ikp);
        }
    }
    for seed in seeds {
        let Some(u) = newton(f, target[comp], seed, bound) else { continue };
        let mut found: Vec<C64> = Vec::new();
        for sign in [1.0, -1.0] {
            for m in 0..2 {
                for n in 0..2 {
                    let cand = sign * u + 2.0 * m as f64 * k + 2.0 * n as f64 * ikp;
                    if !matches(triple_at(cand, &param), target, MATCH_TOL) {
                        continue;
                    }
                    let c = canonicalize(cand, &param);
                    let (cs, ct) = cell_coords(c, &param);
                    let dup = found.iter().any(|f| {
                        let (fs, ft) = cell_coords(*f, &param);
                        let ds = (fs - cs).abs().min(4.0 - (fs - cs).abs());
                        let dt = (ft - ct).abs().min(4.0 - (ft - ct).abs());
                        ds.max(dt) < 1e-7
                    });
                    if !dup {
                        found.push(c);
                    }
                }
            }
        }
        if found.is_empty() {
            continue;
        }
        found.sort_by(|a, b| {
            let (sa, ta) = cell_coords(*a, &param);
            let (sb, tb) = cell_coords(*b, &param);
            ta.total_cmp(&tb).then(sa.total_cmp(&sb))
        });
        let phi = found[0];
        let (_, t) = cell_coords(phi, &param);
        return Ok(PhaseSolution { phi, cell_representative: t < 2.0, ambiguous: found.len() > 1, candidates: found });
    }
    Err(not_found())
}

fn verified_single(phi: C64, target: [C64; 3], param: &Parameter) -> Option<PhaseSolution> {
    matches(triple_at(phi, param), target, MATCH_TOL).then(|| PhaseSolution {
        phi,
        cell_representative: true,
        candidates: vec![phi],
        ambiguous: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub report: &'static str,
    pub a: String,
    pub b: String,
    pub scale: Cx,
    pub equivalent: bool,
    pub phi: Option<Cx>,
    pub ambiguous: bool,
    pub sample_count: usize,
    pub max_err: f64,
    pub tolerance: f64,
    pub status: Status,
    pub reason: Option<String>,
}

/// Locates `phi` with `a(phi) = b(0)` for a black-box `a`, starting from the
/// Jacobi phases of `b(0)` mapped through `a`'s rate and offset.
fn phase_on(a: &SolutionTriple, b0: [C64; 3]) -> Result<(Vec<C64>, bool), EquivalenceError> {
    let sol = solve_phase(b0[0], b0[1], b0[2], a.lambda)?;
    let comp = best_component(b0, a.lambda, a.rate);
    let f = |u: C64| {
        let v = a.eval(u)?;
        Some(component_with_derivative(v, a.lambda, a.rate, comp))
    };
    let bound = Parameter::new(a.lambda)
        .map(|p| 0.25 * p.quarter_period().norm().min(p.quarter_period_prime().norm()))
        .unwrap_or(0.5)
        .min(1.0)
        / a.rate.norm().max(1e-300);
    let mut out = Vec::new();
    for cand in &sol.candidates {
        let seed = (*cand - a.offset) / a.rate;
        let refined = newton(f, b0[comp], seed, bound).unwrap_or(seed);
        if a.eval(refined).is_some_and(|v| matches(v, b0, MATCH_TOL)) {
            out.push(refined);
        }
    }
    if out.is_empty() {
        return Err(EquivalenceError::PhaseNotFound { s0: b0[0], c0: b0[1], d0: b0[2], lambda: a.lambda });
    }
    Ok((out, sol.ambiguous))
}

/// Decides whether `b(x) = a(scale*x + phi)` with `phi` the phase of `b`'s
/// initial values on `a`. Evidence is the largest sampled relative error
/// over the three components.
pub fn are_equivalent(
    a: &SolutionTriple,
    b: &SolutionTriple,
    scale: C64,
    n_samples: usize,
    cfg: &EquivalenceConfig,
) -> EquivalenceReport {
    let mut rep = EquivalenceReport {
        report: "equivalence",
        a: a.label.clone(),
        b: b.label.clone(),
        scale: scale.into(),
        equivalent: false,
        phi: None,
        ambiguous: false,
        sample_count: 0,
        max_err: f64::INFINITY,
        tolerance: cfg.tol_equivalence,
        status: Status::Fail,
        reason: None,
    };
    let Some(b0) = b.initial_values() else {
        rep.reason = Some("b cannot be evaluated at 0".into());
        return rep;
    };
    let (phis, ambiguous) = match phase_on(a, b0) {
        Ok(r) => r,
        Err(e) => {
            rep.reason = Some(format!("not equivalent via this criterion: {e}"));
            return rep;
        }
    };
    rep.ambiguous = ambiguous;
    let seed = SeedHasher::new(cfg.seed).str("equivalence").str(&a.label).str(&b.label).finish();
    let points: Vec<C64> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_samples).map(|_| sample(&mut rng, cfg.region)).collect()
    };
    for phi in phis {
        let (mut count, mut worst) = (0usize, 0f64);
        for &x in &points {
            let (Some(vb), Some(va)) = (b.eval(x), a.eval(scale * x + phi)) else { continue };
            count += 1;
            for i in 0..3 {
                worst = worst.max(rel_err(va[i], vb[i]));
            }
        }
        if count > 0 && worst < rep.max_err {
            rep.max_err = worst;
            rep.sample_count = count;
            rep.phi = Some(phi.into());
        }
    }
    let enough = (rep.sample_count as f64) >= (1.0 - cfg.max_skipped_fraction) * n_samples as f64;
    rep.equivalent = enough && rep.max_err < cfg.tol_equivalence;
    rep.status = if rep.equivalent { Status::Pass } else { Status::Fail };
    if !enough {
        rep.reason = Some(format!("only {} of {} samples could be evaluated", rep.sample_count, n_samples));
    } else if !rep.equivalent {
        rep.reason = Some("sampled values differ".into());
    }
    rep
}
