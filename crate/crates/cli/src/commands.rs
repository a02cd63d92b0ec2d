use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;

use jacobi_core::complex::Cx;
use jacobi_core::elliptic_core::eval_kind;
use jacobi_core::equivalence::{are_equivalent, solve_phase, EquivalenceConfig, SolutionTriple};
use jacobi_core::mkdv::{
    equivalence_witness, mkdv_residual, parse_solution_specs, phi_equation_residual, reconstruct_u, transform_solution,
    x_stencil_order, Field2D, GridSpec, MkdvError, MkdvSolution, ResidualConfig, SolutionSummary, CONSTRAINT_TOL,
    POLE_MARGIN,
};
use jacobi_core::transform_catalog::{
    natural_key, verify_all, verify_rule, BranchAssignment, CatalogError, RuleSet, Status, TransformRule, VerifyConfig,
    DEFAULT_K_GRID,
};
use jacobi_core::{EllipticKind, Parameter, C64};
use serde::Serialize;

use crate::args::{Cli, Command, FormArg, SolutionArgs};
use crate::emit::Emitter;

/// Grid of the mKdV residual checks.
pub const CHECK_GRID: GridSpec = GridSpec { x0: 0.1, x1: 1.1, t0: 0.0, t1: 0.05, hx: 5e-3, ht: 5e-4 };
/// Generated forms move faster than the sources, so their time step is finer.
pub const TRANSFORM_GRID: GridSpec = GridSpec { x0: 0.1, x1: 1.1, t0: 0.0, t1: 0.005, hx: 5e-3, ht: 2.5e-5 };
/// Rules verified per parallel batch of `verify-all`.
const VERIFY_BATCH: usize = 8;
/// Radius of the Cauchy-integral reference in the stencil order check.
const ORDER_RADIUS: f64 = 0.3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    report: &'static str,
    command: &'a str,
    total: usize,
    passed: usize,
    failed: usize,
    skipped: usize,
}

#[derive(Debug, Serialize)]
struct PhaseReport {
    report: &'static str,
    lambda: Cx,
    s0: Cx,
    c0: Cx,
    d0: Cx,
    phi: Option<Cx>,
    cell_representative: Option<bool>,
    candidates: Vec<Cx>,
    ambiguous: bool,
    status: Status,
    reason: Option<String>,
}

#[derive(Debug, Serialize)]
struct Constraint {
    relation: &'static str,
    residual: f64,
}

#[derive(Debug, Serialize)]
struct TransformReport {
    report: &'static str,
    rule_id: String,
    branch_assignment: BranchAssignment,
    source: SolutionSummary,
    result: Option<SolutionSummary>,
    constraints: Vec<Constraint>,
    tolerance: f64,
    status: Status,
    reason: Option<String>,
}

/// Emits reports and tallies their statuses.
pub struct Run {
    emitter: Emitter,
    command: &'static str,
    counts: BTreeMap<&'static str, usize>,
    failures: Vec<String>,
}

impl Run {
    fn record<T: Serialize>(&mut self, id: impl Into<String>, status: Status, report: &T) -> Result<(), CliError> {
        self.emitter.emit(report).map_err(io_err)?;
        let key = match status {
            Status::Pass => "passed",
            Status::Fail => "failed",
            Status::Skipped => "skipped",
        };
        *self.counts.entry(key).or_default() += 1;
        if status == Status::Fail {
            self.failures.push(id.into());
        }
        Ok(())
    }

    /// Emits the summary line and returns the ids of failed reports.
    fn finish(mut self) -> Result<Vec<String>, CliError> {
        let n = |k| self.counts.get(k).copied().unwrap_or(0);
        let summary = Summary {
            report: "summary",
            command: self.command,
            total: n("passed") + n("failed") + n("skipped"),
            passed: n("passed"),
            failed: n("failed"),
            skipped: n("skipped"),
        };
        self.emitter.emit(&summary).map_err(io_err)?;
        Ok(self.failures)
    }
}

fn verify_config(cli: &Cli) -> VerifyConfig {
    let t = cli.tolerances();
    let d = VerifyConfig::default();
    VerifyConfig {
        seed: cli.seed,
        tol_exact: t.get("exact").copied().unwrap_or(d.tol_exact),
        tol_path: t.get("path").copied().unwrap_or(d.tol_path),
        ..d
    }
}

fn residual_config(cli: &Cli) -> ResidualConfig {
    let t = cli.tolerances();
    let d = ResidualConfig::default();
    ResidualConfig {
        tol_phi: t.get("phi").copied().unwrap_or(d.tol_phi),
        tol_mkdv: t.get("mkdv").copied().unwrap_or(d.tol_mkdv),
        pole_tol: t.get("pole").copied().unwrap_or(d.pole_tol),
        ..d
    }
}

fn equivalence_config(cli: &Cli) -> EquivalenceConfig {
    let t = cli.tolerances();
    let d = EquivalenceConfig::default();
    EquivalenceConfig {
        seed: cli.seed,
        tol_algebraic: t.get("algebraic").copied().unwrap_or(d.tol_algebraic),
        tol_derivative: t.get("derivative").copied().unwrap_or(d.tol_derivative),
        tol_equivalence: t.get("equivalence").copied().unwrap_or(d.tol_equivalence),
        ..d
    }
}

fn load_rules(cli: &Cli) -> Result<RuleSet, CliError> {
    match &cli.catalog {
        None => Ok(RuleSet::shipped()),
        Some(path) => jacobi_core::transform_catalog::load_catalog(path).map_err(|e| match e {
            CatalogError::Io { .. } => CliError::Io(e.to_string()),
            other => usage(other),
        }),
    }
}

fn find_rule<'a>(rules: &'a RuleSet, id: &str) -> Result<&'a TransformRule, CliError> {
    rules.get(id).ok_or_else(|| usage(format!("no rule `{id}` in catalog {}", rules.source)))
}

fn source_solution(s: &SolutionArgs) -> Result<Result<MkdvSolution, MkdvError>, CliError> {
    let built = match s.form {
        FormArg::Phi0 => MkdvSolution::phi0(s.k, s.m, s.a, s.c, s.sigma, s.nu),
        FormArg::Phi1 => MkdvSolution::phi1(s.k, s.m, s.a, s.c, s.sigma, s.nu),
    };
    match built {
        Err(e @ (MkdvError::InvalidGrid(_) | MkdvError::InvalidSign(_))) => Err(usage(e)),
        other => Ok(other.map(|sol| sol.with_phases(s.a0, s.c0))),
    }
}

fn grid_checked(g: GridSpec) -> Result<GridSpec, CliError> {
    g.check().map_err(usage)?;
    Ok(g)
}

/// Runs the parsed command. `Ok` carries the ids of failed reports.
pub fn run(cli: &Cli) -> Result<Vec<String>, CliError> {
    let emitter = Emitter::open(cli.output.as_deref(), cli.format).map_err(io_err)?;
    let name = match &cli.command {
        Command::Eval { .. } => "eval",
        Command::VerifyIdentity { .. } => "verify-identity",
        Command::VerifyAll { .. } => "verify-all",
        Command::SolvePhase { .. } => "solve-phase",
        Command::MkdvCheck { .. } => "mkdv-check",
        Command::Transform { .. } => "transform",
        Command::Equiv { .. } => "equiv",
    };
    let mut run = Run { emitter, command: name, counts: BTreeMap::new(), failures: Vec::new() };
    match &cli.command {
        Command::Eval { kind, x, param } => {
            let kind: EllipticKind = kind.parse().map_err(usage)?;
            let p = Parameter::new(param.value()).map_err(usage)?;
            return match eval_kind(kind, *x, &p) {
                Ok(v) => {
                    run.emitter.emit(&Cx::from(v)).map_err(io_err)?;
                    Ok(Vec::new())
                }
                Err(e) => {
                    eprintln!("{kind}({x}): {e}");
                    Ok(vec![format!("eval:{kind}")])
                }
            };
        }
        Command::VerifyIdentity { rule, param, branches, samples, printed } => {
            let rules = load_rules(cli)?;
            let base = find_rule(&rules, rule)?;
            let rule = if *printed {
                base.printed_variant().ok_or_else(|| usage(format!("rule `{}` has no printed variant", base.id)))?
            } else {
                base.clone()
            };
            if *samples == 0 {
                return Err(usage("--samples must be positive"));
            }
            let b = branches.assignment();
            require_branches(&rule, &b)?;
            let rep = match verify_rule(&rule, param.value(), &b, *samples, &verify_config(cli)) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("{}: {e}", rule.id);
                    run.failures.push(rule.id.clone());
                    return run.finish();
                }
            };
            run.record(format!("{}{}", rep.rule_id, branch_tag(&rep.branch_assignment)), rep.status, &rep)?;
        }
        Command::VerifyAll { k, modulus, samples } => {
            let rules = load_rules(cli)?;
            if *samples == 0 {
                return Err(usage("--samples must be positive"));
            }
            let grid: Vec<C64> = if !k.is_empty() {
                k.clone()
            } else if !modulus.is_empty() {
                modulus.iter().map(|m| m * m).collect()
            } else {
                DEFAULT_K_GRID.to_vec()
            };
            let mut sorted = rules.rules.clone();
            sorted.sort_by_key(|r| natural_key(&r.id));
            let cfg = verify_config(cli);
            for batch in sorted.chunks(VERIFY_BATCH) {
                let set = RuleSet { rules: batch.to_vec(), source: rules.source.clone() };
                for rep in verify_all(&set, &grid, *samples, &cfg) {
                    let id = format!(
                        "{}@{}{:+}i{}",
                        rep.rule_id,
                        rep.param_value.re,
                        rep.param_value.im,
                        branch_tag(&rep.branch_assignment)
                    );
                    run.record(id, rep.status, &rep)?;
                }
            }
        }
        Command::SolvePhase { s0, c0, d0, param } => {
            let lambda = param.value();
            let mut rep = PhaseReport {
                report: "phase",
                lambda: lambda.into(),
                s0: (*s0).into(),
                c0: (*c0).into(),
                d0: (*d0).into(),
                phi: None,
                cell_representative: None,
                candidates: Vec::new(),
                ambiguous: false,
                status: Status::Fail,
                reason: None,
            };
            match solve_phase(*s0, *c0, *d0, lambda) {
                Ok(sol) => {
                    rep.phi = Some(sol.phi.into());
                    rep.cell_representative = Some(sol.cell_representative);
                    rep.candidates = sol.candidates.iter().map(|&z| z.into()).collect();
                    rep.ambiguous = sol.ambiguous;
                    rep.status = Status::Pass;
                }
                Err(e) => rep.reason = Some(e.to_string()),
            }
            run.record("solve-phase", rep.status, &rep)?;
        }
        Command::MkdvCheck { solution, grid, order, dump_u } => {
            let spec = grid_checked(grid.resolve(CHECK_GRID))?;
            let cfg = residual_config(cli);
            let sol = match source_solution(solution)? {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("{e}");
                    return Ok(vec![format!("mkdv-check:{}", form_name(solution.form))]);
                }
            };
            let form = sol.form_id();
            let phi = sol.build().map_err(usage)?;
            emit_residual(&mut run, &form, None, "phi", phi_equation_residual(&phi, &spec, &cfg))?;
            let u = reconstruct_u(phi.clone(), sol.nu, cfg.h_u, cfg.pole_tol);
            emit_residual(&mut run, &form, None, "mkdv", mkdv_residual(&u, sol.nu, &spec, &cfg))?;
            if *order {
                match x_stencil_order(&phi, &spec.with_hx(2.0 * spec.hx), ORDER_RADIUS) {
                    Ok(r) => run.record(format!("{form}:order"), r.status, &r)?,
                    Err(e) => {
                        eprintln!("{form}: order check: {e}");
                        run.failures.push(format!("{form}:order"));
                    }
                }
            }
            if let Some(path) = dump_u {
                let field = Field2D::sample(&u, &spec).map_err(|e| CliError::Io(format!("cannot sample u: {e}")))?;
                let f = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                field.write_csv(BufWriter::new(f)).map_err(io_err)?;
            }
        }
        Command::Transform { solution, rule, branches, grid, samples } => {
            let rules = load_rules(cli)?;
            let rule = find_rule(&rules, rule)?;
            let spec = grid_checked(grid.resolve(TRANSFORM_GRID))?;
            let src = match source_solution(solution)? {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("{e}");
                    return Ok(vec![format!("transform:{}", form_name(solution.form))]);
                }
            };
            let b = branches.assignment();
            require_branches(rule, &b)?;
            let mut rep = TransformReport {
                report: "transform",
                rule_id: rule.id.clone(),
                branch_assignment: b.clone(),
                source: SolutionSummary::from(&src),
                result: None,
                constraints: Vec::new(),
                tolerance: CONSTRAINT_TOL,
                status: Status::Fail,
                reason: None,
            };
            let id = format!("{}{}", rule.id, branch_tag(&b));
            let out = match transform_solution(&src, rule, &b) {
                Ok(o) => o,
                Err(e @ (MkdvError::ConstraintUnsolvable(_) | MkdvError::RuleNotApplicable(_))) => {
                    rep.status = Status::Skipped;
                    rep.reason = Some(e.to_string());
                    run.record(id, rep.status, &rep)?;
                    return run.finish();
                }
                Err(e) => {
                    rep.reason = Some(e.to_string());
                    run.record(id, rep.status, &rep)?;
                    return run.finish();
                }
            };
            rep.result = Some(SolutionSummary::from(&out));
            match out.constraint_residuals() {
                Ok(c) => {
                    rep.constraints =
                        c.into_iter().map(|(relation, residual)| Constraint { relation, residual }).collect()
                }
                Err(e) => rep.reason = Some(e.to_string()),
            }
            let ok = rep.reason.is_none() && rep.constraints.iter().all(|c| c.residual < CONSTRAINT_TOL);
            rep.status = if ok { Status::Pass } else { Status::Fail };
            if !ok && rep.reason.is_none() {
                rep.reason = Some("constraint residual above tolerance".into());
            }
            run.record(id.clone(), rep.status, &rep)?;
            let w = equivalence_witness(&src, &out, &spec, *samples, cli.seed);
            run.record(format!("{id}:witness"), w.status, &w)?;
            let phi = out.build_guarded(POLE_MARGIN).map_err(usage)?;
            emit_residual(
                &mut run,
                &out.form_id(),
                out.origin_rule.clone(),
                "phi",
                phi_equation_residual(&phi, &spec, &residual_config(cli)),
            )?;
        }
        Command::Equiv { solutions, param, phase, scale, grid, samples } => {
            if *samples == 0 {
                return Err(usage("--samples must be positive"));
            }
            if let Some(path) = solutions {
                let text =
                    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                let specs = parse_solution_specs(&text).map_err(usage)?;
                if specs.len() < 2 {
                    return Err(usage(format!(
                        "{} lists {} solutions, at least 2 needed",
                        path.display(),
                        specs.len()
                    )));
                }
                let rules = load_rules(cli)?;
                let built: Vec<MkdvSolution> =
                    specs.iter().map(|s| s.build(&rules)).collect::<Result<_, _>>().map_err(usage)?;
                let window = grid_checked(grid.resolve(CHECK_GRID))?;
                for (i, b) in built.iter().enumerate().skip(1) {
                    let w = equivalence_witness(&built[0], b, &window, *samples, cli.seed);
                    run.record(format!("solution[0]~solution[{i}]"), w.status, &w)?;
                }
            } else {
                let lambda = param.value().ok_or_else(|| usage("equiv needs --solutions or --k/--modulus"))?;
                let p = Parameter::new(lambda).map_err(usage)?;
                let scale = scale.unwrap_or(C64::new(1.0, 0.0));
                let phase = phase.unwrap_or(C64::new(0.0, 0.0));
                let a = SolutionTriple::jacobi(p);
                let b = SolutionTriple::jacobi_affine(p, scale, phase);
                let rep = are_equivalent(&a, &b, scale, *samples, &equivalence_config(cli));
                run.record(format!("{}~{}", rep.a, rep.b), rep.status, &rep)?;
            }
        }
    }
    run.finish()
}

fn emit_residual(
    run: &mut Run,
    form: &str,
    rule_id: Option<String>,
    which: &str,
    rep: Result<jacobi_core::mkdv::ResidualReport, MkdvError>,
) -> Result<(), CliError> {
    match rep {
        Ok(mut r) => {
            r.form = form.to_string();
            r.rule_id = rule_id;
            run.record(format!("{form}:{which}"), r.status, &r)
        }
        Err(e) => {
            eprintln!("{form}: {which} residual: {e}");
            run.failures.push(format!("{form}:{which}"));
            Ok(())
        }
    }
}

fn require_branches(rule: &TransformRule, b: &BranchAssignment) -> Result<(), CliError> {
    let missing: Vec<_> = rule.branch_params.iter().filter(|s| b.get(**s).is_none()).map(|s| s.name()).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(usage(format!("rule `{}` needs --branch for: {}", rule.id, missing.join(", "))))
    }
}

fn form_name(f: FormArg) -> &'static str {
    match f {
        FormArg::Phi0 => "phi0",
        FormArg::Phi1 => "phi1",
    }
}

fn branch_tag(b: &BranchAssignment) -> String {
    b.0.iter().map(|(s, v)| format!(" {}={v:+}", s.name())).collect()
}
