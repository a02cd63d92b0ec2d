use criterion::{black_box, criterion_group, criterion_main, Criterion};
use jacobi_core::equivalence::solve_phase;
use jacobi_core::mkdv::{phi_equation_residual, GridSpec, MkdvSolution, ResidualConfig};
use jacobi_core::transform_catalog::{verify_rule, BranchAssignment, RuleSet, VerifyConfig};
use jacobi_core::{eval_base, Parameter, C64};

fn elliptic(c: &mut Criterion) {
    let real = Parameter::real(0.5).unwrap();
    let complex = Parameter::new(C64::new(0.3, 0.2)).unwrap();
    c.bench_function("eval_base real k", |b| b.iter(|| eval_base(black_box(C64::new(0.7, 0.2)), &real)));
    c.bench_function("eval_base complex k", |b| b.iter(|| eval_base(black_box(C64::new(0.7, 0.2)), &complex)));
    c.bench_function("parameter setup", |b| b.iter(|| Parameter::new(black_box(C64::new(0.3, 0.2)))));

    let [s, cn, d] = eval_base(C64::new(0.9, 0.4), &real).unwrap();
    c.bench_function("solve_phase", |b| b.iter(|| solve_phase(black_box(s), cn, d, C64::new(0.5, 0.0))));
}

fn catalog(c: &mut Criterion) {
    let rules = RuleSet::shipped();
    let cfg = VerifyConfig::default();
    let exact = rules.get("S2.E3").unwrap();
    c.bench_function("verify_rule exact, 200 samples", |b| {
        b.iter(|| verify_rule(exact, C64::new(0.5, 0.0), &BranchAssignment::new(), 200, &cfg))
    });
    let path = rules.rules.iter().find(|r| r.id == "S2.E36").unwrap();
    let br = BranchAssignment::all(&path.branch_params).remove(0);
    c.bench_function("verify_rule path-constant, 200 samples", |b| {
        b.iter(|| verify_rule(path, C64::new(0.5, 0.0), &br, 200, &cfg))
    });
}

fn mkdv(c: &mut Criterion) {
    let phi = MkdvSolution::phi0(0.5, 0.5, 1.0, 1.0, 1, -1).unwrap().build().unwrap();
    let grid = GridSpec::new((0.1, 0.3), (0.0, 0.01), 5e-3, 5e-4);
    let cfg = ResidualConfig::default();
    let mut g = c.benchmark_group("mkdv");
    g.sample_size(20);
    g.bench_function("phi residual, 41x21 grid", |b| b.iter(|| phi_equation_residual(&phi, &grid, &cfg)));
    g.finish();
}

criterion_group!(benches, elliptic, catalog, mkdv);
criterion_main!(benches);
