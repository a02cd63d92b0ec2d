use jacobi_core::complex::{rel_err, C64, ONE, ZERO};
use jacobi_core::transform_catalog::{
    eval_lhs, eval_rhs, find_equivalents, verify_all, verify_rule, BranchAssignment, BranchSymbol, RuleSet, Status,
    VerifyConfig,
};
use jacobi_core::{eval_kind, EllipticKind, Parameter};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn none() -> BranchAssignment {
    BranchAssignment::new()
}

#[test]
fn every_equation_number_has_a_rule() {
    let set = RuleSet::shipped();
    let mut want: Vec<String> = (3..=56).map(|n| format!("S2.E{n}")).collect();
    want.extend((68..=79).map(|n| format!("A.E{n}")));
    for id in &want {
        assert!(set.get(id).is_some(), "missing {id}");
    }
    assert_eq!(set.rules.len(), want.len());
}

#[test]
fn lhs_and_rhs_examples() {
    let set = RuleSet::shipped();
    let e3 = set.get("S2.E3").unwrap();
    let p = Parameter::real(1.0 / 0.6).unwrap();
    let want = eval_kind(EllipticKind::Sn, c(0.6f64.sqrt() * 0.7), &p).unwrap();
    assert!(rel_err(eval_lhs(e3, c(0.7), c(0.6), &none()).unwrap(), want) < 1e-14);

    let e15 = set.get("S2.E15").unwrap();
    let lhs = eval_lhs(e15, c(0.5), c(0.5), &none()).unwrap();
    let want = eval_kind(EllipticKind::Sn, C64::new(0.0, 0.5), &Parameter::real(0.5).unwrap()).unwrap();
    assert!(rel_err(lhs, want) < 1e-14);

    let e18 = set.get("S2.E18").unwrap();
    let sd = eval_kind(EllipticKind::Sd, c(0.4), &Parameter::real(0.5).unwrap()).unwrap();
    let rhs = eval_rhs(e18, c(0.4), c(0.5), &none()).unwrap();
    assert!(rel_err(rhs, C64::new(0.0, 0.5f64.sqrt()) * sd) < 1e-14);

    let e4 = set.get("S2.E4").unwrap();
    assert!(rel_err(eval_rhs(e4, ZERO, c(0.3), &none()).unwrap(), ONE) < 1e-15);

    let e27 = set.get("S2.E27").unwrap();
    let eps = none().with(BranchSymbol::Eps, 1);
    let p = Parameter::real(0.5).unwrap();
    let want = (c(0.5f64.sqrt()) - ONE)
        * eval_kind(EllipticKind::Cd, c(0.3), &p).unwrap()
        * eval_kind(EllipticKind::Sn, c(0.3), &p).unwrap();
    assert!(rel_err(eval_rhs(e27, c(0.3), c(0.5), &eps).unwrap(), want) < 1e-14);
}

#[test]
fn sn_rules_without_phase_vanish_at_origin() {
    let set = RuleSet::shipped();
    for r in set.rules.iter().filter(|r| r.base_kind == EllipticKind::Sn && r.phase_offset.source() == "0") {
        for br in BranchAssignment::all(&r.branch_params) {
            if let Ok(v) = eval_lhs(r, ZERO, c(0.3), &br) {
                assert!(v.norm() < 1e-14, "{} {br}: {v}", r.id);
            }
        }
    }
}

#[test]
fn reciprocal_rule_passes_and_its_defect_fails() {
    let set = RuleSet::shipped();
    let cfg = VerifyConfig::default();
    let e3 = set.get("S2.E3").unwrap();
    let ok = verify_rule(e3, c(0.7), &none(), 200, &cfg).unwrap();
    assert_eq!(ok.status, Status::Pass);
    assert!(ok.max_rel_err < 1e-8);
    let bad = verify_rule(&e3.perturbed(1e-6), c(0.7), &none(), 200, &cfg).unwrap();
    assert_eq!(bad.status, Status::Fail);
}

#[test]
fn complex_new_parameter_rule_passes() {
    let set = RuleSet::shipped();
    let r = verify_rule(
        set.get("S2.E36").unwrap(),
        c(0.5),
        &none().with(BranchSymbol::Eps, 1),
        200,
        &VerifyConfig::default(),
    )
    .unwrap();
    assert_eq!(r.status, Status::Pass, "{r:?}");
    // (e^{3 pi i/4})^4
    let m = C64::from(r.new_param.unwrap());
    assert!((m + ONE).norm() < 1e-12, "{m}");
}

#[test]
fn printed_forms_with_errata_fail() {
    let set = RuleSet::shipped();
    let cfg = VerifyConfig::default();
    let mut n = 0;
    for r in &set.rules {
        let Some(pr) = r.printed_variant() else { continue };
        n += 1;
        let failed = [0.2, 0.5, 0.8].iter().any(|&k| {
            BranchAssignment::all(&pr.branch_params)
                .iter()
                .any(|br| verify_rule(&pr, c(k), br, 50, &cfg).map_or(true, |rep| rep.status == Status::Fail))
        });
        assert!(failed, "printed form of {} holds", r.id);
    }
    assert!(n >= 10);
}

#[test]
fn reciprocal_swap_composes_to_identity() {
    let set = RuleSet::shipped();
    let (e4, e5) = (set.get("S2.E4").unwrap(), set.get("S2.E5").unwrap());
    for k in [0.2f64, 0.5, 0.8] {
        let rk = k.sqrt();
        for i in 0..20 {
            let x = C64::new(-1.0 + 0.1 * i as f64, 0.05 * i as f64 - 0.4);
            let cn_inv = eval_lhs(e4, x, c(k), &none()).unwrap();
            let back = eval_rhs(e5, c(rk) * x, c(1.0 / k), &none()).unwrap();
            assert!(rel_err(cn_inv, back) < 1e-8);
            let dn_k = eval_rhs(e4, x, c(k), &none()).unwrap();
            let there = eval_lhs(e5, c(rk) * x, c(1.0 / k), &none()).unwrap();
            assert!(rel_err(dn_k, there) < 1e-8);
        }
    }
}

#[test]
fn phase_shifts_reproduce_sign_factors() {
    let set = RuleSet::shipped();
    let x = C64::new(0.31, 0.07);
    for n in 6..=14 {
        let r = set.get(&format!("S2.E{n}")).unwrap();
        let base = none().with(BranchSymbol::P, 0).with(BranchSymbol::Q, 0);
        let l0 = eval_lhs(r, x, c(0.4), &base).unwrap();
        let r0 = eval_rhs(r, x, c(0.4), &base).unwrap();
        for (p, q) in [(0, 1), (1, 0), (1, 1)] {
            let br = none().with(BranchSymbol::P, p).with(BranchSymbol::Q, q);
            let lr = eval_lhs(r, x, c(0.4), &br).unwrap() / l0;
            let rr = eval_rhs(r, x, c(0.4), &br).unwrap() / r0;
            assert!((lr - rr).norm() < 1e-10, "{} p={p} q={q}", r.id);
            assert!((lr.norm() - 1.0).abs() < 1e-10 && lr.im.abs() < 1e-10, "{}: factor {lr}", r.id);
        }
    }
}

#[test]
fn equivalents_by_base_kind() {
    let set = RuleSet::shipped();
    let ids = |k| find_equivalents(k, &set).into_iter().map(|(id, _)| id).collect::<Vec<_>>();
    let sn = ids(EllipticKind::Sn);
    for id in ["S2.E3", "S2.E6", "S2.E9", "S2.E15", "S2.E18"] {
        assert!(sn.iter().any(|s| s == id), "{id}");
    }
    assert!(ids(EllipticKind::Dn).iter().any(|s| s == "S2.E5"));
    assert!(ids(EllipticKind::Cs).is_empty());
}

#[test]
fn empty_grid_gives_no_reports() {
    assert!(verify_all(&RuleSet::shipped(), &[], 10, &VerifyConfig::default()).is_empty());
}

#[test]
fn one_defective_rule_gives_one_failure() {
    let set = RuleSet::shipped();
    let broken = set.replacing(set.get("S2.E16").unwrap().perturbed(1e-6));
    let reports = verify_all(&broken, &[c(0.5)], 50, &VerifyConfig::default());
    let failed: Vec<_> = reports.iter().filter(|r| r.status == Status::Fail).collect();
    assert_eq!(failed.len(), 1, "{failed:?}");
    assert_eq!(failed[0].rule_id, "S2.E16");
}

#[test]
fn clean_sweep_on_real_grid() {
    let reports = verify_all(&RuleSet::shipped(), &[c(0.2), c(0.5), c(0.8)], 60, &VerifyConfig::default());
    let fails: Vec<_> = reports.iter().filter(|r| r.status == Status::Fail).collect();
    assert!(fails.is_empty(), "{fails:#?}");
    for r in reports.iter().filter(|r| r.status == Status::Skipped) {
        assert!(r.reason.is_some());
    }
}
