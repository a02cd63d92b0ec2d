use jacobi_core::complex::{C64, ONE};
use jacobi_core::{eval_base, eval_kind, ode_oracle, EllipticError, EllipticKind, Parameter};
use proptest::prelude::*;

fn param() -> impl Strategy<Value = C64> {
    prop_oneof![
        (0.01f64..0.99).prop_map(|l| C64::new(l, 0.0)),
        (-0.5f64..0.9, -0.5f64..0.5).prop_map(|(a, b)| C64::new(a, b)),
    ]
}

fn arg() -> impl Strategy<Value = C64> {
    (-3.0f64..3.0, -0.8f64..0.8).prop_map(|(a, b)| C64::new(a, b))
}

fn ok_or_near_pole<T>(r: Result<T, EllipticError>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(EllipticError::NearPole { .. }) => None,
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn fundamental_identities(l in param(), x in arg()) {
        let p = Parameter::new(l).unwrap();
        if let Some([s, c, d]) = ok_or_near_pole(eval_base(x, &p)) {
            let scale = s.norm().max(1.0).powi(2);
            prop_assert!((s * s + c * c - ONE).norm() < 1e-10 * scale);
            prop_assert!((d * d + l * s * s - ONE).norm() < 1e-10 * scale);
        }
    }

    #[test]
    fn parity(l in param(), x in arg()) {
        let p = Parameter::new(l).unwrap();
        if let (Some(a), Some(b)) = (ok_or_near_pole(eval_base(x, &p)), ok_or_near_pole(eval_base(-x, &p))) {
            let tol = 1e-11 * a[0].norm().max(1.0);
            prop_assert!((a[0] + b[0]).norm() < tol);
            prop_assert!((a[1] - b[1]).norm() < tol);
            prop_assert!((a[2] - b[2]).norm() < tol);
        }
    }

    #[test]
    fn sn_derivative_is_cn_dn(l in param(), x in arg()) {
        let p = Parameter::new(l).unwrap();
        let h = C64::new(1e-5, 0.0);
        let near = p.pole_radius() * 100.0;
        let lat = jacobi_core::elliptic_core::Lattice::of(&p);
        prop_assume!(lat.pole_distance(EllipticKind::Sn, x) > near);
        let [_, c, d] = eval_base(x, &p).unwrap();
        let sp = eval_kind(EllipticKind::Sn, x + h, &p).unwrap();
        let sm = eval_kind(EllipticKind::Sn, x - h, &p).unwrap();
        let fd = (sp - sm) / (2.0 * h);
        prop_assert!((fd - c * d).norm() < 1e-6 * (c * d).norm().max(1.0));
    }

    #[test]
    fn reciprocal_kinds(l in param(), x in arg()) {
        let p = Parameter::new(l).unwrap();
        let lat = jacobi_core::elliptic_core::Lattice::of(&p);
        let r = p.pole_radius() * 10.0;
        prop_assume!(EllipticKind::ALL.iter().all(|k| lat.pole_distance(*k, x) > r));
        let [s, c, d] = eval_base(x, &p).unwrap();
        let sc = eval_kind(EllipticKind::Sc, x, &p).unwrap();
        let nd = eval_kind(EllipticKind::Nd, x, &p).unwrap();
        prop_assert!((sc * c - s).norm() < 1e-10 * s.norm().max(1.0));
        prop_assert!((nd * d - ONE).norm() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn theta_engine_matches_ode(l in param(), a in -1.5f64..1.5, b in -0.4f64..0.4) {
        let p = Parameter::new(l).unwrap();
        let x = C64::new(a, b);
        let init = [C64::new(0.0, 0.0), ONE, ONE];
        let (Some(v), Some(o)) = (ok_or_near_pole(eval_base(x, &p)), ode_oracle(x, &p, init).ok()) else {
            return Ok(());
        };
        for i in 0..3 {
            prop_assert!((v[i] - o[i]).norm() < 1e-8 * v[i].norm().max(1.0), "{i}: {} vs {}", v[i], o[i]);
        }
    }
}
