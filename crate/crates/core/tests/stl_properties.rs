use proptest::prelude::*;
use stl_grid_miner::stl::{eval_bool, eval_robust, parse, Aggregate, Comparison, Formula};
use stl_grid_miner::Trace;

fn comparison() -> impl Strategy<Value = Comparison> {
    prop_oneof![
        Just(Comparison::Lt),
        Just(Comparison::Le),
        Just(Comparison::Gt),
        Just(Comparison::Ge)
    ]
}

fn window() -> impl Strategy<Value = (f64, f64)> {
    (0u32..40, 0u32..16).prop_map(|(a, w)| (a as f64 * 0.5, (a + w) as f64 * 0.5))
}

fn formula() -> impl Strategy<Value = Formula> {
    let atom = prop_oneof![
        (comparison(), 0.0..10.0f64).prop_map(|(op, c)| Formula::atom(op, c)),
        (window(), comparison(), 0.0..60.0f64)
            .prop_map(|((a, b), op, c)| Formula::agg(a, b, Aggregate::Int, op, c)),
        (window(), prop::bool::ANY, comparison(), 0.0..10.0f64).prop_map(|((a, b), max, op, c)| {
            let agg = if max { Aggregate::Max } else { Aggregate::Min };
            Formula::agg(a, b + 0.5, agg, op, c)
        }),
    ];
    atom.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.and(b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.or(b)),
            (window(), inner.clone()).prop_map(|((a, b), f)| Formula::globally(a, b, f)),
            (window(), inner.clone()).prop_map(|((a, b), f)| Formula::eventually(a, b, f)),
            (window(), inner.clone(), inner).prop_map(|((a, b), f, g)| Formula::until(a, b, f, g)),
        ]
    })
}

fn day() -> impl Strategy<Value = Trace> {
    prop::collection::vec(0.0..10.0f64, 48).prop_map(|v| Trace::new(v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn printed_formulas_reparse_identically(f in formula()) {
        let text = f.to_string();
        prop_assert_eq!(parse(&text).unwrap(), f, "{}", text);
    }

    #[test]
    fn robustness_sign_matches_verdict(f in formula(), trace in day()) {
        if let (Ok(b), Ok(r)) = (eval_bool(&f, &trace, 0.0), eval_robust(&f, &trace, 0.0)) {
            if r.abs() > 1e-9 {
                prop_assert_eq!(b, r > 0.0, "{} rho={}", f, r);
            }
        }
    }

    #[test]
    fn negation_is_antisymmetric(f in formula(), trace in day()) {
        if let Ok(r) = eval_robust(&f, &trace, 0.0) {
            prop_assert_eq!(eval_robust(&f.clone().not(), &trace, 0.0).unwrap(), -r);
            let b = eval_bool(&f, &trace, 0.0).unwrap();
            prop_assert_eq!(eval_bool(&f.not(), &trace, 0.0).unwrap(), !b);
        }
    }

    #[test]
    fn globally_eventually_duality(f in formula(), (a, b) in window(), trace in day()) {
        let g = Formula::globally(a, b, f.clone());
        let dual = Formula::eventually(a, b, f.not()).not();
        match (eval_robust(&g, &trace, 0.0), eval_robust(&dual, &trace, 0.0)) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "{:?} vs {:?}", x, y),
        }
    }

    #[test]
    fn later_start_times_stay_consistent(f in formula(), trace in day(), t in 0u32..48) {
        let t = t as f64;
        if let (Ok(b), Ok(r)) = (eval_bool(&f, &trace, t), eval_robust(&f, &trace, t)) {
            if r.abs() > 1e-9 {
                prop_assert_eq!(b, r > 0.0);
            }
        }
    }
}
