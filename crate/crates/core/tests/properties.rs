//! Property tests over seeded scenarios and small measures.

use proptest::prelude::*;

use splitlift::harness::oracle::oracle_modification;
use splitlift::harness::{exit_code, gen_random_with, run_suite, RandomSpec, Scenario, Suite, SuiteOptions};
use splitlift::lifting::{enumerate_liftings, verify_lifting};
use splitlift::measure::conditional_expectation_with;
use splitlift::process::{modify_process, verify_modification, Process};
use splitlift::split_chain::{chain_construct, chain_construct_with, general_split, LimitOptions};
use splitlift::{generate_algebra, AnchorLifting, Event, FiniteSpace, Measure, Rational, SimpleFunction};

fn measure_strategy() -> impl Strategy<Value = Measure> {
    (1usize..=5)
        .prop_flat_map(|n| proptest::collection::vec(0i128..4, n))
        .prop_filter("some positive mass", |w| w.iter().any(|&v| v > 0))
        .prop_map(|w| {
            let total: i128 = w.iter().sum();
            let space = FiniteSpace::indexed(w.len()).unwrap();
            Measure::on_power_set(space, w.into_iter().map(|v| Rational::new(v, total)).collect()).unwrap()
        })
}

fn measure_and_anchor() -> impl Strategy<Value = (Measure, Vec<usize>)> {
    measure_strategy().prop_flat_map(|m| {
        let pos = m.positive_points();
        let n = m.len();
        let picks = proptest::collection::vec(0..pos.len(), n);
        (Just(m), picks).prop_map(move |(m, picks)| {
            let anchor = (0..n).map(|x| if m.is_positive_point(x) { x } else { pos[picks[x]] }).collect();
            (m, anchor)
        })
    })
}

fn scenario_strategy() -> impl Strategy<Value = Scenario> {
    (1usize..=3, 1usize..=3, 0usize..=1, 0usize..=1, any::<u64>(), any::<bool>()).prop_map(
        |(px, py, null_x, null_y, seed, free)| {
            let spec = RandomSpec {
                free_null_rcp: free,
                process: true,
                ..RandomSpec::new(px + null_x, py + null_y, null_x, null_y, seed)
            };
            gen_random_with(&spec, 16).unwrap()
        },
    )
}

fn rational() -> impl Strategy<Value = Rational> {
    (-20i128..=20, 1i128..=12).prop_map(|(n, d)| Rational::new(n, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rational_field_laws(a in rational(), b in rational(), c in rational()) {
        prop_assert_eq!(a + b, b + a);
        prop_assert_eq!((a + b) + c, a + (b + c));
        prop_assert_eq!(a * (b + c), a * b + a * c);
        prop_assert_eq!(a - a, Rational::ZERO);
        if !b.is_zero() {
            prop_assert_eq!(a / b * b, a);
        }
        prop_assert_eq!(a.to_string().parse::<Rational>().unwrap(), a);
    }

    #[test]
    fn event_boolean_laws(n in 1usize..=8, x in any::<u64>(), y in any::<u64>()) {
        let mask = (1u64 << n) - 1;
        let (a, b) = (Event::from_bits(n, x & mask).unwrap(), Event::from_bits(n, y & mask).unwrap());
        prop_assert_eq!((a | b).complement(), a.complement() & b.complement());
        prop_assert_eq!(a.sym_diff(&b), (a - b) | (b - a));
        prop_assert!(a.intersection(&b).is_subset(&a));
        prop_assert_eq!(a.count() + a.complement().count(), n);
    }

    #[test]
    fn anchor_maps_are_liftings((m, anchor) in measure_and_anchor()) {
        let l = AnchorLifting::new(m.clone(), anchor).unwrap();
        let rep = verify_lifting(&l);
        prop_assert!(rep.pass, "{}", rep);
        let back = AnchorLifting::from_table(&l.to_table()).unwrap();
        prop_assert_eq!(back.anchor(), l.anchor());
        prop_assert!(enumerate_liftings(&m).unwrap().any(|k| k.anchor() == l.anchor()));
    }

    #[test]
    fn conditional_expectation_preserves_integrals_on_the_subalgebra(
        m in measure_strategy(),
        gen_bits in any::<u64>(),
        vals in proptest::collection::vec(-6i128..=6, 5),
        null_value in rational(),
    ) {
        let n = m.len();
        let g = Event::from_bits(n, gen_bits & ((1u64 << n) - 1)).unwrap();
        let sub = generate_algebra(n, &[g]);
        let f = SimpleFunction::new(vals[..n].iter().map(|&v| Rational::from_int(v)).collect());
        let e = conditional_expectation_with(&f, &sub, &m, null_value).unwrap();
        prop_assert!(e.is_measurable(&sub));
        for c in sub.events() {
            let lhs = SimpleFunction::new((0..n).map(|i| if c.contains(i) { e.at(i) } else { Rational::ZERO }).collect());
            let rhs = SimpleFunction::new((0..n).map(|i| if c.contains(i) { f.at(i) } else { Rational::ZERO }).collect());
            prop_assert_eq!(lhs.integral(&m).unwrap(), rhs.integral(&m).unwrap());
        }
    }

    #[test]
    fn scenario_json_round_trips(s in scenario_strategy()) {
        let back = Scenario::parse(&s.to_json()).unwrap();
        prop_assert_eq!(back, s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn oracle_sweep_passes(s in scenario_strategy()) {
        let res = run_suite(&s, Suite::OracleSweep, &SuiteOptions::default());
        prop_assert_eq!(exit_code(&res), 0, "{:?}", res.map(|r| r.failed_laws().join(",")));
    }

    #[test]
    fn repaired_pipeline_passes(s in scenario_strategy()) {
        let opts = SuiteOptions { repair: true, ..SuiteOptions::default() };
        let res = run_suite(&s, Suite::SplitAc, &opts);
        prop_assert_eq!(exit_code(&res), 0, "{:?}", res.map(|r| r.failed_laws().join(",")));
    }

    #[test]
    fn chain_limit_ignores_the_version(s in scenario_strategy(), null_value in rational(), extra_k in 0u64..6) {
        let rcp = s.rcp_or_default().unwrap();
        let rho = s.rho_or_default().unwrap();
        let chain = s.chain_or_default();
        let base = chain_construct(&chain, &rcp, &s.r, &rho).unwrap();
        let other = chain_construct_with(&chain, &rcp, &s.r, &rho, LimitOptions { null_value, extra_k }).unwrap();
        prop_assert_eq!(other.phi_tilde, base.phi_tilde);
        prop_assert_eq!(other.tau_tilde, base.tau_tilde);
    }

    #[test]
    fn modification_is_idempotent(s in scenario_strategy(), vals in proptest::collection::vec(-9i128..=9, 16)) {
        let rcp = s.rcp_or_default().unwrap();
        let rho = s.rho_or_default().unwrap();
        let (nx, ny) = (s.product().nx(), s.product().ny());
        let rows = (0..ny).map(|y| (0..nx).map(|x| Rational::from_int(vals[y * nx + x])).collect()).collect();
        let xi = Process::new(rows).unwrap();
        let gs = general_split(&s.chain_or_default(), &rcp, &s.r, &rho).unwrap();
        let zeta = modify_process(&xi, &gs.split, &rcp).unwrap();
        prop_assert!(verify_modification(&xi, &zeta, &gs.split, &rcp).unwrap().pass);
        prop_assert!(oracle_modification(&xi, &zeta, &gs.split, &rcp).pass);
        prop_assert_eq!(modify_process(&zeta, &gs.split, &rcp).unwrap(), zeta);
    }
}
