use std::collections::BTreeMap;

use delaystab::criteria::{
    check_diff_form, check_ratio_form, evaluate_all, reduce, Certificate, CriteriaOptions, LinearDelayEquation,
    Term, Verdict,
};
use delaystab::models::{builtin, Model};
use delaystab::timefn::{Coefficient, Delay, MARGINAL_TOL};
use proptest::prelude::*;

fn constant_pair(a: f64, h: f64, b: f64, g: f64) -> LinearDelayEquation {
    LinearDelayEquation::two_term(
        Coefficient::constant(a).unwrap(),
        Delay::lag(h).unwrap(),
        Coefficient::constant(b).unwrap(),
        Delay::lag(g).unwrap(),
    )
    .unwrap()
}

fn assert_sound(c: &Certificate) {
    assert!(c.is_sound(), "{c:?}");
    match c.verdict {
        Verdict::UniformExponential | Verdict::Asymptotic => {
            assert!(c.checks.iter().all(|k| k.satisfied && (k.margin > MARGINAL_TOL || !k.strict)), "{c:?}")
        }
        Verdict::Inconclusive => assert!(c.checks.iter().any(|k| !k.satisfied), "{c:?}"),
        Verdict::Marginal => assert!(c.checks.iter().any(|k| k.is_marginal())),
    }
    for k in &c.checks {
        assert_eq!(k.relation.margin(k.lhs, k.rhs).to_bits(), k.margin.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn certificates_are_sound(
        a in 0.05..2.0f64, frac in 0.0..1.0f64, h in 0.0..2.0f64, g in 0.0..2.0f64, periodic in any::<bool>(),
    ) {
        let eq = if periodic {
            let r = Coefficient::sin_sq(1.0, 1.3, 0.0).unwrap();
            LinearDelayEquation::scalar_pair(&r, a, Delay::lag(h).unwrap(), a * frac, Delay::lag(g).unwrap()).unwrap()
        } else {
            constant_pair(a, h, a * frac, g)
        };
        for c in evaluate_all(&eq, &CriteriaOptions::default()) {
            assert_sound(&c);
        }
    }

    // with g above h a longer h narrows the gap between the delays, which can help
    #[test]
    fn longer_removal_lag_never_helps(a in 0.1..2.0f64, frac in 0.0..0.9f64, h in 0.0..1.5f64, dh in 0.0..0.5f64, gs in 0.0..1.0f64) {
        let opts = CriteriaOptions::default();
        let g = gs * h;
        let short = evaluate_all(&constant_pair(a, h, a * frac, g), &opts);
        let long = evaluate_all(&constant_pair(a, h + dh, a * frac, g), &opts);
        for l in &long {
            if l.verdict.is_stable() {
                let s = short.iter().find(|s| s.criterion == l.criterion).unwrap();
                prop_assert!(s.verdict.is_stable(), "{:?} certified at lag {} but not at {}", l.criterion, h + dh, h);
            }
        }
    }

    #[test]
    fn quantities_depend_only_on_window_integrals(c in 0.3..4.0f64, a in 0.1..1.5f64, frac in 0.0..0.9f64) {
        // r(t) over lags (2, 0.5) against c·r(ct) over lags (2/c, 0.5/c)
        let opts = CriteriaOptions::default();
        let base = Coefficient::sin_sq(1.0, 1.0, 0.0).unwrap();
        let fast = Coefficient::sin_sq(c, c, 0.0).unwrap();
        let e1 = LinearDelayEquation::scalar_pair(&base, a, Delay::lag(2.0).unwrap(), a * frac, Delay::lag(0.5).unwrap()).unwrap();
        let e2 = LinearDelayEquation::scalar_pair(&fast, a, Delay::lag(2.0 / c).unwrap(), a * frac, Delay::lag(0.5 / c).unwrap()).unwrap();
        for (x, y) in [(check_diff_form(&e1, &opts).unwrap(), check_diff_form(&e2, &opts).unwrap()),
                       (check_ratio_form(&e1, &opts).unwrap(), check_ratio_form(&e2, &opts).unwrap())] {
            prop_assert_eq!(x.verdict, y.verdict);
            for q in &x.quantities {
                if let Some(v) = y.quantity(&q.symbol) {
                    prop_assert!((q.value - v).abs() <= 1e-9 * q.value.abs().max(1.0), "{} {} vs {}", q.symbol, q.value, v);
                }
            }
        }
    }
}

#[test]
fn reduced_pair_brackets_every_delay() {
    let pos = vec![
        Term::new(Coefficient::constant(0.5).unwrap(), Delay::lag(0.7).unwrap()),
        Term::new(Coefficient::constant(0.4).unwrap(), Delay::lag(1.9).unwrap()),
    ];
    let neg = vec![
        Term::new(Coefficient::constant(0.2).unwrap(), Delay::lag(0.3).unwrap()),
        Term::new(Coefficient::constant(0.1).unwrap(), Delay::lag(2.5).unwrap()),
    ];
    let eq = LinearDelayEquation::new(pos, neg, vec![], 0.0).unwrap();
    let p = reduce(&eq).unwrap();
    for i in 0..200 {
        let t = i as f64 * 0.1;
        let lo = p.h.at(t).min(p.g.at(t));
        let hi = p.h_max.at(t).max(p.g_max.at(t));
        assert!(p.r.at(t) <= lo && lo <= hi && hi <= p.r_max.at(t));
    }
    assert!((p.a.value(3.0) - 0.9).abs() < 1e-15);
    assert!((p.b.value(3.0) - 0.3).abs() < 1e-15);
}

#[test]
fn builtin_equation_three_has_documented_shape() {
    let sc = builtin("eq3", &BTreeMap::from([("b".to_string(), 0.3)])).unwrap();
    let Model::Linear { equation } = sc.model else { panic!() };
    assert_eq!(equation.positive_terms().len(), 1);
    assert_eq!(equation.positive_terms()[0].delay.constant_lag(), Some(2.0));
    assert!(equation.negative_terms()[0].delay.is_identity());
}

#[test]
fn worked_pairs_have_expected_patterns() {
    let opts = CriteriaOptions::default();
    let linear = |name: &str| match builtin(name, &BTreeMap::new()).unwrap().model {
        Model::Linear { equation } => equation,
        _ => unreachable!(),
    };
    let (e26, e27) = (linear("eq26"), linear("eq27"));
    assert_eq!(check_diff_form(&e26, &opts).unwrap().verdict, Verdict::UniformExponential);
    assert_eq!(check_ratio_form(&e26, &opts).unwrap().verdict, Verdict::Inconclusive);
    assert_eq!(check_diff_form(&e27, &opts).unwrap().verdict, Verdict::Inconclusive);
    assert_eq!(check_ratio_form(&e27, &opts).unwrap().verdict, Verdict::UniformExponential);
}
