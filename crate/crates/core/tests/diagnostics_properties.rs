use std::collections::BTreeMap;

use delaystab::criteria::{CriteriaOptions, LinearDelayEquation, Term};
use delaystab::diagnostics::{
    self, classify, find_threshold, fit_decay, fit_decay_samples, probe, Classification, Predicate,
    Probe, Simulation, ThresholdOptions, DEFAULT_TAIL_FRACTION,
};
use delaystab::models::builtin;
use delaystab::solver::{integrate, DelayRhs, HistoryFunction, IntegrateOptions, LinearRhs, Past};
use delaystab::timefn::{Coefficient, Delay};
use delaystab::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(p: &[(&str, f64)]) -> BTreeMap<String, f64> {
    p.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn single(a: f64, lag: f64) -> LinearDelayEquation {
    let d = if lag == 0.0 {
        Delay::Identity
    } else {
        Delay::lag(lag).unwrap()
    };
    LinearDelayEquation::new(
        vec![Term::new(Coefficient::constant(a).unwrap(), d)],
        vec![],
        vec![],
        0.0,
    )
    .unwrap()
}

/// `ẋ = −a x` for either sign of `a`.
struct Linear(f64);

impl DelayRhs for Linear {
    fn delays(&self) -> Vec<Delay> {
        vec![]
    }
    fn max_lag(&self) -> f64 {
        0.0
    }
    fn eval(&self, _t: f64, x: f64, _past: &Past<'_>) -> f64 {
        -self.0 * x
    }
}

fn simulate(rhs: &dyn DelayRhs, t1: f64) -> Simulation {
    match integrate(
        rhs,
        &HistoryFunction::constant(1.0),
        0.0,
        t1,
        &IntegrateOptions::with_step(0.01),
    ) {
        Ok(tr) => tr.into(),
        Err(Error::Divergence { time, trajectory }) => Simulation {
            trajectory: *trajectory,
            diverged_at: Some(time),
        },
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn classification_ignores_a_common_offset() {
    for r in [4.0, 8.5] {
        let sc = builtin("ex51", &params(&[("r", r)])).unwrap();
        let sim = Simulation::of_scenario(&sc, &IntegrateOptions::default()).unwrap();
        let base = classify(&sim, 0.5, DEFAULT_TAIL_FRACTION).unwrap();
        for c in [-3.0, 0.25, 10.0] {
            let mut shifted = sim.clone();
            shifted.trajectory.states.iter_mut().for_each(|x| *x += c);
            let moved = classify(&shifted, 0.5 + c, DEFAULT_TAIL_FRACTION).unwrap();
            assert_eq!(moved.classification, base.classification);
            assert!((moved.tail_amplitude - base.tail_amplitude).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_recovers_synthetic_envelopes(gamma in 0.05..2.0f64, omega in 0.5..5.0f64, m in 0.1..10.0f64) {
        let span = (12.0 / gamma).max(8.0 * std::f64::consts::PI / omega);
        let n = 40_000;
        let times: Vec<f64> = (0..=n).map(|i| span * i as f64 / n as f64).collect();
        let e: Vec<f64> = times.iter().map(|&t| m * (-gamma * t).exp() * (omega * t).cos().abs()).collect();
        let fit = fit_decay_samples(&times, &e, 0.0).unwrap();
        prop_assert!((fit.gamma_hat - gamma).abs() <= 0.01 * gamma, "{fit:?}");
        prop_assert!((fit.m_hat - m).abs() <= 0.01 * m, "{fit:?}");
    }
}

fn bisect_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(lo) < 0.0) == (f(mid) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn fitted_rates_match_characteristic_roots() {
    let opts = IntegrateOptions::with_step(1e-3);
    let ode = integrate(
        &LinearRhs::new(&single(1.0, 0.0)),
        &HistoryFunction::constant(1.0),
        0.0,
        20.0,
        &opts,
    )
    .unwrap();
    assert!((fit_decay(&ode, 0.0).unwrap().gamma_hat - 1.0).abs() < 1e-3);

    // slowest real mode of ẋ = −x(t − 0.3): μ = e^{0.3 μ}
    let mu = bisect_root(|m| m - (0.3 * m).exp(), 1.0, 2.0);
    let dde = integrate(
        &LinearRhs::new(&single(1.0, 0.3)),
        &HistoryFunction::constant(1.0),
        0.0,
        20.0,
        &opts,
    )
    .unwrap();
    let fit = fit_decay(&dde, 0.0).unwrap();
    assert!(
        (fit.gamma_hat - mu).abs() < 1e-2,
        "{} vs {mu}",
        fit.gamma_hat
    );

    let sc = builtin("eq3", &params(&[("b", 0.1)])).unwrap();
    let sim = Simulation::of_scenario(&sc, &IntegrateOptions::default()).unwrap();
    let rep = classify(&sim, 0.0, DEFAULT_TAIL_FRACTION).unwrap();
    assert_eq!(rep.classification, Classification::Decaying);
    assert!(
        rep.gamma_hat.unwrap() > 0.0 && rep.fit_quality.unwrap() > 0.9,
        "{rep:?}"
    );
}

#[test]
fn step_predicates_are_located() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..100 {
        let c: f64 = rng.gen_range(0.01..0.99);
        let opts = ThresholdOptions {
            tol: 1e-6,
            parallel_depth: i % 4,
        };
        let th = find_threshold(|x| Ok(Probe::flag(x, x < c)), 0.0, 1.0, &opts).unwrap();
        assert!((th.value - c).abs() <= 1e-6 && th.hi - th.lo <= 1e-6);
    }
}

// decay within a finite run needs e^{-0.75 a T} below the decay ratio, so the switch
// sits at ln(50)/(0.75 T) and approaches zero as the run grows
#[test]
fn empirical_decay_switches_near_zero_rate() {
    for horizon in [40.0, 400.0] {
        let th = find_threshold(
            |a| {
                let sim = simulate(&Linear(a), horizon);
                let rep = classify(&sim, 0.0, DEFAULT_TAIL_FRACTION)?;
                Ok(Probe::flag(
                    a,
                    rep.classification == Classification::Decaying,
                ))
            },
            -1.0,
            1.0,
            &ThresholdOptions {
                tol: 1e-3,
                parallel_depth: 2,
            },
        )
        .unwrap();
        let expected =
            (1.0 / diagnostics::DECAY_RATIO).ln() / ((1.0 - DEFAULT_TAIL_FRACTION) * horizon);
        assert!(
            (th.value - expected).abs() <= 2e-3,
            "{} vs {expected}",
            th.value
        );
    }
    assert_eq!(
        classify(&simulate(&Linear(-1.0), 40.0), 0.0, DEFAULT_TAIL_FRACTION)
            .unwrap()
            .classification,
        Classification::Growing
    );
}

#[test]
fn certificates_are_more_conservative_than_simulation() {
    let copts = CriteriaOptions::default();
    let iopts = IntegrateOptions::default();
    let search =
        |name: &'static str, param: &'static str, fixed: &[(&str, f64)], predicate, lo, hi| {
            let fixed = params(fixed);
            find_threshold(
                |v| {
                    let mut p = fixed.clone();
                    p.insert(param.into(), v);
                    probe(&builtin(name, &p)?, v, predicate, &copts, &iopts)
                },
                lo,
                hi,
                &ThresholdOptions {
                    tol: 1e-3,
                    parallel_depth: 2,
                },
            )
            .unwrap()
            .value
        };
    let cert = search("eq3", "b", &[], Predicate::CertificateBest, 0.0, 0.6);
    let onset = search("eq3", "b", &[], Predicate::Empirical, 0.0, 0.6);
    assert!(cert < onset && onset > 0.34, "{cert} vs {onset}");
    let cert = search(
        "ex51",
        "r",
        &[("sigma", 1.5)],
        Predicate::CertificateBest,
        0.1,
        8.0,
    );
    let onset = search(
        "ex51",
        "r",
        &[("sigma", 1.5)],
        Predicate::Empirical,
        1.0,
        8.0,
    );
    assert!(cert < onset, "{cert} vs {onset}");
}
