use std::f64::consts::PI;

use delaystab::criteria::{CriteriaOptions, LinearDelayEquation, Verdict};
use delaystab::models::{check_les_production, check_les_removal, MackeyGlassProduction, MackeyGlassRemoval};
use delaystab::timefn::{Coefficient, Delay};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn removal(beta: f64, gamma: f64, n: f64) -> MackeyGlassRemoval {
    MackeyGlassRemoval {
        r: Coefficient::sin_sq(4.0, PI, 0.0).unwrap(),
        beta,
        gamma,
        n,
        g: Delay::lag(1.1).unwrap(),
        h: Delay::lag(1.0).unwrap(),
    }
}

fn production(beta: f64, n: f64) -> MackeyGlassProduction {
    MackeyGlassProduction {
        s: Coefficient::sin_sq(0.1, PI, 0.0).unwrap(),
        beta,
        n,
        p: Delay::lag(3.0).unwrap(),
        q: Delay::lag(6.0).unwrap(),
    }
}

/// Coefficient multiplying `x(d)` in `ẋ = …`: negative terms enter with `+`, positive with `−`.
fn slope(eq: &LinearDelayEquation, d: &Delay, t: f64) -> f64 {
    let pos: f64 = eq.positive_terms().iter().filter(|k| &k.delay == d).map(|k| k.coeff.value(t)).sum();
    let neg: f64 = eq.negative_terms().iter().filter(|k| &k.delay == d).map(|k| k.coeff.value(t)).sum();
    neg - pos
}

fn central<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
    let h = 1e-6 * x.abs().max(1.0);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-3)
}

#[test]
fn right_hand_sides_vanish_at_equilibria() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let beta = rng.gen_range(0.2..5.0);
        let m = removal(beta, beta / rng.gen_range(1.01..5.0), rng.gen_range(0.5..10.0));
        let x = m.equilibrium().unwrap();
        assert!((m.r.value(0.37) * m.rate(x, x)).abs() < 1e-12, "{m:?}");

        let p = production(rng.gen_range(1.01..6.0), rng.gen_range(0.5..20.0));
        let x = p.equilibrium().unwrap();
        assert!((p.s.value(0.37) * p.rate(x, x, x)).abs() < 1e-12, "{p:?}");
    }
}

#[test]
fn linearizations_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let t = rng.gen_range(0.0..3.0);
        let beta = rng.gen_range(0.5..4.0);
        let m = removal(beta, beta / rng.gen_range(1.05..3.0), rng.gen_range(0.5..6.0));
        let x = m.equilibrium().unwrap();
        let lin = m.linearize().unwrap();
        let r = m.r.value(t);
        let d_h = central(|y| r * m.rate(x, y), x);
        let d_g = central(|y| r * m.rate(y, x), x);
        assert!(rel_close(slope(&lin, &m.h, t), d_h, 1e-6), "{m:?}");
        assert!(rel_close(slope(&lin, &m.g, t), d_g, 1e-6), "{m:?}");

        let p = production(rng.gen_range(1.1..5.0), rng.gen_range(0.5..15.0));
        let x = p.equilibrium().unwrap();
        let lin = p.linearize().unwrap();
        let s = p.s.value(t);
        assert!(rel_close(slope(&lin, &Delay::Identity, t), central(|y| s * p.rate(y, x, x), x), 1e-6));
        assert!(rel_close(slope(&lin, &p.p, t), central(|y| s * p.rate(x, y, x), x), 1e-6));
        assert!(rel_close(slope(&lin, &p.q, t), central(|y| s * p.rate(x, x, y), x), 1e-6));
    }
}

#[test]
fn scaling_beta_and_gamma_together() {
    let opts = CriteriaOptions::default();
    let base = removal(1.25, 1.0, 2.0);
    let c0 = check_les_removal(&base, &opts).unwrap();
    for c in [0.5, 0.9, 1.7, 3.0] {
        let m = removal(1.25 * c, c, 2.0);
        let cert = check_les_removal(&m, &opts).unwrap();
        let ratio = |k: &delaystab::criteria::Certificate| k.checks.iter().find(|x| x.description == "beta/gamma > 1").unwrap().lhs;
        assert!((ratio(&cert) - ratio(&c0)).abs() <= 1e-15);
        let (a0, b0) = (c0.quantity("a").unwrap(), c0.quantity("b").unwrap());
        let (a, b) = (cert.quantity("a").unwrap(), cert.quantity("b").unwrap());
        assert!(rel_close(a - b, c * (a0 - b0), 1e-12));
        assert!(rel_close(a + b, c * (a0 + b0), 1e-12));
    }
}

#[test]
fn vanishing_nonlinearity_is_certified() {
    let cert = check_les_production(&production(2.0, 1e-6), &CriteriaOptions::default()).unwrap();
    assert_eq!(cert.verdict, Verdict::UniformExponential);
    assert_eq!(cert.case, Some(1));
}

#[test]
fn equilibria_need_the_right_parameters() {
    assert!(removal(1.0, 1.0, 2.0).equilibrium().is_err());
    assert!(production(1.0, 2.0).equilibrium().is_err());
    assert!((removal(2.0, 1.0, 1.0).equilibrium().unwrap() - 1.0).abs() < 1e-15);
}
