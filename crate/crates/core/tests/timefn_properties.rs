use std::f64::consts::PI;

use delaystab::timefn::{self, Coefficient, Delay, SupOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Adaptive Simpson, independent of the library's closed forms.
fn quad<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = (simpson(f, a, m), simpson(f, m, b));
        if depth == 0 || (l + r - whole).abs() <= 15.0 * tol {
            return l + r + (l + r - whole) / 15.0;
        }
        rec(f, a, m, l, tol / 2.0, depth - 1) + rec(f, m, b, r, tol / 2.0, depth - 1)
    }
    // split at unit points so piecewise jumps sit on panel edges
    let mut total = 0.0;
    let mut lo = a;
    while lo < b {
        let hi = (lo.floor() + 1.0).min(b);
        total += rec(f, lo, hi, simpson(f, lo, hi), 1e-14, 50);
        lo = hi;
    }
    total
}

fn coefficient() -> impl Strategy<Value = Coefficient> {
    prop_oneof![
        (0.0..3.0f64).prop_map(|v| Coefficient::constant(v).unwrap()),
        (0.0..3.0f64, 0.2..4.0f64, -2.0..2.0f64).prop_map(|(a, w, p)| Coefficient::sin_sq(a, w, p).unwrap()),
        (0.0..2.0f64, 0.0..2.0f64, 0.0..2.0f64)
            .prop_map(|(u, v, w)| Coefficient::piecewise(vec![1.0, 3.0], vec![u, v, w]).unwrap()),
        (0.0..2.0f64, 0.0..2.0f64)
            .prop_map(|(u, v)| Coefficient::periodic_piecewise(vec![1.0], vec![u, v], 2.0).unwrap()),
        (0.0..3.0f64, 0.5..2.0f64, 0.0..1.0f64).prop_map(|(k, w, c)| {
            let s = Coefficient::sin_sq(1.0, w, 0.0).unwrap().scaled(k).unwrap();
            Coefficient::sum(&[s, Coefficient::constant(c).unwrap()]).unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn window_integral_matches_quadrature(c in coefficient(), lag in 0.0..4.0f64, t in -3.0..10.0f64) {
        let got = timefn::window_integral(&c, &Delay::lag(lag).unwrap(), t).unwrap();
        let want = quad(&|s| c.value(s), t - lag, t);
        prop_assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "{got} vs {want}");
    }

    #[test]
    fn antiderivative_matches_quadrature(c in coefficient(), t1 in -3.0..6.0f64, len in 0.0..5.0f64) {
        let got = c.antiderivative(t1 + len) - c.antiderivative(t1);
        let want = quad(&|s| c.value(s), t1, t1 + len);
        prop_assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0));
    }

    #[test]
    fn values_are_nonnegative(c in coefficient(), t in -50.0..50.0f64) {
        prop_assert!(c.value(t) >= 0.0);
    }

    #[test]
    fn scaling_scales_every_operation(k in 0.0..5.0f64, w in 0.5..3.0f64, lag in 0.1..3.0f64) {
        let c = Coefficient::sin_sq(1.0, w, 0.3).unwrap();
        let kc = c.scaled(k).unwrap();
        let opts = SupOptions::default();
        let (h, g) = (Delay::lag(lag).unwrap(), Delay::lag(lag + 0.4).unwrap());
        let close = |a: f64, b: f64| (a - k * b).abs() <= 1e-12 * (k * b).abs().max(1e-12);
        prop_assert!(close(timefn::window_integral(&kc, &h, 1.7).unwrap(), timefn::window_integral(&c, &h, 1.7).unwrap()));
        prop_assert!(close(
            timefn::sup_window_integral(&kc, &h, 0.0, &opts).unwrap().value,
            timefn::sup_window_integral(&c, &h, 0.0, &opts).unwrap().value
        ));
        prop_assert!(close(
            timefn::sup_between_delays(&kc, &h, &g, 0.0, &opts).unwrap().value,
            timefn::sup_between_delays(&c, &h, &g, 0.0, &opts).unwrap().value
        ));
        prop_assert!(close(
            timefn::liminf_forward_integral(&kc, 1.0, 0.0, &opts).unwrap().value,
            timefn::liminf_forward_integral(&c, 1.0, 0.0, &opts).unwrap().value
        ));
    }

    #[test]
    fn periodic_windows_repeat(a in 0.1..3.0f64, w in 0.2..4.0f64, lag in 0.0..4.0f64, t in 0.0..10.0f64) {
        let c = Coefficient::sin_sq(a, w, 0.0).unwrap();
        let period = PI / w;
        prop_assert!((c.value(t + period) - c.value(t)).abs() <= 1e-12);
        let d = Delay::lag(lag).unwrap();
        let (w0, w1) = (timefn::window_integral(&c, &d, t).unwrap(), timefn::window_integral(&c, &d, t + period).unwrap());
        prop_assert!((w0 - w1).abs() <= 1e-12 * w0.abs().max(1.0));
    }

    #[test]
    fn sup_is_monotone_in_lag(c in coefficient(), lag in 0.0..3.0f64, extra in 0.0..1.0f64) {
        let opts = SupOptions { horizon: Some(20.0), ..SupOptions::default() };
        let s1 = timefn::sup_window_integral(&c, &Delay::lag(lag).unwrap(), 0.0, &opts).unwrap().value;
        let s2 = timefn::sup_window_integral(&c, &Delay::lag(lag + extra).unwrap(), 0.0, &opts).unwrap().value;
        prop_assert!(s2 >= s1 - 1e-12, "{s1} > {s2}");
    }
}

#[test]
fn sup_dominates_ten_thousand_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let opts = SupOptions::default();
    let cases = [
        (Coefficient::sin_sq(1.0, 1.0, 0.0).unwrap(), Delay::lag(2.0).unwrap()),
        (Coefficient::sin_sq(0.4, PI, 0.2).unwrap(), Delay::lag(0.7).unwrap()),
        (Coefficient::periodic_piecewise(vec![0.3], vec![2.0, 0.5], 1.0).unwrap(), Delay::lag(0.45).unwrap()),
    ];
    for (c, d) in &cases {
        let sup = timefn::sup_window_integral(c, d, 0.0, &opts).unwrap().value;
        for _ in 0..10_000 {
            let t = rng.gen_range(0.0..200.0);
            assert!(timefn::window_integral(c, d, t).unwrap() <= sup + 1e-12);
        }
    }
}

#[test]
fn general_delays_respect_lag_bound() {
    let d = Delay::general("t - 0.5(1 + sin t)", 1.0, |t| t - 0.5 * (1.0 + t.sin())).unwrap();
    for i in 0..1000 {
        let t = i as f64 * 0.05;
        let lag = t - d.checked_at(t).unwrap();
        assert!((0.0..=1.0).contains(&lag));
    }
}
