//! Window integrals and their suprema for periodic and eventually-constant coefficients.

use delaystab::timefn::{self, Coefficient, Delay, SupOptions};

fn main() -> delaystab::Result<()> {
    let opts = SupOptions::default();
    let r = Coefficient::sin_sq(1.0, 1.0, 0.0)?;
    let lag2 = Delay::lag(2.0)?;
    for t in [0.0, 1.0, 2.5] {
        println!("∫_(t-2)^t sin² at t = {t}: {:.6}", timefn::window_integral(&r, &lag2, t)?);
    }
    let sup = timefn::sup_window_integral(&r, &lag2, 0.0, &opts)?;
    println!("sup over t: {:.9} at t = {:.4} (closed form {:.9})", sup.value, sup.at, 1.0 + 0.5 * 2f64.sin());

    // gap between two delays, |∫_(t-1.1)^(t-1) sin²(πs) ds|
    let rp = Coefficient::sin_sq(1.0, std::f64::consts::PI, 0.0)?;
    let gap = timefn::sup_between_delays(&rp, &Delay::lag(1.0)?, &Delay::lag(1.1)?, 0.0, &opts)?;
    println!("gap sup for sigma 1.1: {:.6}", gap.value);

    // a coefficient that switches off at t = 5 is analysed over a finite horizon
    let step = Coefficient::piecewise(vec![5.0], vec![1.0, 0.2])?;
    let s = timefn::sup_window_integral(&step, &Delay::lag(1.0)?, 0.0, &opts)?;
    println!("piecewise: sup {:.3}, horizon limited: {}", s.value, s.horizon_limited);
    Ok(())
}
