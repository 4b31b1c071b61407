//! The fundamental solution of `ẋ + a x(t − τ) = 0` and its weighted integral bound.

use delaystab::criteria::LinearDelayEquation;
use delaystab::solver::{fundamental_solution, verify_lemma3, IntegrateOptions};
use delaystab::timefn::{Coefficient, Delay};

fn main() -> delaystab::Result<()> {
    let opts = IntegrateOptions::with_step(0.001);
    for a in [0.2, 1.0 / std::f64::consts::E, 0.5] {
        let eq = LinearDelayEquation::new(
            vec![delaystab::criteria::Term::new(Coefficient::constant(a)?, Delay::lag(1.0)?)],
            vec![],
            vec![],
            0.0,
        )?;
        let x = fundamental_solution(&eq, 0.0, 10.0, &opts)?;
        let rep = verify_lemma3(&eq, 30.0, &opts)?;
        println!(
            "a τ = {a:.4}: X(10, 0) = {:.5}, positive {}, max ∫ X a = {:.5}",
            x.value_at(10.0),
            rep.positive,
            rep.max_integral
        );
    }
    Ok(())
}
