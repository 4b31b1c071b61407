//! Simulates both Mackey–Glass models and sets their behaviour beside the local certificates.

use std::collections::BTreeMap;

use delaystab::criteria::CriteriaOptions;
use delaystab::diagnostics::{classify, Simulation, DEFAULT_TAIL_FRACTION};
use delaystab::models::builtin;
use delaystab::solver::IntegrateOptions;

fn main() -> delaystab::Result<()> {
    let runs: [(&str, &[(&str, f64)]); 4] = [
        ("ex51", &[("r", 4.0)]),
        ("ex51", &[("r", 8.5)]),
        ("ex5", &[("n", 11.0)]),
        ("ex5", &[("n", 13.0), ("x0", 0.98), ("phi", 0.98)]),
    ];
    for (name, set) in runs {
        let params: BTreeMap<String, f64> = set.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let sc = builtin(name, &params)?;
        let eq = sc.model.equilibrium()?;
        let cert = sc.model.best_certificate(&CriteriaOptions::default())?;
        let sim = Simulation::of_scenario(&sc, &IntegrateOptions::default())?;
        let rep = classify(&sim, eq, DEFAULT_TAIL_FRACTION)?;
        println!(
            "{name} {set:?}: x* = {eq:.4}, certificate {:?}, simulated {:?} (tail amplitude {:.2e})",
            cert.verdict, rep.classification, rep.tail_amplitude
        );
    }
    Ok(())
}
