//! Bisection for the largest certified `b` in `ẋ + 0.6 sin² t · x(t − 2) − b sin² t · x(t) = 0`,
//! and for the empirical onset of oscillation in the removal model.

use std::collections::BTreeMap;

use delaystab::criteria::CriteriaOptions;
use delaystab::diagnostics::{find_threshold, probe, Predicate, ThresholdOptions};
use delaystab::models::builtin;
use delaystab::solver::IntegrateOptions;

fn main() -> delaystab::Result<()> {
    let copts = CriteriaOptions::default();
    let iopts = IntegrateOptions::default();
    let search = |name: &'static str, param: &'static str, fixed: &[(&str, f64)], predicate, lo, hi, tol| {
        let fixed: BTreeMap<String, f64> = fixed.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        find_threshold(
            |v| {
                let mut p = fixed.clone();
                p.insert(param.into(), v);
                probe(&builtin(name, &p)?, v, predicate, &copts, &iopts)
            },
            lo,
            hi,
            &ThresholdOptions { tol, parallel_depth: 2 },
        )
    };
    let b = search("eq3", "b", &[], Predicate::CertificateBest, 0.0, 0.6, 1e-6)?;
    println!("certified for b < {:.6} ({} evaluations)", b.value, b.visited.len());
    let r = search("ex51", "r", &[("sigma", 1.1)], Predicate::CertificateBest, 0.1, 8.5, 1e-6)?;
    println!("removal model, sigma 1.1: certified for r < {:.6}", r.value);
    let onset = search("ex51", "r", &[("sigma", 1.1)], Predicate::Empirical, 4.0, 12.0, 1e-2)?;
    println!("removal model, sigma 1.1: simulations settle for r < {:.2}", onset.value);
    Ok(())
}
