//! Every applicable criterion for the two-term equations used as worked examples.

use std::collections::BTreeMap;

use delaystab::criteria::{evaluate_all, CriteriaOptions};
use delaystab::models::{builtin, Model};

fn main() -> delaystab::Result<()> {
    let opts = CriteriaOptions::default();
    for name in ["eq26", "eq27", "eq3"] {
        let Model::Linear { equation } = builtin(name, &BTreeMap::new())?.model else { unreachable!() };
        println!("== {name}");
        for cert in evaluate_all(&equation, &opts) {
            println!(
                "{:<40} {:?}{}",
                serde_json::to_string(&cert.criterion)?,
                cert.verdict,
                cert.case.map(|c| format!(" (case {c})")).unwrap_or_default()
            );
            for check in cert.checks.iter().filter(|c| !c.satisfied) {
                println!("    fails: {} [{:.4} vs {:.4}]", check.description, check.lhs, check.rhs);
            }
        }
    }
    Ok(())
}
