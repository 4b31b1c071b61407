//! Runs every scripted reproduction and prints its table.

use delaystab::reproduce::{reproduce, Settings, SCENARIOS};

fn main() -> delaystab::Result<()> {
    let settings = Settings::default();
    for name in SCENARIOS {
        let rep = reproduce(name, &settings)?;
        println!("== {name}");
        for row in &rep.rows {
            println!("{:<52} {:>14}  {:<28} {:?}", row.quantity, row.computed, row.reference, row.status);
        }
    }
    Ok(())
}
