//! Drives the library through a JSON run configuration, as the `run` subcommand does.

use delaystab::cli::{exit_code, parse_config, run};

fn main() -> delaystab::Result<()> {
    let out = std::env::temp_dir().join("delaystab-run-config");
    let text = format!(
        r#"{{
  "version": 1,
  "command": "sweep",
  "target": "ex5",
  "output": {out:?},
  "sweep": {{"parameter": "n", "lo": 1.0, "hi": 20.0, "tol": 1e-4}}
}}"#
    );
    let cfg = parse_config(&text)?;
    println!("canonical form:\n{}", cfg.to_json());
    let result = run(&cfg);
    println!("exit code {}", exit_code(&result));
    let outcome = result?;
    println!("{}", outcome.summary);
    for f in outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
