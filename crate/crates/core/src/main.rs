use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use delaystab::cli::{self, Command, RunConfig, SweepSettings};
use delaystab::diagnostics::Predicate;
use delaystab::{Error, Result};

#[derive(Parser)]
#[command(name = "delaystab", version, about = "Stability certificates and simulation for linear delay equations")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Evaluate every applicable criterion and write certificates.json.
    Check(Common),
    /// Integrate the target and write trajectory.csv and behavior.json.
    Simulate(Common),
    /// Bisect a parameter for the edge of a predicate; writes sweep.csv and threshold.json.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: String,
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// certificate_best or empirical
        #[arg(long, default_value = "certificate_best")]
        predicate: String,
        /// Points per round are 2^k − 1.
        #[arg(long, default_value_t = 0)]
        parallel: u32,
    },
    /// Recompute a worked example or figure (or `all`) against its reference values.
    Reproduce(Common),
    /// Execute a JSON run configuration.
    Run { config: PathBuf },
}

#[derive(Args)]
struct Common {
    /// Built-in name, scenario file, or reproduction name.
    #[arg(long)]
    target: String,
    /// Parameter override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    forward_window: Option<f64>,
}

impl Common {
    fn config(self, command: Command) -> Result<RunConfig> {
        let mut cfg = RunConfig::new(command, self.target);
        cfg.output = self.out;
        cfg.overrides = parse_overrides(&self.set)?;
        if let Some(s) = self.step {
            cfg.solver.step = s;
        }
        cfg.solver.horizon = self.horizon;
        cfg.criteria.horizon = self.horizon;
        if let Some(g) = self.grid {
            cfg.criteria.grid = g;
        }
        cfg.criteria.forward_window = self.forward_window;
        Ok(cfg)
    }
}

fn parse_overrides(items: &[String]) -> Result<BTreeMap<String, f64>> {
    items
        .iter()
        .map(|s| {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Configuration(format!("`--set {s}` is not KEY=VALUE")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Configuration(format!("`{v}` is not a number")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn build(cli: Cli) -> Result<RunConfig> {
    match cli.command {
        Sub::Check(c) => c.config(Command::Check),
        Sub::Simulate(c) => c.config(Command::Simulate),
        Sub::Reproduce(c) => c.config(Command::Reproduce),
        Sub::Sweep {
            common,
            param,
            lo,
            hi,
            tol,
            predicate,
            parallel,
        } => {
            let predicate: Predicate = serde_json::from_value(serde_json::Value::String(predicate.clone()))
                .map_err(|_| Error::Configuration(format!("unknown predicate `{predicate}`")))?;
            let mut cfg = common.config(Command::Sweep)?;
            cfg.sweep = Some(SweepSettings {
                parameter: param,
                lo,
                hi,
                tol,
                predicate,
                parallel_depth: parallel,
            });
            Ok(cfg)
        }
        Sub::Run { config } => cli::parse_config(&std::fs::read_to_string(config)?),
    }
}

fn main() -> ExitCode {
    let result = build(Cli::parse()).and_then(|cfg| cli::run(&cfg));
    match &result {
        Ok(out) => {
            println!("{}", out.summary);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(cli::exit_code(&result) as u8)
}
