//! Run configuration and dispatch for `check`, `simulate`, `sweep` and `reproduce`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{best_verdict, CriteriaOptions};
use crate::diagnostics::{self, Predicate, Simulation, ThresholdOptions, DEFAULT_TAIL_FRACTION};
use crate::error::{Error, Result};
use crate::models::{self, Scenario};
use crate::reproduce::{self, SCENARIOS};
use crate::solver::IntegrateOptions;
use crate::timefn::SupOptions;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Check,
    Simulate,
    Sweep,
    Reproduce,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    #[serde(default = "default_step")]
    pub step: f64,
    /// Simulation end time; the target's own horizon when absent.
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Write every `csv_stride`-th mesh node to trajectory.csv.
    #[serde(default = "default_stride")]
    pub csv_stride: usize,
}

fn default_step() -> f64 {
    0.01
}

fn default_stride() -> usize {
    1
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            step: default_step(),
            horizon: None,
            csv_stride: default_stride(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriteriaSettings {
    /// Window of the liminf upgrade.
    #[serde(default)]
    pub forward_window: Option<f64>,
    /// Analysis horizon for non-periodic coefficients.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_grid() -> usize {
    crate::timefn::DEFAULT_GRID
}

impl Default for CriteriaSettings {
    fn default() -> Self {
        Self {
            forward_window: None,
            horizon: None,
            grid: default_grid(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub parameter: String,
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_predicate")]
    pub predicate: Predicate,
    /// Evaluate `2^k − 1` points per round in parallel.
    #[serde(default)]
    pub parallel_depth: u32,
}

fn default_tol() -> f64 {
    1e-4
}

fn default_predicate() -> Predicate {
    Predicate::CertificateBest
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub command: Command,
    /// Built-in name, path to a scenario JSON file, or reproduction name (`all` runs every one).
    pub target: String,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub criteria: CriteriaSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSettings>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn new(command: Command, target: impl Into<String>) -> Self {
        Self {
            version: CONFIG_VERSION,
            command,
            target: target.into(),
            overrides: BTreeMap::new(),
            output: default_output(),
            solver: SolverSettings::default(),
            criteria: CriteriaSettings::default(),
            sweep: None,
        }
    }

    pub fn criteria_options(&self) -> CriteriaOptions {
        CriteriaOptions {
            sup: SupOptions {
                grid: self.criteria.grid,
                horizon: self.criteria.horizon,
                ..SupOptions::default()
            },
            forward_window: self.criteria.forward_window,
        }
    }

    pub fn integrate_options(&self) -> IntegrateOptions {
        IntegrateOptions::with_step(self.solver.step)
    }

    /// Canonical JSON: every field present, defaults filled in.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn validate(&self) -> Result<()> {
        let schema = |path: &str, message: String| Err(Error::Schema { path: path.into(), message });
        if self.version != CONFIG_VERSION {
            return schema("version", format!("unsupported version {}, expected {CONFIG_VERSION}", self.version));
        }
        if !(self.solver.step > 0.0 && self.solver.step.is_finite()) {
            return schema("solver.step", format!("{} must be > 0", self.solver.step));
        }
        if self.criteria.grid < 16 {
            return schema("criteria.grid", format!("{} is too small (>= 16)", self.criteria.grid));
        }
        match (&self.command, &self.sweep) {
            (Command::Sweep, None) => return schema("sweep", "required for the sweep command".into()),
            (Command::Sweep, Some(s)) if !(s.lo < s.hi) => {
                return schema("sweep.hi", format!("bracket [{}, {}] is empty", s.lo, s.hi))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Parses and validates a configuration document; errors name the offending field.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// A built-in name, or a scenario file with optional `x0`/`phi` overrides.
pub fn resolve_target(target: &str, overrides: &BTreeMap<String, f64>) -> Result<Scenario> {
    if models::builtin_names().contains(&target) {
        return models::builtin(target, overrides);
    }
    let path = Path::new(target);
    if !path.is_file() {
        return Err(Error::UnknownTarget {
            name: target.into(),
            valid: models::builtin_names().join(", "),
        });
    }
    let text = fs::read_to_string(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let mut sc: Scenario = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: format!("{}: {}", path.display(), e.path()),
        message: e.inner().to_string(),
    })?;
    for (k, v) in overrides {
        match k.as_str() {
            "x0" => sc.x0 = *v,
            "phi" => sc.phi = *v,
            _ => {
                return Err(Error::Configuration(format!(
                    "scenario files accept only x0 and phi overrides, got `{k}`"
                )))
            }
        }
    }
    if sc.name.is_empty() {
        sc.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    }
    Ok(sc)
}

/// What a run produced.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    /// Reproduction rows that did not match.
    pub mismatches: usize,
    pub summary: String,
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    match cfg.command {
        Command::Check => run_check(cfg),
        Command::Simulate => run_simulate(cfg),
        Command::Sweep => run_sweep(cfg),
        Command::Reproduce => run_reproduce(cfg),
    }
}

/// 0 success, 1 reproduction mismatch, 2 usage error, 3 numeric failure.
pub fn exit_code(result: &Result<RunOutcome>) -> i32 {
    match result {
        Ok(o) if o.mismatches > 0 => 1,
        Ok(_) => 0,
        Err(
            Error::UnknownTarget { .. }
            | Error::Configuration(_)
            | Error::Schema { .. }
            | Error::Json(_)
            | Error::InvalidDelay(_)
            | Error::InvalidCoefficient(_)
            | Error::InvalidEquation(_),
        ) => 2,
        Err(_) => 3,
    }
}

#[derive(Serialize)]
struct CheckFile<'a> {
    target: &'a str,
    parameters: &'a BTreeMap<String, f64>,
    best_verdict: crate::criteria::Verdict,
    certificates: &'a [crate::criteria::Certificate],
}

fn run_check(cfg: &RunConfig) -> Result<RunOutcome> {
    let sc = resolve_target(&cfg.target, &cfg.overrides)?;
    let certs = sc.model.certificates(&cfg.criteria_options())?;
    let best = best_verdict(&certs);
    let path = cfg.output.join("certificates.json");
    write_atomic(
        &path,
        &json_bytes(&CheckFile {
            target: &sc.name,
            parameters: &sc.parameters,
            best_verdict: best,
            certificates: &certs,
        })?,
    )?;
    Ok(RunOutcome {
        files: vec![path],
        mismatches: 0,
        summary: format!("{}: best verdict {best:?} from {} certificates", sc.name, certs.len()),
    })
}

#[derive(Serialize)]
struct BehaviorFile<'a> {
    target: &'a str,
    parameters: &'a BTreeMap<String, f64>,
    equilibrium: f64,
    x0: f64,
    phi: f64,
    horizon: f64,
    step: f64,
    report: &'a diagnostics::BehaviorReport,
}

fn run_simulate(cfg: &RunConfig) -> Result<RunOutcome> {
    let mut sc = resolve_target(&cfg.target, &cfg.overrides)?;
    if let Some(h) = cfg.solver.horizon {
        sc.horizon = h;
    }
    let sim = Simulation::of_scenario(&sc, &cfg.integrate_options())?;
    let eq = sc.model.equilibrium()?;
    let report = diagnostics::classify(&sim, eq, DEFAULT_TAIL_FRACTION)?;

    let mut csv = Vec::new();
    sim.trajectory.write_csv(&mut csv, cfg.solver.csv_stride)?;
    let traj_path = cfg.output.join("trajectory.csv");
    write_atomic(&traj_path, &csv)?;
    let behavior_path = cfg.output.join("behavior.json");
    write_atomic(
        &behavior_path,
        &json_bytes(&BehaviorFile {
            target: &sc.name,
            parameters: &sc.parameters,
            equilibrium: eq,
            x0: sc.x0,
            phi: sc.phi,
            horizon: sc.horizon,
            step: cfg.solver.step,
            report: &report,
        })?,
    )?;
    Ok(RunOutcome {
        files: vec![traj_path, behavior_path],
        mismatches: 0,
        summary: format!("{}: {:?}", sc.name, report.classification),
    })
}

#[derive(Serialize)]
struct ThresholdFile<'a> {
    target: &'a str,
    parameter: &'a str,
    predicate: Predicate,
    value: f64,
    lo: f64,
    hi: f64,
    tol: f64,
    evaluations: usize,
}

fn run_sweep(cfg: &RunConfig) -> Result<RunOutcome> {
    let sw = cfg.sweep.as_ref().expect("validated");
    if !models::builtin_names().contains(&cfg.target.as_str()) {
        return Err(Error::Configuration("sweeps need a built-in target".into()));
    }
    // fail early on an undeclared parameter
    let mut probe_params = cfg.overrides.clone();
    probe_params.insert(sw.parameter.clone(), sw.lo);
    models::builtin(&cfg.target, &probe_params)?;

    let copts = cfg.criteria_options();
    let iopts = cfg.integrate_options();
    let th = diagnostics::find_threshold(
        |v| {
            let mut p = cfg.overrides.clone();
            p.insert(sw.parameter.clone(), v);
            let sc = models::builtin(&cfg.target, &p)?;
            diagnostics::probe(&sc, v, sw.predicate, &copts, &iopts)
        },
        sw.lo,
        sw.hi,
        &ThresholdOptions {
            tol: sw.tol,
            parallel_depth: sw.parallel_depth,
        },
    )?;

    let mut csv = String::from("param,verdict,classification\n");
    for p in &th.visited {
        csv.push_str(&format!(
            "{},{},{}\n",
            p.param,
            p.verdict.map(|v| format!("{v:?}")).unwrap_or_default(),
            p.classification.map(|c| format!("{c:?}")).unwrap_or_default()
        ));
    }
    let sweep_path = cfg.output.join("sweep.csv");
    write_atomic(&sweep_path, csv.as_bytes())?;
    let th_path = cfg.output.join("threshold.json");
    write_atomic(
        &th_path,
        &json_bytes(&ThresholdFile {
            target: &cfg.target,
            parameter: &sw.parameter,
            predicate: sw.predicate,
            value: th.value,
            lo: th.lo,
            hi: th.hi,
            tol: sw.tol,
            evaluations: th.visited.len(),
        })?,
    )?;
    Ok(RunOutcome {
        files: vec![sweep_path, th_path],
        mismatches: 0,
        summary: format!("{} threshold in {}: {:.6}", cfg.target, sw.parameter, th.value),
    })
}

fn run_reproduce(cfg: &RunConfig) -> Result<RunOutcome> {
    let names: Vec<&str> = if cfg.target == "all" {
        SCENARIOS.to_vec()
    } else if SCENARIOS.contains(&cfg.target.as_str()) {
        vec![cfg.target.as_str()]
    } else {
        return Err(Error::UnknownTarget {
            name: cfg.target.clone(),
            valid: format!("all, {}", SCENARIOS.join(", ")),
        });
    };
    let settings = reproduce::Settings {
        criteria: cfg.criteria_options(),
        solver: cfg.integrate_options(),
        ..reproduce::Settings::default()
    };
    let reports: Vec<reproduce::Report> = names
        .par_iter()
        .map(|n| reproduce::reproduce(n, &settings))
        .collect::<Result<_>>()?;
    let mut out = RunOutcome::default();
    let mut lines = Vec::new();
    for r in &reports {
        let csv = cfg.output.join(format!("reproduce_{}.csv", r.scenario));
        let json = cfg.output.join(format!("reproduce_{}.json", r.scenario));
        write_atomic(&csv, r.to_csv().as_bytes())?;
        write_atomic(&json, &json_bytes(r)?)?;
        out.files.extend([csv, json]);
        out.mismatches += r.failures();
        lines.push(format!("{}: {} rows, {} mismatched", r.scenario, r.rows.len(), r.failures()));
    }
    out.summary = lines.join("\n");
    Ok(out)
}
