//! Behaviour of simulated trajectories and threshold search over parameter families.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{CriteriaOptions, Verdict};
use crate::error::{Error, Result};
use crate::models::{Model, Scenario};
use crate::solver::{self, HistoryFunction, IntegrateOptions, Trajectory};

/// Tail-to-head amplitude ratio below which a trajectory counts as decaying.
pub const DECAY_RATIO: f64 = 0.02;
/// Tail-to-head amplitude ratio above which a trajectory counts as growing.
pub const GROWTH_RATIO: f64 = 5.0;
pub const DEFAULT_TAIL_FRACTION: f64 = 0.25;
/// Minimum run length in units of the largest lag.
pub const MIN_LAG_SPANS: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Decaying,
    Sustained,
    Growing,
}

/// A finished run, possibly cut short by blow-up.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub trajectory: Trajectory,
    pub diverged_at: Option<f64>,
}

impl Simulation {
    /// Integrates, keeping the partial trajectory when the state blows up.
    pub fn run(model: &Model, x0: f64, phi: f64, t1: f64, opts: &IntegrateOptions) -> Result<Self> {
        let o = IntegrateOptions {
            x0: Some(x0),
            ..opts.clone()
        };
        match solver::integrate(model.rhs().as_ref(), &HistoryFunction::constant(phi), 0.0, t1, &o) {
            Ok(trajectory) => Ok(Self {
                trajectory,
                diverged_at: None,
            }),
            Err(Error::Divergence { time, trajectory }) => Ok(Self {
                trajectory: *trajectory,
                diverged_at: Some(time),
            }),
            Err(e) => Err(e),
        }
    }

    pub fn of_scenario(s: &Scenario, opts: &IntegrateOptions) -> Result<Self> {
        Self::run(&s.model, s.x0, s.phi, s.horizon, opts)
    }
}

impl From<Trajectory> for Simulation {
    fn from(trajectory: Trajectory) -> Self {
        Self {
            trajectory,
            diverged_at: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorReport {
    pub classification: Classification,
    /// Largest deviation from equilibrium over the final window.
    pub tail_amplitude: f64,
    /// Largest deviation over the first window of equal length.
    pub initial_amplitude: f64,
    pub gamma_hat: Option<f64>,
    pub m_hat: Option<f64>,
    pub fit_quality: Option<f64>,
    /// The decay fit fell back to uniform samples.
    pub fit_from_uniform_samples: bool,
    pub diverged_at: Option<f64>,
    pub end_time: f64,
}

/// Compares the deviation `|x − equilibrium|` over the final `tail_fraction` of the run
/// with its maximum over the opening window of the same length.
pub fn classify(sim: &Simulation, equilibrium: f64, tail_fraction: f64) -> Result<BehaviorReport> {
    let tr = &sim.trajectory;
    if !(tail_fraction > 0.0 && tail_fraction <= 0.5) {
        return Err(Error::Configuration(format!("tail fraction {tail_fraction} must lie in (0, 0.5]")));
    }
    let span = tr.end_time() - tr.t0;
    if sim.diverged_at.is_none() && span < MIN_LAG_SPANS * tr.history_span {
        return Err(Error::Precondition(format!(
            "run of length {span} is shorter than {MIN_LAG_SPANS} lag units ({})",
            MIN_LAG_SPANS * tr.history_span
        )));
    }
    let window = tail_fraction * span;
    let (mut head, mut tail) = (0.0f64, 0.0f64);
    for (t, x) in tr.mesh.iter().zip(&tr.states) {
        let e = (x - equilibrium).abs();
        if *t <= tr.t0 + window {
            head = head.max(e);
        }
        if *t >= tr.end_time() - window {
            tail = tail.max(e);
        }
    }
    let classification = if sim.diverged_at.is_some() || tail > GROWTH_RATIO * head {
        Classification::Growing
    } else if tail < DECAY_RATIO * head || (head == 0.0 && tail == 0.0) {
        Classification::Decaying
    } else {
        Classification::Sustained
    };
    let mut report = BehaviorReport {
        classification,
        tail_amplitude: tail,
        initial_amplitude: head,
        gamma_hat: None,
        m_hat: None,
        fit_quality: None,
        fit_from_uniform_samples: false,
        diverged_at: sim.diverged_at,
        end_time: tr.end_time(),
    };
    if classification != Classification::Growing {
        if let Ok(fit) = fit_decay(tr, equilibrium) {
            report.gamma_hat = Some(fit.gamma_hat);
            report.m_hat = Some(fit.m_hat);
            report.fit_quality = Some(fit.fit_quality);
            report.fit_from_uniform_samples = fit.from_uniform_samples;
        }
    }
    Ok(report)
}

/// Estimate of `|x(t) − x*| <= M e^{−γ(t−t0)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub gamma_hat: f64,
    /// Smallest `M` making the bound hold at every sample for the fitted rate.
    pub m_hat: f64,
    /// Coefficient of determination of the log-linear fit.
    pub fit_quality: f64,
    pub from_uniform_samples: bool,
    pub points: usize,
}

pub fn fit_decay(tr: &Trajectory, equilibrium: f64) -> Result<DecayFit> {
    let e: Vec<f64> = tr.states.iter().map(|x| (x - equilibrium).abs()).collect();
    // deviations this small are rounding noise in the states
    let scale = tr.states.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    fit_above(&tr.mesh, &e, tr.t0, 1e-12 * scale)
}

/// Least squares on `ln e` at the local maxima of `e`, or on uniformly spaced samples
/// from the last three quarters of the run when fewer than four maxima exist.
pub fn fit_decay_samples(times: &[f64], e: &[f64], t0: f64) -> Result<DecayFit> {
    fit_above(times, e, t0, 0.0)
}

fn fit_above(times: &[f64], e: &[f64], t0: f64, floor: f64) -> Result<DecayFit> {
    if times.len() != e.len() || times.len() < 4 {
        return Err(Error::Precondition("need at least four samples of equal length".into()));
    }
    let top = e.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return Err(Error::Precondition("deviation vanishes identically".into()));
    }
    let peaks: Vec<usize> = (1..e.len() - 1)
        .filter(|&i| e[i] > floor && e[i] > e[i - 1] && e[i] >= e[i + 1])
        .collect();
    let (idx, uniform) = if peaks.len() >= 4 {
        (peaks, false)
    } else {
        let n = e.len();
        let start = n / 4;
        let m = 64.min(n - start);
        let idx: Vec<usize> = (0..m)
            .map(|k| start + k * (n - 1 - start) / (m - 1).max(1))
            .filter(|&i| e[i] > floor)
            .collect();
        (idx, true)
    };
    if idx.len() < 2 {
        return Err(Error::Precondition("too few usable samples above the rounding floor".into()));
    }
    let xs: Vec<f64> = idx.iter().map(|&i| times[i] - t0).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| e[i].ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Precondition("samples share one time".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let fit_quality = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 0.0 };
    let gamma_hat = -slope;
    let m_hat = times
        .iter()
        .zip(e)
        .filter(|(_, v)| **v > floor)
        .map(|(t, v)| v * (gamma_hat * (t - t0)).exp())
        .fold(0.0, f64::max);
    Ok(DecayFit {
        gamma_hat,
        m_hat,
        fit_quality,
        from_uniform_samples: uniform,
        points: xs.len(),
    })
}

/// Decaying, or oscillating with a clearly positive fitted decay rate.
pub fn decays(report: &BehaviorReport) -> bool {
    match report.classification {
        Classification::Decaying => true,
        Classification::Sustained => {
            matches!((report.gamma_hat, report.fit_quality), (Some(g), Some(q)) if g > 0.0 && q > 0.9)
        }
        Classification::Growing => false,
    }
}

/// Outcome of one predicate evaluation in a threshold search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub param: f64,
    pub pass: bool,
    pub verdict: Option<Verdict>,
    pub classification: Option<Classification>,
}

impl Probe {
    pub fn flag(param: f64, pass: bool) -> Self {
        Self {
            param,
            pass,
            verdict: None,
            classification: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    /// Some certificate of the model is stable.
    CertificateBest,
    /// A simulation decays toward the equilibrium.
    Empirical,
}

/// Empirical runs last this many largest lags.
pub const EMPIRICAL_LAG_SPANS: f64 = 60.0;

/// Evaluates `predicate` on one member of a family.
pub fn probe(
    scenario: &Scenario,
    param: f64,
    predicate: Predicate,
    criteria: &CriteriaOptions,
    solver: &IntegrateOptions,
) -> Result<Probe> {
    match predicate {
        Predicate::CertificateBest => {
            let best = scenario.model.best_certificate(criteria)?;
            Ok(Probe {
                param,
                pass: best.verdict.is_stable(),
                verdict: Some(best.verdict),
                classification: None,
            })
        }
        Predicate::Empirical => {
            let eq = scenario.model.equilibrium()?;
            let lag = scenario.model.max_lag();
            let horizon = if lag > 0.0 { EMPIRICAL_LAG_SPANS * lag } else { scenario.horizon };
            let (x0, phi) = if eq != 0.0 { (1.2 * eq, 0.8 * eq) } else { (scenario.x0, scenario.phi) };
            let sim = Simulation::run(&scenario.model, x0, phi, horizon, solver)?;
            let report = classify(&sim, eq, DEFAULT_TAIL_FRACTION)?;
            Ok(Probe {
                param,
                pass: decays(&report),
                verdict: None,
                classification: Some(report.classification),
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdOptions {
    pub tol: f64,
    /// Evaluate `2^k − 1` interior points per round in parallel; 0 or 1 means plain bisection.
    pub parallel_depth: u32,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            parallel_depth: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    /// Midpoint of the final bracket.
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub visited: Vec<Probe>,
}

/// Bisection for the switch point of a predicate assumed monotone on `[lo, hi]`.
///
/// With `parallel_depth = k` each round evaluates `2^k − 1` equally spaced points
/// concurrently; for a monotone predicate the final bracket equals that of `k`
/// sequential bisection steps per round, whatever the thread scheduling.
pub fn find_threshold<F>(f: F, lo: f64, hi: f64, opts: &ThresholdOptions) -> Result<Threshold>
where
    F: Fn(f64) -> Result<Probe> + Sync,
{
    if !(lo < hi) || !(opts.tol > 0.0) {
        return Err(Error::Configuration(format!("need lo < hi and tol > 0, got [{lo}, {hi}], {}", opts.tol)));
    }
    let (p_lo, p_hi) = (f(lo)?, f(hi)?);
    if p_lo.pass == p_hi.pass {
        return Err(Error::Bracketing {
            lo,
            hi,
            value: p_lo.pass,
        });
    }
    let low_value = p_lo.pass;
    let mut visited = vec![p_lo, p_hi];
    let (mut a, mut b) = (lo, hi);
    let k = opts.parallel_depth.max(1);
    let pieces = 1usize << k;
    while b - a > opts.tol {
        let points: Vec<f64> = (1..pieces).map(|i| a + (b - a) * i as f64 / pieces as f64).collect();
        let probes: Vec<Probe> = if pieces > 2 {
            points.par_iter().map(|&x| f(x)).collect::<Result<_>>()?
        } else {
            points.iter().map(|&x| f(x)).collect::<Result<_>>()?
        };
        let switch = probes.iter().position(|p| p.pass != low_value);
        let (na, nb) = match switch {
            Some(0) => (a, points[0]),
            Some(i) => (points[i - 1], points[i]),
            None => (points[pieces - 2], b),
        };
        visited.extend(probes);
        a = na;
        b = nb;
    }
    Ok(Threshold {
        value: 0.5 * (a + b),
        lo: a,
        hi: b,
        visited,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(m: f64, gamma: f64, omega: f64) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..=40_000).map(|i| i as f64 * 1e-3).collect();
        let e = t.iter().map(|t| m * (-gamma * t).exp() * (omega * t).cos().abs()).collect();
        (t, e)
    }

    #[test]
    fn fit_recovers_damped_cosine() {
        let (t, e) = synthetic(2.5, 0.3, 2.0);
        let fit = fit_decay_samples(&t, &e, 0.0).unwrap();
        assert!(!fit.from_uniform_samples);
        assert!((fit.gamma_hat - 0.3).abs() < 3e-3, "{fit:?}");
        assert!((fit.m_hat - 2.5).abs() < 0.025, "{fit:?}");
        assert!(fit.fit_quality > 0.999);
    }

    #[test]
    fn monotone_decay_uses_uniform_samples() {
        let t: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.01).collect();
        let e: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
        let fit = fit_decay_samples(&t, &e, 0.0).unwrap();
        assert!(fit.from_uniform_samples);
        assert!((fit.gamma_hat - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bisection_finds_step() {
        let th = find_threshold(|x| Ok(Probe::flag(x, x < 0.3)), 0.0, 1.0, &ThresholdOptions::default()).unwrap();
        assert!((th.value - 0.3).abs() <= 1e-4);
        let par = find_threshold(
            |x| Ok(Probe::flag(x, x < 0.3)),
            0.0,
            1.0,
            &ThresholdOptions {
                tol: 1e-4,
                parallel_depth: 3,
            },
        )
        .unwrap();
        assert!((par.value - 0.3).abs() <= 1e-4);
    }

    #[test]
    fn parallel_rounds_match_sequential_bisection() {
        // tol reached after exactly 12 halvings in both schedules
        let f = |x: f64| Ok(Probe::flag(x, x < 0.6180339));
        let seq = find_threshold(f, 0.0, 1.0, &ThresholdOptions { tol: 1.0 / 4096.0, parallel_depth: 0 }).unwrap();
        let par = find_threshold(f, 0.0, 1.0, &ThresholdOptions { tol: 1.0 / 4096.0, parallel_depth: 3 }).unwrap();
        assert_eq!((seq.lo, seq.hi), (par.lo, par.hi));
    }

    #[test]
    fn equal_endpoints_are_a_bracketing_error() {
        let r = find_threshold(|x| Ok(Probe::flag(x, true)), 0.0, 1.0, &ThresholdOptions::default());
        assert!(matches!(r, Err(Error::Bracketing { value: true, .. })));
    }

    #[test]
    fn constant_trajectory_is_decaying() {
        let tr = Trajectory {
            t0: 0.0,
            mesh: (0..=100).map(|i| i as f64).collect(),
            states: vec![0.7; 101],
            right_derivatives: vec![0.0; 101],
            left_derivatives: vec![0.0; 101],
            history: HistoryFunction::constant(0.7),
            history_span: 1.0,
        };
        let r = classify(&tr.into(), 0.7, 0.25).unwrap();
        assert_eq!(r.classification, Classification::Decaying);
    }
}
