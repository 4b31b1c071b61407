//! Method-of-steps RK4 for scalar delay equations with dense cubic Hermite output.
//!
//! The mesh contains every breaking point `t0 + Σ n_i τ_i` generated by the constant
//! lags (up to a cap, past which only the shallow ones are kept), so each cell sees
//! smooth delayed data. Delayed values are read from the
//! Hermite interpolant of completed cells; values inside the current cell (lags
//! shorter than the step) are extrapolated from the previous cell.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::criteria::{LinearDelayEquation, Sign};
use crate::error::{Error, Result};
use crate::timefn::Delay;

/// |x| above this is treated as a blow-up.
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// Which one-sided value to take at `t0`, where `x0` may differ from `φ(t0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Initial function `φ` on `(−∞, t0]`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HistoryFunction {
    Constant { value: f64 },
    /// Linear interpolation, held constant outside the table.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
    #[serde(skip)]
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for HistoryFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HistoryFunction::Constant { value } => write!(f, "Constant({value})"),
            HistoryFunction::Tabulated { times, .. } => write!(f, "Tabulated({} points)", times.len()),
            HistoryFunction::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl HistoryFunction {
    pub fn constant(value: f64) -> Self {
        HistoryFunction::Constant { value }
    }

    pub fn function(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        HistoryFunction::Function(Arc::new(f))
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Configuration("tabulated history needs equally many times and values".into()));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Configuration("tabulated history times must increase and values be finite".into()));
        }
        Ok(HistoryFunction::Tabulated { times, values })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            HistoryFunction::Constant { value } => *value,
            HistoryFunction::Function(f) => f(t),
            HistoryFunction::Tabulated { times, values } => {
                let n = times.len();
                if t <= times[0] {
                    return values[0];
                }
                if t >= times[n - 1] {
                    return values[n - 1];
                }
                let i = times.partition_point(|&s| s <= t) - 1;
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                values[i] + w * (values[i + 1] - values[i])
            }
        }
    }

    /// Pointwise sum `self + other`.
    pub fn sum(&self, other: &HistoryFunction) -> HistoryFunction {
        match (self, other) {
            (HistoryFunction::Constant { value: a }, HistoryFunction::Constant { value: b }) => {
                HistoryFunction::Constant { value: a + b }
            }
            (HistoryFunction::Tabulated { times, values }, HistoryFunction::Constant { value })
            | (HistoryFunction::Constant { value }, HistoryFunction::Tabulated { times, values }) => {
                HistoryFunction::Tabulated {
                    times: times.clone(),
                    values: values.iter().map(|v| v + value).collect(),
                }
            }
            _ => {
                let (a, b) = (self.clone(), other.clone());
                HistoryFunction::function(move |t| a.eval(t) + b.eval(t))
            }
        }
    }

    /// True when every value on `[lo, hi]` is covered (tables must span it).
    fn covers(&self, lo: f64, hi: f64) -> bool {
        match self {
            HistoryFunction::Tabulated { times, .. } => {
                let eps = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
                times[0] <= lo + eps && times[times.len() - 1] >= hi - eps
            }
            _ => true,
        }
    }
}

/// Read access to the solution during a right-hand-side evaluation.
pub struct Past<'a> {
    traj: &'a Trajectory,
    now: f64,
    x_now: f64,
    side: Side,
    quad_step: f64,
}

impl Past<'_> {
    /// `x(s)` for `s <= now`.
    pub fn at(&self, s: f64) -> f64 {
        let tr = self.traj;
        let tol = 1e-12 * (1.0 + tr.t0.abs());
        if s >= self.now - 1e-14 * (1.0 + self.now.abs()) {
            return self.x_now;
        }
        if (s - tr.t0).abs() <= tol {
            return match self.side {
                Side::Left => tr.history.eval(tr.t0),
                Side::Right => tr.states[0],
            };
        }
        if s < tr.t0 {
            return tr.history.eval(s);
        }
        let last = *tr.mesh.last().unwrap();
        if s <= last {
            return tr.interpolate(s);
        }
        // inside the cell being computed: extrapolate the previous cell
        let n = tr.mesh.len();
        if n >= 2 {
            tr.hermite(n - 2, s)
        } else {
            tr.states[0] + tr.right_derivatives[0] * (s - last)
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Maximal node spacing for distributed-term quadrature.
    pub fn quad_step(&self) -> f64 {
        self.quad_step
    }
}

/// Right-hand side `ẋ = f(t, x(t), x(·))` of a scalar delay equation.
pub trait DelayRhs: Sync {
    /// Concentrated delays; constant lags among them generate breaking points.
    fn delays(&self) -> Vec<Delay>;

    /// Furthest lag any read reaches back, distributed windows included.
    fn max_lag(&self) -> f64;

    fn eval(&self, t: f64, x: f64, past: &Past<'_>) -> f64;
}

/// Linear equation with optional forcing `f(t)` on the right-hand side.
pub struct LinearRhs<'a> {
    eq: &'a LinearDelayEquation,
    forcing: Option<&'a (dyn Fn(f64) -> f64 + Sync)>,
}

impl<'a> LinearRhs<'a> {
    pub fn new(eq: &'a LinearDelayEquation) -> Self {
        Self { eq, forcing: None }
    }

    pub fn with_forcing(eq: &'a LinearDelayEquation, forcing: &'a (dyn Fn(f64) -> f64 + Sync)) -> Self {
        Self {
            eq,
            forcing: Some(forcing),
        }
    }
}

impl DelayRhs for LinearRhs<'_> {
    fn delays(&self) -> Vec<Delay> {
        self.eq
            .positive_terms()
            .iter()
            .chain(self.eq.negative_terms())
            .map(|t| t.delay.clone())
            .collect()
    }

    fn max_lag(&self) -> f64 {
        self.eq.max_lag()
    }

    fn eval(&self, t: f64, x: f64, past: &Past<'_>) -> f64 {
        let read = |d: &Delay| {
            if d.is_identity() {
                x
            } else {
                past.at(d.at(t))
            }
        };
        let mut dx = 0.0;
        for term in self.eq.positive_terms() {
            dx -= term.coeff.value(t) * read(&term.delay);
        }
        for term in self.eq.negative_terms() {
            dx += term.coeff.value(t) * read(&term.delay);
        }
        for d in self.eq.distributed_terms() {
            let w = d.total_weight.value(t);
            if w == 0.0 {
                continue;
            }
            let window = t - d.window_start.at(t);
            let (lo, hi) = d.kernel.support(window);
            let avg = if hi - lo <= 1e-14 {
                past.at(t - lo)
            } else {
                let n = ((hi - lo) / past.quad_step()).ceil().max(4.0) as usize;
                let du = (hi - lo) / n as f64;
                let (mut num, mut den) = (0.0, 0.0);
                for i in 0..=n {
                    let u = lo + i as f64 * du;
                    let wt = d.kernel.weight(u) * if i == 0 || i == n { 0.5 } else { 1.0 };
                    let xv = if u == 0.0 { x } else { past.at(t - u) };
                    num += wt * xv;
                    den += wt;
                }
                num / den
            };
            match d.sign {
                Sign::Positive => dx -= w * avg,
                Sign::Negative => dx += w * avg,
            }
        }
        if let Some(f) = self.forcing {
            dx += f(t);
        }
        dx
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrateOptions {
    /// Upper bound on the cell length.
    pub step: f64,
    /// `x(t0)` when it differs from `φ(t0)`.
    pub x0: Option<f64>,
    /// Permit lags shorter than the step (reads inside the current cell are extrapolated).
    pub allow_extrapolation: bool,
    /// Cap on the number of generated breaking points.
    pub max_breaking_points: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            step: 0.01,
            x0: None,
            allow_extrapolation: false,
            max_breaking_points: 100_000,
        }
    }
}

impl IntegrateOptions {
    pub fn with_step(step: f64) -> Self {
        Self {
            step,
            ..Self::default()
        }
    }
}

/// Discrete solution with dense output.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub t0: f64,
    pub mesh: Vec<f64>,
    pub states: Vec<f64>,
    /// Derivative at each node from the right (the start of the next cell).
    pub right_derivatives: Vec<f64>,
    /// Derivative at each node from the left (the end of the previous cell).
    pub left_derivatives: Vec<f64>,
    pub history: HistoryFunction,
    /// The history matters on `[t0 − history_span, t0]`.
    pub history_span: f64,
}

impl Trajectory {
    pub fn end_time(&self) -> f64 {
        *self.mesh.last().unwrap()
    }

    /// Hermite interpolant of cell `i` (between nodes `i` and `i+1`) at `t`.
    fn hermite(&self, i: usize, t: f64) -> f64 {
        let (ta, tb) = (self.mesh[i], self.mesh[i + 1]);
        let h = tb - ta;
        let s = (t - ta) / h;
        let (ya, yb) = (self.states[i], self.states[i + 1]);
        let (da, db) = (self.right_derivatives[i], self.left_derivatives[i + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * ya + (s3 - 2.0 * s2 + s) * h * da + (-2.0 * s3 + 3.0 * s2) * yb + (s3 - s2) * h * db
    }

    fn interpolate(&self, t: f64) -> f64 {
        let n = self.mesh.len();
        if n == 1 {
            return self.states[0];
        }
        let i = self.mesh.partition_point(|&s| s <= t).clamp(1, n - 1) - 1;
        if t == self.mesh[i] {
            return self.states[i];
        }
        self.hermite(i, t)
    }

    /// Dense value: `φ(t)` before `t0`, the interpolant after, the last state past the end.
    pub fn value_at(&self, t: f64) -> f64 {
        if t < self.t0 {
            self.history.eval(t)
        } else if t >= self.end_time() {
            *self.states.last().unwrap()
        } else {
            self.interpolate(t)
        }
    }

    /// Writes `t,x,xdot` rows for every `stride`-th node (and the last).
    pub fn write_csv<W: Write>(&self, mut w: W, stride: usize) -> Result<()> {
        let stride = stride.max(1);
        writeln!(w, "t,x,xdot")?;
        let n = self.mesh.len();
        for i in (0..n).filter(|i| i % stride == 0 || *i == n - 1) {
            writeln!(w, "{},{},{}", self.mesh[i], self.states[i], self.right_derivatives[i])?;
        }
        Ok(())
    }

    /// Node values sampled at `n + 1` equally spaced times over the run.
    pub fn resample(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = (self.t0, self.end_time());
        (0..=n)
            .map(|i| {
                let t = a + (b - a) * i as f64 / n.max(1) as f64;
                (t, self.value_at(t))
            })
            .unzip()
    }
}

fn quantize(t: f64) -> i64 {
    (t * 1e9).round() as i64
}

/// A breaking point reached through `k` lags carries a jump in the `k`-th derivative;
/// from this depth on RK4 no longer sees it.
const SMOOTH_DEPTH: usize = 5;

/// Breaking points `t0 + Σ n_i τ_i < t1`, generated level by level. When the cap is
/// reached past `SMOOTH_DEPTH`, deeper levels are dropped.
fn breaking_points(t0: f64, t1: f64, lags: &[f64], cap: usize) -> Result<Vec<f64>> {
    use std::collections::BTreeMap;
    let mut seen: BTreeMap<i64, f64> = BTreeMap::new();
    seen.insert(quantize(t0), t0);
    let mut frontier = vec![t0];
    let mut depth = 0;
    while !frontier.is_empty() {
        depth += 1;
        let mut next: BTreeMap<i64, f64> = BTreeMap::new();
        for &p in &frontier {
            for &tau in lags {
                let q = p + tau;
                let key = quantize(q);
                if q < t1 - 1e-12 * (1.0 + t1.abs()) && !seen.contains_key(&key) {
                    next.insert(key, q);
                }
            }
            if seen.len() + next.len() > cap {
                if depth <= SMOOTH_DEPTH {
                    return Err(Error::Configuration(format!(
                        "more than {cap} breaking points within {SMOOTH_DEPTH} lags of t0; raise the cap or shorten the run"
                    )));
                }
                frontier.clear();
                next.clear();
                break;
            }
        }
        frontier = next.values().copied().collect();
        seen.extend(next);
    }
    let mut pts: Vec<f64> = seen.into_values().collect();
    pts.push(t1);
    Ok(pts)
}

fn build_mesh(breaks: &[f64], step: f64) -> Vec<f64> {
    let mut mesh = vec![breaks[0]];
    for w in breaks.windows(2) {
        let len = w[1] - w[0];
        if len <= 1e-12 * (1.0 + w[1].abs()) {
            continue;
        }
        let n = (len / step - 1e-9).ceil().max(1.0) as usize;
        for k in 1..n {
            mesh.push(w[0] + len * k as f64 / n as f64);
        }
        mesh.push(w[1]);
    }
    mesh
}

fn min_positive_lag(delays: &[Delay], t0: f64, t1: f64, step: f64) -> f64 {
    let mut m = f64::INFINITY;
    for d in delays {
        match d {
            Delay::Identity => {}
            Delay::ConstantLag { lag } => m = m.min(*lag),
            Delay::General(_) => {
                let n = ((t1 - t0) / step).ceil().min(1e6) as usize;
                for i in 0..=n {
                    let t = t0 + (t1 - t0) * i as f64 / n.max(1) as f64;
                    let l = t - d.at(t);
                    if l > 0.0 {
                        m = m.min(l);
                    }
                }
            }
        }
    }
    m
}

/// Integrates `rhs` from `t0` to `t1` with history `φ`.
pub fn integrate<R: DelayRhs + ?Sized>(
    rhs: &R,
    history: &HistoryFunction,
    t0: f64,
    t1: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if !(opts.step.is_finite() && opts.step > 0.0) {
        return Err(Error::Configuration(format!("step {} must be > 0", opts.step)));
    }
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::Configuration(format!("integration interval [{t0}, {t1}] is empty")));
    }
    let delays = rhs.delays();
    let span = rhs.max_lag();
    if !history.covers(t0 - span, t0) {
        return Err(Error::Configuration(format!(
            "history does not cover [{}, {t0}]",
            t0 - span
        )));
    }
    let min_lag = min_positive_lag(&delays, t0, t1, opts.step);
    if min_lag < opts.step * (1.0 - 1e-9) && !opts.allow_extrapolation {
        return Err(Error::Configuration(format!(
            "step {} exceeds the smallest positive lag {min_lag}; reduce it or allow extrapolation",
            opts.step
        )));
    }
    let mut lags: Vec<f64> = delays.iter().filter_map(|d| d.constant_lag()).filter(|&l| l > 0.0).collect();
    lags.sort_by(f64::total_cmp);
    lags.dedup();
    let mesh = build_mesh(&breaking_points(t0, t1, &lags, opts.max_breaking_points)?, opts.step);

    let x0 = opts.x0.unwrap_or_else(|| history.eval(t0));
    let mut traj = Trajectory {
        t0,
        mesh: Vec::with_capacity(mesh.len()),
        states: Vec::with_capacity(mesh.len()),
        right_derivatives: Vec::with_capacity(mesh.len()),
        left_derivatives: Vec::with_capacity(mesh.len()),
        history: history.clone(),
        history_span: span,
    };
    traj.mesh.push(t0);
    traj.states.push(x0);
    traj.right_derivatives.push(0.0);
    traj.left_derivatives.push(0.0);
    let quad_step = opts.step;

    let f = |traj: &Trajectory, t: f64, x: f64, side: Side| {
        let past = Past {
            traj,
            now: t,
            x_now: x,
            side,
            quad_step,
        };
        rhs.eval(t, x, &past)
    };
    let d0 = f(&traj, t0, x0, Side::Right);
    traj.right_derivatives[0] = d0;
    traj.left_derivatives[0] = d0;

    for w in mesh.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let h = tb - ta;
        let xa = *traj.states.last().unwrap();
        let k1 = *traj.right_derivatives.last().unwrap();
        let tm = ta + 0.5 * h;
        let k2 = f(&traj, tm, xa + 0.5 * h * k1, Side::Right);
        let k3 = f(&traj, tm, xa + 0.5 * h * k2, Side::Right);
        let k4 = f(&traj, tb, xa + h * k3, Side::Left);
        let xb = xa + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !xb.is_finite() || xb.abs() > DIVERGENCE_BOUND {
            return Err(Error::Divergence {
                time: tb,
                trajectory: Box::new(traj),
            });
        }
        let dl = f(&traj, tb, xb, Side::Left);
        let dr = f(&traj, tb, xb, Side::Right);
        traj.mesh.push(tb);
        traj.states.push(xb);
        traj.left_derivatives.push(dl);
        traj.right_derivatives.push(dr);
    }
    Ok(traj)
}

/// Solves the linear equation from `s` with zero history and `x(s) = 1`.
pub fn fundamental_solution(eq: &LinearDelayEquation, s: f64, t1: f64, opts: &IntegrateOptions) -> Result<Trajectory> {
    let o = IntegrateOptions {
        x0: Some(1.0),
        ..opts.clone()
    };
    integrate(&LinearRhs::new(eq), &HistoryFunction::constant(0.0), s, t1, &o)
}

/// Outcome of checking `∫_{t0+τ}^t X(t,s) a(s) ds <= 1` for a single positive term.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma3Report {
    pub max_integral: f64,
    pub at: f64,
    /// `X(t, s) > 0` on every computed solution; otherwise the bound is inapplicable.
    pub positive: bool,
    pub applicable: bool,
    pub samples: usize,
}

/// Maximum over the run of `∫_{t0+τ}^t X(t,s) a(s) ds` for `ẋ + a(t) x(h(t)) = 0`.
///
/// With a constant coefficient and lag, `X(t, s) = X(t − s + t0, t0)` and one solution
/// suffices; otherwise `X(·, s)` is computed on an `s`-grid of spacing `10·step` and
/// integrated with Simpson's rule.
pub fn verify_lemma3(eq: &LinearDelayEquation, t1: f64, opts: &IntegrateOptions) -> Result<Lemma3Report> {
    if eq.positive_terms().len() != 1 || !eq.negative_terms().is_empty() || !eq.distributed_terms().is_empty() {
        return Err(Error::Precondition("the bound is stated for a single positive term".into()));
    }
    let term = &eq.positive_terms()[0];
    let t0 = eq.t0();
    let tau = term.delay.lag_bound();
    let start = t0 + tau;
    if t1 <= start {
        return Err(Error::Configuration(format!("t1 = {t1} must exceed t0 + τ = {start}")));
    }

    if let (Some(c), Some(_)) = (term.coeff.kind().constant_value(), term.delay.constant_lag()) {
        if term.coeff.asymptotic_class() == &crate::timefn::AsymptoticClass::Constant {
            let x = fundamental_solution(eq, t0, t1 - tau, opts)?;
            let positive = x.states.iter().all(|&v| v > 0.0);
            // cumulative Simpson on each cell, midpoint from the cubic interpolant
            let (mut acc, mut best, mut at) = (0.0, 0.0f64, start);
            for i in 0..x.mesh.len() - 1 {
                let (a, b) = (x.mesh[i], x.mesh[i + 1]);
                let mid = x.hermite(i, 0.5 * (a + b));
                acc += (b - a) / 6.0 * (x.states[i] + 4.0 * mid + x.states[i + 1]) * c;
                if acc > best {
                    best = acc;
                    at = b + tau;
                }
            }
            return Ok(Lemma3Report {
                max_integral: best,
                at,
                positive,
                applicable: positive,
                samples: x.mesh.len(),
            });
        }
    }

    let ds = 10.0 * opts.step;
    let m = ((t1 - start) / ds).ceil() as usize;
    let ds = (t1 - start) / m as f64;
    let s_grid: Vec<f64> = (0..=m).map(|j| start + j as f64 * ds).collect();
    let sols: Vec<Trajectory> = {
        use rayon::prelude::*;
        s_grid
            .par_iter()
            .map(|&s| {
                if s >= t1 {
                    // degenerate last point: X(t1, t1) = 1
                    Ok(Trajectory {
                        t0: s,
                        mesh: vec![s],
                        states: vec![1.0],
                        right_derivatives: vec![0.0],
                        left_derivatives: vec![0.0],
                        history: HistoryFunction::constant(0.0),
                        history_span: tau,
                    })
                } else {
                    fundamental_solution(eq, s, t1, opts)
                }
            })
            .collect::<Result<_>>()?
    };
    let positive = sols.iter().all(|x| x.states.iter().all(|&v| v > 0.0));
    let a = |s: f64| term.coeff.value(s);
    let (mut best, mut at) = (0.0f64, start);
    for (k, &t) in s_grid.iter().enumerate().skip(1) {
        let g = |j: usize| sols[j].value_at(t) * a(s_grid[j]);
        let mut sum = 0.0;
        let even = k - k % 2;
        for j in (0..even).step_by(2) {
            sum += ds / 3.0 * (g(j) + 4.0 * g(j + 1) + g(j + 2));
        }
        if even < k {
            sum += 0.5 * ds * (g(k - 1) + g(k));
        }
        if sum > best {
            best = sum;
            at = t;
        }
    }
    Ok(Lemma3Report {
        max_integral: best,
        at,
        positive,
        applicable: positive,
        samples: s_grid.len(),
    })
}

/// Largest `|x_{φ1+φ2, f} − x_{φ1, f} − x_{φ2, 0}|` over the common mesh.
pub fn superposition_check(
    eq: &LinearDelayEquation,
    phi1: &HistoryFunction,
    phi2: &HistoryFunction,
    forcing: &(dyn Fn(f64) -> f64 + Sync),
    t1: f64,
    opts: &IntegrateOptions,
) -> Result<f64> {
    let t0 = eq.t0();
    let o = IntegrateOptions { x0: None, ..opts.clone() };
    let x1 = integrate(&LinearRhs::with_forcing(eq, forcing), phi1, t0, t1, &o)?;
    let x2 = integrate(&LinearRhs::new(eq), phi2, t0, t1, &o)?;
    let x12 = integrate(&LinearRhs::with_forcing(eq, forcing), &phi1.sum(phi2), t0, t1, &o)?;
    Ok(x12
        .states
        .iter()
        .zip(&x1.states)
        .zip(&x2.states)
        .map(|((a, b), c)| (a - b - c).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::Term;
    use crate::timefn::Coefficient;
    use std::f64::consts::E;

    fn k(v: f64) -> Coefficient {
        Coefficient::constant(v).unwrap()
    }

    fn single(a: f64, lag: f64) -> LinearDelayEquation {
        LinearDelayEquation::new(vec![Term::new(k(a), Delay::lag(lag).unwrap())], vec![], vec![], 0.0).unwrap()
    }

    /// Exact solution of `ẋ = −x(t−1)`, `φ ≡ 1`, on `[0, 3]` by the method of steps.
    fn exact_unit(t: f64) -> f64 {
        if t <= 1.0 {
            1.0 - t
        } else if t <= 2.0 {
            1.0 - t + (t - 1.0).powi(2) / 2.0
        } else {
            1.0 - t + (t - 1.0).powi(2) / 2.0 - (t - 2.0).powi(3) / 6.0
        }
    }

    #[test]
    fn matches_method_of_steps_polynomials() {
        let eq = single(1.0, 1.0);
        let tr = integrate(&LinearRhs::new(&eq), &HistoryFunction::constant(1.0), 0.0, 3.0, &IntegrateOptions::with_step(0.05))
            .unwrap();
        for (t, x) in tr.mesh.iter().zip(&tr.states) {
            assert!((x - exact_unit(*t)).abs() < 1e-12, "t={t}");
        }
        assert!((tr.value_at(2.5) - exact_unit(2.5)).abs() < 1e-12);
    }

    #[test]
    fn deep_breaking_points_are_dropped_at_the_cap() {
        let lags = [0.0731, 0.0517];
        let pts = breaking_points(0.0, 400.0, &lags, 2000).unwrap();
        assert!(pts.len() <= 2001);
        for i in 0..=SMOOTH_DEPTH {
            let p = i as f64 * lags[0] + (SMOOTH_DEPTH - i) as f64 * lags[1];
            assert!(pts.iter().any(|q| (q - p).abs() < 1e-9), "{p}");
        }
        assert!(matches!(breaking_points(0.0, 400.0, &lags, 10), Err(Error::Configuration(_))));
    }

    #[test]
    fn mesh_contains_breaking_points() {
        let pts = breaking_points(0.0, 5.0, &[1.0, 1.5], 1000).unwrap();
        for p in [1.0, 1.5, 2.0, 2.5, 3.0, 4.5] {
            assert!(pts.iter().any(|q| (q - p).abs() < 1e-12), "{p}");
        }
        let mesh = build_mesh(&pts, 0.3);
        assert!(mesh.windows(2).all(|w| w[1] - w[0] <= 0.3 + 1e-12));
    }

    #[test]
    fn jump_at_initial_time_is_respected() {
        // φ ≡ 0, x0 = 1: x(t) = 1 − t on [0, 1] for ẋ = −x(t) ... here ẋ = −x(t − 1)
        let eq = single(1.0, 1.0);
        let o = IntegrateOptions {
            x0: Some(1.0),
            ..IntegrateOptions::with_step(0.1)
        };
        let tr = integrate(&LinearRhs::new(&eq), &HistoryFunction::constant(0.0), 0.0, 2.0, &o).unwrap();
        // on [0,1] the delayed value is φ = 0, so x stays at 1; then ẋ = −1 on (1, 2)
        assert!((tr.value_at(1.0) - 1.0).abs() < 1e-14);
        assert!((tr.value_at(2.0) - 0.0).abs() < 1e-12);
        assert_eq!(tr.left_derivatives[tr.mesh.iter().position(|&t| t == 1.0).unwrap()], 0.0);
        assert_eq!(tr.right_derivatives[tr.mesh.iter().position(|&t| t == 1.0).unwrap()], -1.0);
    }

    #[test]
    fn ode_limit_is_fourth_order() {
        let eq = LinearDelayEquation::new(vec![Term::new(k(1.0), Delay::Identity)], vec![], vec![], 0.0).unwrap();
        let err = |h: f64| {
            let tr = integrate(&LinearRhs::new(&eq), &HistoryFunction::constant(1.0), 0.0, 1.0, &IntegrateOptions::with_step(h))
                .unwrap();
            (tr.states.last().unwrap() - (-1f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((14.0..18.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn step_longer_than_lag_is_rejected() {
        let eq = single(1.0, 0.05);
        let r = integrate(&LinearRhs::new(&eq), &HistoryFunction::constant(1.0), 0.0, 1.0, &IntegrateOptions::with_step(0.1));
        assert!(matches!(r, Err(Error::Configuration(_))));
    }

    #[test]
    fn divergence_keeps_partial_trajectory() {
        let eq = LinearDelayEquation::new(vec![Term::new(k(5.0), Delay::lag(1.0).unwrap())], vec![], vec![], 0.0).unwrap();
        match integrate(&LinearRhs::new(&eq), &HistoryFunction::constant(1.0), 0.0, 400.0, &IntegrateOptions::with_step(0.05)) {
            Err(Error::Divergence { time, trajectory }) => {
                assert!(time > 1.0 && time < 400.0);
                assert!(trajectory.states.iter().all(|v| v.abs() <= DIVERGENCE_BOUND));
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn critical_lag_fundamental_solution_stays_positive() {
        let eq = single(1.0, 1.0 / E);
        let rep = verify_lemma3(&eq, 30.0, &IntegrateOptions::with_step(0.01)).unwrap();
        assert!(rep.positive && rep.applicable);
        assert!(rep.max_integral <= 1.0 + 1e-3, "{}", rep.max_integral);
        assert!(rep.max_integral > 0.9);
    }

    #[test]
    fn superposition_with_zero_history_is_exact() {
        let eq = LinearDelayEquation::two_term(k(1.0), Delay::lag(1.0).unwrap(), k(0.3), Delay::lag(0.5).unwrap()).unwrap();
        let phi = HistoryFunction::function(|t| (3.0 * t).cos());
        let d = superposition_check(&eq, &phi, &HistoryFunction::constant(0.0), &|t| t.sin(), 10.0, &IntegrateOptions::with_step(0.05))
            .unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn distributed_constant_window_preserves_constants() {
        use crate::criteria::{DistributedTerm, Kernel};
        let eq = LinearDelayEquation::new(
            vec![],
            vec![],
            vec![DistributedTerm {
                sign: Sign::Positive,
                total_weight: k(1.0),
                window_start: Delay::lag(1.0).unwrap(),
                kernel: Kernel::Exponential { rate: 2.0 },
            }],
            0.0,
        )
        .unwrap();
        let o = IntegrateOptions {
            allow_extrapolation: true,
            ..IntegrateOptions::with_step(0.01)
        };
        let tr = integrate(&LinearRhs::new(&eq), &HistoryFunction::constant(1.0), 0.0, 0.01, &o).unwrap();
        assert!((tr.right_derivatives[0] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn tabulated_history_interpolates() {
        let h = HistoryFunction::tabulated(vec![-1.0, 0.0], vec![2.0, 4.0]).unwrap();
        assert_eq!(h.eval(-0.5), 3.0);
        assert_eq!(h.eval(-3.0), 2.0);
        assert!(HistoryFunction::tabulated(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        let eq = single(1.0, 2.0);
        let r = integrate(&LinearRhs::new(&eq), &h, 0.0, 1.0, &IntegrateOptions::with_step(0.1));
        assert!(matches!(r, Err(Error::Configuration(_))));
    }
}
