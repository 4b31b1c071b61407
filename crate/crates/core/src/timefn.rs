//! Time-varying coefficients, delayed arguments, and the window integrals and
//! essential suprema that every stability criterion consumes.
//!
//! Suprema over `[t0, ∞)` are only decidable with structural knowledge, so each
//! [`Coefficient`] declares an [`AsymptoticClass`]:
//!
//! * `Constant`: the value is evaluated once.
//! * `Periodic`: one period is scanned on a grid and refined by golden-section search.
//! * `General`: a finite horizon is scanned and the result is flagged `horizon_limited`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values within this distance of a bound are "marginal", never satisfied.
pub const MARGINAL_TOL: f64 = 1e-9;

/// Default number of grid cells used to seed extremum searches.
pub const DEFAULT_GRID: usize = 1024;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Long-run structure of a coefficient, used to decide how a supremum over
/// `[t0, ∞)` is computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AsymptoticClass {
    Constant,
    Periodic {
        period: f64,
    },
    General {
        analysis_horizon: f64,
        /// Declared bound for window quantities beyond the horizon.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail_bound: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CoefficientKind {
    Constant {
        value: f64,
    },
    /// `amplitude * sin²(angular_freq * t + phase)`
    SinSq {
        amplitude: f64,
        angular_freq: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `values[0]` before `breakpoints[0]`, `values[i]` on
    /// `[breakpoints[i-1], breakpoints[i])`, the last value afterwards.
    /// With `period`, breakpoints lie in `(0, period)` and the pattern repeats.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<f64>,
    },
    Scaled {
        factor: f64,
        inner: Box<CoefficientKind>,
    },
    Sum {
        terms: Vec<CoefficientKind>,
    },
}

impl CoefficientKind {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::SinSq {
                amplitude,
                angular_freq,
                phase,
            } => {
                let s = (angular_freq * t + phase).sin();
                amplitude * s * s
            }
            Self::PiecewiseConstant {
                breakpoints,
                values,
                period,
            } => {
                let u = match period {
                    Some(p) => t.rem_euclid(*p),
                    None => t,
                };
                values[breakpoints.partition_point(|&b| b <= u)]
            }
            Self::Scaled { factor, inner } => factor * inner.value(t),
            Self::Sum { terms } => terms.iter().map(|k| k.value(t)).sum(),
        }
    }

    /// Exact `∫_lo^hi value(s) ds`; antisymmetric in its bounds.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        if lo == hi {
            return 0.0;
        }
        match self {
            Self::Constant { value } => value * (hi - lo),
            Self::SinSq {
                amplitude,
                angular_freq,
                phase,
            } => {
                // sin(2u) - sin(2v) = 2 cos(u + v) sin(u - v)
                let w = *angular_freq;
                let diff = (w * (hi + lo) + 2.0 * phase).cos() * (w * (hi - lo)).sin();
                amplitude * (0.5 * (hi - lo) - diff / (2.0 * w))
            }
            Self::PiecewiseConstant {
                breakpoints,
                values,
                period,
            } => match period {
                None => piecewise_primitive(breakpoints, values, hi) - piecewise_primitive(breakpoints, values, lo),
                Some(p) => periodic_piecewise_integral(breakpoints, values, *p, lo, hi),
            },
            Self::Scaled { factor, inner } => factor * inner.integral(lo, hi),
            Self::Sum { terms } => terms.iter().map(|k| k.integral(lo, hi)).sum(),
        }
    }

    /// True when the kind is structurally constant in time.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Self::Constant { value } => Some(*value),
            Self::SinSq { amplitude, .. } => (*amplitude == 0.0).then_some(0.0),
            Self::PiecewiseConstant { values, .. } => {
                let first = values[0];
                values.iter().all(|&v| v == first).then_some(first)
            }
            Self::Scaled { factor, inner } => {
                if *factor == 0.0 {
                    Some(0.0)
                } else {
                    inner.constant_value().map(|v| factor * v)
                }
            }
            Self::Sum { terms } => terms.iter().map(|k| k.constant_value()).sum(),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidCoefficient(m));
        match self {
            Self::Constant { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return bad(format!("constant value {value} must be finite and >= 0"));
                }
            }
            Self::SinSq {
                amplitude,
                angular_freq,
                phase,
            } => {
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    return bad(format!("amplitude {amplitude} must be finite and >= 0"));
                }
                if !(angular_freq.is_finite() && *angular_freq > 0.0) {
                    return bad(format!("angular frequency {angular_freq} must be > 0"));
                }
                if !phase.is_finite() {
                    return bad("phase must be finite".into());
                }
            }
            Self::PiecewiseConstant {
                breakpoints,
                values,
                period,
            } => {
                if values.len() != breakpoints.len() + 1 {
                    return bad(format!(
                        "piecewise constant needs {} values for {} breakpoints, got {}",
                        breakpoints.len() + 1,
                        breakpoints.len(),
                        values.len()
                    ));
                }
                if breakpoints.windows(2).any(|w| !(w[0] < w[1])) || breakpoints.iter().any(|b| !b.is_finite()) {
                    return bad("breakpoints must be finite and strictly ascending".into());
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return bad("piecewise values must be finite and >= 0".into());
                }
                if let Some(p) = period {
                    if !(p.is_finite() && *p > 0.0) {
                        return bad(format!("period {p} must be > 0"));
                    }
                    if breakpoints.iter().any(|&b| b <= 0.0 || b >= *p) {
                        return bad("periodic breakpoints must lie in (0, period)".into());
                    }
                }
            }
            Self::Scaled { factor, inner } => {
                if !(factor.is_finite() && *factor >= 0.0) {
                    return bad(format!("scale factor {factor} must be finite and >= 0"));
                }
                inner.validate()?;
            }
            Self::Sum { terms } => {
                for k in terms {
                    k.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Decomposes into `Σ weight · atom` with normalized atoms, merging equal atoms.
    fn linear_form(&self) -> Vec<(f64, Atom)> {
        let mut out: Vec<(f64, Atom)> = Vec::new();
        self.push_linear_form(1.0, &mut out);
        out.retain(|(w, _)| *w != 0.0);
        out
    }

    fn push_linear_form(&self, scale: f64, out: &mut Vec<(f64, Atom)>) {
        let mut push = |w: f64, atom: Atom| {
            if let Some(slot) = out.iter_mut().find(|(_, a)| *a == atom) {
                slot.0 += w;
            } else {
                out.push((w, atom));
            }
        };
        match self {
            Self::Constant { value } => push(scale * value, Atom::Unit),
            Self::SinSq {
                amplitude,
                angular_freq,
                phase,
            } => push(
                scale * amplitude,
                Atom::SinSq {
                    angular_freq: *angular_freq,
                    phase: phase.rem_euclid(PI),
                },
            ),
            Self::PiecewiseConstant { .. } => push(scale, Atom::Other(self.clone())),
            Self::Scaled { factor, inner } => inner.push_linear_form(scale * factor, out),
            Self::Sum { terms } => {
                for k in terms {
                    k.push_linear_form(scale, out);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Atom {
    Unit,
    SinSq { angular_freq: f64, phase: f64 },
    Other(CoefficientKind),
}

fn piecewise_primitive(breakpoints: &[f64], values: &[f64], t: f64) -> f64 {
    // Primitive anchored at the first breakpoint (or 0 when there are none).
    let Some(&b0) = breakpoints.first() else {
        return values[0] * t;
    };
    if t <= b0 {
        return values[0] * (t - b0);
    }
    let mut acc = 0.0;
    for i in 0..breakpoints.len() {
        let start = breakpoints[i];
        let end = breakpoints.get(i + 1).copied().unwrap_or(f64::INFINITY);
        if t <= end {
            return acc + values[i + 1] * (t - start);
        }
        acc += values[i + 1] * (end - start);
    }
    unreachable!("last segment is unbounded")
}

fn periodic_piecewise_integral(breakpoints: &[f64], values: &[f64], period: f64, lo: f64, hi: f64) -> f64 {
    // ∫_0^u over one period pattern, u in [0, period]
    let partial = |u: f64| -> f64 {
        let mut acc = 0.0;
        let mut start = 0.0;
        for (i, &v) in values.iter().enumerate() {
            let end = breakpoints.get(i).copied().unwrap_or(period);
            if u <= end {
                return acc + v * (u - start);
            }
            acc += v * (end - start);
            start = end;
        }
        acc
    };
    let full = partial(period);
    let primitive = |t: f64| {
        let k = (t / period).floor();
        let u = t - k * period;
        k * full + partial(u.clamp(0.0, period))
    };
    primitive(hi) - primitive(lo)
}

/// Anything with point values and exact integrals over windows.
pub trait Integrand: Sync {
    fn value(&self, t: f64) -> f64;
    fn integral(&self, lo: f64, hi: f64) -> f64;
    fn class(&self) -> AsymptoticClass;
}

/// A nonnegative scalar time function with a declared asymptotic class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CoefficientRepr", into = "CoefficientRepr")]
pub struct Coefficient {
    kind: CoefficientKind,
    class: AsymptoticClass,
}

#[derive(Clone, Serialize, Deserialize)]
struct CoefficientRepr {
    kind: CoefficientKind,
    class: AsymptoticClass,
}

impl TryFrom<CoefficientRepr> for Coefficient {
    type Error = Error;
    fn try_from(r: CoefficientRepr) -> Result<Self> {
        Coefficient::new(r.kind, r.class)
    }
}

impl From<Coefficient> for CoefficientRepr {
    fn from(c: Coefficient) -> Self {
        CoefficientRepr {
            kind: c.kind,
            class: c.class,
        }
    }
}

impl Coefficient {
    pub fn new(kind: CoefficientKind, class: AsymptoticClass) -> Result<Self> {
        kind.validate()?;
        match &class {
            AsymptoticClass::Constant => {
                if kind.constant_value().is_none() {
                    return Err(Error::InvalidCoefficient(
                        "constant class declared for a time-varying coefficient".into(),
                    ));
                }
            }
            AsymptoticClass::Periodic { period } => {
                if !(period.is_finite() && *period > 0.0) {
                    return Err(Error::InvalidCoefficient(format!("period {period} must be > 0")));
                }
                let scale = 1.0 + (0..8).map(|i| kind.value(i as f64 * 0.37).abs()).fold(0.0, f64::max);
                for i in 0..16 {
                    let t = 0.173 + i as f64 * period / 16.0 + 0.011 * i as f64;
                    if (kind.value(t + period) - kind.value(t)).abs() > 1e-9 * scale {
                        return Err(Error::InvalidCoefficient(format!(
                            "coefficient is not periodic with period {period}"
                        )));
                    }
                }
            }
            AsymptoticClass::General {
                analysis_horizon,
                tail_bound,
            } => {
                if !(analysis_horizon.is_finite() && *analysis_horizon > 0.0) {
                    return Err(Error::Configuration(format!(
                        "analysis horizon {analysis_horizon} must be > 0"
                    )));
                }
                if let Some(b) = tail_bound {
                    if !b.is_finite() {
                        return Err(Error::Configuration("tail bound must be finite".into()));
                    }
                }
            }
        }
        Ok(Self { kind, class })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(CoefficientKind::Constant { value }, AsymptoticClass::Constant)
    }

    /// `amplitude * sin²(angular_freq * t + phase)`, periodic with period `π / angular_freq`.
    pub fn sin_sq(amplitude: f64, angular_freq: f64, phase: f64) -> Result<Self> {
        Self::new(
            CoefficientKind::SinSq {
                amplitude,
                angular_freq,
                phase,
            },
            AsymptoticClass::Periodic {
                period: PI / angular_freq,
            },
        )
    }

    pub fn piecewise(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let kind = CoefficientKind::PiecewiseConstant {
            breakpoints,
            values,
            period: None,
        };
        let class = if kind.constant_value().is_some() {
            AsymptoticClass::Constant
        } else {
            let CoefficientKind::PiecewiseConstant { breakpoints, .. } = &kind else {
                unreachable!()
            };
            // Eventually constant: everything after the last breakpoint is the tail.
            AsymptoticClass::General {
                analysis_horizon: breakpoints.last().copied().unwrap_or(0.0).max(0.0) + 1.0,
                tail_bound: None,
            }
        };
        Self::new(kind, class)
    }

    pub fn periodic_piecewise(breakpoints: Vec<f64>, values: Vec<f64>, period: f64) -> Result<Self> {
        Self::new(
            CoefficientKind::PiecewiseConstant {
                breakpoints,
                values,
                period: Some(period),
            },
            AsymptoticClass::Periodic { period },
        )
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let class = if factor == 0.0 {
            AsymptoticClass::Constant
        } else {
            self.class.clone()
        };
        Self::new(
            CoefficientKind::Scaled {
                factor,
                inner: Box::new(self.kind.clone()),
            },
            class,
        )
    }

    pub fn sum(terms: &[Coefficient]) -> Result<Self> {
        let class = terms
            .iter()
            .map(|c| c.class.clone())
            .reduce(|a, b| combine_classes(&a, &b))
            .unwrap_or(AsymptoticClass::Constant);
        let kinds = terms.iter().map(|c| c.kind.clone()).collect();
        Self::new(CoefficientKind::Sum { terms: kinds }, class)
    }

    pub fn kind(&self) -> &CoefficientKind {
        &self.kind
    }

    pub fn asymptotic_class(&self) -> &AsymptoticClass {
        &self.class
    }

    pub fn value(&self, t: f64) -> f64 {
        self.kind.value(t)
    }

    pub fn antiderivative(&self, t: f64) -> f64 {
        self.kind.integral(0.0, t)
    }

    pub fn is_identically_zero(&self) -> bool {
        self.kind.constant_value() == Some(0.0)
    }

    /// Returns `k` when `other = k · self` holds structurally.
    pub fn proportionality(&self, other: &Coefficient) -> Option<f64> {
        let mine = self.kind.linear_form();
        let theirs = other.kind.linear_form();
        if theirs.is_empty() {
            return (!mine.is_empty()).then_some(0.0);
        }
        if mine.len() != theirs.len() || mine.is_empty() {
            return None;
        }
        let mut ratio = None;
        for (w, atom) in &mine {
            let (w2, _) = theirs.iter().find(|(_, a)| a == atom)?;
            let k = w2 / w;
            match ratio {
                None => ratio = Some(k),
                Some(r) if (k - r).abs() <= 1e-12 * r.abs().max(k.abs()) => {}
                Some(_) => return None,
            }
        }
        ratio
    }
}

impl Integrand for Coefficient {
    fn value(&self, t: f64) -> f64 {
        self.kind.value(t)
    }
    fn integral(&self, lo: f64, hi: f64) -> f64 {
        self.kind.integral(lo, hi)
    }
    fn class(&self) -> AsymptoticClass {
        self.class.clone()
    }
}

/// `Σ weight_i · c_i` with signed weights; used for `a − b` and similar.
#[derive(Clone, Debug)]
pub struct Combination {
    terms: Vec<(f64, Coefficient)>,
    class: AsymptoticClass,
}

impl Combination {
    pub fn new(terms: Vec<(f64, Coefficient)>) -> Self {
        let class = terms
            .iter()
            .map(|(_, c)| c.class.clone())
            .reduce(|a, b| combine_classes(&a, &b))
            .unwrap_or(AsymptoticClass::Constant);
        Self { terms, class }
    }

    pub fn difference(a: &Coefficient, b: &Coefficient) -> Self {
        Self::new(vec![(1.0, a.clone()), (-1.0, b.clone())])
    }
}

impl Integrand for Combination {
    fn value(&self, t: f64) -> f64 {
        self.terms.iter().map(|(w, c)| w * c.value(t)).sum()
    }
    fn integral(&self, lo: f64, hi: f64) -> f64 {
        self.terms.iter().map(|(w, c)| w * c.integral(lo, hi)).sum()
    }
    fn class(&self) -> AsymptoticClass {
        self.class.clone()
    }
}

/// Class of a sum of two functions with the given classes.
pub fn combine_classes(a: &AsymptoticClass, b: &AsymptoticClass) -> AsymptoticClass {
    use AsymptoticClass::*;
    match (a, b) {
        (Constant, x) | (x, Constant) => x.clone(),
        (Periodic { period: p }, Periodic { period: q }) => match common_period(*p, *q) {
            Some(period) => Periodic { period },
            None => General {
                analysis_horizon: 50.0 * p.max(*q),
                tail_bound: None,
            },
        },
        (
            General {
                analysis_horizon: h1, ..
            },
            General {
                analysis_horizon: h2, ..
            },
        ) => General {
            analysis_horizon: h1.max(*h2),
            tail_bound: None,
        },
        (General { analysis_horizon, .. }, Periodic { period }) | (Periodic { period }, General { analysis_horizon, .. }) => {
            General {
                analysis_horizon: analysis_horizon.max(*period),
                tail_bound: None,
            }
        }
    }
}

fn common_period(p: f64, q: f64) -> Option<f64> {
    for k in 1..=64u32 {
        let m = (k as f64 * p / q).round();
        if m >= 1.0 && (k as f64 * p - m * q).abs() <= 1e-12 * k as f64 * p {
            return Some(k as f64 * p);
        }
    }
    None
}

/// A user-supplied delayed argument `h(t)` with a declared lag bound.
#[derive(Clone)]
pub struct GeneralDelay {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    lag_bound: f64,
    label: String,
}

impl fmt::Debug for GeneralDelay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralDelay")
            .field("label", &self.label)
            .field("lag_bound", &self.lag_bound)
            .finish()
    }
}

impl PartialEq for GeneralDelay {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.f, &other.f) && self.lag_bound == other.lag_bound
    }
}

/// A delayed argument `h(t) <= t` with `t - h(t) <= lag_bound`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", try_from = "DelayRepr")]
pub enum Delay {
    Identity,
    ConstantLag {
        lag: f64,
    },
    #[serde(skip)]
    General(GeneralDelay),
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum DelayRepr {
    Identity,
    ConstantLag { lag: f64 },
}

impl TryFrom<DelayRepr> for Delay {
    type Error = Error;
    fn try_from(r: DelayRepr) -> Result<Self> {
        match r {
            DelayRepr::Identity => Ok(Delay::Identity),
            DelayRepr::ConstantLag { lag } => Delay::lag(lag),
        }
    }
}

impl Delay {
    pub fn lag(lag: f64) -> Result<Self> {
        if !(lag.is_finite() && lag >= 0.0) {
            return Err(Error::InvalidDelay(format!("lag {lag} must be finite and >= 0")));
        }
        Ok(if lag == 0.0 {
            Delay::Identity
        } else {
            Delay::ConstantLag { lag }
        })
    }

    pub fn general(label: impl Into<String>, lag_bound: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(lag_bound.is_finite() && lag_bound >= 0.0) {
            return Err(Error::InvalidDelay(format!("lag bound {lag_bound} must be finite and >= 0")));
        }
        Ok(Delay::General(GeneralDelay {
            f: Arc::new(f),
            lag_bound,
            label: label.into(),
        }))
    }

    /// `h(t)`
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Delay::Identity => t,
            Delay::ConstantLag { lag } => t - lag,
            Delay::General(g) => (g.f)(t),
        }
    }

    /// `h(t)`, rejecting values outside `[t - lag_bound, t]`.
    pub fn checked_at(&self, t: f64) -> Result<f64> {
        let h = self.at(t);
        let bound = self.lag_bound();
        let slack = 1e-12 * (1.0 + t.abs());
        if h > t + slack {
            return Err(Error::InvalidDelay(format!("delayed argument {h} exceeds t = {t}")));
        }
        if t - h > bound + slack {
            return Err(Error::InvalidDelay(format!(
                "lag {} at t = {t} exceeds declared bound {bound}",
                t - h
            )));
        }
        Ok(h)
    }

    pub fn lag_bound(&self) -> f64 {
        match self {
            Delay::Identity => 0.0,
            Delay::ConstantLag { lag } => *lag,
            Delay::General(g) => g.lag_bound,
        }
    }

    /// `Some(lag)` for `Identity` and `ConstantLag`.
    pub fn constant_lag(&self) -> Option<f64> {
        match self {
            Delay::Identity => Some(0.0),
            Delay::ConstantLag { lag } => Some(*lag),
            Delay::General(_) => None,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Delay::Identity) || self.constant_lag() == Some(0.0)
    }

    /// Pointwise minimum of delayed arguments (largest lag).
    pub fn min_of(delays: &[Delay]) -> Result<Delay> {
        Self::pointwise(delays, true)
    }

    /// Pointwise maximum of delayed arguments (smallest lag).
    pub fn max_of(delays: &[Delay]) -> Result<Delay> {
        Self::pointwise(delays, false)
    }

    fn pointwise(delays: &[Delay], take_min: bool) -> Result<Delay> {
        if delays.is_empty() {
            return Err(Error::InvalidDelay("empty delay set".into()));
        }
        if delays.len() == 1 {
            return Ok(delays[0].clone());
        }
        let lags: Option<Vec<f64>> = delays.iter().map(Delay::constant_lag).collect();
        if let Some(lags) = lags {
            let lag = if take_min {
                lags.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            } else {
                lags.iter().copied().fold(f64::INFINITY, f64::min)
            };
            return Delay::lag(lag);
        }
        let bound = if take_min {
            delays.iter().map(Delay::lag_bound).fold(0.0, f64::max)
        } else {
            delays.iter().map(Delay::lag_bound).fold(f64::INFINITY, f64::min)
        };
        let owned: Vec<Delay> = delays.to_vec();
        let label = if take_min { "min" } else { "max" };
        Delay::general(label, bound, move |t| {
            let it = owned.iter().map(|d| d.at(t));
            if take_min {
                it.fold(f64::INFINITY, f64::min)
            } else {
                it.fold(f64::NEG_INFINITY, f64::max)
            }
        })
    }
}

/// Settings for extremum searches.
#[derive(Clone, Debug, PartialEq)]
pub struct SupOptions {
    /// Seeding grid cells over the scan domain (at least 1024 recommended).
    pub grid: usize,
    /// Abscissa tolerance of the golden-section refinement.
    pub refine_tol: f64,
    /// Horizon used when the scan domain is not structurally periodic.
    pub horizon: Option<f64>,
}

impl Default for SupOptions {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID,
            refine_tol: 1e-12,
            horizon: None,
        }
    }
}

/// Result of an extremum search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub value: f64,
    /// Where the extremum was attained.
    pub at: f64,
    /// True when only a finite horizon was scanned.
    pub horizon_limited: bool,
}

/// Where an extremum over `[t0, ∞)` is looked for.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanDomain {
    pub start: f64,
    pub length: f64,
    pub kind: ScanKind,
    pub tail_bound: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanKind {
    /// The scanned function is constant; evaluate once.
    Constant,
    /// The function is periodic with period `length`.
    Periodic,
    /// Only `[start, start + length]` is examined.
    Horizon,
}

impl ScanDomain {
    /// Scan domain for a function built from `class` and the given delays.
    pub fn for_class(class: &AsymptoticClass, delays: &[&Delay], t0: f64, opts: &SupOptions) -> Result<Self> {
        let shift_invariant = delays.iter().all(|d| d.constant_lag().is_some());
        let horizon = |fallback: Option<f64>, tail: Option<f64>| -> Result<Self> {
            let length = opts.horizon.or(fallback).ok_or_else(|| {
                Error::Configuration("time-varying delays or general coefficients need an analysis horizon".into())
            })?;
            if !(length.is_finite() && length > 0.0) {
                return Err(Error::Configuration(format!("analysis horizon {length} must be > 0")));
            }
            Ok(ScanDomain {
                start: t0,
                length,
                kind: ScanKind::Horizon,
                tail_bound: tail,
            })
        };
        match class {
            AsymptoticClass::Constant if shift_invariant => Ok(ScanDomain {
                start: t0,
                length: 0.0,
                kind: ScanKind::Constant,
                tail_bound: None,
            }),
            AsymptoticClass::Periodic { period } if shift_invariant => Ok(ScanDomain {
                start: t0,
                length: *period,
                kind: ScanKind::Periodic,
                tail_bound: None,
            }),
            AsymptoticClass::Constant | AsymptoticClass::Periodic { .. } => horizon(None, None),
            AsymptoticClass::General {
                analysis_horizon,
                tail_bound,
            } => horizon(Some(*analysis_horizon), *tail_bound),
        }
    }

    pub fn horizon_limited(&self) -> bool {
        self.kind == ScanKind::Horizon
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Goal {
    Max,
    Min,
}

/// Extremum of `f` over the scan domain: grid seeding followed by golden-section
/// refinement around every grid-local optimum among the best candidates.
/// NaN samples are treated as points of measure zero and ignored.
pub fn extremum<F: Fn(f64) -> f64>(f: F, domain: &ScanDomain, goal: Goal, opts: &SupOptions) -> Result<Extremum> {
    let sign = match goal {
        Goal::Max => 1.0,
        Goal::Min => -1.0,
    };
    let g = |t: f64| {
        let v = sign * f(t);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let limited = domain.horizon_limited();
    if domain.kind == ScanKind::Constant {
        let v = f(domain.start);
        if v.is_nan() {
            return Err(Error::Undefined(format!("function undefined at t = {}", domain.start)));
        }
        return Ok(Extremum {
            value: v,
            at: domain.start,
            horizon_limited: false,
        });
    }

    let mut cells = opts.grid.max(16);
    if domain.kind == ScanKind::Horizon {
        cells = cells.max((16.0 * domain.length).ceil().min(1.0e6) as usize);
    }
    let dx = domain.length / cells as f64;
    let xs: Vec<f64> = (0..=cells).map(|i| domain.start + i as f64 * dx).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    if ys.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(Error::Undefined("function undefined on the whole scan domain".into()));
    }

    let periodic = domain.kind == ScanKind::Periodic;
    let n = ys.len();
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = if i > 0 {
                ys[i - 1]
            } else if periodic {
                ys[n - 2]
            } else {
                f64::NEG_INFINITY
            };
            let right = if i + 1 < n {
                ys[i + 1]
            } else if periodic {
                ys[1]
            } else {
                f64::NEG_INFINITY
            };
            ys[i] >= left && ys[i] >= right && ys[i] > f64::NEG_INFINITY
        })
        .collect();
    candidates.sort_by(|&a, &b| ys[b].total_cmp(&ys[a]).then(a.cmp(&b)));
    candidates.truncate(8);

    let (mut best_x, mut best_y) = (xs[0], ys[0]);
    for (&x, &y) in xs.iter().zip(&ys) {
        if y > best_y {
            best_x = x;
            best_y = y;
        }
    }
    let lo_lim = if periodic { f64::NEG_INFINITY } else { domain.start };
    let hi_lim = if periodic {
        f64::INFINITY
    } else {
        domain.start + domain.length
    };
    for &i in &candidates {
        let a = (xs[i] - dx).max(lo_lim);
        let b = (xs[i] + dx).min(hi_lim);
        let (x, y) = golden_max(&g, a, b, opts.refine_tol);
        if y > best_y {
            best_x = x;
            best_y = y;
        }
    }
    if periodic {
        best_x = domain.start + (best_x - domain.start).rem_euclid(domain.length);
    }

    let mut value = sign * best_y;
    if let Some(tail) = domain.tail_bound {
        value = match goal {
            Goal::Max => value.max(tail),
            Goal::Min => value.min(tail),
        };
    }
    Ok(Extremum {
        value,
        at: best_x,
        horizon_limited: limited,
    })
}

fn golden_max<G: Fn(f64) -> f64>(g: &G, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    let mut iters = 0;
    while (b - a).abs() > tol && iters < 200 {
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - GOLDEN * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + GOLDEN * (b - a);
            gd = g(d);
        }
        iters += 1;
    }
    let (ga, gb) = (g(a), g(b));
    [(c, gc), (d, gd), (a, ga), (b, gb)]
        .into_iter()
        .fold((c, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc })
}

/// `∫_{lower(t)}^{t} c(s) ds`
pub fn window_integral<I: Integrand + ?Sized>(c: &I, lower: &Delay, t: f64) -> Result<f64> {
    let lo = lower.checked_at(t)?;
    Ok(c.integral(lo, t))
}

/// Essential supremum over `t >= t0` of `∫_{lower(t)}^{t} c(s) ds`.
pub fn sup_window_integral<I: Integrand + ?Sized>(c: &I, lower: &Delay, t0: f64, opts: &SupOptions) -> Result<Extremum> {
    let domain = ScanDomain::for_class(&c.class(), &[lower], t0, opts)?;
    lower.checked_at(t0)?;
    extremum(|t| c.integral(lower.at(t), t), &domain, Goal::Max, opts)
}

/// Essential supremum over `t >= t0` of `|∫_{d1(t)}^{d2(t)} c(s) ds|`.
pub fn sup_between_delays<I: Integrand + ?Sized>(
    c: &I,
    d1: &Delay,
    d2: &Delay,
    t0: f64,
    opts: &SupOptions,
) -> Result<Extremum> {
    if d1 == d2 {
        return Ok(Extremum {
            value: 0.0,
            at: t0,
            horizon_limited: false,
        });
    }
    let domain = ScanDomain::for_class(&c.class(), &[d1, d2], t0, opts)?;
    d1.checked_at(t0)?;
    d2.checked_at(t0)?;
    extremum(|t| c.integral(d1.at(t), d2.at(t)).abs(), &domain, Goal::Max, opts)
}

/// Limit inferior over `t >= t0` of `∫_t^{t+window} c(s) ds`.
pub fn liminf_forward_integral<I: Integrand + ?Sized>(c: &I, window: f64, t0: f64, opts: &SupOptions) -> Result<Extremum> {
    if !(window.is_finite() && window > 0.0) {
        return Err(Error::Configuration(format!("forward window {window} must be > 0")));
    }
    let domain = ScanDomain::for_class(&c.class(), &[], t0, opts)?;
    extremum(|t| c.integral(t, t + window), &domain, Goal::Min, opts)
}

/// Supremum (or infimum) over `t >= t0` of a pointwise function of coefficients with `class`.
pub fn pointwise_extremum<F: Fn(f64) -> f64>(
    f: F,
    class: &AsymptoticClass,
    t0: f64,
    goal: Goal,
    opts: &SupOptions,
) -> Result<Extremum> {
    let domain = ScanDomain::for_class(class, &[], t0, opts)?;
    extremum(f, &domain, goal, opts)
}
