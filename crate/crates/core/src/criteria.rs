//! Explicit exponential-stability criteria for
//! `ẋ(t) + Σ a_k(t) x(h_k(t)) − Σ b_k(t) x(g_k(t)) = 0` and its distributed-delay
//! relatives, each evaluated into a [`Certificate`].
//!
//! Three families are implemented:
//!
//! * **dominance**: the positive part is undelayed and `esssup Σb/a < 1`;
//! * **difference**: a time change by `∫(a − b)` reduces the equation to one with a
//!   positive fundamental function, giving
//!   `‖(∫_h^t (a−b) − 1/e)⁺‖ + 2‖b/(a−b)‖ ‖∫_r^R (a−b)‖ < 1`;
//! * **ratio**: a time change by `∫a`, giving
//!   `‖(∫_h^t a − 1/e)⁺‖ < (1 − ‖b/a‖)/‖1 − b/a‖ · (1 − ‖∫_r^R a‖)`.
//!
//! Each family also has its split-case form (window integral below or above `1/e`)
//! and, when `a = α·r(t)` and `b = β·r(t)`, a scalar form in terms of `r`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timefn::{
    self, AsymptoticClass, Coefficient, CoefficientKind, Combination, Delay, Extremum, Goal, Integrand, ScanDomain,
    ScanKind, SupOptions, MARGINAL_TOL,
};

const INV_E: f64 = 1.0 / E;

/// A concentrated-delay term `coeff(t) · x(delay(t))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: Coefficient,
    pub delay: Delay,
}

impl Term {
    pub fn new(coeff: Coefficient, delay: Delay) -> Self {
        Self { coeff, delay }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Negative,
}

/// Normalized weight over lag offsets `u = t − s` of a distributed term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    /// Uniform over the whole window.
    Uniform,
    /// Proportional to `exp(−rate · u)` over the window.
    Exponential { rate: f64 },
    /// Uniform over lag offsets `[from, to]`, which must fit inside the window.
    Box { from: f64, to: f64 },
}

impl Kernel {
    /// Support in lag offsets for a window of length `window`.
    pub fn support(&self, window: f64) -> (f64, f64) {
        match self {
            Kernel::Uniform | Kernel::Exponential { .. } => (0.0, window),
            Kernel::Box { from, to } => (*from, to.min(window)),
        }
    }

    /// Unnormalized density at lag offset `u`.
    pub fn weight(&self, u: f64) -> f64 {
        match self {
            Kernel::Uniform | Kernel::Box { .. } => 1.0,
            Kernel::Exponential { rate } => (-rate * u).exp(),
        }
    }

    fn validate(&self, window_bound: f64) -> Result<()> {
        match self {
            Kernel::Uniform => Ok(()),
            Kernel::Exponential { rate } if rate.is_finite() => Ok(()),
            Kernel::Exponential { rate } => Err(Error::InvalidEquation(format!("kernel rate {rate} must be finite"))),
            Kernel::Box { from, to } => {
                if !(0.0 <= *from && from <= to && *to <= window_bound + 1e-12) {
                    Err(Error::InvalidEquation(format!(
                        "box kernel [{from}, {to}] must satisfy 0 <= from <= to <= window lag {window_bound}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// `± total_weight(t) ∫_{window_start(t)}^t x(s) K(t, s) ds` with `∫ K = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributedTerm {
    pub sign: Sign,
    pub total_weight: Coefficient,
    pub window_start: Delay,
    pub kernel: Kernel,
}

/// Linear scalar equation with positive (stabilizing) and negative terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EquationRepr", into = "EquationRepr")]
pub struct LinearDelayEquation {
    positive_terms: Vec<Term>,
    negative_terms: Vec<Term>,
    distributed_terms: Vec<DistributedTerm>,
    t0: f64,
}

#[derive(Clone, Serialize, Deserialize)]
struct EquationRepr {
    #[serde(default)]
    positive_terms: Vec<Term>,
    #[serde(default)]
    negative_terms: Vec<Term>,
    #[serde(default)]
    distributed_terms: Vec<DistributedTerm>,
    #[serde(default)]
    t0: f64,
}

impl TryFrom<EquationRepr> for LinearDelayEquation {
    type Error = Error;
    fn try_from(r: EquationRepr) -> Result<Self> {
        LinearDelayEquation::new(r.positive_terms, r.negative_terms, r.distributed_terms, r.t0)
    }
}

impl From<LinearDelayEquation> for EquationRepr {
    fn from(e: LinearDelayEquation) -> Self {
        EquationRepr {
            positive_terms: e.positive_terms,
            negative_terms: e.negative_terms,
            distributed_terms: e.distributed_terms,
            t0: e.t0,
        }
    }
}

impl LinearDelayEquation {
    pub fn new(
        positive_terms: Vec<Term>,
        negative_terms: Vec<Term>,
        distributed_terms: Vec<DistributedTerm>,
        t0: f64,
    ) -> Result<Self> {
        if !t0.is_finite() {
            return Err(Error::InvalidEquation("t0 must be finite".into()));
        }
        for d in &distributed_terms {
            d.kernel.validate(d.window_start.lag_bound())?;
        }
        let eq = Self {
            positive_terms,
            negative_terms,
            distributed_terms,
            t0,
        };
        eq.check_dominance_on_grid()?;
        Ok(eq)
    }

    /// `ẋ + a x(h) − b x(g) = 0`
    pub fn two_term(a: Coefficient, h: Delay, b: Coefficient, g: Delay) -> Result<Self> {
        Self::new(vec![Term::new(a, h)], vec![Term::new(b, g)], vec![], 0.0)
    }

    /// `ẋ + r(t)[a x(h) − b x(g)] = 0` with constants `a >= b >= 0`.
    pub fn scalar_pair(r: &Coefficient, a: f64, h: Delay, b: f64, g: Delay) -> Result<Self> {
        Self::two_term(r.scaled(a)?, h, r.scaled(b)?, g)
    }

    pub fn positive_terms(&self) -> &[Term] {
        &self.positive_terms
    }

    pub fn negative_terms(&self) -> &[Term] {
        &self.negative_terms
    }

    pub fn distributed_terms(&self) -> &[DistributedTerm] {
        &self.distributed_terms
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    /// Largest lag bound among all delays and windows.
    pub fn max_lag(&self) -> f64 {
        self.positive_terms
            .iter()
            .chain(&self.negative_terms)
            .map(|t| t.delay.lag_bound())
            .chain(self.distributed_terms.iter().map(|d| d.window_start.lag_bound()))
            .fold(0.0, f64::max)
    }

    fn weights(&self, sign: Sign) -> Vec<&Coefficient> {
        let concentrated = match sign {
            Sign::Positive => &self.positive_terms,
            Sign::Negative => &self.negative_terms,
        };
        concentrated
            .iter()
            .map(|t| &t.coeff)
            .chain(self.distributed_terms.iter().filter(|d| d.sign == sign).map(|d| &d.total_weight))
            .collect()
    }

    fn aggregate(&self, sign: Sign) -> Result<Coefficient> {
        let ws = self.weights(sign);
        match ws.len() {
            0 => Coefficient::constant(0.0),
            1 => Ok(ws[0].clone()),
            _ => Coefficient::sum(&ws.into_iter().cloned().collect::<Vec<_>>()),
        }
    }

    fn check_dominance_on_grid(&self) -> Result<()> {
        let a = self.aggregate(Sign::Positive)?;
        let b = self.aggregate(Sign::Negative)?;
        let class = timefn::combine_classes(a.asymptotic_class(), b.asymptotic_class());
        let (start, len, n) = match class {
            AsymptoticClass::Constant => (self.t0, 0.0, 1),
            AsymptoticClass::Periodic { period } => (self.t0, period, 1024),
            AsymptoticClass::General { analysis_horizon, .. } => {
                (self.t0, analysis_horizon, (16.0 * analysis_horizon).clamp(1024.0, 1e6) as usize)
            }
        };
        for i in 0..=n {
            let t = start + len * i as f64 / n as f64;
            let (av, bv) = (a.value(t), b.value(t));
            if av < bv - 1e-12 * (1.0 + av.abs()) {
                return Err(Error::InvalidEquation(format!(
                    "positive coefficients must dominate: Σa = {av} < Σb = {bv} at t = {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Shape of the equation after reduction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// One positive and at most one negative concentrated term.
    Single,
    /// Several concentrated terms.
    SeveralDelays,
    /// One positive and one negative distributed term, nothing else.
    Distributed,
    /// Concentrated and distributed terms together.
    Mixed,
}

/// Aggregated coefficients and envelope delays of an equation.
#[derive(Clone, Debug)]
pub struct ReducedPair {
    pub a: Coefficient,
    pub b: Coefficient,
    pub h: Delay,
    pub h_max: Delay,
    pub g: Delay,
    pub g_max: Delay,
    pub r: Delay,
    pub r_max: Delay,
    pub u: Delay,
    pub u_max: Delay,
    pub shape: Shape,
    /// Every negative term reads the current state (`g ≡ t`).
    pub undelayed_negative: bool,
}

impl ReducedPair {
    /// Delay pair bounding the gap between positive and negative arguments.
    pub fn gap_pair(&self) -> (&Delay, &Delay) {
        match self.shape {
            Shape::Distributed => (&self.u, &self.u_max),
            _ => (&self.r, &self.r_max),
        }
    }
}

/// Sums coefficients and takes pointwise min/max of delays. A distributed term with
/// window start `w(t)` contributes the window `[w(t), t]`.
pub fn reduce(eq: &LinearDelayEquation) -> Result<ReducedPair> {
    let a = eq.aggregate(Sign::Positive)?;
    let b = eq.aggregate(Sign::Negative)?;

    let windows = |sign: Sign| -> (Vec<Delay>, Vec<Delay>) {
        let conc = match sign {
            Sign::Positive => &eq.positive_terms,
            Sign::Negative => &eq.negative_terms,
        };
        let mut lows: Vec<Delay> = conc.iter().map(|t| t.delay.clone()).collect();
        let mut highs = lows.clone();
        for d in eq.distributed_terms.iter().filter(|d| d.sign == sign) {
            lows.push(d.window_start.clone());
            highs.push(Delay::Identity);
        }
        (lows, highs)
    };
    let (pos_lo, pos_hi) = windows(Sign::Positive);
    let (neg_lo, neg_hi) = windows(Sign::Negative);

    let envelope = |lo: &[Delay], hi: &[Delay]| -> Result<Option<(Delay, Delay)>> {
        if lo.is_empty() {
            return Ok(None);
        }
        Ok(Some((Delay::min_of(lo)?, Delay::max_of(hi)?)))
    };
    let pos = envelope(&pos_lo, &pos_hi)?;
    let neg = envelope(&neg_lo, &neg_hi)?;
    // A side with no terms has a zero coefficient; its delays may be chosen freely,
    // so it borrows the other side's envelope.
    let (h, h_max, g, g_max) = match (pos, neg) {
        (Some((h, hm)), Some((g, gm))) => (h, hm, g, gm),
        (Some((h, hm)), None) => (h.clone(), hm.clone(), h, hm),
        (None, Some((g, gm))) => (g.clone(), gm.clone(), g, gm),
        (None, None) => (Delay::Identity, Delay::Identity, Delay::Identity, Delay::Identity),
    };
    let r = Delay::min_of(&[h.clone(), g.clone()])?;
    let r_max = Delay::max_of(&[h_max.clone(), g_max.clone()])?;

    let n_conc = eq.positive_terms.len() + eq.negative_terms.len();
    let n_dist = eq.distributed_terms.len();
    let shape = if n_dist == 0 {
        if eq.positive_terms.len() <= 1 && eq.negative_terms.len() <= 1 {
            Shape::Single
        } else {
            Shape::SeveralDelays
        }
    } else if n_conc == 0
        && n_dist == 2
        && eq.distributed_terms.iter().any(|d| d.sign == Sign::Positive)
        && eq.distributed_terms.iter().any(|d| d.sign == Sign::Negative)
    {
        Shape::Distributed
    } else {
        Shape::Mixed
    };

    let (u, u_max) = if shape == Shape::Distributed {
        (Delay::min_of(&[h.clone(), g.clone()])?, Delay::max_of(&[h.clone(), g.clone()])?)
    } else {
        (r.clone(), r_max.clone())
    };

    let undelayed_negative = eq.distributed_terms.iter().all(|d| d.sign == Sign::Positive)
        && !eq.negative_terms.is_empty()
        && eq.negative_terms.iter().all(|t| t.delay.is_identity());

    Ok(ReducedPair {
        a,
        b,
        h,
        h_max,
        g,
        g_max,
        r,
        r_max,
        u,
        u_max,
        shape,
        undelayed_negative,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Inconclusive,
    Marginal,
    Asymptotic,
    UniformExponential,
}

impl Verdict {
    pub fn is_stable(self) -> bool {
        matches!(self, Verdict::Asymptotic | Verdict::UniformExponential)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "<=")]
    LessEq,
    #[serde(rename = ">")]
    Greater,
    #[serde(rename = ">=")]
    GreaterEq,
}

impl Relation {
    pub fn is_strict(self) -> bool {
        matches!(self, Relation::Less | Relation::Greater)
    }

    /// Signed distance by which `lhs relation rhs` holds.
    pub fn margin(self, lhs: f64, rhs: f64) -> f64 {
        match self {
            Relation::Less | Relation::LessEq => rhs - lhs,
            Relation::Greater | Relation::GreaterEq => lhs - rhs,
        }
    }

    /// Strict inequalities need a margin above the marginal band; non-strict ones
    /// accept ties within it.
    pub fn holds(self, margin: f64) -> bool {
        if self.is_strict() {
            margin > MARGINAL_TOL
        } else {
            margin >= -MARGINAL_TOL
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub symbol: String,
    pub value: f64,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub description: String,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    pub strict: bool,
    pub satisfied: bool,
    pub margin: f64,
}

impl Check {
    pub fn new(description: impl Into<String>, lhs: f64, relation: Relation, rhs: f64) -> Self {
        let margin = relation.margin(lhs, rhs);
        let satisfied = !margin.is_nan() && relation.holds(margin);
        Self {
            description: description.into(),
            lhs,
            rhs,
            relation,
            strict: relation.is_strict(),
            satisfied,
            margin,
        }
    }

    /// Holds numerically, but only inside the marginal band of a strict inequality.
    pub fn is_marginal(&self) -> bool {
        !self.satisfied && self.margin > 0.0 && self.margin <= MARGINAL_TOL
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Dominance,
    DifferenceNorm,
    DifferenceSplit,
    DifferenceScalar,
    DifferenceScalarUndelayedNegative,
    RatioNorm,
    RatioSplit,
    RatioScalar,
    RatioScalarUndelayedNegative,
    RemovalLes,
    ProductionLes,
}

impl Criterion {
    fn specificity(self) -> u8 {
        match self {
            Criterion::DifferenceScalar
            | Criterion::DifferenceScalarUndelayedNegative
            | Criterion::RatioScalar
            | Criterion::RatioScalarUndelayedNegative => 2,
            Criterion::DifferenceSplit | Criterion::RatioSplit => 1,
            _ => 0,
        }
    }
}

/// Computed norms and inequality checks backing a stability verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub criterion: Criterion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Shape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<u8>,
    pub quantities: Vec<Quantity>,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
    pub horizon_limited: bool,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Certificate {
    pub(crate) fn empty(criterion: Criterion, shape: Option<Shape>) -> Self {
        Self {
            criterion,
            shape,
            case: None,
            quantities: Vec::new(),
            checks: Vec::new(),
            verdict: Verdict::Inconclusive,
            horizon_limited: false,
            notes: Vec::new(),
        }
    }

    /// Inconclusive certificate recording why a checker did not apply.
    pub fn inapplicable(criterion: Criterion, reason: impl Into<String>) -> Self {
        let reason = reason.into();
        let mut c = Self::empty(criterion, None);
        c.checks.push(Check::new(format!("precondition: {reason}"), 0.0, Relation::Greater, 0.0));
        c.notes.push(reason);
        c
    }

    pub fn quantity(&self, symbol: &str) -> Option<f64> {
        self.quantities.iter().find(|q| q.symbol == symbol).map(|q| q.value)
    }

    /// Verdict implied by the listed checks.
    pub(crate) fn settle(&mut self, stable: Verdict) {
        self.verdict = if self.checks.iter().all(|c| c.satisfied) {
            stable
        } else if self.checks.iter().all(|c| c.satisfied || c.is_marginal()) {
            Verdict::Marginal
        } else {
            Verdict::Inconclusive
        };
    }

    /// True when the stored verdict is consistent with the stored checks.
    pub fn is_sound(&self) -> bool {
        let margins_ok = self
            .checks
            .iter()
            .all(|c| c.relation.margin(c.lhs, c.rhs).to_bits() == c.margin.to_bits() || (c.margin.is_nan()));
        let verdict_ok = match self.verdict {
            Verdict::UniformExponential | Verdict::Asymptotic => self.checks.iter().all(|c| c.satisfied),
            Verdict::Marginal => self.checks.iter().any(|c| c.is_marginal()),
            Verdict::Inconclusive => self.checks.iter().any(|c| !c.satisfied),
        };
        margins_ok && verdict_ok
    }

    pub(crate) fn push_q(&mut self, symbol: &str, value: f64, source: &str) {
        self.quantities.push(Quantity {
            symbol: symbol.into(),
            value,
            source: source.into(),
        });
    }

    pub(crate) fn note_extremum(&mut self, e: &Extremum) {
        self.horizon_limited |= e.horizon_limited;
    }
}

/// Options shared by all checkers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CriteriaOptions {
    pub sup: SupOptions,
    /// Window `T` of the liminf upgrade; defaults to one period (or 1.0).
    pub forward_window: Option<f64>,
}

impl CriteriaOptions {
    fn window_for(&self, class: &AsymptoticClass) -> f64 {
        self.forward_window.unwrap_or(match class {
            AsymptoticClass::Periodic { period } => *period,
            _ => 1.0,
        })
    }
}

/// Structural evidence that `∫_{t0}^∞ f = ∞` and `f ≠ 0` almost everywhere:
/// positive mean over the scan domain and no grid cell on which `f` vanishes.
pub(crate) fn divergence_checks<I: Integrand>(f: &I, t0: f64, opts: &SupOptions, label: &str) -> Result<(Vec<Check>, bool)> {
    let domain = ScanDomain::for_class(&f.class(), &[], t0, opts)?;
    let (mean, zero_measure) = match domain.kind {
        ScanKind::Constant => {
            let v = f.value(t0);
            (v, if v.abs() <= 1e-300 { 1.0 } else { 0.0 })
        }
        _ => {
            let len = domain.length;
            let mean = f.integral(domain.start, domain.start + len) / len;
            let n = opts.grid.max(64);
            let dx = len / n as f64;
            let scale = (0..=n)
                .map(|i| f.value(domain.start + i as f64 * dx).abs())
                .fold(0.0, f64::max)
                .max(1e-300);
            let tiny = 1e-13 * scale;
            let zero_cells = (0..n)
                .filter(|&i| {
                    let x = domain.start + i as f64 * dx;
                    [x, x + 0.5 * dx, x + dx].iter().all(|&s| f.value(s).abs() <= tiny)
                })
                .count();
            (mean, zero_cells as f64 * dx / len)
        }
    };
    Ok((
        vec![
            Check::new(format!("mean of {label} over the scan domain is positive"), mean, Relation::Greater, 0.0),
            Check::new(format!("fraction of the scan domain where {label} vanishes"), zero_measure, Relation::LessEq, 0.0),
        ],
        domain.horizon_limited(),
    ))
}

/// Splits `c` as `α · r(t)` with `α` read off the outermost constant factor.
fn factor_scalar(c: &Coefficient) -> Result<(f64, Coefficient)> {
    let class = c.asymptotic_class().clone();
    match c.kind() {
        CoefficientKind::Scaled { factor, inner } if *factor > 0.0 => {
            Ok((*factor, Coefficient::new((**inner).clone(), class)?))
        }
        CoefficientKind::Constant { value } if *value > 0.0 => Ok((*value, Coefficient::constant(1.0)?)),
        _ => Ok((1.0, c.clone())),
    }
}

/// `a = α r`, `b = β r` with a single concentrated term on each side.
#[derive(Clone, Debug)]
pub struct ScalarForm {
    pub alpha: f64,
    pub beta: f64,
    pub rate: Coefficient,
    pub h: Delay,
    pub g: Delay,
    pub undelayed_negative: bool,
}

pub fn scalar_form(eq: &LinearDelayEquation) -> Result<Option<ScalarForm>> {
    if !eq.distributed_terms.is_empty() || eq.positive_terms.len() != 1 || eq.negative_terms.len() > 1 {
        return Ok(None);
    }
    let pos = &eq.positive_terms[0];
    if pos.coeff.is_identically_zero() {
        return Ok(None);
    }
    let (alpha, rate) = factor_scalar(&pos.coeff)?;
    let (beta, g, undelayed) = match eq.negative_terms.first() {
        None => (0.0, pos.delay.clone(), false),
        Some(neg) => match pos.coeff.proportionality(&neg.coeff) {
            Some(k) => (k * alpha, neg.delay.clone(), neg.delay.is_identity()),
            None => return Ok(None),
        },
    };
    Ok(Some(ScalarForm {
        alpha,
        beta,
        rate,
        h: pos.delay.clone(),
        g,
        undelayed_negative: undelayed,
    }))
}

/// `esssup b/a` and `essinf b/a`, exact when `b` is a constant multiple of `a`.
fn ratio_bounds(a: &Coefficient, b: &Coefficient, t0: f64, opts: &SupOptions) -> Result<(Extremum, Extremum)> {
    if let Some(k) = a.proportionality(b) {
        let e = Extremum {
            value: k,
            at: t0,
            horizon_limited: false,
        };
        return Ok((e, e));
    }
    let class = timefn::combine_classes(a.asymptotic_class(), b.asymptotic_class());
    let ratio = |t: f64| {
        let av = a.value(t);
        if av <= 1e-14 * (1.0 + b.value(t).abs()) {
            f64::NAN
        } else {
            b.value(t) / av
        }
    };
    Ok((
        timefn::pointwise_extremum(ratio, &class, t0, Goal::Max, opts)?,
        timefn::pointwise_extremum(ratio, &class, t0, Goal::Min, opts)?,
    ))
}

/// `esssup b/(a − b)`, exact when `b` is a constant multiple of `a`.
fn gap_ratio_sup(a: &Coefficient, b: &Coefficient, t0: f64, opts: &SupOptions) -> Result<Extremum> {
    if let Some(k) = a.proportionality(b) {
        if k >= 1.0 {
            return Err(Error::Undefined("a − b vanishes identically".into()));
        }
        return Ok(Extremum {
            value: k / (1.0 - k),
            at: t0,
            horizon_limited: false,
        });
    }
    let class = timefn::combine_classes(a.asymptotic_class(), b.asymptotic_class());
    let ratio = |t: f64| {
        let (av, bv) = (a.value(t), b.value(t));
        let d = av - bv;
        if d <= 1e-14 * (1.0 + av.abs()) {
            f64::NAN
        } else {
            bv / d
        }
    };
    timefn::pointwise_extremum(ratio, &class, t0, Goal::Max, opts)
}

pub(crate) fn pick_case(criterion: Criterion, shape: Option<Shape>, base: &Certificate, cases: Vec<(u8, Vec<Check>, Verdict)>) -> Certificate {
    let mut evaluated: Vec<Certificate> = cases
        .into_iter()
        .map(|(case, checks, stable)| {
            let mut c = base.clone();
            c.criterion = criterion;
            c.shape = shape;
            c.case = Some(case);
            c.checks.extend(checks);
            c.settle(stable);
            c
        })
        .collect();
    let top = evaluated.iter().map(|c| c.verdict).max().unwrap_or(Verdict::Inconclusive);
    if top != Verdict::Inconclusive {
        // the first case reaching the strongest verdict
        return evaluated.into_iter().find(|c| c.verdict == top).unwrap();
    }
    // Nothing passes: report every case so each failure is visible.
    let mut merged = base.clone();
    merged.criterion = criterion;
    merged.shape = shape;
    for (i, c) in evaluated.iter_mut().enumerate() {
        for mut check in c.checks.drain(base.checks.len()..) {
            check.description = format!("case {}: {}", i + 1, check.description);
            merged.checks.push(check);
        }
    }
    merged.settle(Verdict::Asymptotic);
    merged.verdict = Verdict::Inconclusive;
    merged
}

/// Adds the liminf upgrade: returns the verdict to grant when all checks pass.
pub(crate) fn upgrade<I: Integrand>(cert: &mut Certificate, f: &I, label: &str, t0: f64, opts: &CriteriaOptions) -> Result<Verdict> {
    let window = opts.window_for(&f.class());
    let lim = timefn::liminf_forward_integral(f, window, t0, &opts.sup)?;
    cert.note_extremum(&lim);
    cert.push_q(
        &format!("liminf ∫_t^(t+T) {label}"),
        lim.value,
        &format!("minimum over t >= t0 of the forward window integral of {label}, T = {window}"),
    );
    let check = Check::new(format!("liminf of ∫_t^(t+{window}) {label} is positive"), lim.value, Relation::Greater, 0.0);
    if check.satisfied {
        cert.checks.push(check);
        Ok(Verdict::UniformExponential)
    } else {
        cert.notes.push(format!(
            "uniform exponential upgrade not established: liminf ∫ {label} over windows of length {window} is {}",
            lim.value
        ));
        Ok(Verdict::Asymptotic)
    }
}

fn undefined_cert(criterion: Criterion, shape: Option<Shape>, base: &Certificate, err: &Error) -> Certificate {
    let mut c = base.clone();
    c.criterion = criterion;
    c.shape = shape;
    c.checks.push(Check::new(format!("required norm is finite ({err})"), f64::INFINITY, Relation::Less, f64::INFINITY));
    c.notes.push(err.to_string());
    c.settle(Verdict::Asymptotic);
    c
}

/// Non-delayed dominant term: every positive term reads `x(t)` and `esssup Σb/a < 1`.
pub fn check_nondelay_dominant(eq: &LinearDelayEquation, opts: &CriteriaOptions) -> Result<Certificate> {
    let delayed_positive = eq.positive_terms.iter().any(|t| !t.delay.is_identity())
        || eq.distributed_terms.iter().any(|d| d.sign == Sign::Positive);
    if delayed_positive || eq.positive_terms.is_empty() {
        return Err(Error::Precondition(
            "dominance criterion needs every positive term undelayed; use check_diff_form".into(),
        ));
    }
    let red = reduce(eq)?;
    let t0 = eq.t0;
    let mut cert = Certificate::empty(Criterion::Dominance, Some(red.shape));

    let a_min = timefn::pointwise_extremum(|t| red.a.value(t), red.a.asymptotic_class(), t0, Goal::Min, &opts.sup)?;
    cert.note_extremum(&a_min);
    cert.push_q("inf a", a_min.value, "minimum over t >= t0 of the summed positive coefficient");
    cert.checks.push(Check::new("a(t) >= a0 > 0", a_min.value, Relation::Greater, 0.0));
    if a_min.value <= 0.0 {
        cert.settle(Verdict::UniformExponential);
        return Ok(cert);
    }
    let (ratio, _) = ratio_bounds(&red.a, &red.b, t0, &opts.sup)?;
    cert.note_extremum(&ratio);
    cert.push_q("‖b/a‖", ratio.value, "esssup over t >= t0 of the summed negative over positive coefficients");
    cert.checks.push(Check::new("esssup Σb/a < 1", ratio.value, Relation::Less, 1.0));

    let distributed_negative = eq.distributed_terms.iter().any(|d| d.sign == Sign::Negative);
    let stable = if distributed_negative {
        let d = Combination::difference(&red.a, &red.b);
        upgrade(&mut cert, &d, "(a − b)", t0, opts)?
    } else {
        Verdict::UniformExponential
    };
    cert.settle(stable);
    Ok(cert)
}

/// All certificates of the difference family (norm, split and scalar forms).
pub fn diff_form_certificates(eq: &LinearDelayEquation, opts: &CriteriaOptions) -> Result<Vec<Certificate>> {
    let red = reduce(eq)?;
    let t0 = eq.t0;
    let shape = Some(red.shape);
    let d = Combination::difference(&red.a, &red.b);
    let mut base = Certificate::empty(Criterion::DifferenceNorm, shape);

    let (cond, limited) = divergence_checks(&d, t0, &opts.sup, "a − b")?;
    base.horizon_limited |= limited;
    base.checks.extend(cond);
    if base.checks.iter().any(|c| !c.satisfied) {
        base.notes.push("a − b is not structurally positive on average; time change unavailable".into());
        base.settle(Verdict::Asymptotic);
        let mut split = base.clone();
        split.criterion = Criterion::DifferenceSplit;
        return Ok(vec![base, split]);
    }

    let window = timefn::sup_window_integral(&d, &red.h, t0, &opts.sup)?;
    base.note_extremum(&window);
    base.push_q("S", window.value, "esssup ∫_{h(t)}^t (a − b)");
    let n1 = (window.value - INV_E).max(0.0);
    base.push_q("N1", n1, "‖(∫_{h(·)}^· (a − b) − 1/e)⁺‖");

    let q = match gap_ratio_sup(&red.a, &red.b, t0, &opts.sup) {
        Ok(q) => q,
        Err(e) => {
            return Ok(vec![
                undefined_cert(Criterion::DifferenceNorm, shape, &base, &e),
                undefined_cert(Criterion::DifferenceSplit, shape, &base, &e),
            ])
        }
    };
    base.note_extremum(&q);
    base.push_q("Q", q.value, "‖b/(a − b)‖");
    let (lo, hi) = red.gap_pair();
    let gap = timefn::sup_between_delays(&d, lo, hi, t0, &opts.sup)?;
    base.note_extremum(&gap);
    base.push_q("N2", gap.value, "‖∫ (a − b)‖ between the envelope delays");

    let stable = upgrade(&mut base, &d, "(a − b)", t0, opts)?;
    let upgrade_checks: Vec<Check> = base.checks.drain(2..).collect();

    let mut norm = base.clone();
    norm.checks.extend(upgrade_checks.iter().cloned());
    norm.checks.push(Check::new("N1 + 2·Q·N2 < 1", n1 + 2.0 * q.value * gap.value, Relation::Less, 1.0));
    norm.settle(stable);

    let mut split_base = base.clone();
    split_base.checks.extend(upgrade_checks.iter().cloned());
    let split = pick_case(
        Criterion::DifferenceSplit,
        shape,
        &split_base,
        vec![
            (
                1,
                vec![
                    Check::new("S <= 1/e", window.value, Relation::LessEq, INV_E),
                    Check::new("Q·N2 < 1/2", q.value * gap.value, Relation::Less, 0.5),
                ],
                stable,
            ),
            (
                2,
                vec![
                    Check::new("S > 1/e", window.value, Relation::Greater, INV_E),
                    Check::new("S + 2·Q·N2 < 1 + 1/e", window.value + 2.0 * q.value * gap.value, Relation::Less, 1.0 + INV_E),
                ],
                stable,
            ),
        ],
    );
    let mut out = vec![norm, split];

    if let Some(sf) = scalar_form(eq)? {
        out.push(diff_scalar(&sf, t0, opts)?);
    }
    Ok(out)
}

fn scalar_preconditions(sf: &ScalarForm, t0: f64, opts: &CriteriaOptions, cert: &mut Certificate) -> Result<Verdict> {
    cert.push_q("alpha", sf.alpha, "constant factor of the positive term");
    cert.push_q("beta", sf.beta, "constant factor of the negative term");
    cert.checks.push(Check::new("alpha > beta", sf.alpha, Relation::Greater, sf.beta));
    cert.checks.push(Check::new("beta >= 0", sf.beta, Relation::GreaterEq, 0.0));
    let (cond, limited) = divergence_checks(&sf.rate, t0, &opts.sup, "r")?;
    cert.horizon_limited |= limited;
    cert.checks.extend(cond);
    upgrade(cert, &sf.rate, "r", t0, opts)
}

fn diff_scalar(sf: &ScalarForm, t0: f64, opts: &CriteriaOptions) -> Result<Certificate> {
    let criterion = if sf.undelayed_negative {
        Criterion::DifferenceScalarUndelayedNegative
    } else {
        Criterion::DifferenceScalar
    };
    let mut base = Certificate::empty(criterion, Some(Shape::Single));
    let stable = scalar_preconditions(sf, t0, opts, &mut base)?;
    let s = timefn::sup_window_integral(&sf.rate, &sf.h, t0, &opts.sup)?;
    base.note_extremum(&s);
    base.push_q("S_r", s.value, "esssup ∫_{h(t)}^t r");
    let gap = sf.alpha - sf.beta;
    let cases = if sf.undelayed_negative {
        vec![
            (
                1,
                vec![
                    Check::new("(alpha − beta)·S_r <= 1/e", gap * s.value, Relation::LessEq, INV_E),
                    Check::new("2·beta·S_r < 1", 2.0 * sf.beta * s.value, Relation::Less, 1.0),
                ],
                stable,
            ),
            (
                2,
                vec![
                    Check::new("(alpha − beta)·S_r > 1/e", gap * s.value, Relation::Greater, INV_E),
                    Check::new("(alpha + beta)·S_r < 1 + 1/e", (sf.alpha + sf.beta) * s.value, Relation::Less, 1.0 + INV_E),
                ],
                stable,
            ),
        ]
    } else {
        let n = timefn::sup_between_delays(&sf.rate, &sf.h, &sf.g, t0, &opts.sup)?;
        base.note_extremum(&n);
        base.push_q("N_r", n.value, "esssup |∫_{h(t)}^{g(t)} r|");
        vec![
            (
                1,
                vec![
                    Check::new("(alpha − beta)·S_r <= 1/e", gap * s.value, Relation::LessEq, INV_E),
                    Check::new("beta·N_r < 1/2", sf.beta * n.value, Relation::Less, 0.5),
                ],
                stable,
            ),
            (
                2,
                vec![
                    Check::new("(alpha − beta)·S_r > 1/e", gap * s.value, Relation::Greater, INV_E),
                    Check::new(
                        "(alpha − beta)·S_r + 2·beta·N_r < 1 + 1/e",
                        gap * s.value + 2.0 * sf.beta * n.value,
                        Relation::Less,
                        1.0 + INV_E,
                    ),
                ],
                stable,
            ),
        ]
    };
    Ok(pick_case(criterion, Some(Shape::Single), &base, cases))
}

/// All certificates of the ratio family (norm, split and scalar forms).
pub fn ratio_form_certificates(eq: &LinearDelayEquation, opts: &CriteriaOptions) -> Result<Vec<Certificate>> {
    let red = reduce(eq)?;
    let t0 = eq.t0;
    let shape = Some(red.shape);
    let mut base = Certificate::empty(Criterion::RatioNorm, shape);

    let (cond, limited) = divergence_checks(&red.a, t0, &opts.sup, "a")?;
    base.horizon_limited |= limited;
    base.checks.extend(cond);
    if base.checks.iter().any(|c| !c.satisfied) {
        base.notes.push("a is not structurally positive on average; time change unavailable".into());
        base.settle(Verdict::Asymptotic);
        let mut split = base.clone();
        split.criterion = Criterion::RatioSplit;
        return Ok(vec![base, split]);
    }

    let (sup_ratio, inf_ratio) = match ratio_bounds(&red.a, &red.b, t0, &opts.sup) {
        Ok(r) => r,
        Err(e) => {
            return Ok(vec![
                undefined_cert(Criterion::RatioNorm, shape, &base, &e),
                undefined_cert(Criterion::RatioSplit, shape, &base, &e),
            ])
        }
    };
    base.note_extremum(&sup_ratio);
    base.note_extremum(&inf_ratio);
    base.push_q("R1", sup_ratio.value, "‖b/a‖");
    let one_minus = 1.0 - inf_ratio.value;
    base.push_q("‖1 − b/a‖", one_minus, "1 − essinf b/a");
    let s = timefn::sup_window_integral(&red.a, &red.h, t0, &opts.sup)?;
    base.note_extremum(&s);
    base.push_q("S", s.value, "esssup ∫_{h(t)}^t a");
    let (lo, hi) = red.gap_pair();
    let r2 = timefn::sup_between_delays(&red.a, lo, hi, t0, &opts.sup)?;
    base.note_extremum(&r2);
    base.push_q("R2", r2.value, "‖∫ a‖ between the envelope delays");
    let l = (s.value - INV_E).max(0.0);
    base.push_q("L", l, "‖(∫_{h(·)}^· a − 1/e)⁺‖");
    let factor = if one_minus > 0.0 {
        (1.0 - sup_ratio.value) / one_minus
    } else {
        0.0
    };
    let bound = factor * (1.0 - r2.value);
    base.push_q("B", bound, "(1 − ‖b/a‖)/‖1 − b/a‖ · (1 − R2)");

    base.checks.push(Check::new("‖b/a‖ < 1", sup_ratio.value, Relation::Less, 1.0));
    base.checks.push(Check::new("R2 < 1", r2.value, Relation::Less, 1.0));
    let stable = upgrade(&mut base, &red.a, "a", t0, opts)?;

    let mut norm = base.clone();
    norm.checks.push(Check::new("L < B", l, Relation::Less, bound));
    norm.settle(stable);

    let split = pick_case(
        Criterion::RatioSplit,
        shape,
        &base,
        vec![
            (1, vec![Check::new("S <= 1/e", s.value, Relation::LessEq, INV_E)], stable),
            (
                2,
                vec![
                    Check::new("S > 1/e", s.value, Relation::Greater, INV_E),
                    Check::new("S < B + 1/e", s.value, Relation::Less, bound + INV_E),
                ],
                stable,
            ),
        ],
    );
    let mut out = vec![norm, split];
    if let Some(sf) = scalar_form(eq)? {
        out.push(ratio_scalar(&sf, t0, opts)?);
    }
    Ok(out)
}

fn ratio_scalar(sf: &ScalarForm, t0: f64, opts: &CriteriaOptions) -> Result<Certificate> {
    let criterion = if sf.undelayed_negative {
        Criterion::RatioScalarUndelayedNegative
    } else {
        Criterion::RatioScalar
    };
    let mut base = Certificate::empty(criterion, Some(Shape::Single));
    let stable = scalar_preconditions(sf, t0, opts, &mut base)?;
    let s = timefn::sup_window_integral(&sf.rate, &sf.h, t0, &opts.sup)?;
    base.note_extremum(&s);
    base.push_q("S_r", s.value, "esssup ∫_{h(t)}^t r");
    let a = sf.alpha;
    let cases = if sf.undelayed_negative {
        vec![
            (1, vec![Check::new("alpha·S_r <= 1/e", a * s.value, Relation::LessEq, INV_E)], stable),
            (
                2,
                vec![
                    Check::new("alpha·S_r > 1/e", a * s.value, Relation::Greater, INV_E),
                    Check::new("2·alpha·S_r < 1 + 1/e", 2.0 * a * s.value, Relation::Less, 1.0 + INV_E),
                ],
                stable,
            ),
        ]
    } else {
        let n = timefn::sup_between_delays(&sf.rate, &sf.h, &sf.g, t0, &opts.sup)?;
        base.note_extremum(&n);
        base.push_q("N_r", n.value, "esssup |∫_{h(t)}^{g(t)} r|");
        base.checks.push(Check::new("alpha·N_r < 1", a * n.value, Relation::Less, 1.0));
        vec![
            (1, vec![Check::new("alpha·S_r <= 1/e", a * s.value, Relation::LessEq, INV_E)], stable),
            (
                2,
                vec![
                    Check::new("alpha·S_r > 1/e", a * s.value, Relation::Greater, INV_E),
                    Check::new("alpha·S_r < 1", a * s.value, Relation::Less, 1.0),
                    Check::new("alpha·(S_r + N_r) < 1 + 1/e", a * (s.value + n.value), Relation::Less, 1.0 + INV_E),
                ],
                stable,
            ),
        ]
    };
    Ok(pick_case(criterion, Some(Shape::Single), &base, cases))
}

fn best_of(mut certs: Vec<Certificate>) -> Certificate {
    certs.sort_by(|x, y| {
        y.verdict
            .cmp(&x.verdict)
            .then(y.criterion.specificity().cmp(&x.criterion.specificity()))
    });
    certs.swap_remove(0)
}

/// Best certificate of the difference family; ties go to the most specific form.
pub fn check_diff_form(eq: &LinearDelayEquation, opts: &CriteriaOptions) -> Result<Certificate> {
    Ok(best_of(diff_form_certificates(eq, opts)?))
}

/// Best certificate of the ratio family; ties go to the most specific form.
pub fn check_ratio_form(eq: &LinearDelayEquation, opts: &CriteriaOptions) -> Result<Certificate> {
    Ok(best_of(ratio_form_certificates(eq, opts)?))
}

/// Every applicable checker, strongest verdict first.
pub fn evaluate_all(eq: &LinearDelayEquation, opts: &CriteriaOptions) -> Vec<Certificate> {
    let mut out = Vec::new();
    match check_nondelay_dominant(eq, opts) {
        Ok(c) => out.push(c),
        Err(e) => out.push(Certificate::inapplicable(Criterion::Dominance, e.to_string())),
    }
    match diff_form_certificates(eq, opts) {
        Ok(cs) => out.extend(cs),
        Err(e) => out.push(Certificate::inapplicable(Criterion::DifferenceNorm, e.to_string())),
    }
    match ratio_form_certificates(eq, opts) {
        Ok(cs) => out.extend(cs),
        Err(e) => out.push(Certificate::inapplicable(Criterion::RatioNorm, e.to_string())),
    }
    out.sort_by_key(|c| std::cmp::Reverse(c.verdict));
    out
}

pub fn best_verdict(certs: &[Certificate]) -> Verdict {
    certs.iter().map(|c| c.verdict).max().unwrap_or(Verdict::Inconclusive)
}
