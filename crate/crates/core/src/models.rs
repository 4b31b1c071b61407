//! Mackey–Glass models, their linearizations about the positive equilibrium, and the
//! built-in test equations addressable by name.

use std::collections::BTreeMap;
use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::criteria::{
    self, Certificate, Check, CriteriaOptions, Criterion, LinearDelayEquation, Relation, Shape, Term, Verdict,
};
use crate::error::{Error, Result};
use crate::solver::{DelayRhs, LinearRhs, Past};
use crate::timefn::{self, Coefficient, Delay};

const INV_E: f64 = 1.0 / E;

/// `ẋ = r(t) [β x(g)/(1 + xⁿ(g)) − γ x(h)]`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MackeyGlassRemoval {
    pub r: Coefficient,
    pub beta: f64,
    pub gamma: f64,
    pub n: f64,
    /// Production delay.
    pub g: Delay,
    /// Removal delay.
    pub h: Delay,
}

/// `ẋ = s(t) [β x(p)/(1 + xⁿ(q)) − x]`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MackeyGlassProduction {
    pub s: Coefficient,
    pub beta: f64,
    pub n: f64,
    /// Numerator delay.
    pub p: Delay,
    /// Denominator delay.
    pub q: Delay,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidEquation(format!("{name} = {v} must be a positive number")))
    }
}

impl MackeyGlassRemoval {
    pub fn equilibrium(&self) -> Result<f64> {
        check_positive("beta", self.beta)?;
        check_positive("gamma", self.gamma)?;
        check_positive("n", self.n)?;
        if self.beta <= self.gamma {
            return Err(Error::NoEquilibrium(format!(
                "needs beta > gamma, got beta = {}, gamma = {}",
                self.beta, self.gamma
            )));
        }
        Ok((self.beta / self.gamma - 1.0).powf(1.0 / self.n))
    }

    /// Bracketed rate `β x_g/(1 + |x_g|ⁿ) − γ x_h` (the right-hand side divided by `r`).
    pub fn rate(&self, x_g: f64, x_h: f64) -> f64 {
        self.beta * x_g / (1.0 + x_g.abs().powf(self.n)) - self.gamma * x_h
    }

    /// `1 − n + γn/β`; the linearization has a negative term only when this is >= 0.
    pub fn negative_factor(&self) -> f64 {
        1.0 - self.n + self.gamma * self.n / self.beta
    }

    /// `ẋ + r[γ x(h) − γ(1 − n + γn/β) x(g)] = 0`. A negative factor turns the `g` term
    /// into a second positive term.
    pub fn linearize(&self) -> Result<LinearDelayEquation> {
        self.equilibrium()?;
        let a = self.r.scaled(self.gamma)?;
        let k = self.gamma * self.negative_factor();
        if k >= 0.0 {
            LinearDelayEquation::two_term(a, self.h.clone(), self.r.scaled(k)?, self.g.clone())
        } else {
            LinearDelayEquation::new(
                vec![Term::new(a, self.h.clone()), Term::new(self.r.scaled(-k)?, self.g.clone())],
                vec![],
                vec![],
                0.0,
            )
        }
    }
}

impl MackeyGlassProduction {
    pub fn equilibrium(&self) -> Result<f64> {
        check_positive("n", self.n)?;
        if !(self.beta > 1.0) {
            return Err(Error::NoEquilibrium(format!("needs beta > 1, got {}", self.beta)));
        }
        Ok((self.beta - 1.0).powf(1.0 / self.n))
    }

    pub fn alpha(&self) -> f64 {
        self.n * (self.beta - 1.0) / self.beta
    }

    /// Bracketed rate `β x_p/(1 + |x_q|ⁿ) − x`.
    pub fn rate(&self, x: f64, x_p: f64, x_q: f64) -> f64 {
        self.beta * x_p / (1.0 + x_q.abs().powf(self.n)) - x
    }

    /// `ẋ + s[x + α x(q) − x(p)] = 0`
    pub fn linearize(&self) -> Result<LinearDelayEquation> {
        self.equilibrium()?;
        LinearDelayEquation::new(
            vec![
                Term::new(self.s.clone(), Delay::Identity),
                Term::new(self.s.scaled(self.alpha())?, self.q.clone()),
            ],
            vec![Term::new(self.s.clone(), self.p.clone())],
            vec![],
            0.0,
        )
    }
}

impl DelayRhs for MackeyGlassRemoval {
    fn delays(&self) -> Vec<Delay> {
        vec![self.g.clone(), self.h.clone()]
    }

    fn max_lag(&self) -> f64 {
        self.g.lag_bound().max(self.h.lag_bound())
    }

    fn eval(&self, t: f64, x: f64, past: &Past<'_>) -> f64 {
        let read = |d: &Delay| if d.is_identity() { x } else { past.at(d.at(t)) };
        self.r.value(t) * self.rate(read(&self.g), read(&self.h))
    }
}

impl DelayRhs for MackeyGlassProduction {
    fn delays(&self) -> Vec<Delay> {
        vec![self.p.clone(), self.q.clone()]
    }

    fn max_lag(&self) -> f64 {
        self.p.lag_bound().max(self.q.lag_bound())
    }

    fn eval(&self, t: f64, x: f64, past: &Past<'_>) -> f64 {
        let read = |d: &Delay| if d.is_identity() { x } else { past.at(d.at(t)) };
        self.s.value(t) * self.rate(x, read(&self.p), read(&self.q))
    }
}

/// Local exponential stability of the removal model: the equilibrium condition on
/// `β/γ` together with the scalar difference or ratio criterion on the linearization.
pub fn check_les_removal(model: &MackeyGlassRemoval, opts: &CriteriaOptions) -> Result<Certificate> {
    let x_star = model.equilibrium()?;
    let ratio = model.beta / model.gamma;
    let mut own = Vec::new();
    own.push(Check::new("beta/gamma > 1", ratio, Relation::Greater, 1.0));
    if model.n > 1.0 {
        own.push(Check::new("beta/gamma < 1 + 1/(n − 1)", ratio, Relation::Less, 1.0 + 1.0 / (model.n - 1.0)));
    }

    let mut cert = Certificate::empty(Criterion::RemovalLes, Some(Shape::Single));
    cert.push_q("x*", x_star, "(beta/gamma − 1)^(1/n)");
    cert.push_q("a", model.gamma, "gamma");
    cert.push_q("b", model.gamma * model.negative_factor(), "gamma (1 − n + gamma n/beta)");

    if own.iter().any(|c| !c.satisfied) {
        cert.checks = own;
        cert.notes.push("the equilibrium condition on beta/gamma fails, so the linearization is not of the required form".into());
        if model.negative_factor() < 0.0 {
            cert.notes.push(
                "1 − n + gamma n/beta < 0: the linearization has two positive coefficients, which this criterion does not cover"
                    .into(),
            );
        }
        cert.settle(Verdict::UniformExponential);
        return Ok(cert);
    }

    let lin = model.linearize()?;
    let scalar = |c: &Certificate| {
        matches!(
            c.criterion,
            Criterion::DifferenceScalar
                | Criterion::DifferenceScalarUndelayedNegative
                | Criterion::RatioScalar
                | Criterion::RatioScalarUndelayedNegative
        )
    };
    let mut candidates: Vec<Certificate> = criteria::diff_form_certificates(&lin, opts)?
        .into_iter()
        .chain(criteria::ratio_form_certificates(&lin, opts)?)
        .filter(scalar)
        .collect();
    candidates.sort_by_key(|c| std::cmp::Reverse(c.verdict));
    let best = candidates
        .into_iter()
        .next()
        .ok_or_else(|| Error::Precondition("linearization is not of scalar form".into()))?;

    cert.case = best.case;
    cert.horizon_limited = best.horizon_limited;
    cert.quantities.extend(best.quantities);
    cert.checks = own;
    cert.checks.extend(best.checks);
    cert.notes.push(format!(
        "linearized equation certified by {}{}",
        serde_json::to_value(best.criterion)?.as_str().unwrap_or_default(),
        best.case.map(|c| format!(" case {c}")).unwrap_or_default()
    ));
    cert.notes.extend(best.notes);
    let stable = if best.verdict.is_stable() {
        best.verdict
    } else {
        Verdict::UniformExponential
    };
    cert.settle(stable);
    Ok(cert)
}

/// The three conditions of the production-model criterion, evaluated literally.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProductionConditions {
    pub alpha: f64,
    /// `esssup ∫_{q(t)}^t s`
    pub window: f64,
    /// `esssup ∫_{min(p,q)}^{max(p,q)} s`
    pub gap: f64,
    /// `(α·window − 1/e)⁺ + 2·gap`, must be < 1.
    pub c56: f64,
    /// `(1 + α)·gap`, must be < 1.
    pub c57: f64,
    /// `((1 + α)·window − 1/e)⁺`, must be below `1 − (1 + α)·gap`.
    pub c58_lhs: f64,
    pub c58_rhs: f64,
}

impl ProductionConditions {
    pub fn first_holds(&self) -> bool {
        Relation::Less.holds(1.0 - self.c56)
    }

    pub fn second_holds(&self) -> bool {
        Relation::Less.holds(1.0 - self.c57)
    }

    pub fn third_holds(&self) -> bool {
        Relation::Less.holds(self.c58_rhs - self.c58_lhs)
    }

    pub fn les(&self) -> bool {
        self.first_holds() || (self.second_holds() && self.third_holds())
    }
}

pub fn production_conditions(model: &MackeyGlassProduction, opts: &CriteriaOptions) -> Result<(ProductionConditions, bool)> {
    model.equilibrium()?;
    let t0 = 0.0;
    let alpha = model.alpha();
    let w = timefn::sup_window_integral(&model.s, &model.q, t0, &opts.sup)?;
    let g = timefn::sup_between_delays(&model.s, &model.p, &model.q, t0, &opts.sup)?;
    Ok((
        ProductionConditions {
            alpha,
            window: w.value,
            gap: g.value,
            c56: (alpha * w.value - INV_E).max(0.0) + 2.0 * g.value,
            c57: (1.0 + alpha) * g.value,
            c58_lhs: ((1.0 + alpha) * w.value - INV_E).max(0.0),
            c58_rhs: 1.0 - (1.0 + alpha) * g.value,
        },
        w.horizon_limited || g.horizon_limited,
    ))
}

/// Local exponential stability of the production model: either the difference-form
/// condition or the two ratio-form conditions on the linearization.
pub fn check_les_production(model: &MackeyGlassProduction, opts: &CriteriaOptions) -> Result<Certificate> {
    let x_star = model.equilibrium()?;
    let (c, limited) = production_conditions(model, opts)?;
    let mut base = Certificate::empty(Criterion::ProductionLes, Some(Shape::SeveralDelays));
    base.horizon_limited = limited;
    base.push_q("x*", x_star, "(beta − 1)^(1/n)");
    base.push_q("alpha", c.alpha, "n (beta − 1)/beta");
    base.push_q("S_q", c.window, "esssup ∫_{q(t)}^t s");
    base.push_q("N_pq", c.gap, "esssup ∫_{min(p,q)}^{max(p,q)} s");
    let (cond, lim) = criteria::divergence_checks(&model.s, t0_of(), &opts.sup, "s")?;
    base.horizon_limited |= lim;
    base.checks.extend(cond);
    let stable = criteria::upgrade(&mut base, &model.s, "s", t0_of(), opts)?;
    let cases = vec![
        (
            1,
            vec![Check::new("(alpha·S_q − 1/e)⁺ + 2·N_pq < 1", c.c56, Relation::Less, 1.0)],
            stable,
        ),
        (
            2,
            vec![
                Check::new("(1 + alpha)·N_pq < 1", c.c57, Relation::Less, 1.0),
                Check::new("((1 + alpha)·S_q − 1/e)⁺ < 1 − (1 + alpha)·N_pq", c.c58_lhs, Relation::Less, c.c58_rhs),
            ],
            stable,
        ),
    ];
    Ok(criteria::pick_case(Criterion::ProductionLes, Some(Shape::SeveralDelays), &base, cases))
}

fn t0_of() -> f64 {
    0.0
}

/// Anything the front end can check or simulate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Model {
    Linear { equation: LinearDelayEquation },
    MackeyGlassRemoval(MackeyGlassRemoval),
    MackeyGlassProduction(MackeyGlassProduction),
}

impl Model {
    /// Equilibrium the trajectory should settle at (0 for linear equations).
    pub fn equilibrium(&self) -> Result<f64> {
        match self {
            Model::Linear { .. } => Ok(0.0),
            Model::MackeyGlassRemoval(m) => m.equilibrium(),
            Model::MackeyGlassProduction(m) => m.equilibrium(),
        }
    }

    pub fn max_lag(&self) -> f64 {
        match self {
            Model::Linear { equation } => equation.max_lag(),
            Model::MackeyGlassRemoval(m) => DelayRhs::max_lag(m),
            Model::MackeyGlassProduction(m) => DelayRhs::max_lag(m),
        }
    }

    /// All certificates for a linear equation, the LES certificate for a model.
    pub fn certificates(&self, opts: &CriteriaOptions) -> Result<Vec<Certificate>> {
        match self {
            Model::Linear { equation } => Ok(criteria::evaluate_all(equation, opts)),
            Model::MackeyGlassRemoval(m) => Ok(vec![check_les_removal(m, opts)?]),
            Model::MackeyGlassProduction(m) => Ok(vec![check_les_production(m, opts)?]),
        }
    }

    pub fn best_certificate(&self, opts: &CriteriaOptions) -> Result<Certificate> {
        let mut certs = self.certificates(opts)?;
        certs.sort_by_key(|c| std::cmp::Reverse(c.verdict));
        Ok(certs.swap_remove(0))
    }

    pub fn rhs(&self) -> Box<dyn DelayRhs + '_> {
        match self {
            Model::Linear { equation } => Box::new(LinearRhs::new(equation)),
            Model::MackeyGlassRemoval(m) => Box::new(m.clone()),
            Model::MackeyGlassProduction(m) => Box::new(m.clone()),
        }
    }
}

/// A model with the initial data and horizon used to simulate it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub model: Model,
    /// `x(t0)`
    #[serde(default = "one")]
    pub x0: f64,
    /// Constant history `φ` on `t < t0`.
    #[serde(default = "one")]
    pub phi: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
}

fn one() -> f64 {
    1.0
}

fn default_horizon() -> f64 {
    100.0
}

struct Builtin {
    name: &'static str,
    params: &'static [(&'static str, f64)],
    build: fn(&BTreeMap<String, f64>) -> Result<(Model, f64)>,
}

const BUILTINS: &[Builtin] = &[
    Builtin {
        name: "eq3",
        params: &[("b", 0.3), ("x0", 1.0), ("phi", 1.0)],
        build: |p| {
            let r = Coefficient::sin_sq(1.0, 1.0, 0.0)?;
            let eq = LinearDelayEquation::scalar_pair(&r, 0.6, Delay::lag(2.0)?, p["b"], Delay::Identity)?;
            Ok((Model::Linear { equation: eq }, 120.0))
        },
    },
    Builtin {
        name: "eq26",
        params: &[("x0", 1.0), ("phi", 1.0)],
        build: |_| {
            let eq = LinearDelayEquation::two_term(
                Coefficient::constant(1.0)?,
                Delay::lag(1.0)?,
                Coefficient::constant(0.3)?,
                Delay::Identity,
            )?;
            Ok((Model::Linear { equation: eq }, 60.0))
        },
    },
    Builtin {
        name: "eq27",
        params: &[("x0", 1.0), ("phi", 1.0)],
        build: |_| {
            let eq = LinearDelayEquation::two_term(
                Coefficient::constant(0.4)?,
                Delay::lag(1.0)?,
                Coefficient::constant(0.35)?,
                Delay::lag(3.0)?,
            )?;
            Ok((Model::Linear { equation: eq }, 400.0))
        },
    },
    Builtin {
        name: "eq3abc",
        params: &[("a", 0.6), ("b", 0.3), ("x0", 1.0), ("phi", 1.0)],
        build: |p| {
            let r = Coefficient::sin_sq(1.0, 1.0, 0.0)?;
            let eq = LinearDelayEquation::scalar_pair(&r, p["a"], Delay::lag(2.0)?, p["b"], Delay::Identity)?;
            Ok((Model::Linear { equation: eq }, 120.0))
        },
    },
    Builtin {
        name: "ex51",
        params: &[("sigma", 1.1), ("r", 4.0), ("beta", 1.25), ("x0", 0.6), ("phi", 0.4)],
        build: |p| {
            let m = MackeyGlassRemoval {
                r: Coefficient::sin_sq(p["r"], PI, 0.0)?,
                beta: p["beta"],
                gamma: 1.0,
                n: 2.0,
                g: Delay::lag(p["sigma"])?,
                h: Delay::lag(1.0)?,
            };
            Ok((Model::MackeyGlassRemoval(m), 100.0))
        },
    },
    Builtin {
        name: "ex5",
        params: &[("n", 11.0), ("x0", 0.6), ("phi", 0.4)],
        build: |p| {
            let m = MackeyGlassProduction {
                s: Coefficient::sin_sq(0.1, PI, 0.0)?,
                beta: 2.0,
                n: p["n"],
                p: Delay::lag(3.0)?,
                q: Delay::lag(6.0)?,
            };
            Ok((Model::MackeyGlassProduction(m), 600.0))
        },
    },
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|b| b.name).collect()
}

/// Declared parameters and defaults of a built-in.
pub fn builtin_parameters(name: &str) -> Result<Vec<(&'static str, f64)>> {
    Ok(lookup(name)?.params.to_vec())
}

fn lookup(name: &str) -> Result<&'static Builtin> {
    BUILTINS.iter().find(|b| b.name == name).ok_or_else(|| Error::UnknownTarget {
        name: name.into(),
        valid: builtin_names().join(", "),
    })
}

/// Instantiates a built-in with parameter overrides; unknown parameters are rejected.
pub fn builtin(name: &str, overrides: &BTreeMap<String, f64>) -> Result<Scenario> {
    let b = lookup(name)?;
    let mut params: BTreeMap<String, f64> = b.params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in overrides {
        match params.get_mut(k) {
            Some(slot) => *slot = *v,
            None => {
                return Err(Error::Configuration(format!(
                    "`{name}` has no parameter `{k}`; declared: {}",
                    b.params.iter().map(|p| p.0).collect::<Vec<_>>().join(", ")
                )))
            }
        }
    }
    let (model, horizon) = (b.build)(&params)?;
    Ok(Scenario {
        name: name.into(),
        model,
        x0: params["x0"],
        phi: params["phi"],
        horizon,
        parameters: params,
    })
}
