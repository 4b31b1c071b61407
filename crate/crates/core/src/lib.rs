//! Explicit exponential-stability certificates for scalar linear delay differential
//! equations with positive and negative coefficients, a method-of-steps solver to
//! compare them against simulation, and local-stability checks for two Mackey–Glass
//! models.
//!
//! ```
//! use delaystab::criteria::{check_diff_form, CriteriaOptions, LinearDelayEquation, Verdict};
//! use delaystab::timefn::{Coefficient, Delay};
//!
//! // ẋ + x(t − 1) − 0.3 x(t) = 0
//! let eq = LinearDelayEquation::two_term(
//!     Coefficient::constant(1.0)?,
//!     Delay::lag(1.0)?,
//!     Coefficient::constant(0.3)?,
//!     Delay::Identity,
//! )?;
//! let cert = check_diff_form(&eq, &CriteriaOptions::default())?;
//! assert_eq!(cert.verdict, Verdict::UniformExponential);
//! # Ok::<(), delaystab::Error>(())
//! ```

pub mod cli;
pub mod criteria;
pub mod diagnostics;
pub mod error;
pub mod models;
pub mod reproduce;
pub mod solver;
pub mod timefn;

pub use error::{Error, Result};
