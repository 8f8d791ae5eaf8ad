//! Simulation and inference for finite-population average treatment
//! effects under sequentially adaptive Bernoulli assignment.
//!
//! The crate covers the full pipeline:
//!
//! - [`population`]: fixed potential-outcome vectors, their moments, and
//!   the built-in data-generating processes;
//! - [`designs`]: sequential assignment rules (Wei's adaptive coin,
//!   Efron's biased coin, i.i.d. Bernoulli);
//! - [`experiment`]: running one experiment to an observable
//!   [`experiment::AssignmentTrace`];
//! - [`estimators`]: the IPW and AIPW point estimators;
//! - [`variance`]: conservative variance estimators and normal confidence
//!   intervals under strong or weak design stability;
//! - [`analytics`]: closed-form design limits and limiting variances;
//! - [`verification`]: exact path-enumeration oracles and the infeasible
//!   proxy estimator;
//! - [`montecarlo`]: the parallel, reproducible coverage harness;
//! - [`cli`]: the thin command-line front end.
//!
//! Start with the runnable programs in the `examples/` directory, each of
//! which exercises one capability end to end.

pub mod analytics;
pub mod cli;
pub mod designs;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod montecarlo;
pub mod population;
pub mod variance;
pub mod verification;

pub use error::{Error, Result};
