//! Sequential treatment-assignment designs.
//!
//! A design maps the history of past assignments and observed outcomes to
//! the next inclusion probability. Wei's adaptive coin and Efron's biased
//! coin depend on the history only through the treatment-control imbalance;
//! the interface still exposes the full history so fully general
//! history-measurable rules can be plugged in.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Assignment history up to the current unit.
///
/// `imbalance` is D = treatments minus controls; `step` counts units
/// assigned so far.
#[derive(Debug, Clone, Default)]
pub struct DesignState {
    step: usize,
    imbalance: i64,
    history: Vec<(u8, f64)>,
}

impl DesignState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn imbalance(&self) -> i64 {
        self.imbalance
    }

    /// Normalized imbalance R = D / step, with R = 0 before any assignment.
    pub fn normalized_imbalance(&self) -> f64 {
        if self.step == 0 {
            0.0
        } else {
            self.imbalance as f64 / self.step as f64
        }
    }

    /// Full (k, y) history, oldest first.
    pub fn history(&self) -> &[(u8, f64)] {
        &self.history
    }

    /// Appends one assignment and observed outcome, returning the new state.
    pub fn update(&self, k: u8, y: f64) -> DesignState {
        let mut next = self.clone();
        next.step += 1;
        next.imbalance += 2 * k as i64 - 1;
        next.history.push((k, y));
        next
    }

    /// In-place variant of [`DesignState::update`] for the hot loop.
    pub fn push(&mut self, k: u8, y: f64) {
        self.step += 1;
        self.imbalance += 2 * k as i64 - 1;
        self.history.push((k, y));
    }

    /// Removes the most recent assignment; the inverse of
    /// [`DesignState::push`] used when backtracking an enumeration.
    pub fn pop(&mut self) -> Option<(u8, f64)> {
        let (k, y) = self.history.pop()?;
        self.step -= 1;
        self.imbalance -= 2 * k as i64 - 1;
        Some((k, y))
    }

    pub fn validate(&self) -> Result<()> {
        if self.imbalance.unsigned_abs() as usize > self.step {
            return Err(Error::InvalidDesignState(format!(
                "|D| = {} exceeds step {}",
                self.imbalance.abs(),
                self.step
            )));
        }
        if (self.imbalance.rem_euclid(2)) as usize != self.step % 2 {
            return Err(Error::InvalidDesignState(format!(
                "imbalance {} and step {} have different parity",
                self.imbalance, self.step
            )));
        }
        if self.history.len() != self.step {
            return Err(Error::InvalidDesignState(format!(
                "history length {} does not match step {}",
                self.history.len(),
                self.step
            )));
        }
        let from_history: i64 = self.history.iter().map(|(k, _)| 2 * *k as i64 - 1).sum();
        if from_history != self.imbalance {
            return Err(Error::InvalidDesignState(format!(
                "imbalance {} disagrees with history sum {}",
                self.imbalance, from_history
            )));
        }
        Ok(())
    }
}

/// A sequential assignment rule: yields the next inclusion probability given
/// the history. Implementations must emit probabilities in a fixed
/// `[delta, 1 - delta]` with `delta > 0`.
pub trait Design: Send + Sync {
    fn next_probability(&self, state: &DesignState) -> Result<f64>;

    /// The positivity bound delta such that every emitted probability lies
    /// in `[delta, 1 - delta]`.
    fn positivity_bound(&self) -> f64;
}

/// Wei's adaptive coin: p = clip(f(R), delta, 1 - delta) where R is the
/// normalized imbalance and f is non-increasing with f(0) = 1/2.
#[derive(Clone)]
pub struct WeiDesign {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    delta: f64,
}

impl fmt::Debug for WeiDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeiDesign").field("delta", &self.delta).finish()
    }
}

impl WeiDesign {
    /// Builds a Wei design from an arbitrary allocation function, checking
    /// f(0) = 1/2 at construction.
    pub fn new<F>(f: F, delta: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(delta > 0.0 && delta <= 0.5) {
            return Err(Error::invalid_parameter("delta", "must lie in (0, 1/2]"));
        }
        if (f(0.0) - 0.5).abs() > 1e-12 {
            return Err(Error::invalid_parameter("f", "must satisfy f(0) = 1/2"));
        }
        Ok(Self {
            f: Arc::new(f),
            delta,
        })
    }

    /// The linear rule f(R) = (1 - R) / 2 used throughout the CLI.
    pub fn linear(delta: f64) -> Result<Self> {
        Self::new(|r| (1.0 - r) / 2.0, delta)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl Design for WeiDesign {
    fn next_probability(&self, state: &DesignState) -> Result<f64> {
        state.validate()?;
        let raw = (self.f)(state.normalized_imbalance());
        Ok(raw.max(self.delta).min(1.0 - self.delta))
    }

    fn positivity_bound(&self) -> f64 {
        self.delta
    }
}

/// Efron's biased coin: eta toward the underrepresented arm, 1/2 at balance.
#[derive(Debug, Clone, Copy)]
pub struct EfronDesign {
    eta: f64,
}

impl EfronDesign {
    pub fn new(eta: f64) -> Result<Self> {
        if !(0.5..1.0).contains(&eta) {
            return Err(Error::invalid_parameter("eta", "must lie in [1/2, 1)"));
        }
        Ok(Self { eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

impl Design for EfronDesign {
    fn next_probability(&self, state: &DesignState) -> Result<f64> {
        state.validate()?;
        Ok(match state.imbalance() {
            d if d < 0 => self.eta,
            0 => 0.5,
            _ => 1.0 - self.eta,
        })
    }

    fn positivity_bound(&self) -> f64 {
        1.0 - self.eta
    }
}

/// Constant-probability Bernoulli baseline.
#[derive(Debug, Clone, Copy)]
pub struct BernoulliDesign {
    p: f64,
}

impl BernoulliDesign {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid_parameter("p", "must lie in (0, 1)"));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

impl Design for BernoulliDesign {
    fn next_probability(&self, state: &DesignState) -> Result<f64> {
        state.validate()?;
        Ok(self.p)
    }

    fn positivity_bound(&self) -> f64 {
        self.p.min(1.0 - self.p)
    }
}
