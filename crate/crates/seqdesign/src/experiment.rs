//! Running one sequential experiment and recording its trace.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::designs::{Design, DesignState};
use crate::error::{Error, Result};
use crate::population::PotentialOutcomes;

/// One experiment's realization: per-unit inclusion probability, assignment,
/// and observed outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentTrace {
    p: Vec<f64>,
    k: Vec<u8>,
    y_obs: Vec<f64>,
}

impl AssignmentTrace {
    pub fn new(p: Vec<f64>, k: Vec<u8>, y_obs: Vec<f64>) -> Result<Self> {
        if p.len() != k.len() || p.len() != y_obs.len() {
            return Err(Error::InvalidTrace(format!(
                "length mismatch: p={}, k={}, y_obs={}",
                p.len(),
                k.len(),
                y_obs.len()
            )));
        }
        for (index, &value) in p.iter().enumerate() {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::DegenerateProbability { index, value });
            }
        }
        if let Some(i) = k.iter().position(|&v| v > 1) {
            return Err(Error::InvalidTrace(format!("k[{i}] is not in {{0,1}}")));
        }
        Ok(Self { p, k, y_obs })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn k(&self) -> &[u8] {
        &self.k
    }

    pub fn y_obs(&self) -> &[f64] {
        &self.y_obs
    }

    /// Number of treated units.
    pub fn n_treated(&self) -> usize {
        self.k.iter().map(|&k| k as usize).sum()
    }

    /// Checks that observed outcomes match the population's potential
    /// outcomes under the recorded assignments.
    pub fn check_against(&self, pop: &PotentialOutcomes) -> Result<()> {
        if self.len() != pop.len() {
            return Err(Error::TracePopulationMismatch(format!(
                "trace has {} units, population has {}",
                self.len(),
                pop.len()
            )));
        }
        for i in 0..self.len() {
            if self.y_obs[i] != pop.observed(i, self.k[i]) {
                return Err(Error::TracePopulationMismatch(format!(
                    "observed outcome at unit {i} does not match the assigned potential outcome"
                )));
            }
        }
        Ok(())
    }

    /// Writes the trace as `i,p,k,y_obs` delimited text.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,p,k,y_obs")?;
        for i in 0..self.len() {
            writeln!(w, "{},{},{},{}", i + 1, self.p[i], self.k[i], self.y_obs[i])?;
        }
        Ok(())
    }

    /// Reads an `i,p,k,y_obs` trace, for estimator-only workflows on
    /// externally generated data.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let reader = BufReader::new(r);
        let mut p = Vec::new();
        let mut k = Vec::new();
        let mut y = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if lineno == 0 {
                if line.split(',').map(str::trim).collect::<Vec<_>>() != ["i", "p", "k", "y_obs"] {
                    return Err(Error::Parse {
                        context: "trace csv".into(),
                        reason: format!("expected header `i,p,k,y_obs`, got `{line}`"),
                    });
                }
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(Error::Parse {
                    context: "trace csv".into(),
                    reason: format!("line {} has {} columns, expected 4", lineno + 1, cols.len()),
                });
            }
            let err = |e: &dyn std::fmt::Display| Error::Parse {
                context: "trace csv".into(),
                reason: format!("line {}: {e}", lineno + 1),
            };
            p.push(cols[1].parse::<f64>().map_err(|e| err(&e))?);
            k.push(cols[2].parse::<u8>().map_err(|e| err(&e))?);
            y.push(cols[3].parse::<f64>().map_err(|e| err(&e))?);
        }
        Self::new(p, k, y)
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv_file(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Runs one sequential experiment over the population, deterministic given
/// the seed. Unit i is treated iff the i-th uniform draw is strictly below
/// the design's probability for the current history.
pub fn run_experiment(
    pop: &PotentialOutcomes,
    design: &dyn Design,
    seed: u64,
) -> Result<AssignmentTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_experiment_with_uniforms(pop, design, |_| rng.random::<f64>())
}

/// Same as [`run_experiment`] but driven by an explicit uniform stream,
/// used by tests that hand-trace the assignment sequence.
pub fn run_experiment_with_uniforms(
    pop: &PotentialOutcomes,
    design: &dyn Design,
    mut uniform: impl FnMut(usize) -> f64,
) -> Result<AssignmentTrace> {
    let n = pop.len();
    let mut state = DesignState::new();
    let mut p = Vec::with_capacity(n);
    let mut k = Vec::with_capacity(n);
    let mut y_obs = Vec::with_capacity(n);
    for i in 0..n {
        let pi = design.next_probability(&state)?;
        let ki = (uniform(i) < pi) as u8;
        let yi = pop.observed(i, ki);
        p.push(pi);
        k.push(ki);
        y_obs.push(yi);
        state.push(ki, yi);
    }
    AssignmentTrace::new(p, k, y_obs)
}
