//! Closed-form design analytics.
//!
//! Under Efron's biased coin the imbalance sequence is a birth-death chain
//! on the integers with a geometric stationary law; its stationary
//! expectations give the weak-stability limits in closed form. Wei's coin
//! is strongly stable at 1/2, so its limiting variances drop the
//! probability factor entirely.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::population::PopulationMoments;

/// Weak-stability limits of Efron's design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfronLimits {
    pub eta: f64,
    pub p1star: f64,
    pub p2star: f64,
    /// Limit of the mean inclusion probability; 1/2 by symmetry.
    pub ptilde: f64,
}

/// Stationary distribution of the Efron imbalance chain, truncated at
/// `n_max` with the remaining geometric tail mass reported (never
/// renormalized).
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPmf {
    pub eta: f64,
    pub n_max: usize,
    pub pi0: f64,
    /// pi(|d|) for |d| = 1..=n_max; symmetric in d.
    pub pi: Vec<f64>,
    pub tail_mass: f64,
}

impl StationaryPmf {
    /// Probability of imbalance `d` (0 beyond the truncation point).
    pub fn prob(&self, d: i64) -> f64 {
        let n = d.unsigned_abs() as usize;
        if n == 0 {
            self.pi0
        } else if n <= self.n_max {
            self.pi[n - 1]
        } else {
            0.0
        }
    }

    /// Total mass retained inside the truncation.
    pub fn retained_mass(&self) -> f64 {
        self.pi0 + 2.0 * self.pi.iter().sum::<f64>()
    }

    /// Writes the pmf as `d,probability` delimited text across the
    /// symmetric support.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "d,probability")?;
        for d in -(self.n_max as i64)..=(self.n_max as i64) {
            writeln!(w, "{},{}", d, self.prob(d))?;
        }
        Ok(())
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.5 && eta < 1.0) {
        return Err(Error::invalid_parameter(
            "eta",
            "must lie in (1/2, 1); at 1/2 the imbalance chain is not positive recurrent",
        ));
    }
    Ok(())
}

/// Closed-form weak-stability limits for Efron's design with bias `eta`.
pub fn efron_limits(eta: f64) -> Result<EfronLimits> {
    check_eta(eta)?;
    let denom = 1.0 - 4.0 * eta + 12.0 * eta * eta - 8.0 * eta * eta * eta;
    let p1star = 4.0 * eta * eta * (1.0 - eta) / denom;
    let p2star = (1.0 - 4.0 * eta + 8.0 * eta * eta - 4.0 * eta * eta * eta) / denom;
    Ok(EfronLimits {
        eta,
        p1star,
        p2star,
        ptilde: 0.5,
    })
}

/// Stationary pmf of the imbalance chain: pi(0) = (2 eta - 1) / (2 eta) and
/// geometric tails with ratio (1 - eta) / eta.
pub fn stationary_pmf(eta: f64, tail_tol: f64) -> Result<StationaryPmf> {
    check_eta(eta)?;
    if !(tail_tol > 0.0) {
        return Err(Error::invalid_parameter("tail_tol", "must be positive"));
    }
    let pi0 = (2.0 * eta - 1.0) / (2.0 * eta);
    let coeff = (2.0 * eta - 1.0) / (4.0 * eta * (1.0 - eta));
    let ratio = (1.0 - eta) / eta;
    let mut pi = Vec::new();
    let mut term = coeff * ratio;
    // Two-sided geometric tail beyond n: 2 * term * ratio / (1 - ratio).
    loop {
        let tail = 2.0 * term * ratio / (1.0 - ratio);
        pi.push(term);
        if tail < tail_tol {
            return Ok(StationaryPmf {
                eta,
                n_max: pi.len(),
                pi0,
                pi,
                tail_mass: tail,
            });
        }
        term *= ratio;
    }
}

/// Stationary expectations of 1/p, 1/(1-p), and p under the imbalance
/// chain's stationary law.
pub fn expected_inverse_probs(pmf: &StationaryPmf, eta: f64) -> Result<(f64, f64, f64)> {
    check_eta(eta)?;
    // Both inverse expectations share the same closed form by the
    // d <-> -d symmetry of the stationary law.
    let e_inv = 2.0 * pmf.pi0 + (1.0 - pmf.pi0) / 2.0 * (1.0 / (1.0 - eta) + 1.0 / eta);
    Ok((e_inv, e_inv, 0.5))
}

/// How the unidentifiable cross moment enters a closed-form variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossMode {
    /// Use the true cross moments (requires both potential outcomes).
    Oracle,
    /// Replace them with their Cauchy-Schwarz upper bounds.
    CauchySchwarz,
}

/// Limiting (v_ipw, v_aipw) under Wei's design: the strong formulas at
/// p* = 1/2.
pub fn wei_variances(moments: &PopulationMoments, cross: CrossMode) -> (f64, f64) {
    let (m01, gamma) = cross_terms(moments, cross);
    (
        moments.m0_sq + moments.m1_sq + 2.0 * m01,
        moments.sigma0_sq + moments.sigma1_sq + 2.0 * gamma,
    )
}

/// Limiting (v_ipw, v_aipw) under Efron's design with bias `eta`.
pub fn efron_variances(
    moments: &PopulationMoments,
    eta: f64,
    cross: CrossMode,
) -> Result<(f64, f64)> {
    let factor = efron_variance_factor(eta)?;
    let (m01, gamma) = cross_terms(moments, cross);
    Ok((
        (moments.m0_sq + moments.m1_sq) * factor + 2.0 * m01,
        (moments.sigma0_sq + moments.sigma1_sq) * factor + 2.0 * gamma,
    ))
}

/// The probability factor (1 - 4eta + 8eta^2 - 4eta^3) / (4eta^2 (1-eta))
/// multiplying the second moments in Efron's limiting variances; equals
/// p2*/(1-p2*) = (1-p1*)/p1*.
pub fn efron_variance_factor(eta: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok((1.0 - 4.0 * eta + 8.0 * eta * eta - 4.0 * eta * eta * eta)
        / (4.0 * eta * eta * (1.0 - eta)))
}

fn cross_terms(moments: &PopulationMoments, cross: CrossMode) -> (f64, f64) {
    match cross {
        CrossMode::Oracle => (moments.m01, moments.gamma),
        CrossMode::CauchySchwarz => (
            (moments.m0_sq * moments.m1_sq).sqrt(),
            (moments.sigma0_sq * moments.sigma1_sq).sqrt(),
        ),
    }
}

/// Simulates the Efron imbalance chain for `steps` transitions and returns
/// a truncated visit-frequency table shaped like [`StationaryPmf`]. A
/// burn-in of `min(10^4, steps / 10)` transitions is discarded.
pub fn empirical_chain_distribution(eta: f64, steps: usize, seed: u64) -> Result<StationaryPmf> {
    check_eta(eta)?;
    if steps == 0 {
        return Err(Error::invalid_parameter("steps", "must be at least 1"));
    }
    let burn_in = (steps / 10).min(10_000);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d: i64 = 0;
    let mut counts: std::collections::HashMap<i64, u64> = std::collections::HashMap::new();
    let mut kept = 0u64;
    for step in 0..steps {
        let p = match d {
            v if v < 0 => eta,
            0 => 0.5,
            _ => 1.0 - eta,
        };
        d += if rng.random::<f64>() < p { 1 } else { -1 };
        if step >= burn_in {
            *counts.entry(d).or_insert(0) += 1;
            kept += 1;
        }
    }
    let n_max = counts.keys().map(|d| d.unsigned_abs() as usize).max().unwrap_or(0);
    let total = kept as f64;
    let pi0 = *counts.get(&0).unwrap_or(&0) as f64 / total;
    // Fold the two-sided frequencies into the symmetric representation;
    // prob() divides evenly between d and -d.
    let pi: Vec<f64> = (1..=n_max)
        .map(|n| {
            let plus = *counts.get(&(n as i64)).unwrap_or(&0) as f64;
            let minus = *counts.get(&(-(n as i64))).unwrap_or(&0) as f64;
            (plus + minus) / (2.0 * total)
        })
        .collect();
    Ok(StationaryPmf {
        eta,
        n_max,
        pi0,
        pi,
        tail_mass: 0.0,
    })
}

/// Total-variation distance between two pmfs over the shared symmetric
/// support.
pub fn total_variation(a: &StationaryPmf, b: &StationaryPmf) -> f64 {
    let n_max = a.n_max.max(b.n_max) as i64;
    let mut tv = 0.0;
    for d in -n_max..=n_max {
        tv += (a.prob(d) - b.prob(d)).abs();
    }
    // Mass truncated entirely out of either support.
    tv += a.tail_mass + b.tail_mass;
    tv / 2.0
}
