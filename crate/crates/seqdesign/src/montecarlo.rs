//! Parallel Monte Carlo replication engine.
//!
//! A scenario fixes a population, a design, and an inference recipe; the
//! engine reruns the experiment under independent assignment randomness and
//! aggregates coverage and interval-length curves across nominal levels.
//! Replication results are collected in replication-index order and folded
//! sequentially, so the output is byte-identical for any worker count.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::efron_limits;
use crate::designs::{BernoulliDesign, Design, EfronDesign, WeiDesign};
use crate::error::{Error, Result};
use crate::experiment::run_experiment;
use crate::estimators::{aipw_estimate, ipw_estimate};
use crate::population::{
    make_additive_population, make_logadditive_population, make_nonadditive_population,
    true_ate, PotentialOutcomes,
};
use crate::variance::{confidence_interval, variance_estimate, EstimatorKind, StabilityRegime};

/// Which design a scenario runs, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DesignSpec {
    Wei { delta: f64 },
    Efron { eta: f64 },
    Bernoulli { p: f64 },
}

impl DesignSpec {
    /// Instantiates the assignment rule. Wei uses the linear rule
    /// f(R) = (1 - R)/2.
    pub fn build(&self) -> Result<Box<dyn Design>> {
        Ok(match *self {
            DesignSpec::Wei { delta } => Box::new(WeiDesign::linear(delta)?),
            DesignSpec::Efron { eta } => Box::new(EfronDesign::new(eta)?),
            DesignSpec::Bernoulli { p } => Box::new(BernoulliDesign::new(p)?),
        })
    }

    /// The stability notion under which this design's variance theory
    /// holds: Wei and Bernoulli are strongly stable, Efron only weakly.
    pub fn natural_stability(&self) -> Stability {
        match self {
            DesignSpec::Efron { .. } => Stability::Weak,
            _ => Stability::Strong,
        }
    }

    /// Resolves a (stability, limits) choice into a concrete regime, using
    /// the design's closed-form limits when they are declared known.
    pub fn resolve_regime(&self, stability: Stability, limits: Limits) -> Result<StabilityRegime> {
        match (stability, limits) {
            (Stability::Strong, Limits::Estimated) => Ok(StabilityRegime::StrongEstimated),
            (Stability::Weak, Limits::Estimated) => Ok(StabilityRegime::WeakEstimated),
            (Stability::Strong, Limits::Known) => match *self {
                DesignSpec::Wei { .. } => Ok(StabilityRegime::StrongKnown { pstar: 0.5 }),
                DesignSpec::Bernoulli { p } => Ok(StabilityRegime::StrongKnown { pstar: p }),
                DesignSpec::Efron { .. } => Err(Error::invalid_parameter(
                    "stability",
                    "Efron's design is only weakly stable; use --stability weak \
                     or --limits estimated",
                )),
            },
            (Stability::Weak, Limits::Known) => match *self {
                DesignSpec::Wei { .. } => Ok(StabilityRegime::WeakKnown {
                    p1star: 0.5,
                    p2star: 0.5,
                    ptilde: 0.5,
                }),
                DesignSpec::Bernoulli { p } => Ok(StabilityRegime::WeakKnown {
                    p1star: p,
                    p2star: p,
                    ptilde: p,
                }),
                DesignSpec::Efron { eta } => {
                    let l = efron_limits(eta)?;
                    Ok(StabilityRegime::WeakKnown {
                        p1star: l.p1star,
                        p2star: l.p2star,
                        ptilde: l.ptilde,
                    })
                }
            },
        }
    }
}

/// Stability notion assumed by the variance estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Strong,
    Weak,
}

/// Whether the limiting probabilities are supplied in closed form or
/// estimated from the realized trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Limits {
    Known,
    Estimated,
}

/// Data-generating process for the potential outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DgpSpec {
    Nonadditive,
    Additive { tau: f64 },
    Logadditive { c: f64 },
    File { path: String },
}

impl DgpSpec {
    /// Draws (or loads) a population of size `n`.
    pub fn realize(&self, n: usize, seed: u64) -> Result<PotentialOutcomes> {
        match self {
            DgpSpec::Nonadditive => make_nonadditive_population(n, seed),
            DgpSpec::Additive { tau } => make_additive_population(n, *tau, seed),
            DgpSpec::Logadditive { c } => make_logadditive_population(n, *c, seed),
            DgpSpec::File { path } => {
                let pop = PotentialOutcomes::read_csv_file(std::path::Path::new(path))?;
                if pop.len() != n {
                    return Err(Error::InvalidConfig(format!(
                        "population file {path} has {} units but n = {n}",
                        pop.len()
                    )));
                }
                Ok(pop)
            }
        }
    }
}

/// Whether the population is drawn once per scenario or redrawn each
/// replication. Fixed is the default: potential outcomes are treated as
/// fixed, with all randomness coming from the assignment mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PopulationMode {
    Fixed,
    Redraw,
}

impl Default for PopulationMode {
    fn default() -> Self {
        PopulationMode::Fixed
    }
}

/// Full description of one Monte Carlo study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub design: DesignSpec,
    pub dgp: DgpSpec,
    pub n: usize,
    pub reps: usize,
    /// Nominal confidence levels, strictly increasing, each in (0,1).
    pub levels: Vec<f64>,
    pub estimators: Vec<EstimatorKind>,
    pub stability: Stability,
    pub limits: Limits,
    #[serde(default)]
    pub population_mode: PopulationMode,
    pub master_seed: u64,
}

impl ScenarioConfig {
    /// Desk-scale preset: one scenario in a few seconds on a laptop.
    pub fn desk(design: DesignSpec, dgp: DgpSpec, master_seed: u64) -> Self {
        Self::preset(design, dgp, master_seed, 2000, 5000)
    }

    /// Paper-scale preset (n = 5000, 20000 replications).
    pub fn paper(design: DesignSpec, dgp: DgpSpec, master_seed: u64) -> Self {
        Self::preset(design, dgp, master_seed, 5000, 20_000)
    }

    fn preset(design: DesignSpec, dgp: DgpSpec, master_seed: u64, n: usize, reps: usize) -> Self {
        Self {
            stability: design.natural_stability(),
            limits: Limits::Known,
            design,
            dgp,
            n,
            reps,
            levels: level_grid(0.75, 0.99, 20),
            estimators: vec![EstimatorKind::Ipw, EstimatorKind::Aipw],
            population_mode: PopulationMode::Fixed,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig("n must be at least 2".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be at least 1".into()));
        }
        if self.levels.is_empty() {
            return Err(Error::InvalidConfig("levels must be nonempty".into()));
        }
        for w in self.levels.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidConfig(
                    "levels must be strictly increasing".into(),
                ));
            }
        }
        if self
            .levels
            .iter()
            .any(|&l| !(l > 0.0 && l < 1.0) || !l.is_finite())
        {
            return Err(Error::InvalidConfig("levels must lie in (0,1)".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one estimator must be requested".into(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        if self.estimators.iter().any(|e| !seen.insert(*e)) {
            return Err(Error::InvalidConfig("estimators must not repeat".into()));
        }
        self.design.build()?;
        self.design.resolve_regime(self.stability, self.limits)?;
        Ok(())
    }
}

/// Inclusive level grid `start..=stop` with `count` points.
pub fn level_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![start];
    }
    (0..count)
        .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Aggregated results for one (level, estimator) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: f64,
    pub estimator: EstimatorKind,
    pub coverage: f64,
    /// Monte Carlo standard error of the coverage, sqrt(c (1-c) / reps).
    pub mc_se: f64,
    pub mean_length: f64,
}

/// Point-estimate statistics for one estimator across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorStats {
    pub estimator: EstimatorKind,
    pub mean_point: f64,
    pub sd_point: f64,
}

/// Coverage and interval-length curves for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub tau: f64,
    pub reps: usize,
    /// Row-major over estimators then levels, in config order.
    pub rows: Vec<LevelStats>,
    pub point_stats: Vec<EstimatorStats>,
}

impl CoverageCurve {
    /// Looks up one (estimator, level) cell; levels compared exactly.
    pub fn cell(&self, estimator: EstimatorKind, level: f64) -> Option<&LevelStats> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.level == level)
    }

    /// Delimited text with columns level, estimator, coverage, mc_se,
    /// mean_length; `{}` formatting keeps every number round-trip exact.
    pub fn write_delimited<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "level,estimator,coverage,mc_se,mean_length")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.level, r.estimator, r.coverage, r.mc_se, r.mean_length
            )?;
        }
        Ok(())
    }
}

/// Derives the seed of replication `r` from the master seed.
///
/// The mixing is a splitmix64 finalizer applied to
/// `master_seed XOR (r + 1) * 0x9E3779B97F4A7C15` (the odd golden-ratio
/// constant). Every stage is a bijection of the 64-bit integers, so for a
/// fixed master seed the map r -> seed_r is injective over all 2^64
/// replication indices. The function is pinned here so independent
/// implementations of the engine produce identical streams.
pub fn derive_replication_seed(master_seed: u64, r: u64) -> u64 {
    let mut z = master_seed ^ r.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed used to draw the scenario population; kept in a separate stream
/// from the per-replication assignment seeds.
fn population_seed(master_seed: u64, r: u64) -> u64 {
    derive_replication_seed(master_seed ^ 0xA076_1D64_78BD_642F, r)
}

/// One replication's contribution, kept small so 10^4-scale runs stay
/// memory-light: per estimator, the point estimate plus per-level
/// (covered, length) pairs.
struct RepOutcome {
    points: Vec<f64>,
    covered: Vec<bool>,
    lengths: Vec<f64>,
}

fn replicate(
    config: &ScenarioConfig,
    fixed_pop: Option<&PotentialOutcomes>,
    design: &dyn Design,
    regime: StabilityRegime,
    r: u64,
) -> Result<(f64, RepOutcome)> {
    let owned;
    let pop = match fixed_pop {
        Some(p) => p,
        None => {
            owned = config.dgp.realize(config.n, population_seed(config.master_seed, r))?;
            &owned
        }
    };
    let tau = true_ate(pop);
    let trace = run_experiment(pop, design, derive_replication_seed(config.master_seed, r))?;
    let mut out = RepOutcome {
        points: Vec::with_capacity(config.estimators.len()),
        covered: Vec::with_capacity(config.estimators.len() * config.levels.len()),
        lengths: Vec::with_capacity(config.estimators.len() * config.levels.len()),
    };
    for &estimator in &config.estimators {
        let point = match estimator {
            EstimatorKind::Ipw => ipw_estimate(&trace)?,
            EstimatorKind::Aipw => aipw_estimate(&trace)?,
        };
        let vhat = variance_estimate(&trace, estimator, regime)?;
        out.points.push(point);
        for &level in &config.levels {
            let (lo, hi) = confidence_interval(point, vhat, config.n, level)?;
            out.covered.push(lo <= tau && tau <= hi);
            out.lengths.push(hi - lo);
        }
    }
    Ok((tau, out))
}

/// Runs a full scenario on the current rayon pool and aggregates the
/// coverage curve. Use [`run_scenario_with_workers`] to pin the pool size.
pub fn run_scenario(config: &ScenarioConfig) -> Result<CoverageCurve> {
    config.validate()?;
    let design = config.design.build()?;
    let regime = config.design.resolve_regime(config.stability, config.limits)?;
    let fixed_pop = match config.population_mode {
        PopulationMode::Fixed => Some(config.dgp.realize(
            config.n,
            population_seed(config.master_seed, 0),
        )?),
        PopulationMode::Redraw => None,
    };

    // Parallel map in index order; the fold below is sequential, so the
    // aggregate is independent of the worker count.
    let results: Vec<(f64, RepOutcome)> = (0..config.reps as u64)
        .into_par_iter()
        .map(|r| {
            replicate(config, fixed_pop.as_ref(), design.as_ref(), regime, r).map_err(
                |source| Error::ReplicationFailed {
                    index: r,
                    source: Box::new(source),
                },
            )
        })
        .collect::<Result<_>>()?;

    let n_est = config.estimators.len();
    let n_lvl = config.levels.len();
    let reps = config.reps as f64;
    let tau = results[0].0;

    let mut cover_counts = vec![0u64; n_est * n_lvl];
    let mut length_sums = vec![0.0; n_est * n_lvl];
    let mut point_sums = vec![0.0; n_est];
    let mut point_sq_sums = vec![0.0; n_est];
    for (_, rep) in &results {
        for e in 0..n_est {
            point_sums[e] += rep.points[e];
            point_sq_sums[e] += rep.points[e] * rep.points[e];
            for l in 0..n_lvl {
                let idx = e * n_lvl + l;
                cover_counts[idx] += rep.covered[idx] as u64;
                length_sums[idx] += rep.lengths[idx];
            }
        }
    }

    let mut rows = Vec::with_capacity(n_est * n_lvl);
    for (e, &estimator) in config.estimators.iter().enumerate() {
        for (l, &level) in config.levels.iter().enumerate() {
            let idx = e * n_lvl + l;
            let coverage = cover_counts[idx] as f64 / reps;
            rows.push(LevelStats {
                level,
                estimator,
                coverage,
                mc_se: (coverage * (1.0 - coverage) / reps).sqrt(),
                mean_length: length_sums[idx] / reps,
            });
        }
    }
    let point_stats = config
        .estimators
        .iter()
        .enumerate()
        .map(|(e, &estimator)| {
            let mean = point_sums[e] / reps;
            let var = (point_sq_sums[e] / reps - mean * mean).max(0.0);
            EstimatorStats {
                estimator,
                mean_point: mean,
                sd_point: var.sqrt(),
            }
        })
        .collect();

    Ok(CoverageCurve {
        tau,
        reps: config.reps,
        rows,
        point_stats,
    })
}

/// Runs the scenario on a dedicated rayon pool with exactly `workers`
/// threads.
pub fn run_scenario_with_workers(config: &ScenarioConfig, workers: usize) -> Result<CoverageCurve> {
    if workers == 0 {
        return Err(Error::invalid_parameter("workers", "must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run_scenario(config))
}
