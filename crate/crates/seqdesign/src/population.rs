//! Finite populations of potential outcomes.
//!
//! A population is a fixed pair of vectors `(y0, y1)`: the control and
//! treatment responses every unit would exhibit. The generators here mirror
//! three standard benchmark mechanisms (a correlated non-additive pair, an
//! additive shift, and a proportional "log-additive" pair), all built on
//! truncated normal draws so outcomes stay uniformly bounded.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Attempt cap for each rejection-sampled draw; acceptance probability is
/// ~0.997 per coordinate, so hitting the cap indicates a logic error.
const REJECTION_CAP: usize = 1000;

/// A fixed finite population of potential outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialOutcomes {
    y0: Vec<f64>,
    y1: Vec<f64>,
    bound: f64,
}

impl PotentialOutcomes {
    /// Builds a population, validating finiteness and the uniform bound
    /// `|y| <= bound`.
    pub fn new(y0: Vec<f64>, y1: Vec<f64>, bound: f64) -> Result<Self> {
        if y0.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        if y0.len() != y1.len() {
            return Err(Error::LengthMismatch {
                y0_len: y0.len(),
                y1_len: y1.len(),
            });
        }
        if !(bound > 0.0) {
            return Err(Error::invalid_parameter("bound", "must be positive"));
        }
        for (index, value) in y0.iter().chain(y1.iter()).enumerate() {
            let index = index % y0.len();
            if !value.is_finite() {
                return Err(Error::NonFiniteOutcome { index });
            }
            if value.abs() > bound {
                return Err(Error::OutcomeBoundExceeded {
                    index,
                    value: value.abs(),
                    bound,
                });
            }
        }
        Ok(Self { y0, y1, bound })
    }

    /// Builds a population with the bound inferred as `max |y|`.
    pub fn from_vectors(y0: Vec<f64>, y1: Vec<f64>) -> Result<Self> {
        let bound = y0
            .iter()
            .chain(y1.iter())
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        Self::new(y0, y1, bound)
    }

    pub fn len(&self) -> usize {
        self.y0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y0.is_empty()
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn y1(&self) -> &[f64] {
        &self.y1
    }

    /// Declared uniform bound M on |y|.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Outcome observed for unit `i` under assignment `k`.
    pub fn observed(&self, i: usize, k: u8) -> f64 {
        if k == 1 {
            self.y1[i]
        } else {
            self.y0[i]
        }
    }

    /// Writes the population as two-column delimited text with header
    /// `y0,y1`. Values use shortest round-trip decimal formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "y0,y1")?;
        for (a, b) in self.y0.iter().zip(&self.y1) {
            writeln!(w, "{a},{b}")?;
        }
        Ok(())
    }

    /// Reads a population from `y0,y1` delimited text.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let reader = BufReader::new(r);
        let mut y0 = Vec::new();
        let mut y1 = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if lineno == 0 {
                let header: Vec<&str> = line.split(',').map(str::trim).collect();
                if header != ["y0", "y1"] {
                    return Err(Error::Parse {
                        context: "population csv".into(),
                        reason: format!("expected header `y0,y1`, got `{line}`"),
                    });
                }
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::Parse {
                    context: "population csv".into(),
                    reason: format!("line {} has too few columns", lineno + 1),
                })?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse {
                    context: "population csv".into(),
                    reason: format!("line {}: {e}", lineno + 1),
                })
            };
            y0.push(parse(parts.next())?);
            y1.push(parse(parts.next())?);
        }
        Self::from_vectors(y0, y1)
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv_file(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Finite-N raw and centered moment summaries of a population.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PopulationMoments {
    pub m0_sq: f64,
    pub m1_sq: f64,
    pub m01: f64,
    pub ybar0: f64,
    pub ybar1: f64,
    pub sigma0_sq: f64,
    pub sigma1_sq: f64,
    pub gamma: f64,
}

/// Treatment-effect homogeneity classification at a given tolerance.
///
/// `Additive` and `LogAdditive` both imply `Generalized`; classification
/// reports the most specific class that holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HomogeneityClass {
    /// `y1 = y0 + tau` for every unit.
    Additive { tau: f64 },
    /// `y1 = c * y0` for every unit.
    LogAdditive { c: f64 },
    /// Centered treatment outcomes proportional to centered controls.
    Generalized { slope: f64 },
    None,
    /// Centered controls are identically zero, so the proportionality test
    /// has no defined slope.
    Indeterminate,
}

/// Average treatment effect of the fixed population.
pub fn true_ate(pop: &PotentialOutcomes) -> f64 {
    let n = pop.len() as f64;
    pop.y1
        .iter()
        .zip(&pop.y0)
        .map(|(a, b)| a - b)
        .sum::<f64>()
        / n
}

/// Raw and centered second moments of the population.
pub fn population_moments(pop: &PotentialOutcomes) -> PopulationMoments {
    let n = pop.len() as f64;
    let mut m0_sq = 0.0;
    let mut m1_sq = 0.0;
    let mut m01 = 0.0;
    let mut ybar0 = 0.0;
    let mut ybar1 = 0.0;
    for (&a, &b) in pop.y0.iter().zip(&pop.y1) {
        m0_sq += a * a;
        m1_sq += b * b;
        m01 += a * b;
        ybar0 += a;
        ybar1 += b;
    }
    m0_sq /= n;
    m1_sq /= n;
    m01 /= n;
    ybar0 /= n;
    ybar1 /= n;
    PopulationMoments {
        m0_sq,
        m1_sq,
        m01,
        ybar0,
        ybar1,
        sigma0_sq: (m0_sq - ybar0 * ybar0).max(0.0),
        sigma1_sq: (m1_sq - ybar1 * ybar1).max(0.0),
        gamma: m01 - ybar0 * ybar1,
    }
}

fn truncated_standard_normal(rng: &mut impl Rng, lo: f64, hi: f64) -> Result<f64> {
    for _ in 0..REJECTION_CAP {
        let z: f64 = StandardNormal.sample(rng);
        if (lo..=hi).contains(&z) {
            return Ok(z);
        }
    }
    Err(Error::RejectionCapExceeded { cap: REJECTION_CAP })
}

/// Correlated non-additive population: i.i.d. bivariate normal pairs with
/// mean (0, 1), unit variances, covariance 0.3, accepted only when both
/// coordinates lie in [-3, 3].
pub fn make_nonadditive_population(n: usize, seed: u64) -> Result<PotentialOutcomes> {
    if n == 0 {
        return Err(Error::invalid_parameter("n", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho: f64 = 0.3;
    let resid = (1.0 - rho * rho).sqrt();
    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    for _ in 0..n {
        let mut accepted = false;
        for _ in 0..REJECTION_CAP {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let a = z1;
            let b = 1.0 + rho * z1 + resid * z2;
            if a.abs() <= 3.0 && b.abs() <= 3.0 {
                y0.push(a);
                y1.push(b);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::RejectionCapExceeded { cap: REJECTION_CAP });
        }
    }
    PotentialOutcomes::new(y0, y1, 3.0)
}

/// Additive population: y0 ~ N(0,1) truncated to [-3, 3], y1 = y0 + tau.
pub fn make_additive_population(n: usize, tau: f64, seed: u64) -> Result<PotentialOutcomes> {
    if n == 0 {
        return Err(Error::invalid_parameter("n", "must be at least 1"));
    }
    if !tau.is_finite() {
        return Err(Error::invalid_parameter("tau", "must be finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    for _ in 0..n {
        let z = truncated_standard_normal(&mut rng, -3.0, 3.0)?;
        y0.push(z);
        y1.push(z + tau);
    }
    let bound = 3.0 + tau.abs();
    PotentialOutcomes::new(y0, y1, bound)
}

/// Log-additive population: y0 ~ N(10,1) truncated to [7, 13], y1 = c * y0.
pub fn make_logadditive_population(n: usize, c: f64, seed: u64) -> Result<PotentialOutcomes> {
    if n == 0 {
        return Err(Error::invalid_parameter("n", "must be at least 1"));
    }
    if !c.is_finite() {
        return Err(Error::invalid_parameter("c", "must be finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    for _ in 0..n {
        let z = 10.0 + truncated_standard_normal(&mut rng, -3.0, 3.0)?;
        y0.push(z);
        y1.push(c * z);
    }
    let bound = 13.0_f64.max(13.0 * c.abs());
    PotentialOutcomes::new(y0, y1, bound)
}

/// Classifies treatment-effect homogeneity at absolute tolerance `tol`,
/// reporting the most specific class that holds.
pub fn classify_homogeneity(pop: &PotentialOutcomes, tol: f64) -> Result<HomogeneityClass> {
    if !(tol > 0.0) {
        return Err(Error::invalid_parameter("tol", "must be positive"));
    }
    let n = pop.len() as f64;

    // Additive: unit effects constant up to tol.
    let tau_bar = true_ate(pop);
    let additive = pop
        .y1
        .iter()
        .zip(&pop.y0)
        .all(|(b, a)| ((b - a) - tau_bar).abs() <= tol);
    if additive {
        return Ok(HomogeneityClass::Additive { tau: tau_bar });
    }

    // Log-additive: least-squares slope through the origin.
    let ss0: f64 = pop.y0.iter().map(|a| a * a).sum();
    if ss0 > 0.0 {
        let c = pop.y0.iter().zip(&pop.y1).map(|(a, b)| a * b).sum::<f64>() / ss0;
        if pop.y1.iter().zip(&pop.y0).all(|(b, a)| (b - c * a).abs() <= tol) {
            return Ok(HomogeneityClass::LogAdditive { c });
        }
    }

    // Generalized: centered outcomes proportional.
    let ybar0 = pop.y0.iter().sum::<f64>() / n;
    let ybar1 = pop.y1.iter().sum::<f64>() / n;
    let centered_ss0: f64 = pop.y0.iter().map(|a| (a - ybar0).powi(2)).sum();
    if centered_ss0 <= tol * tol {
        return Ok(HomogeneityClass::Indeterminate);
    }
    let slope = pop
        .y0
        .iter()
        .zip(&pop.y1)
        .map(|(a, b)| (a - ybar0) * (b - ybar1))
        .sum::<f64>()
        / centered_ss0;
    let generalized = pop
        .y1
        .iter()
        .zip(&pop.y0)
        .all(|(b, a)| ((b - ybar1) - slope * (a - ybar0)).abs() <= tol);
    if generalized {
        Ok(HomogeneityClass::Generalized { slope })
    } else {
        Ok(HomogeneityClass::None)
    }
}
