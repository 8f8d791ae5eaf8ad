//! Conservative variance estimators and confidence intervals.
//!
//! The cross moment between the two potential outcomes is not identifiable
//! from observed data, so every estimator here replaces it with its
//! Cauchy-Schwarz upper bound. The resulting interval coverage is at least
//! nominal, and exact under the matching homogeneity condition.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::estimators::running_means;
use crate::experiment::AssignmentTrace;

/// Which stability regime the variance estimator assumes, and whether the
/// limiting probabilities are supplied or estimated from the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StabilityRegime {
    StrongKnown { pstar: f64 },
    StrongEstimated,
    WeakKnown { p1star: f64, p2star: f64, ptilde: f64 },
    WeakEstimated,
}

impl StabilityRegime {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        match *self {
            StabilityRegime::StrongKnown { pstar } if !in_unit(pstar) => Err(
                Error::invalid_parameter("pstar", "must lie in (0,1)"),
            ),
            StabilityRegime::WeakKnown { p1star, p2star, ptilde }
                if !(in_unit(p1star) && in_unit(p2star) && in_unit(ptilde)) =>
            {
                Err(Error::invalid_parameter(
                    "p1star/p2star/ptilde",
                    "must lie in (0,1)",
                ))
            }
            _ => Ok(()),
        }
    }
}

/// Which point estimator a report refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    Ipw,
    Aipw,
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EstimatorKind::Ipw => write!(f, "ipw"),
            EstimatorKind::Aipw => write!(f, "aipw"),
        }
    }
}

/// Point estimate, variance estimate on the per-sqrt(N) scale, and
/// confidence intervals at the requested levels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferenceReport {
    pub estimator: EstimatorKind,
    pub point: f64,
    pub vhat: f64,
    pub n: usize,
    /// level -> (lo, hi); BTreeMap keyed by the level formatted with
    /// round-trip precision keeps serialization deterministic.
    pub intervals: BTreeMap<String, (f64, f64)>,
}

impl InferenceReport {
    pub fn build(
        estimator: EstimatorKind,
        point: f64,
        vhat: f64,
        n: usize,
        levels: &[f64],
    ) -> Result<Self> {
        let mut intervals = BTreeMap::new();
        for &level in levels {
            let (lo, hi) = confidence_interval(point, vhat, n, level)?;
            intervals.insert(format!("{level}"), (lo, hi));
        }
        Ok(Self {
            estimator,
            point,
            vhat,
            n,
            intervals,
        })
    }

    /// Flat delimited-text record: one line per level.
    pub fn write_delimited<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "estimator,point,vhat,level,lo,hi")?;
        for (level, (lo, hi)) in &self.intervals {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.estimator, self.point, self.vhat, level, lo, hi
            )?;
        }
        Ok(())
    }
}

fn check_probs(trace: &AssignmentTrace) -> Result<()> {
    for (index, &value) in trace.p().iter().enumerate() {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::DegenerateProbability { index, value });
        }
    }
    Ok(())
}

/// Square root with a guard for tiny negative values from cancellation.
fn guarded_sqrt(v: f64) -> Result<f64> {
    if v < -1e-15 {
        return Err(Error::InvalidTrace(format!(
            "variance component {v} is negative"
        )));
    }
    Ok(v.max(0.0).sqrt())
}

/// Group-mean raw second moments (m0hat^2, m1hat^2) under strong stability.
pub fn mhat_strong(trace: &AssignmentTrace) -> (f64, f64) {
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let n1 = trace.n_treated();
    let n0 = trace.len() - n1;
    for (&k, &y) in trace.k().iter().zip(trace.y_obs()) {
        if k == 1 {
            s1 += y * y;
        } else {
            s0 += y * y;
        }
    }
    (s0 / n0.max(1) as f64, s1 / n1.max(1) as f64)
}

/// Mean inclusion probability, a consistent estimate of the strong limit.
pub fn pstar_hat(trace: &AssignmentTrace) -> f64 {
    trace.p().iter().sum::<f64>() / trace.len() as f64
}

fn strong_combination(a0_sq: f64, a1_sq: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid_parameter("pstar", "must lie in (0,1)"));
    }
    let a0 = guarded_sqrt(a0_sq)?;
    let a1 = guarded_sqrt(a1_sq)?;
    let v = a0 * (p / (1.0 - p)).sqrt() + a1 * ((1.0 - p) / p).sqrt();
    Ok(v * v)
}

/// Conservative IPW variance estimate under strong stability:
/// (m0hat sqrt(p/(1-p)) + m1hat sqrt((1-p)/p))^2.
pub fn var_ipw_strong(trace: &AssignmentTrace, regime: StabilityRegime) -> Result<f64> {
    regime.validate()?;
    check_probs(trace)?;
    let p = match regime {
        StabilityRegime::StrongKnown { pstar } => pstar,
        StabilityRegime::StrongEstimated => pstar_hat(trace),
        _ => {
            return Err(Error::invalid_parameter(
                "regime",
                "var_ipw_strong requires a strong-stability regime",
            ))
        }
    };
    let (m0_sq, m1_sq) = mhat_strong(trace);
    strong_combination(m0_sq, m1_sq, p)
}

/// Estimated weak-stability limits: harmonic means of p and 1-p, and the
/// arithmetic mean.
pub fn weak_limits_hat(trace: &AssignmentTrace) -> Result<(f64, f64, f64)> {
    check_probs(trace)?;
    let n = trace.len() as f64;
    let mut inv_p = 0.0;
    let mut inv_q = 0.0;
    let mut mean_p = 0.0;
    for &p in trace.p() {
        inv_p += 1.0 / p;
        inv_q += 1.0 / (1.0 - p);
        mean_p += p;
    }
    Ok((n / inv_p, 1.0 - n / inv_q, mean_p / n))
}

/// Weak-stability raw second moments (m0tilde^2, m1tilde^2) with known
/// mean-probability limit `ptilde`.
pub fn mtilde_weak(trace: &AssignmentTrace, ptilde: f64) -> Result<(f64, f64)> {
    if !(ptilde > 0.0 && ptilde < 1.0) {
        return Err(Error::invalid_parameter("ptilde", "must lie in (0,1)"));
    }
    let n = trace.len() as f64;
    let (s0, s1) = split_square_sums(trace, |y, _| y * y);
    Ok((s0 / (n * (1.0 - ptilde)), s1 / (n * ptilde)))
}

/// Weak-stability moments with estimated denominators: sums of (1 - p) and
/// p replace N(1 - ptilde) and N ptilde.
pub fn mtilde_weak_estimated(trace: &AssignmentTrace) -> Result<(f64, f64)> {
    check_probs(trace)?;
    let sum_p: f64 = trace.p().iter().sum();
    let sum_q = trace.len() as f64 - sum_p;
    if sum_p == 0.0 || sum_q == 0.0 {
        return Err(Error::InvalidTrace("probability sums are degenerate".into()));
    }
    let (s0, s1) = split_square_sums(trace, |y, _| y * y);
    Ok((s0 / sum_q, s1 / sum_p))
}

/// Per-group sums of f(y, i) split by assignment: (control, treated).
fn split_square_sums(trace: &AssignmentTrace, f: impl Fn(f64, usize) -> f64) -> (f64, f64) {
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    for i in 0..trace.len() {
        let v = f(trace.y_obs()[i], i);
        if trace.k()[i] == 1 {
            s1 += v;
        } else {
            s0 += v;
        }
    }
    (s0, s1)
}

fn weak_combination(
    trace: &AssignmentTrace,
    a0_sq: f64,
    a1_sq: f64,
    regime: StabilityRegime,
) -> Result<f64> {
    let a0 = guarded_sqrt(a0_sq)?;
    let a1 = guarded_sqrt(a1_sq)?;
    match regime {
        StabilityRegime::WeakKnown { p1star, p2star, .. } => {
            Ok(a0_sq * p2star / (1.0 - p2star) + a1_sq * (1.0 - p1star) / p1star + 2.0 * a0 * a1)
        }
        StabilityRegime::WeakEstimated => {
            let n = trace.len() as f64;
            let mean_inv_p = trace.p().iter().map(|p| 1.0 / p).sum::<f64>() / n;
            let mean_inv_q = trace.p().iter().map(|p| 1.0 / (1.0 - p)).sum::<f64>() / n;
            Ok(a0_sq * (mean_inv_q - 1.0) + a1_sq * (mean_inv_p - 1.0) + 2.0 * a0 * a1)
        }
        _ => Err(Error::invalid_parameter(
            "regime",
            "weak variance estimators require a weak-stability regime",
        )),
    }
}

/// Conservative IPW variance estimate under weak stability.
pub fn var_ipw_weak(trace: &AssignmentTrace, regime: StabilityRegime) -> Result<f64> {
    regime.validate()?;
    check_probs(trace)?;
    let (m0_sq, m1_sq) = match regime {
        StabilityRegime::WeakKnown { ptilde, .. } => mtilde_weak(trace, ptilde)?,
        StabilityRegime::WeakEstimated => mtilde_weak_estimated(trace)?,
        _ => {
            return Err(Error::invalid_parameter(
                "regime",
                "var_ipw_weak requires a weak-stability regime",
            ))
        }
    };
    weak_combination(trace, m0_sq, m1_sq, regime)
}

/// Residual second moments around the running means, group-mean normalized.
pub fn sigmahat_strong(trace: &AssignmentTrace) -> Result<(f64, f64)> {
    let (s0, s1) = residual_square_sums(trace)?;
    let n1 = trace.n_treated();
    let n0 = trace.len() - n1;
    Ok((s0 / n0.max(1) as f64, s1 / n1.max(1) as f64))
}

fn residual_square_sums(trace: &AssignmentTrace) -> Result<(f64, f64)> {
    check_probs(trace)?;
    let means = running_means(trace)?;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    for i in 0..trace.len() {
        let y = trace.y_obs()[i];
        if trace.k()[i] == 1 {
            s1 += (y - means.yhat1[i]).powi(2);
        } else {
            s0 += (y - means.yhat0[i]).powi(2);
        }
    }
    Ok((s0, s1))
}

/// Conservative AIPW variance estimate under strong stability; the same
/// combination as [`var_ipw_strong`] with residual moments.
pub fn var_aipw_strong(trace: &AssignmentTrace, regime: StabilityRegime) -> Result<f64> {
    regime.validate()?;
    let p = match regime {
        StabilityRegime::StrongKnown { pstar } => pstar,
        StabilityRegime::StrongEstimated => {
            check_probs(trace)?;
            pstar_hat(trace)
        }
        _ => {
            return Err(Error::invalid_parameter(
                "regime",
                "var_aipw_strong requires a strong-stability regime",
            ))
        }
    };
    let (s0_sq, s1_sq) = sigmahat_strong(trace)?;
    strong_combination(s0_sq, s1_sq, p)
}

/// Residual second moments under weak stability with known `ptilde`.
pub fn sigmatilde_weak(trace: &AssignmentTrace, ptilde: f64) -> Result<(f64, f64)> {
    if !(ptilde > 0.0 && ptilde < 1.0) {
        return Err(Error::invalid_parameter("ptilde", "must lie in (0,1)"));
    }
    let n = trace.len() as f64;
    let (s0, s1) = residual_square_sums(trace)?;
    Ok((s0 / (n * (1.0 - ptilde)), s1 / (n * ptilde)))
}

/// Residual second moments with estimated probability-sum denominators.
pub fn sigmatilde_weak_estimated(trace: &AssignmentTrace) -> Result<(f64, f64)> {
    let sum_p: f64 = trace.p().iter().sum();
    let sum_q = trace.len() as f64 - sum_p;
    if sum_p == 0.0 || sum_q == 0.0 {
        return Err(Error::InvalidTrace("probability sums are degenerate".into()));
    }
    let (s0, s1) = residual_square_sums(trace)?;
    Ok((s0 / sum_q, s1 / sum_p))
}

/// Conservative AIPW variance estimate under weak stability.
///
/// In the estimated-limits form the second leading term uses the treated
/// residual moment, mirroring the IPW analogue.
pub fn var_aipw_weak(trace: &AssignmentTrace, regime: StabilityRegime) -> Result<f64> {
    regime.validate()?;
    let (s0_sq, s1_sq) = match regime {
        StabilityRegime::WeakKnown { ptilde, .. } => sigmatilde_weak(trace, ptilde)?,
        StabilityRegime::WeakEstimated => sigmatilde_weak_estimated(trace)?,
        _ => {
            return Err(Error::invalid_parameter(
                "regime",
                "var_aipw_weak requires a weak-stability regime",
            ))
        }
    };
    weak_combination(trace, s0_sq, s1_sq, regime)
}

/// Variance estimate dispatching on estimator kind and regime.
pub fn variance_estimate(
    trace: &AssignmentTrace,
    estimator: EstimatorKind,
    regime: StabilityRegime,
) -> Result<f64> {
    let strong = matches!(
        regime,
        StabilityRegime::StrongKnown { .. } | StabilityRegime::StrongEstimated
    );
    match (estimator, strong) {
        (EstimatorKind::Ipw, true) => var_ipw_strong(trace, regime),
        (EstimatorKind::Ipw, false) => var_ipw_weak(trace, regime),
        (EstimatorKind::Aipw, true) => var_aipw_strong(trace, regime),
        (EstimatorKind::Aipw, false) => var_aipw_weak(trace, regime),
    }
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile: Acklam's rational approximation followed by
/// one Newton refinement against the erfc-based CDF. Absolute error is
/// below 1e-9 over (0,1).
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid_parameter("q", "must lie in (0,1)"));
    }
    // Acklam's coefficients.
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const Q_LOW: f64 = 0.02425;

    let x = if q < Q_LOW {
        let u = (-2.0 * q.ln()).sqrt();
        (((((C[0] * u + C[1]) * u + C[2]) * u + C[3]) * u + C[4]) * u + C[5])
            / ((((D[0] * u + D[1]) * u + D[2]) * u + D[3]) * u + 1.0)
    } else if q <= 1.0 - Q_LOW {
        let u = q - 0.5;
        let r = u * u;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * u
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let u = (-2.0 * (1.0 - q).ln()).sqrt();
        -(((((C[0] * u + C[1]) * u + C[2]) * u + C[3]) * u + C[4]) * u + C[5])
            / ((((D[0] * u + D[1]) * u + D[2]) * u + D[3]) * u + 1.0)
    };

    // One Newton step: x - (Phi(x) - q) / phi(x).
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if pdf > 0.0 {
        Ok(x - (normal_cdf(x) - q) / pdf)
    } else {
        Ok(x)
    }
}

/// Closed normal-approximation confidence interval
/// `point +- z_{1-(1-level)/2} * sqrt(vhat / n)`.
pub fn confidence_interval(point: f64, vhat: f64, n: usize, level: f64) -> Result<(f64, f64)> {
    if !(vhat >= 0.0) {
        return Err(Error::invalid_parameter("vhat", "must be nonnegative"));
    }
    if n == 0 {
        return Err(Error::invalid_parameter("n", "must be at least 1"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid_parameter("level", "must lie in (0,1)"));
    }
    let z = normal_quantile(1.0 - (1.0 - level) / 2.0)?;
    let half = z * (vhat / n as f64).sqrt();
    Ok((point - half, point + half))
}
