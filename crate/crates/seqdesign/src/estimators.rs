//! Point estimators of the ATE from an assignment trace.
//!
//! Both estimators consume only the observable trace (p, k, y_obs), never
//! the unobserved potential outcome. The AIPW estimator augments the IPW
//! terms with running inverse-propensity-weighted means of past observed
//! outcomes, computed in a single left-to-right pass.

use crate::error::{Error, Result};
use crate::experiment::AssignmentTrace;

/// Running inverse-propensity-weighted means of past observed outcomes.
///
/// Position `i` (0-based) holds the estimate available just before unit
/// `i + 1` is assigned. The first two positions are zero: no history exists
/// before unit 1, and the estimate before unit 2 is defined as zero as well,
/// so the averaging formula takes over from the third unit on.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMeans {
    pub yhat0: Vec<f64>,
    pub yhat1: Vec<f64>,
}

/// Computes the running weighted means for every prefix of the trace.
pub fn running_means(trace: &AssignmentTrace) -> Result<RunningMeans> {
    let n = trace.len();
    let p = trace.p();
    let k = trace.k();
    let y = trace.y_obs();
    let mut yhat0 = vec![0.0; n];
    let mut yhat1 = vec![0.0; n];
    let mut sum0 = 0.0;
    let mut sum1 = 0.0;
    for i in 0..n {
        if i >= 2 {
            yhat0[i] = sum0 / i as f64;
            yhat1[i] = sum1 / i as f64;
        }
        if !(p[i] > 0.0 && p[i] < 1.0) {
            return Err(Error::DegenerateProbability {
                index: i,
                value: p[i],
            });
        }
        if k[i] == 1 {
            sum1 += y[i] / p[i];
        } else {
            sum0 += y[i] / (1.0 - p[i]);
        }
    }
    Ok(RunningMeans { yhat0, yhat1 })
}

/// Horvitz-Thompson / IPW estimate of the ATE.
pub fn ipw_estimate(trace: &AssignmentTrace) -> Result<f64> {
    let n = trace.len() as f64;
    let mut sum = 0.0;
    for ((&pi, &ki), &yi) in trace.p().iter().zip(trace.k()).zip(trace.y_obs()) {
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::DegenerateProbability {
                index: 0,
                value: pi,
            });
        }
        sum += if ki == 1 { yi / pi } else { -yi / (1.0 - pi) };
    }
    Ok(sum / n)
}

/// AIPW estimate of the ATE with running-mean augmentation; single pass.
pub fn aipw_estimate(trace: &AssignmentTrace) -> Result<f64> {
    let means = running_means(trace)?;
    aipw_estimate_with_means(trace, &means.yhat0, &means.yhat1)
}

/// AIPW form evaluated with caller-supplied per-unit augmentation means.
/// The verification module reuses this with true running means.
pub(crate) fn aipw_estimate_with_means(
    trace: &AssignmentTrace,
    yhat0: &[f64],
    yhat1: &[f64],
) -> Result<f64> {
    let n = trace.len() as f64;
    let mut sum = 0.0;
    for i in 0..trace.len() {
        let (pi, ki, yi) = (trace.p()[i], trace.k()[i], trace.y_obs()[i]);
        let treatment = if ki == 1 {
            (yi - yhat1[i]) / pi + yhat1[i]
        } else {
            yhat1[i]
        };
        let control = if ki == 0 {
            (yi - yhat0[i]) / (1.0 - pi) + yhat0[i]
        } else {
            yhat0[i]
        };
        sum += treatment - control;
    }
    Ok(sum / n)
}
