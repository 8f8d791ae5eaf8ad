//! Exact verification oracles.
//!
//! For small populations every assignment path can be enumerated, so
//! design expectations are computable to machine precision with no Monte
//! Carlo error. This module also provides the infeasible proxy estimator
//! (the AIPW form fed the true running means of the potential outcomes)
//! and a Kolmogorov-Smirnov helper for normality checks.

use crate::analytics::{efron_variances, wei_variances, CrossMode};
use crate::designs::{Design, DesignState};
use crate::error::{Error, Result};
use crate::estimators::aipw_estimate_with_means;
use crate::experiment::AssignmentTrace;
use crate::population::{population_moments, PotentialOutcomes};

/// Largest population size accepted by the exact enumerator (2^20 paths).
pub const MAX_ENUMERATION_SIZE: usize = 20;

/// Exact design expectation of `statistic` over all 2^N assignment paths,
/// weighting each path by its probability under `design`.
pub fn enumerate_expectation<F>(
    pop: &PotentialOutcomes,
    design: &dyn Design,
    statistic: F,
) -> Result<f64>
where
    F: Fn(&AssignmentTrace) -> f64,
{
    let n = pop.len();
    if n > MAX_ENUMERATION_SIZE {
        return Err(Error::EnumerationTooLarge {
            max: MAX_ENUMERATION_SIZE,
            got: n,
        });
    }
    let mut p = Vec::with_capacity(n);
    let mut k = Vec::with_capacity(n);
    let mut y_obs = Vec::with_capacity(n);
    let mut state = DesignState::new();
    descend(
        pop,
        design,
        &statistic,
        &mut state,
        &mut p,
        &mut k,
        &mut y_obs,
        1.0,
    )
}

#[allow(clippy::too_many_arguments)]
fn descend<F>(
    pop: &PotentialOutcomes,
    design: &dyn Design,
    statistic: &F,
    state: &mut DesignState,
    p: &mut Vec<f64>,
    k: &mut Vec<u8>,
    y_obs: &mut Vec<f64>,
    path_prob: f64,
) -> Result<f64>
where
    F: Fn(&AssignmentTrace) -> f64,
{
    let i = p.len();
    if i == pop.len() {
        let trace = AssignmentTrace::new(p.clone(), k.clone(), y_obs.clone())?;
        return Ok(path_prob * statistic(&trace));
    }
    let prob = design.next_probability(state)?;
    let mut total = 0.0;
    for arm in [1u8, 0u8] {
        let branch_prob = if arm == 1 { prob } else { 1.0 - prob };
        let y = pop.observed(i, arm);
        p.push(prob);
        k.push(arm);
        y_obs.push(y);
        state.push(arm, y);
        total += descend(
            pop,
            design,
            statistic,
            state,
            p,
            k,
            y_obs,
            path_prob * branch_prob,
        )?;
        state.pop();
        p.pop();
        k.pop();
        y_obs.pop();
    }
    Ok(total)
}

/// The infeasible proxy: the AIPW form with the true running means
/// Ybar_{i-1}(l) = (1/(i-1)) sum_{j<i} Y_j(l) in place of the estimated
/// ones (Ybar_0 := 0). Requires both potential outcomes, so it exists
/// only inside simulations.
pub fn aipw_proxy_estimate(trace: &AssignmentTrace, pop: &PotentialOutcomes) -> Result<f64> {
    trace.check_against(pop)?;
    let n = trace.len();
    let mut ybar0 = vec![0.0; n];
    let mut ybar1 = vec![0.0; n];
    let (mut sum0, mut sum1) = (0.0, 0.0);
    for i in 1..n {
        sum0 += pop.y0()[i - 1];
        sum1 += pop.y1()[i - 1];
        ybar0[i] = sum0 / i as f64;
        ybar1[i] = sum1 / i as f64;
    }
    aipw_estimate_with_means(trace, &ybar0, &ybar1)
}

/// Which design a closed-form limiting variance refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleDesign {
    Wei,
    Efron { eta: f64 },
}

/// Limiting variances (v_ipw, v_aipw) of sqrt(N) (estimate - ATE),
/// computed from the true finite-population moments and the design's
/// closed-form probability limits.
pub fn oracle_variance(pop: &PotentialOutcomes, design: OracleDesign) -> Result<(f64, f64)> {
    let moments = population_moments(pop);
    match design {
        OracleDesign::Wei => Ok(wei_variances(&moments, CrossMode::Oracle)),
        OracleDesign::Efron { eta } => efron_variances(&moments, eta, CrossMode::Oracle),
    }
}

/// One-sample Kolmogorov-Smirnov statistic sup_x |F_n(x) - F(x)| against
/// the cdf `f`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], f: F) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::invalid_parameter("sample", "must be nonempty"));
    }
    let mut sorted = sample.to_vec();
    if sorted.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid_parameter("sample", "must be finite"));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let cdf = f(*x);
        d = d.max(((i + 1) as f64 / n - cdf).abs());
        d = d.max((cdf - i as f64 / n).abs());
    }
    Ok(d)
}

/// Asymptotic Kolmogorov p-value P(sup |B(F(x))| > sqrt(n) d) via the
/// alternating series 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 n d^2).
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let t = (n as f64).sqrt() * d;
    if t <= 0.0 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-2.0 * (k as f64) * (k as f64) * t * t).exp();
        p += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::{BernoulliDesign, EfronDesign, WeiDesign};
    use crate::estimators::{aipw_estimate, ipw_estimate};
    use crate::population::{make_nonadditive_population, true_ate};
    use crate::variance::normal_cdf;

    #[test]
    fn enumeration_total_probability_is_one() {
        let pop = make_nonadditive_population(8, 5).unwrap();
        for design in [
            Box::new(EfronDesign::new(0.7).unwrap()) as Box<dyn crate::designs::Design>,
            Box::new(WeiDesign::linear(0.01).unwrap()),
            Box::new(BernoulliDesign::new(0.3).unwrap()),
        ] {
            let total = enumerate_expectation(&pop, design.as_ref(), |_| 1.0).unwrap();
            assert!((total - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn ipw_is_exactly_unbiased() {
        let pop = make_nonadditive_population(10, 11).unwrap();
        let tau = true_ate(&pop);
        for design in [
            Box::new(EfronDesign::new(0.7).unwrap()) as Box<dyn crate::designs::Design>,
            Box::new(WeiDesign::linear(0.01).unwrap()),
        ] {
            let e = enumerate_expectation(&pop, design.as_ref(), |t| {
                ipw_estimate(t).unwrap()
            })
            .unwrap();
            assert!((e - tau).abs() < 1e-12, "bias {}", e - tau);
        }
    }

    #[test]
    fn aipw_is_exactly_unbiased() {
        let pop = make_nonadditive_population(10, 11).unwrap();
        let tau = true_ate(&pop);
        let design = EfronDesign::new(0.7).unwrap();
        let e = enumerate_expectation(&pop, &design, |t| aipw_estimate(t).unwrap()).unwrap();
        assert!((e - tau).abs() < 1e-12);
    }

    #[test]
    fn proxy_is_exactly_unbiased() {
        let pop = make_nonadditive_population(9, 3).unwrap();
        let tau = true_ate(&pop);
        let design = EfronDesign::new(0.7).unwrap();
        let e = enumerate_expectation(&pop, &design, |t| {
            aipw_proxy_estimate(t, &pop).unwrap()
        })
        .unwrap();
        assert!((e - tau).abs() < 1e-12);
    }

    #[test]
    fn enumeration_matches_binomial_mean() {
        // Under Bernoulli(p) the number treated is Binomial(N, p).
        let pop = PotentialOutcomes::from_vectors(vec![0.0; 6], vec![0.0; 6]).unwrap();
        let design = BernoulliDesign::new(0.3).unwrap();
        let mean =
            enumerate_expectation(&pop, &design, |t| t.n_treated() as f64).unwrap();
        assert!((mean - 6.0 * 0.3).abs() < 1e-13);
        let second = enumerate_expectation(&pop, &design, |t| {
            (t.n_treated() as f64).powi(2)
        })
        .unwrap();
        // Var = N p (1-p).
        assert!((second - mean * mean - 6.0 * 0.3 * 0.7).abs() < 1e-13);
    }

    #[test]
    fn enumeration_size_cap() {
        let pop = make_nonadditive_population(21, 0).unwrap();
        let design = EfronDesign::new(0.7).unwrap();
        let err = enumerate_expectation(&pop, &design, |_| 1.0).unwrap_err();
        assert!(matches!(err, Error::EnumerationTooLarge { max: 20, got: 21 }));
    }

    #[test]
    fn proxy_two_units_hand_value() {
        // N = 2, Ybar_0 = 0 and Ybar_1(l) = Y_1(l): with y0 = (1, 2),
        // y1 = (3, 5), p = (0.5, 0.5), k = (1, 0):
        //   i=1: {(3 - 0)/0.5 + 0} - {0} = 6
        //   i=2: {Ybar_1(1)} - {(2 - Ybar_1(0))/0.5 + Ybar_1(0)}
        //      = 3 - ((2 - 1)/0.5 + 1) = 0
        // estimate = (6 + 0)/2 = 3.
        let pop = PotentialOutcomes::from_vectors(vec![1.0, 2.0], vec![3.0, 5.0]).unwrap();
        let trace =
            AssignmentTrace::new(vec![0.5, 0.5], vec![1, 0], vec![3.0, 2.0]).unwrap();
        let est = aipw_proxy_estimate(&trace, &pop).unwrap();
        assert!((est - 3.0).abs() < 1e-14);
    }

    #[test]
    fn proxy_rejects_mismatched_population() {
        let pop = PotentialOutcomes::from_vectors(vec![1.0], vec![2.0]).unwrap();
        let trace =
            AssignmentTrace::new(vec![0.5, 0.5], vec![1, 0], vec![2.0, 1.0]).unwrap();
        assert!(aipw_proxy_estimate(&trace, &pop).is_err());
    }

    #[test]
    fn oracle_variance_dispatch() {
        let pop = PotentialOutcomes::from_vectors(vec![1.0, 2.0], vec![3.0, 5.0]).unwrap();
        let (v_ipw, v_aipw) = oracle_variance(&pop, OracleDesign::Wei).unwrap();
        assert!((v_ipw - 32.5).abs() < 1e-12);
        assert!((v_aipw - 2.25).abs() < 1e-12);
        let factor = 0.748 / 0.588;
        let (v_ipw_e, _) = oracle_variance(&pop, OracleDesign::Efron { eta: 0.7 }).unwrap();
        assert!((v_ipw_e - (19.5 * factor + 13.0)).abs() < 1e-10);
    }

    #[test]
    fn ks_statistic_hand_values() {
        // Single observation at the median of U(0,1): F_n jumps 0 -> 1 at
        // 0.5, so D = 0.5.
        let d = ks_statistic(&[0.5], |x| x).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        // Perfectly placed uniform grid: D = 1/(2n).
        let n = 10;
        let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&grid, |x| x).unwrap();
        assert!((d - 0.05).abs() < 1e-15);
    }

    #[test]
    fn ks_accepts_true_normals_rejects_shifted() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let sample: Vec<f64> = (0..4000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let d = ks_statistic(&sample, normal_cdf).unwrap();
        assert!(ks_p_value(d, sample.len()) > 0.01);

        let shifted: Vec<f64> = sample.iter().map(|x| x + 0.25).collect();
        let d = ks_statistic(&shifted, normal_cdf).unwrap();
        assert!(ks_p_value(d, shifted.len()) < 0.01);
    }

    #[test]
    fn ks_p_value_reference_point() {
        // Kolmogorov distribution: P(K > 1.36) is about 0.049.
        let p = ks_p_value(1.36, 1);
        assert!((p - 0.049).abs() < 0.002);
    }
}
