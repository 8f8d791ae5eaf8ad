//! Randomized property tests for the estimator and variance invariants.

use proptest::prelude::*;

use seqdesign::designs::{BernoulliDesign, EfronDesign};
use seqdesign::estimators::{aipw_estimate, ipw_estimate, running_means};
use seqdesign::experiment::{run_experiment, AssignmentTrace};
use seqdesign::population::{true_ate, PotentialOutcomes};
use seqdesign::variance::{
    confidence_interval, variance_estimate, EstimatorKind, StabilityRegime,
};
use seqdesign::verification::enumerate_expectation;

fn outcome() -> impl Strategy<Value = f64> {
    -10.0..10.0
}

fn small_population() -> impl Strategy<Value = PotentialOutcomes> {
    (1usize..=6).prop_flat_map(|n| {
        (
            prop::collection::vec(outcome(), n),
            prop::collection::vec(outcome(), n),
        )
            .prop_map(|(y0, y1)| PotentialOutcomes::from_vectors(y0, y1).unwrap())
    })
}

fn trace() -> impl Strategy<Value = AssignmentTrace> {
    (2usize..=40).prop_flat_map(|n| {
        (
            prop::collection::vec(0.05..0.95f64, n),
            prop::collection::vec(0u8..=1, n),
            prop::collection::vec(outcome(), n),
        )
            .prop_map(|(p, k, y)| AssignmentTrace::new(p, k, y).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Exact unbiasedness of both estimators under arbitrary populations
    // and a non-trivial design, by full path enumeration.
    #[test]
    fn estimators_unbiased_under_enumeration(
        pop in small_population(),
        p in 0.1..0.9f64,
    ) {
        let tau = true_ate(&pop);
        let bernoulli = BernoulliDesign::new(p).unwrap();
        let efron = EfronDesign::new(0.7).unwrap();
        let e = enumerate_expectation(&pop, &bernoulli, |t| ipw_estimate(t).unwrap()).unwrap();
        prop_assert!((e - tau).abs() < 1e-10);
        let e = enumerate_expectation(&pop, &efron, |t| aipw_estimate(t).unwrap()).unwrap();
        prop_assert!((e - tau).abs() < 1e-10);
    }

    // The first two running-mean positions are zero by convention, and
    // every variance estimate is nonnegative with nested intervals
    // containing the point estimate.
    #[test]
    fn variance_and_interval_invariants(t in trace()) {
        let means = running_means(&t).unwrap();
        prop_assert_eq!(means.yhat0[0], 0.0);
        prop_assert_eq!(means.yhat1[0], 0.0);
        if t.len() > 1 {
            prop_assert_eq!(means.yhat0[1], 0.0);
            prop_assert_eq!(means.yhat1[1], 0.0);
        }

        for estimator in [EstimatorKind::Ipw, EstimatorKind::Aipw] {
            let point = match estimator {
                EstimatorKind::Ipw => ipw_estimate(&t).unwrap(),
                EstimatorKind::Aipw => aipw_estimate(&t).unwrap(),
            };
            for regime in [
                StabilityRegime::StrongKnown { pstar: 0.5 },
                StabilityRegime::StrongEstimated,
                StabilityRegime::WeakKnown { p1star: 0.45, p2star: 0.55, ptilde: 0.5 },
                StabilityRegime::WeakEstimated,
            ] {
                let vhat = variance_estimate(&t, estimator, regime).unwrap();
                prop_assert!(vhat >= 0.0, "negative variance {vhat} under {regime:?}");
                let (lo90, hi90) = confidence_interval(point, vhat, t.len(), 0.9).unwrap();
                let (lo99, hi99) = confidence_interval(point, vhat, t.len(), 0.99).unwrap();
                prop_assert!(lo90 <= point && point <= hi90);
                prop_assert!(lo99 <= lo90 && hi90 <= hi99);
            }
        }
    }

    // Reproducibility: the same seed yields the same trace; treated units
    // always reveal y1 and controls y0.
    #[test]
    fn experiments_deterministic_and_consistent(
        pop in small_population(),
        seed in any::<u64>(),
    ) {
        let design = EfronDesign::new(0.7).unwrap();
        let a = run_experiment(&pop, &design, seed).unwrap();
        let b = run_experiment(&pop, &design, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.check_against(&pop).is_ok());
    }
}
