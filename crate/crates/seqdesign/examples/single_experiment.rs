//! Run one adaptively randomized experiment end to end: draw a population,
//! assign treatments with Efron's biased coin, and report IPW and AIPW
//! point estimates with conservative confidence intervals.

use seqdesign::designs::EfronDesign;
use seqdesign::experiment::run_experiment;
use seqdesign::montecarlo::{DesignSpec, Limits, Stability};
use seqdesign::population::{make_nonadditive_population, true_ate};
use seqdesign::variance::{variance_estimate, EstimatorKind, InferenceReport};

fn main() -> seqdesign::Result<()> {
    let pop = make_nonadditive_population(2000, 7)?;
    println!("true ATE: {}", true_ate(&pop));

    let design = EfronDesign::new(0.7)?;
    let trace = run_experiment(&pop, &design, 42)?;
    println!(
        "assigned {} of {} units to treatment",
        trace.n_treated(),
        trace.len()
    );

    // Efron's design is weakly stable; use its closed-form limits.
    let regime = DesignSpec::Efron { eta: 0.7 }.resolve_regime(Stability::Weak, Limits::Known)?;
    let levels = [0.9, 0.95, 0.99];
    for estimator in [EstimatorKind::Ipw, EstimatorKind::Aipw] {
        let point = match estimator {
            EstimatorKind::Ipw => seqdesign::estimators::ipw_estimate(&trace)?,
            EstimatorKind::Aipw => seqdesign::estimators::aipw_estimate(&trace)?,
        };
        let vhat = variance_estimate(&trace, estimator, regime)?;
        let report = InferenceReport::build(estimator, point, vhat, trace.len(), &levels)?;
        report.write_delimited(std::io::stdout().lock())?;
    }
    Ok(())
}
