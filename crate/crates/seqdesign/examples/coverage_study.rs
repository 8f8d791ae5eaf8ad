//! A small Monte Carlo coverage study: fixed population, fresh assignments
//! each replication, coverage and mean interval length across nominal
//! levels. Shrunk to run in seconds; raise `n`/`reps` (or use the desk and
//! paper presets) for publication-scale curves.

use seqdesign::montecarlo::{
    run_scenario, DesignSpec, DgpSpec, Limits, PopulationMode, ScenarioConfig, Stability,
};
use seqdesign::variance::EstimatorKind;

fn main() -> seqdesign::Result<()> {
    let config = ScenarioConfig {
        design: DesignSpec::Wei { delta: 0.01 },
        dgp: DgpSpec::Logadditive { c: 2.0 },
        n: 1000,
        reps: 1000,
        levels: vec![0.8, 0.9, 0.95, 0.99],
        estimators: vec![EstimatorKind::Ipw, EstimatorKind::Aipw],
        stability: Stability::Strong,
        limits: Limits::Known,
        population_mode: PopulationMode::Fixed,
        master_seed: 3,
    };
    let curve = run_scenario(&config)?;
    println!("tau = {}, {} replications", curve.tau, curve.reps);
    curve.write_delimited(std::io::stdout().lock())?;
    for s in &curve.point_stats {
        println!(
            "{}: mean point {}, sd {}",
            s.estimator, s.mean_point, s.sd_point
        );
    }
    Ok(())
}
