//! The infeasible proxy estimator feeds the AIPW form the true running
//! means of the potential outcomes. The mean squared gap between the AIPW
//! estimator and the proxy, relative to the proxy's variance, shrinks like
//! log N / N — the estimator inherits the proxy's limit distribution.

use seqdesign::designs::EfronDesign;
use seqdesign::estimators::aipw_estimate;
use seqdesign::experiment::run_experiment;
use seqdesign::population::make_nonadditive_population;
use seqdesign::verification::aipw_proxy_estimate;

fn main() -> seqdesign::Result<()> {
    let design = EfronDesign::new(0.7)?;
    let reps = 500;
    println!("N, E[(aipw - proxy)^2] / Var(proxy)");
    for n in [250usize, 500, 1000, 2000] {
        let pop = make_nonadditive_population(n, 21)?;
        let mut gaps = Vec::with_capacity(reps);
        let mut proxies = Vec::with_capacity(reps);
        for r in 0..reps {
            let trace = run_experiment(&pop, &design, 1000 + r as u64)?;
            let tau_hat = aipw_estimate(&trace)?;
            let psi_hat = aipw_proxy_estimate(&trace, &pop)?;
            gaps.push((tau_hat - psi_hat) * (tau_hat - psi_hat));
            proxies.push(psi_hat);
        }
        let mean_gap = gaps.iter().sum::<f64>() / reps as f64;
        let mean_psi = proxies.iter().sum::<f64>() / reps as f64;
        let var_psi =
            proxies.iter().map(|p| (p - mean_psi) * (p - mean_psi)).sum::<f64>() / reps as f64;
        println!("{n}, {}", mean_gap / var_psi);
    }
    Ok(())
}
