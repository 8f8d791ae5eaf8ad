//! Closed-form design analytics for Efron's biased coin: weak-stability
//! limits, the stationary law of the imbalance chain (verified against a
//! simulated chain), and limiting variances for a concrete population.

use seqdesign::analytics::{
    efron_limits, efron_variances, empirical_chain_distribution, stationary_pmf,
    total_variation, wei_variances, CrossMode,
};
use seqdesign::population::{make_nonadditive_population, population_moments};

fn main() -> seqdesign::Result<()> {
    let eta = 0.7;
    let limits = efron_limits(eta)?;
    println!("Efron(eta = {eta}) weak-stability limits:");
    println!("  p1star = {}", limits.p1star);
    println!("  p2star = {}", limits.p2star);
    println!("  ptilde = {}", limits.ptilde);

    let pmf = stationary_pmf(eta, 1e-10)?;
    println!("stationary imbalance law: pi(0) = {}, pi(+-1) = {}", pmf.pi0, pmf.prob(1));
    let emp = empirical_chain_distribution(eta, 500_000, 1)?;
    println!(
        "TV distance to a 5*10^5-step simulated chain: {}",
        total_variation(&pmf, &emp)
    );

    let pop = make_nonadditive_population(5000, 9)?;
    let m = population_moments(&pop);
    let (wei_ipw, wei_aipw) = wei_variances(&m, CrossMode::Oracle);
    let (efron_ipw, efron_aipw) = efron_variances(&m, eta, CrossMode::Oracle)?;
    println!("limiting variances on a non-additive population:");
    println!("  Wei:   IPW {wei_ipw}, AIPW {wei_aipw}");
    println!("  Efron: IPW {efron_ipw}, AIPW {efron_aipw}");
    let (bound_ipw, bound_aipw) = wei_variances(&m, CrossMode::CauchySchwarz);
    println!("  Wei with the identifiable Cauchy-Schwarz bound: IPW {bound_ipw}, AIPW {bound_aipw}");
    Ok(())
}
