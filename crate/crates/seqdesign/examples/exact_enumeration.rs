//! Exact unbiasedness: with at most 20 units, every assignment path can be
//! enumerated, so design expectations are computed with no Monte Carlo
//! error. Both estimators are unbiased to machine precision under every
//! sequential design.

use seqdesign::designs::{BernoulliDesign, Design, EfronDesign, WeiDesign};
use seqdesign::estimators::{aipw_estimate, ipw_estimate};
use seqdesign::population::{make_nonadditive_population, true_ate};
use seqdesign::verification::enumerate_expectation;

fn main() -> seqdesign::Result<()> {
    let pop = make_nonadditive_population(10, 5)?;
    let tau = true_ate(&pop);
    println!("true ATE over 10 units: {tau}");

    let designs: Vec<(&str, Box<dyn Design>)> = vec![
        ("Wei(delta = 0.01)", Box::new(WeiDesign::linear(0.01)?)),
        ("Efron(eta = 0.7)", Box::new(EfronDesign::new(0.7)?)),
        ("Bernoulli(p = 0.3)", Box::new(BernoulliDesign::new(0.3)?)),
    ];
    for (name, design) in designs {
        let e_ipw =
            enumerate_expectation(&pop, design.as_ref(), |t| ipw_estimate(t).unwrap())?;
        let e_aipw =
            enumerate_expectation(&pop, design.as_ref(), |t| aipw_estimate(t).unwrap())?;
        println!(
            "{name}: E[IPW] - tau = {:e}, E[AIPW] - tau = {:e}",
            e_ipw - tau,
            e_aipw - tau
        );
    }
    Ok(())
}
