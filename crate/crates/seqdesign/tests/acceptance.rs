//! End-to-end acceptance gate.
//!
//! Each test prints one `[PASS]`/`[FAIL]` line for its criterion (visible
//! with `cargo test --test acceptance -- --nocapture`), with the detailed
//! sub-checks listed on failure.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use seqdesign::analytics::{
    efron_limits, empirical_chain_distribution, stationary_pmf, total_variation,
};
use seqdesign::designs::{BernoulliDesign, Design, EfronDesign, WeiDesign};
use seqdesign::estimators::{aipw_estimate, ipw_estimate};
use seqdesign::experiment::run_experiment;
use seqdesign::montecarlo::{
    run_scenario, DesignSpec, DgpSpec, Limits, ScenarioConfig,
};
use seqdesign::population::{
    make_additive_population, make_logadditive_population, make_nonadditive_population,
    true_ate, PotentialOutcomes,
};
use seqdesign::variance::{variance_estimate, EstimatorKind};
use seqdesign::verification::{
    aipw_proxy_estimate, enumerate_expectation, ks_p_value, ks_statistic, oracle_variance,
    OracleDesign,
};

/// Collects sub-check failures and emits the criterion's verdict line.
struct Criterion {
    name: &'static str,
    failures: Vec<String>,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(detail());
        }
    }

    fn finish(self) {
        let verdict = if self.failures.is_empty() {
            "PASS"
        } else {
            "FAIL"
        };
        println!("[{verdict}] {}", self.name);
        assert!(
            self.failures.is_empty(),
            "{} failed:\n  {}",
            self.name,
            self.failures.join("\n  ")
        );
    }
}

fn three_designs() -> Vec<(&'static str, Box<dyn Design>)> {
    vec![
        ("wei(0.01)", Box::new(WeiDesign::linear(0.01).unwrap())),
        ("efron(0.7)", Box::new(EfronDesign::new(0.7).unwrap())),
        ("bernoulli(0.5)", Box::new(BernoulliDesign::new(0.5).unwrap())),
    ]
}

#[test]
fn acceptance_01_exact_unbiasedness() {
    let mut c = Criterion::new("criterion 1: exact unbiasedness by path enumeration");
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let designs = three_designs();
    for pop_idx in 0..50 {
        let n = rng.random_range(2..=8);
        let y0: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y1: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let pop = PotentialOutcomes::from_vectors(y0, y1).unwrap();
        let tau = true_ate(&pop);
        type Estimate = fn(&seqdesign::experiment::AssignmentTrace) -> seqdesign::Result<f64>;
        let estimators: [(&str, Estimate); 2] = [("ipw", ipw_estimate), ("aipw", aipw_estimate)];
        for (label, design) in &designs {
            for (est_label, stat) in estimators {
                let e = enumerate_expectation(&pop, design.as_ref(), |t| stat(t).unwrap())
                    .unwrap();
                c.check((e - tau).abs() < 1e-12, || {
                    format!(
                        "pop {pop_idx} (n={n}), {label}, {est_label}: bias {:e}",
                        e - tau
                    )
                });
            }
        }
    }
    c.finish();
}

#[test]
fn acceptance_02_efron_stationary_distribution() {
    let mut c = Criterion::new("criterion 2: Efron imbalance chain stationary law");
    let pmf = stationary_pmf(0.7, 1e-12).unwrap();
    let emp = empirical_chain_distribution(0.7, 1_000_000, 202).unwrap();
    let tv = total_variation(&pmf, &emp);
    c.check(tv < 0.01, || format!("TV distance {tv}"));
    c.check((emp.pi0 - 2.0 / 7.0).abs() < 0.01, || {
        format!("pi0 frequency {} vs 2/7", emp.pi0)
    });
    c.finish();
}

#[test]
fn acceptance_03_efron_limits() {
    let mut c = Criterion::new("criterion 3: Efron weak-stability limits");
    let pop = make_nonadditive_population(100_000, 303).unwrap();
    let design = EfronDesign::new(0.7).unwrap();
    let trace = run_experiment(&pop, &design, 304).unwrap();
    let n = trace.len() as f64;
    let mean_inv_p: f64 = trace.p().iter().map(|p| 1.0 / p).sum::<f64>() / n;
    let mean_inv_q: f64 = trace.p().iter().map(|p| 1.0 / (1.0 - p)).sum::<f64>() / n;
    let mean_p: f64 = trace.p().iter().sum::<f64>() / n;

    let p1star = 0.4401198;
    let p2star = 0.5598802;
    c.check((mean_inv_p - 1.0 / p1star).abs() / (1.0 / p1star) < 0.01, || {
        format!("mean 1/p = {mean_inv_p}, limit {}", 1.0 / p1star)
    });
    c.check(
        (mean_inv_q - 1.0 / (1.0 - p2star)).abs() / (1.0 / (1.0 - p2star)) < 0.01,
        || format!("mean 1/(1-p) = {mean_inv_q}, limit {}", 1.0 / (1.0 - p2star)),
    );
    c.check((mean_p - 0.5).abs() / 0.5 < 0.005, || {
        format!("mean p = {mean_p}")
    });

    let mut eta = 0.55;
    while eta <= 0.951 {
        let l = efron_limits(eta).unwrap();
        c.check((l.p1star + l.p2star - 1.0).abs() < 1e-14, || {
            format!("p1*+p2* != 1 at eta = {eta}")
        });
        eta += 0.05;
    }
    c.finish();
}

#[test]
fn acceptance_04_wei_stability() {
    let mut c = Criterion::new("criterion 4: Wei strong stability at 1/2");
    let pop = make_nonadditive_population(100_000, 404).unwrap();
    let design = WeiDesign::linear(0.01).unwrap();
    let trace = run_experiment(&pop, &design, 405).unwrap();
    let n = trace.len() as f64;
    let mean_p: f64 = trace.p().iter().sum::<f64>() / n;
    let frac_treated = trace.n_treated() as f64 / n;
    c.check((mean_p - 0.5).abs() < 0.01, || format!("mean p = {mean_p}"));
    c.check((frac_treated - 0.5).abs() < 0.01, || {
        format!("treated fraction = {frac_treated}")
    });
    c.finish();
}

fn desk_scenarios() -> Vec<(&'static str, &'static str, ScenarioConfig)> {
    let designs = [
        ("wei", DesignSpec::Wei { delta: 0.01 }),
        ("efron", DesignSpec::Efron { eta: 0.7 }),
    ];
    let dgps = [
        ("logadditive", DgpSpec::Logadditive { c: 2.0 }),
        ("additive", DgpSpec::Additive { tau: 10.0 }),
        ("nonadditive", DgpSpec::Nonadditive),
    ];
    let mut out = Vec::new();
    for (dname, design) in designs {
        for (gname, dgp) in &dgps {
            let mut config = ScenarioConfig::desk(design, dgp.clone(), 505);
            // The paper's 20-point grid does not contain 0.95 exactly;
            // splice it in so the 0.95 coverage check reads an exact cell.
            let idx = config.levels.partition_point(|&l| l < 0.95);
            config.levels.insert(idx, 0.95);
            out.push((dname, *gname, config));
        }
    }
    out
}

#[test]
fn acceptance_05_and_06_coverage_and_length() {
    let mut cov = Criterion::new("criterion 5: coverage reproduction at desk scale");
    let mut len = Criterion::new("criterion 6: AIPW intervals shorter at all levels");
    for (design, dgp, config) in desk_scenarios() {
        let curve = run_scenario(&config).unwrap();
        let level = 0.95;
        let ipw = curve.cell(EstimatorKind::Ipw, level).unwrap().coverage;
        let aipw = curve.cell(EstimatorKind::Aipw, level).unwrap().coverage;
        match dgp {
            "logadditive" => c05_band(&mut cov, design, dgp, "ipw", ipw),
            "additive" => c05_band(&mut cov, design, dgp, "aipw", aipw),
            _ => {
                cov.check(ipw >= 0.94, || {
                    format!("{design}/{dgp}/ipw coverage {ipw} < 0.94")
                });
                cov.check(aipw >= 0.94, || {
                    format!("{design}/{dgp}/aipw coverage {aipw} < 0.94")
                });
            }
        }
        for l in &config.levels {
            let row_i = curve.cell(EstimatorKind::Ipw, *l).unwrap();
            let row_a = curve.cell(EstimatorKind::Aipw, *l).unwrap();
            len.check(row_a.mean_length < row_i.mean_length, || {
                format!(
                    "{design}/{dgp} level {l}: aipw length {} >= ipw length {}",
                    row_a.mean_length, row_i.mean_length
                )
            });
        }
    }
    cov.finish();
    len.finish();
}

fn c05_band(c: &mut Criterion, design: &str, dgp: &str, est: &str, coverage: f64) {
    c.check((0.935..=0.965).contains(&coverage), || {
        format!("{design}/{dgp}/{est} coverage {coverage} outside [0.935, 0.965]")
    });
}

#[test]
fn acceptance_07_clt_shape() {
    let mut c = Criterion::new("criterion 7: KS normality of standardized estimates");
    let n = 2000;
    let reps = 2000;
    let pop = make_nonadditive_population(n, 707).unwrap();
    let tau = true_ate(&pop);
    let cases: Vec<(&str, Box<dyn Design>, OracleDesign)> = vec![
        (
            "wei",
            Box::new(WeiDesign::linear(0.01).unwrap()),
            OracleDesign::Wei,
        ),
        (
            "efron",
            Box::new(EfronDesign::new(0.7).unwrap()),
            OracleDesign::Efron { eta: 0.7 },
        ),
    ];
    for (label, design, oracle) in cases {
        let (v_ipw, v_aipw) = oracle_variance(&pop, oracle).unwrap();
        let mut z_ipw = Vec::with_capacity(reps);
        let mut z_aipw = Vec::with_capacity(reps);
        for r in 0..reps {
            let trace = run_experiment(&pop, design.as_ref(), 7_000 + r as u64).unwrap();
            let scale = (n as f64).sqrt();
            z_ipw.push(scale * (ipw_estimate(&trace).unwrap() - tau) / v_ipw.sqrt());
            z_aipw.push(scale * (aipw_estimate(&trace).unwrap() - tau) / v_aipw.sqrt());
        }
        for (est, z) in [("ipw", z_ipw), ("aipw", z_aipw)] {
            let d = ks_statistic(&z, seqdesign::variance::normal_cdf).unwrap();
            let p = ks_p_value(d, reps);
            c.check(p > 0.01, || {
                format!("{label}/{est}: KS statistic {d}, p-value {p}")
            });
        }
    }
    c.finish();
}

#[test]
fn acceptance_08_variance_consistency() {
    let mut c = Criterion::new("criterion 8: variance estimator consistency/conservativeness");
    let n = 4000;
    let reps = 500;
    let designs = [
        ("wei", DesignSpec::Wei { delta: 0.01 }, OracleDesign::Wei),
        (
            "efron",
            DesignSpec::Efron { eta: 0.7 },
            OracleDesign::Efron { eta: 0.7 },
        ),
    ];
    let dgps: [(&str, Box<dyn Fn() -> PotentialOutcomes>); 3] = [
        (
            "logadditive",
            Box::new(move || make_logadditive_population(n, 2.0, 808).unwrap()),
        ),
        // The AIPW residual moments carry an O(m1^2 log N / N) transient
        // from the inverse-propensity running means, so a consistency gate
        // at 5% needs a treated arm whose mean is O(1); tau = 1 keeps the
        // transient three orders of magnitude below the tolerance while
        // still exercising the additive regime.
        (
            "additive",
            Box::new(move || make_additive_population(n, 1.0, 809).unwrap()),
        ),
        (
            "nonadditive",
            Box::new(move || make_nonadditive_population(n, 810).unwrap()),
        ),
    ];
    for (dname, spec, oracle) in designs {
        let design = spec.build().unwrap();
        let regime = spec
            .resolve_regime(spec.natural_stability(), Limits::Known)
            .unwrap();
        for (gname, make) in &dgps {
            let pop = make();
            let (v_ipw, v_aipw) = oracle_variance(&pop, oracle).unwrap();
            let mut vhat_ipw = Vec::with_capacity(reps);
            let mut vhat_aipw = Vec::with_capacity(reps);
            for r in 0..reps {
                let trace =
                    run_experiment(&pop, design.as_ref(), 80_000 + r as u64).unwrap();
                vhat_ipw
                    .push(variance_estimate(&trace, EstimatorKind::Ipw, regime).unwrap());
                vhat_aipw
                    .push(variance_estimate(&trace, EstimatorKind::Aipw, regime).unwrap());
            }
            match *gname {
                "logadditive" => {
                    let err = median(
                        vhat_ipw.iter().map(|v| (v / v_ipw - 1.0).abs()).collect(),
                    );
                    c.check(err < 0.05, || {
                        format!("{dname}/logadditive ipw median relative error {err}")
                    });
                }
                "additive" => {
                    let err = median(
                        vhat_aipw.iter().map(|v| (v / v_aipw - 1.0).abs()).collect(),
                    );
                    c.check(err < 0.05, || {
                        format!("{dname}/additive aipw median relative error {err}")
                    });
                }
                _ => {
                    for (est, vhats, v) in [
                        ("ipw", &vhat_ipw, v_ipw),
                        ("aipw", &vhat_aipw, v_aipw),
                    ] {
                        let med = median(vhats.iter().map(|x| x - v).collect());
                        c.check(med >= -0.05 * v, || {
                            format!(
                                "{dname}/nonadditive {est} median(vhat - v) = {med}, \
                                 oracle {v}"
                            )
                        });
                    }
                }
            }
        }
    }
    c.finish();
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    }
}

#[test]
fn acceptance_09_hajek_negligibility() {
    let mut c = Criterion::new("criterion 9: proxy-estimator gap negligible");
    let reps = 1000;
    let design = EfronDesign::new(0.7).unwrap();
    // ratio_r = MC mean of (tau_hat - psi_hat)^2 over MC variance of
    // psi_hat; the MC standard error tracks only the numerator (the
    // denominator is orders of magnitude better determined).
    let mut results = Vec::new();
    for (i, n) in [500usize, 1000, 2000, 4000].into_iter().enumerate() {
        let pop = make_nonadditive_population(n, 900 + i as u64).unwrap();
        let mut sq_diffs = Vec::with_capacity(reps);
        let mut proxies = Vec::with_capacity(reps);
        for r in 0..reps {
            let trace =
                run_experiment(&pop, &design, 90_000 + r as u64).unwrap();
            let tau_hat = aipw_estimate(&trace).unwrap();
            let psi_hat = aipw_proxy_estimate(&trace, &pop).unwrap();
            sq_diffs.push((tau_hat - psi_hat) * (tau_hat - psi_hat));
            proxies.push(psi_hat);
        }
        let mean_sq = mean(&sq_diffs);
        let var_psi = variance(&proxies);
        let se = (variance(&sq_diffs) / reps as f64).sqrt() / var_psi;
        results.push((n, mean_sq / var_psi, se));
    }
    for w in results.windows(2) {
        let (n0, r0, se0) = w[0];
        let (n1, r1, se1) = w[1];
        let slack = 2.0 * (se0 * se0 + se1 * se1).sqrt();
        c.check(r1 <= r0 + slack, || {
            format!("ratio rose from {r0} (N={n0}) to {r1} (N={n1}), slack {slack}")
        });
    }
    let (_, last, _) = results[3];
    c.check(last < 0.05, || format!("ratio at N=4000 is {last}"));
    c.finish();
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

#[test]
fn acceptance_10_worker_determinism() {
    let mut c = Criterion::new("criterion 10: byte-identical output across worker counts");
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_seqdesign");
    let mut outputs = Vec::new();
    for workers in ["1", "8"] {
        let out = dir.path().join(format!("w{workers}"));
        let status = std::process::Command::new(bin)
            .args([
                "run",
                "--design",
                "efron",
                "--dgp",
                "nonadditive",
                "--n",
                "300",
                "--reps",
                "400",
                "--seed",
                "10",
                "--workers",
                workers,
                "--out",
            ])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        let coverage = std::fs::read(out.join("coverage.csv")).unwrap();
        // The summary embeds the wall-clock runtime; everything else must
        // agree bytewise.
        let summary: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
        let mut summary = summary;
        summary.as_object_mut().unwrap().remove("runtime_seconds");
        outputs.push((coverage, summary.to_string()));
    }
    c.check(outputs[0].0 == outputs[1].0, || {
        "coverage.csv differs between 1 and 8 workers".into()
    });
    c.check(outputs[0].1 == outputs[1].1, || {
        "summary.json (runtime removed) differs between 1 and 8 workers".into()
    });
    c.finish();
}
