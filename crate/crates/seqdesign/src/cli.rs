//! Command-line front end.
//!
//! A thin shell over the library: `run` executes one Monte Carlo scenario,
//! `analytics` prints closed-form design quantities, `enumerate` runs the
//! exact-expectation oracle on a small population file, and
//! `replicate-paper` regenerates the six coverage/length scenarios (two
//! designs by three data-generating processes) as data tables.
//!
//! Exit codes: 0 on success, 2 on usage or configuration errors, 3 on
//! runtime errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analytics::{
    efron_limits, efron_variance_factor, efron_variances, stationary_pmf, wei_variances,
    CrossMode,
};
use crate::error::{Error, Result};
use crate::montecarlo::{
    level_grid, run_scenario, run_scenario_with_workers, CoverageCurve, DesignSpec, DgpSpec,
    Limits, PopulationMode, ScenarioConfig, Stability,
};
use crate::population::{population_moments, true_ate, PotentialOutcomes};
use crate::variance::EstimatorKind;
use crate::verification::enumerate_expectation;

/// Environment variable supplying the default worker count.
pub const WORKERS_ENV: &str = "SEQDESIGN_WORKERS";

#[derive(Parser)]
#[command(
    name = "seqdesign",
    version,
    about = "Finite-population ATE estimation under adaptive Bernoulli assignment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one Monte Carlo coverage scenario.
    Run(RunArgs),
    /// Print closed-form design limits, the stationary imbalance pmf, and
    /// limiting variances.
    Analytics(AnalyticsArgs),
    /// Exact design expectation of an estimator over all assignment paths.
    Enumerate(EnumerateArgs),
    /// Regenerate the six coverage/length scenarios as data tables.
    ReplicatePaper(ReplicatePaperArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DesignArg {
    Wei,
    Efron,
    Bernoulli,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DgpArg {
    Nonadditive,
    Additive,
    Logadditive,
    File,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorArg {
    Ipw,
    Aipw,
    Both,
}

impl EstimatorArg {
    fn kinds(self) -> Vec<EstimatorKind> {
        match self {
            EstimatorArg::Ipw => vec![EstimatorKind::Ipw],
            EstimatorArg::Aipw => vec![EstimatorKind::Aipw],
            EstimatorArg::Both => vec![EstimatorKind::Ipw, EstimatorKind::Aipw],
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StabilityArg {
    Strong,
    Weak,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LimitsArg {
    Known,
    Estimated,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PopulationModeArg {
    Fixed,
    Redraw,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PresetArg {
    Desk,
    Paper,
}

#[derive(Args)]
struct RunArgs {
    /// JSON scenario config; any flag below overrides the file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    design: Option<DesignArg>,
    /// Efron bias parameter.
    #[arg(long)]
    eta: Option<f64>,
    /// Wei truncation parameter.
    #[arg(long)]
    delta: Option<f64>,
    /// Bernoulli inclusion probability.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, value_enum)]
    dgp: Option<DgpArg>,
    /// Additive treatment effect (additive dgp).
    #[arg(long)]
    tau: Option<f64>,
    /// Multiplicative treatment effect (log-additive dgp).
    #[arg(long)]
    c: Option<f64>,
    /// Population CSV for `--dgp file`.
    #[arg(long)]
    pop: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    /// Nominal level grid `start:stop:count`, endpoints inclusive.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    #[arg(long, value_enum)]
    stability: Option<StabilityArg>,
    #[arg(long, value_enum)]
    limits: Option<LimitsArg>,
    #[arg(long, value_enum)]
    population_mode: Option<PopulationModeArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to $SEQDESIGN_WORKERS, then all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory for coverage.csv and summary.json; stdout if
    /// absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyticsArgs {
    /// Efron bias parameter for the closed forms.
    #[arg(long, default_value_t = 0.7)]
    efron_eta: f64,
    /// Truncate the stationary pmf once the tail mass falls below this.
    #[arg(long, default_value_t = 1e-10)]
    tail_tol: f64,
    /// Optional population CSV; prints its moments and the closed-form
    /// limiting variances for both designs.
    #[arg(long)]
    pop: Option<PathBuf>,
    /// Optional directory for stationary_pmf.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EnumerateArgs {
    /// Population CSV (at most 20 units).
    #[arg(long)]
    pop: PathBuf,
    #[arg(long, value_enum, default_value_t = DesignArg::Efron)]
    design: DesignArg,
    #[arg(long, default_value_t = 0.7)]
    eta: f64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Both)]
    estimator: EstimatorArg,
}

#[derive(Args)]
struct ReplicatePaperArgs {
    #[arg(long, value_enum, default_value_t = PresetArg::Desk)]
    preset: PresetArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory for the per-scenario tables.
    #[arg(long, default_value = "paper-tables")]
    out: PathBuf,
}

/// Parses argv and dispatches; returns the process exit code.
pub fn run_cli() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // clap exits 2 on usage errors and 0 for --help/--version.
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Analytics(args) => cmd_analytics(args),
        Command::Enumerate(args) => cmd_enumerate(args),
        Command::ReplicatePaper(args) => cmd_replicate_paper(args),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

/// Configuration and input mistakes exit 2; everything else is a runtime
/// failure and exits 3.
fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_)
        | Error::InvalidParameter { .. }
        | Error::Parse { .. }
        | Error::EnumerationTooLarge { .. } => 2,
        _ => 3,
    }
}

/// Parses the `start:stop:count` level-grid syntax.
fn parse_levels(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let err = |reason: String| Error::Parse {
        context: "levels".into(),
        reason,
    };
    if parts.len() != 3 {
        return Err(err(format!(
            "expected start:stop:count, got {text:?}"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|e| err(format!("bad start {:?}: {e}", parts[0])))?;
    let stop: f64 = parts[1]
        .parse()
        .map_err(|e| err(format!("bad stop {:?}: {e}", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|e| err(format!("bad count {:?}: {e}", parts[2])))?;
    if count == 0 {
        return Err(err("count must be at least 1".into()));
    }
    if count > 1 && !(start < stop) {
        return Err(err("start must be below stop".into()));
    }
    Ok(level_grid(start, stop, count))
}

fn resolve_workers(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v.parse().map_err(|e| Error::Parse {
                context: WORKERS_ENV.into(),
                reason: format!("{v:?}: {e}"),
            })?;
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!(
        "cannot parse {}: {e}",
        path.display()
    )))
}

fn build_run_config(args: &RunArgs) -> Result<ScenarioConfig> {
    let mut config = match &args.config {
        Some(path) => load_config(path)?,
        None => ScenarioConfig::desk(
            DesignSpec::Wei { delta: 0.01 },
            DgpSpec::Nonadditive,
            0,
        ),
    };

    if let Some(design) = args.design {
        config.design = match design {
            DesignArg::Wei => DesignSpec::Wei {
                delta: args.delta.unwrap_or(0.01),
            },
            DesignArg::Efron => DesignSpec::Efron {
                eta: args.eta.unwrap_or(0.7),
            },
            DesignArg::Bernoulli => DesignSpec::Bernoulli {
                p: args.p.unwrap_or(0.5),
            },
        };
        // The variance theory differs by design; follow the new design
        // unless the regime is pinned explicitly.
        if args.stability.is_none() {
            config.stability = config.design.natural_stability();
        }
    } else {
        // Parameter-only overrides of the design already in the config.
        match (&mut config.design, args.delta, args.eta, args.p) {
            (DesignSpec::Wei { delta }, Some(d), _, _) => *delta = d,
            (DesignSpec::Efron { eta }, _, Some(e), _) => *eta = e,
            (DesignSpec::Bernoulli { p }, _, _, Some(v)) => *p = v,
            _ => {}
        }
    }

    if let Some(dgp) = args.dgp {
        config.dgp = match dgp {
            DgpArg::Nonadditive => DgpSpec::Nonadditive,
            DgpArg::Additive => DgpSpec::Additive {
                tau: args.tau.unwrap_or(10.0),
            },
            DgpArg::Logadditive => DgpSpec::Logadditive {
                c: args.c.unwrap_or(2.0),
            },
            DgpArg::File => {
                let path = args.pop.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("--dgp file requires --pop PATH".into())
                })?;
                DgpSpec::File {
                    path: path.display().to_string(),
                }
            }
        };
    } else {
        match (&mut config.dgp, args.tau, args.c) {
            (DgpSpec::Additive { tau }, Some(t), _) => *tau = t,
            (DgpSpec::Logadditive { c }, _, Some(v)) => *c = v,
            _ => {}
        }
    }

    if let Some(n) = args.n {
        config.n = n;
    } else if let DgpSpec::File { path } = &config.dgp {
        // Without an explicit size, a file population fixes n itself.
        config.n = PotentialOutcomes::read_csv_file(Path::new(path))?.len();
    }
    if let Some(reps) = args.reps {
        config.reps = reps;
    }
    if let Some(levels) = &args.levels {
        config.levels = parse_levels(levels)?;
    }
    if let Some(estimator) = args.estimator {
        config.estimators = estimator.kinds();
    }
    if let Some(stability) = args.stability {
        config.stability = match stability {
            StabilityArg::Strong => Stability::Strong,
            StabilityArg::Weak => Stability::Weak,
        };
    }
    if let Some(limits) = args.limits {
        config.limits = match limits {
            LimitsArg::Known => Limits::Known,
            LimitsArg::Estimated => Limits::Estimated,
        };
    }
    if let Some(mode) = args.population_mode {
        config.population_mode = match mode {
            PopulationModeArg::Fixed => PopulationMode::Fixed,
            PopulationModeArg::Redraw => PopulationMode::Redraw,
        };
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    Ok(config)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    config: &'a ScenarioConfig,
    tau: f64,
    reps: usize,
    runtime_seconds: f64,
    estimators: &'a [crate::montecarlo::EstimatorStats],
}

fn execute(config: &ScenarioConfig, workers: Option<usize>) -> Result<CoverageCurve> {
    match workers {
        Some(w) => run_scenario_with_workers(config, w),
        None => run_scenario(config),
    }
}

fn write_outputs(
    config: &ScenarioConfig,
    curve: &CoverageCurve,
    runtime_seconds: f64,
    out: Option<&Path>,
) -> Result<()> {
    let summary = RunSummary {
        config,
        tau: curve.tau,
        reps: curve.reps,
        runtime_seconds,
        estimators: &curve.point_stats,
    };
    let summary_json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::InvalidConfig(format!("cannot serialize summary: {e}")))?;
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let mut table = Vec::new();
            curve.write_delimited(&mut table)?;
            fs::write(dir.join("coverage.csv"), table)?;
            fs::write(dir.join("summary.json"), summary_json + "\n")?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            curve.write_delimited(&mut stdout)?;
            println!("{summary_json}");
        }
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let config = build_run_config(&args)?;
    let workers = resolve_workers(args.workers)?;
    let started = Instant::now();
    let curve = execute(&config, workers)?;
    write_outputs(&config, &curve, started.elapsed().as_secs_f64(), args.out.as_deref())
}

fn cmd_analytics(args: AnalyticsArgs) -> Result<()> {
    let limits = efron_limits(args.efron_eta)?;
    let pmf = stationary_pmf(args.efron_eta, args.tail_tol)?;
    println!("eta = {}", limits.eta);
    println!("p1star = {}", limits.p1star);
    println!("p2star = {}", limits.p2star);
    println!("ptilde = {}", limits.ptilde);
    println!("variance_factor = {}", efron_variance_factor(args.efron_eta)?);
    println!("pi0 = {}", pmf.pi0);
    println!("pi1 = {}", pmf.prob(1));
    println!("stationary_support = {}", pmf.n_max);
    println!("stationary_tail_mass = {}", pmf.tail_mass);

    if let Some(path) = &args.pop {
        let pop = PotentialOutcomes::read_csv_file(path)?;
        let m = population_moments(&pop);
        println!("n = {}", pop.len());
        println!("tau = {}", true_ate(&pop));
        println!("m0_sq = {}", m.m0_sq);
        println!("m1_sq = {}", m.m1_sq);
        println!("m01 = {}", m.m01);
        println!("sigma0_sq = {}", m.sigma0_sq);
        println!("sigma1_sq = {}", m.sigma1_sq);
        println!("gamma = {}", m.gamma);
        let (v_ipw, v_aipw) = wei_variances(&m, CrossMode::Oracle);
        println!("wei_v_ipw = {v_ipw}");
        println!("wei_v_aipw = {v_aipw}");
        let (v_ipw, v_aipw) = efron_variances(&m, args.efron_eta, CrossMode::Oracle)?;
        println!("efron_v_ipw = {v_ipw}");
        println!("efron_v_aipw = {v_aipw}");
        let (b_ipw, b_aipw) = wei_variances(&m, CrossMode::CauchySchwarz);
        println!("wei_v_ipw_bound = {b_ipw}");
        println!("wei_v_aipw_bound = {b_aipw}");
    }

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        let mut buf = Vec::new();
        pmf.write_csv(&mut buf)?;
        fs::write(dir.join("stationary_pmf.csv"), buf)?;
    }
    Ok(())
}

fn cmd_enumerate(args: EnumerateArgs) -> Result<()> {
    let pop = PotentialOutcomes::read_csv_file(&args.pop)?;
    let design = match args.design {
        DesignArg::Wei => DesignSpec::Wei { delta: args.delta },
        DesignArg::Efron => DesignSpec::Efron { eta: args.eta },
        DesignArg::Bernoulli => DesignSpec::Bernoulli { p: args.p },
    }
    .build()?;
    let tau = true_ate(&pop);
    println!("n = {}", pop.len());
    println!("tau = {tau}");
    for kind in args.estimator.kinds() {
        let expectation = enumerate_expectation(&pop, design.as_ref(), |t| match kind {
            EstimatorKind::Ipw => crate::estimators::ipw_estimate(t).unwrap_or(f64::NAN),
            EstimatorKind::Aipw => crate::estimators::aipw_estimate(t).unwrap_or(f64::NAN),
        })?;
        println!("{kind}_expectation = {expectation}");
        println!("{kind}_bias = {}", expectation - tau);
    }
    Ok(())
}

fn cmd_replicate_paper(args: ReplicatePaperArgs) -> Result<()> {
    let workers = resolve_workers(args.workers)?;
    fs::create_dir_all(&args.out)?;
    let designs = [
        ("wei", DesignSpec::Wei { delta: 0.01 }),
        ("efron", DesignSpec::Efron { eta: 0.7 }),
    ];
    let dgps = [
        ("nonadditive", DgpSpec::Nonadditive),
        ("additive", DgpSpec::Additive { tau: 10.0 }),
        ("logadditive", DgpSpec::Logadditive { c: 2.0 }),
    ];
    let mut summaries = Vec::new();
    for (design_name, design) in designs {
        for (dgp_name, dgp) in &dgps {
            let config = match args.preset {
                PresetArg::Desk => ScenarioConfig::desk(design, dgp.clone(), args.seed),
                PresetArg::Paper => ScenarioConfig::paper(design, dgp.clone(), args.seed),
            };
            let started = Instant::now();
            let curve = execute(&config, workers)?;
            let runtime = started.elapsed().as_secs_f64();
            let mut table = Vec::new();
            curve.write_delimited(&mut table)?;
            let name = format!("{design_name}_{dgp_name}");
            fs::write(args.out.join(format!("{name}_coverage.csv")), table)?;
            eprintln!(
                "{name}: tau = {}, {} reps in {runtime:.1}s",
                curve.tau, curve.reps
            );
            summaries.push(serde_json::json!({
                "scenario": name,
                "config": config,
                "tau": curve.tau,
                "runtime_seconds": runtime,
                "estimators": curve.point_stats,
            }));
        }
    }
    let combined = serde_json::to_string_pretty(&summaries)
        .map_err(|e| Error::InvalidConfig(format!("cannot serialize summary: {e}")))?;
    fs::write(args.out.join("summary.json"), combined + "\n")?;
    Ok(())
}
