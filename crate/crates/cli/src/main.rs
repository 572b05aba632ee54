use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hss_bench::config::ExperimentConfig;
use hss_bench::pipeline::{self, Context};
use hss_bench::report::{write_report, Quantity, ReportBody};
use hss_bench::{emit_report, run_experiment, CliError, CliResult, Format, NamedReport};
use hss_core::bounds::{fv_bound, kl_divergence, pac_bayes_bound, theorem1_report, theorem2_bound, BoundInputs};
use hss_core::mechanisms::exponential_mechanism;
use hss_core::SeededRng;
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "hss-bench", version, about = "Generalization bounds for data-dependent hypothesis sets")]
struct Cli {
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "HSS_BENCH_THREADS")]
    threads: Option<usize>,
    /// Output directory for `run`, output file for the other commands
    /// (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Raise log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full experiment: estimates, stability, bounds, coverage and application quantities.
    Run { config: PathBuf },
    /// Checks a config without computing anything.
    Validate { config: PathBuf },
    /// Runs the configured complexity estimators.
    Estimate { config: PathBuf },
    /// Computes the stability report.
    Stability { config: PathBuf },
    /// Evaluates a bound from a JSON coefficient file.
    Bound {
        kind: BoundCommand,
        #[arg(long)]
        inputs: PathBuf,
    },
    /// Mechanism utilities.
    Mech {
        #[command(subcommand)]
        mechanism: MechCommand,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundCommand {
    Theorem1,
    Theorem2,
    Fv,
    Pacbayes,
}

#[derive(Subcommand)]
enum MechCommand {
    /// One draw of the exponential mechanism.
    Expmech {
        /// JSON array of scores.
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        eps: f64,
        /// Score sensitivity.
        #[arg(long)]
        delta: f64,
        /// Adds a constant zero-score arm.
        #[arg(long)]
        zero_arm: bool,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FvInputs {
    gamma: f64,
    m: usize,
    delta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PacBayesInputs {
    posterior: Vec<f64>,
    prior: Vec<f64>,
    empirical_gibbs_risk: f64,
    m: usize,
    delta: f64,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn emit(reports: &[NamedReport], format: Format, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => emit_report(reports, format, p),
        None => {
            let mut stdout = std::io::stdout().lock();
            write_report(reports, format, &mut stdout)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn bound_reports(kind: BoundCommand, inputs: &Path) -> CliResult<Vec<NamedReport>> {
    Ok(match kind {
        BoundCommand::Theorem1 => vec![NamedReport::new("theorem1", ReportBody::Bound(theorem1_report(&read_json::<BoundInputs>(inputs)?)?))],
        BoundCommand::Theorem2 => vec![NamedReport::new("theorem2", ReportBody::Bound(theorem2_bound(&read_json::<BoundInputs>(inputs)?)?))],
        BoundCommand::Fv => {
            let i: FvInputs = read_json(inputs)?;
            let v = fv_bound(i.gamma, i.m, i.delta)?;
            vec![NamedReport::new("fv", ReportBody::Quantities(vec![Quantity::exact("bound", v), Quantity::exact("vacuous", f64::from(u8::from(v > 1.0)))]))]
        }
        BoundCommand::Pacbayes => {
            let i: PacBayesInputs = read_json(inputs)?;
            let kl = kl_divergence(&i.posterior, &i.prior)?;
            let v = pac_bayes_bound(&i.posterior, &i.prior, i.empirical_gibbs_risk, i.m, i.delta)?;
            vec![NamedReport::new(
                "pacbayes",
                ReportBody::Quantities(vec![Quantity::exact("kl", kl), Quantity::exact("bound", v), Quantity::exact("vacuous", f64::from(u8::from(v > 1.0)))]),
            )]
        }
    })
}

fn execute(cli: &Cli) -> CliResult<()> {
    let load = |path: &Path| -> CliResult<(ExperimentConfig, u64)> {
        let cfg = ExperimentConfig::from_path(path)?;
        let seed = cli.seed.unwrap_or(cfg.seed);
        Ok((cfg, seed))
    };
    let format = cli.format.unwrap_or(Format::Json);
    match &cli.command {
        Command::Run { config } => {
            let formats = cli.format.map(|f| vec![f]);
            let written = run_experiment(config, cli.out.as_deref(), cli.seed, formats.as_deref())?;
            for p in written {
                log::info!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Validate { config } => {
            load(config)?;
            log::info!("{} is valid", config.display());
            Ok(())
        }
        Command::Estimate { config } => {
            let (cfg, seed) = load(config)?;
            let ctx = Context::new(&cfg, seed)?;
            let reports: Vec<NamedReport> = pipeline::estimates(&ctx, &cfg)?.into_iter().map(|(e, r)| NamedReport::new(e.name(), ReportBody::Estimate(r))).collect();
            emit(&reports, format, cli.out.as_deref())
        }
        Command::Stability { config } => {
            let (cfg, seed) = load(config)?;
            let ctx = Context::new(&cfg, seed)?;
            let report = pipeline::stability(&ctx, &cfg)?;
            emit(&[NamedReport::new("stability", ReportBody::Stability(report))], format, cli.out.as_deref())
        }
        Command::Bound { kind, inputs } => emit(&bound_reports(*kind, inputs)?, format, cli.out.as_deref()),
        Command::Mech { mechanism: MechCommand::Expmech { scores, eps, delta, zero_arm } } => {
            let scores: Vec<f64> = read_json(scores)?;
            let rng = SeededRng::new(cli.seed.unwrap_or(0));
            let out = exponential_mechanism(&scores, *eps, *delta, *zero_arm, &rng)?;
            emit(&[NamedReport::new("expmech", ReportBody::Mechanism(out))], format, cli.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().target(env_logger::Target::Stderr).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
