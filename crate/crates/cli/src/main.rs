use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use scorelaw::acceptance::{run_criterion, CriterionResult, Settings, Suite, ACCEPTANCE_SEED};
use scorelaw_cli::artifacts::{read_manifest, verify};
use scorelaw_cli::config::{ExperimentConfig, Kind};
use scorelaw_cli::error::{CliError, CliResult, EXIT_CHECK_FAILED, EXIT_OK};
use scorelaw_cli::experiment::{run_experiment, CheckResult, CHECKS_FILE};

#[derive(Parser)]
#[command(name = "scorelaw", version, about = "Score-law simulations, limit laws and acceptance checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "SCORELAW_JOBS")]
    jobs: Option<usize>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run a model_s experiment.
    Simulate(RunArgs),
    /// Run an n_interactions experiment.
    Graph(RunArgs),
    /// Tabulate a limit distribution (analytic_only experiment).
    Analytic(RunArgs),
    /// Run the acceptance criteria; SUITE is `fast` or `full`.
    Acceptance {
        suite: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "SCORELAW_JOBS")]
        jobs: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Scales every target coefficient `a`; for mutation testing.
        #[arg(long, hide = true, default_value_t = 1.0)]
        perturb_a: f64,
    },
    /// Verify an output directory against its manifest and summarise its checks.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

fn default_jobs(jobs: Option<usize>) -> usize {
    jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn print_checks(checks: &[CheckResult], format: Format) {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(checks).unwrap()),
        Format::Csv => {
            println!("check,pass,detail");
            for c in checks {
                println!("{},{},\"{}\"", c.check, c.pass, c.detail.replace('"', "\"\""));
            }
        }
    }
}

fn experiment(args: RunArgs, expected: Kind) -> CliResult<i32> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if cfg.kind != expected {
        return Err(CliError::Usage(format!(
            "config kind is {:?}; this verb runs {:?}",
            cfg.kind, expected
        )));
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    let outcome = run_experiment(&cfg, default_jobs(args.jobs))?;
    print_checks(&outcome.checks, args.format);
    eprintln!(
        "wrote {} artifacts to {} (config {})",
        outcome.manifest.artifacts.len(),
        cfg.output_dir.display(),
        &outcome.manifest.config_hash[..12]
    );
    Ok(if outcome.all_pass() { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn acceptance(suite: &str, seed: Option<u64>, jobs: Option<usize>, format: Format, a_scale: f64) -> CliResult<i32> {
    let suite: Suite = suite.parse()?;
    let settings = Settings { seed: seed.unwrap_or(ACCEPTANCE_SEED), a_scale };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(default_jobs(jobs).max(1))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let results: Vec<CriterionResult> = pool.install(|| {
        suite.criteria().par_iter().map(|id| run_criterion(id, &settings)).collect::<Result<_, _>>()
    })?;
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&results).unwrap()),
        Format::Csv => {
            for r in &results {
                println!("{r}");
            }
        }
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.id.as_str()).collect();
    if failed.is_empty() {
        eprintln!("all {} criteria passed", results.len());
        Ok(EXIT_OK)
    } else {
        eprintln!("failed: {}", failed.join(", "));
        Ok(EXIT_CHECK_FAILED)
    }
}

fn report(dir: PathBuf, format: Format) -> CliResult<i32> {
    let manifest = read_manifest(&dir)?;
    let bad = verify(&dir, &manifest);
    if !bad.is_empty() {
        return Err(CliError::Integrity(format!("content changed or missing: {}", bad.join(", "))));
    }
    let text = std::fs::read_to_string(dir.join(CHECKS_FILE))
        .map_err(|e| CliError::Integrity(format!("{CHECKS_FILE}: {e}")))?;
    let checks: Vec<CheckResult> =
        serde_json::from_str(&text).map_err(|e| CliError::Integrity(format!("{CHECKS_FILE}: {e}")))?;
    print_checks(&checks, format);
    eprintln!("{} artifacts verified (config {})", manifest.artifacts.len(), manifest.config_hash);
    Ok(if checks.iter().all(|c| c.pass) { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => experiment(args, Kind::ModelS),
        Command::Graph(args) => experiment(args, Kind::NInteractions),
        Command::Analytic(args) => experiment(args, Kind::AnalyticOnly),
        Command::Acceptance { suite, seed, jobs, format, perturb_a } => {
            acceptance(&suite, seed, jobs, format, perturb_a)
        }
        Command::Report { out, format } => report(out, format),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
