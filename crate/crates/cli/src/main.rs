//! Command-line front end: one-shot suite generation and corpus
//! experiments. Every flag can also come from a `key = value` config
//! file; a flag given on the command line wins over the file.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sbgen_core::engines::algorithm_names;
use sbgen_core::harness::{
    parse_config_file, run_experiment, run_one, worker_count_from_env, ExperimentConfig,
    RunConfig,
};

#[derive(Parser)]
#[command(name = "sbgen", about = "Search-based test generation for MiniDyn modules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a test suite for one module.
    Generate(GenerateArgs),
    /// Run the algorithm grid over a corpus and summarize the results.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Module file to generate tests for.
    #[arg(long)]
    module: Option<PathBuf>,
    /// Engine name: random, ws, mosa, dynamosa, or mio.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Search budget in virtual seconds.
    #[arg(long = "budget-s")]
    budget_s: Option<u64>,
    /// Ignore type hints when building the test cluster.
    #[arg(long = "no-type-hints")]
    no_type_hints: bool,
    /// Add regression assertions and score them against mutants.
    #[arg(long)]
    assertions: bool,
    /// Directory for tests.mdyn, report.csv, and timeseries.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key = value file supplying defaults for the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Corpus directory; .mdyn files live in it or one level below.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Comma-separated engine names.
    #[arg(long)]
    algorithms: Option<String>,
    /// Seeds per configuration, numbered from zero.
    #[arg(long)]
    seeds: Option<u64>,
    /// Search budget in virtual seconds, per run.
    #[arg(long = "budget-s")]
    budget_s: Option<u64>,
    /// Hint modes to cross with the algorithms: on, off, or both.
    #[arg(long)]
    hints: Option<String>,
    /// Add regression assertions and score them, per run.
    #[arg(long)]
    assertions: bool,
    /// Root directory for per-run outputs and the summary tables.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key = value file supplying defaults for the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Experiment(args) => cmd_experiment(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let file = load_settings(args.config.as_ref())?;
    let algorithm = required(setting(args.algorithm, &file, "algorithm")?, "algorithm")?;
    known_algorithm(&algorithm)?;
    let cfg = RunConfig {
        module_path: required(setting(args.module, &file, "module")?, "module")?,
        algorithm,
        use_type_hints: !args.no_type_hints && bool_setting(&file, "type-hints")?.unwrap_or(true),
        seed: required(setting(args.seed, &file, "seed")?, "seed")?,
        budget_s: required(setting(args.budget_s, &file, "budget-s")?, "budget-s")?,
        assertions: args.assertions || bool_setting(&file, "assertions")?.unwrap_or(false),
        out_dir: required(setting(args.out, &file, "out")?, "out")?,
    };
    let report = run_one(&cfg)?;
    println!(
        "{}: coverage {:.3} of {} goals, {} tests in {:.1} virtual s",
        report.module, report.coverage, report.goals, report.tests, report.elapsed_s,
    );
    if let Some(score) = report.mutation_score {
        println!("mutation score {score:.3}");
    }
    println!("wrote {}", cfg.out_dir.display());
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let file = load_settings(args.config.as_ref())?;
    let list = required(setting(args.algorithms, &file, "algorithms")?, "algorithms")?;
    let algorithms: Vec<String> = list
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if algorithms.is_empty() {
        bail!("no algorithms given");
    }
    for name in &algorithms {
        known_algorithm(name)?;
    }
    let hints = setting(args.hints, &file, "hints")?.unwrap_or_else(|| "both".to_string());
    let cfg = ExperimentConfig {
        corpus_dir: required(setting(args.corpus, &file, "corpus")?, "corpus")?,
        algorithms,
        hint_modes: parse_hint_modes(&hints)?,
        seeds: required(setting(args.seeds, &file, "seeds")?, "seeds")?,
        budget_s: required(setting(args.budget_s, &file, "budget-s")?, "budget-s")?,
        assertions: args.assertions || bool_setting(&file, "assertions")?.unwrap_or(false),
        out_dir: required(setting(args.out, &file, "out")?, "out")?,
        workers: worker_count_from_env(),
    };
    let outcome = run_experiment(&cfg)?;
    println!("{} runs completed, {} excluded", outcome.reports.len(), outcome.excluded.len());
    for s in &outcome.summaries {
        println!(
            "{}: median coverage {:.3} over {} runs",
            s.config, s.median_coverage, s.runs,
        );
    }
    println!("wrote {} and comparisons.csv", cfg.out_dir.join("summary.csv").display());
    Ok(())
}

fn load_settings(path: Option<&PathBuf>) -> Result<BTreeMap<String, String>> {
    let Some(path) = path else {
        return Ok(BTreeMap::new());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file `{}`", path.display()))?;
    let pairs = parse_config_file(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok(pairs.into_iter().collect())
}

/// A command-line value when given, the config file's otherwise.
fn setting<T: std::str::FromStr>(
    cli: Option<T>,
    file: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>> {
    if cli.is_some() {
        return Ok(cli);
    }
    match file.get(key) {
        Some(v) => v
            .parse::<T>()
            .map(Some)
            .map_err(|_| anyhow!("config key `{key}`: cannot parse `{v}`")),
        None => Ok(None),
    }
}

fn required<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| {
        anyhow!("missing required setting `{key}`: pass --{key} or set it in the config file")
    })
}

fn bool_setting(file: &BTreeMap<String, String>, key: &str) -> Result<Option<bool>> {
    match file.get(key).map(String::as_str) {
        None => Ok(None),
        Some("true") => Ok(Some(true)),
        Some("false") => Ok(Some(false)),
        Some(v) => bail!("config key `{key}`: expected true or false, got `{v}`"),
    }
}

fn known_algorithm(name: &str) -> Result<()> {
    let names = algorithm_names();
    if names.contains(&name) {
        return Ok(());
    }
    bail!("unknown algorithm `{name}` (have: {})", names.join(", "))
}

fn parse_hint_modes(value: &str) -> Result<Vec<bool>> {
    match value {
        "on" => Ok(vec![true]),
        "off" => Ok(vec![false]),
        "both" => Ok(vec![true, false]),
        other => bail!("hint mode must be on, off, or both, got `{other}`"),
    }
}
