//! One generation run end to end, and batches of them.
//!
//! A single run is: load a module, build its test cluster, hand a job to
//! the chosen engine, optionally annotate and minimize the result, and
//! write three files into the run's own directory: `tests.mdyn`,
//! `report.csv`, and `timeseries.csv`. A batch walks a corpus, fans the
//! (module, configuration, seed) grid out over a bounded worker pool, and
//! then builds the summary tables single-threaded by reading the per-run
//! CSV files back in. The summary is a function of those files alone, so
//! anyone can recompute it from the raw outputs.
//!
//! All times here are virtual seconds from the engines' clock. Replaying
//! a run with the same configuration writes byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cluster::build_test_cluster;
use crate::engines::{by_name, GaConfig, MioConfig, SearchJob};
use crate::fitness::all_goals;
use crate::minidyn::compiler::CompileError;
use crate::minidyn::{compile_module, parse_module, CompiledModule, ParseError};
use crate::operators::SearchConfig;
use crate::oracle::{
    annotate_suite, generate_mutants, minimize_assertions, mutation_score, render_annotated_suite,
};
use crate::stats::{mann_whitney_p, mean, median, vargha_delaney_a12};
use crate::testmodel::render_suite;

/// Everything one run needs, as the command line hands it over.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub module_path: PathBuf,
    /// Engine name as registered, e.g. "dynamosa".
    pub algorithm: String,
    pub use_type_hints: bool,
    pub seed: u64,
    pub budget_s: u64,
    /// Run the assertion pipeline (annotate, mutants, minimize) on the
    /// generated suite.
    pub assertions: bool,
    /// Directory the run owns; the three output files land here.
    pub out_dir: PathBuf,
}

/// What a finished run reports. The CSV written next to the tests has
/// exactly these fields, in this order, under these names.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub module: String,
    /// Configuration label, algorithm plus hint mode.
    pub config: String,
    pub seed: u64,
    /// Branch coverage of the final suite, in [0, 1].
    pub coverage: f64,
    /// Callables the cluster exposes to generation.
    pub callables: usize,
    /// Coverage goals of the module: branch outcomes plus branchless
    /// code objects. The denominator behind `coverage`.
    pub goals: usize,
    /// Test cases in the written suite.
    pub tests: usize,
    /// Absent when the run skipped the assertion pipeline or the module
    /// yields no mutants.
    pub mutation_score: Option<f64>,
    /// Virtual seconds consumed; identical replays report identical time.
    pub elapsed_s: f64,
    /// Coverage at each whole virtual second, non-decreasing.
    pub series: Vec<(u64, f64)>,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot access `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Compile(#[from] CompileError),
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
}

impl HarnessError {
    /// True for failures of the module under test itself, as opposed to
    /// bad invocations. The command line maps these to its documented
    /// exit status.
    pub fn is_module_error(&self) -> bool {
        matches!(self, HarnessError::Parse(_) | HarnessError::Compile(_))
    }
}

fn io_err(path: &Path, err: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.display().to_string(), message: err.to_string() }
}

/// Label for an algorithm and hint-mode pair, used for directory names
/// and report rows.
pub fn config_label(algorithm: &str, use_type_hints: bool) -> String {
    let hints = if use_type_hints { "hints" } else { "nohints" };
    format!("{algorithm}-{hints}")
}

/// Loads and compiles a module file. The module takes its name from the
/// file stem.
pub fn load_module(path: &Path) -> Result<CompiledModule, HarnessError> {
    let source = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ast = parse_module(&name, &source)?;
    Ok(compile_module(&ast)?)
}

/// Runs one generation job and writes `tests.mdyn`, `report.csv`, and
/// `timeseries.csv` into `cfg.out_dir`. Same configuration, same bytes.
pub fn run_one(cfg: &RunConfig) -> Result<RunReport, HarnessError> {
    let module = load_module(&cfg.module_path)?;
    let engine = by_name(&cfg.algorithm)
        .ok_or_else(|| HarnessError::UnknownAlgorithm(cfg.algorithm.clone()))?;
    let cluster = build_test_cluster(&module, cfg.use_type_hints);
    let operators = SearchConfig::default();
    let ga = GaConfig::default();
    let mio = MioConfig::default();
    let job = SearchJob {
        module: &module,
        cluster: &cluster,
        operators: &operators,
        ga: &ga,
        mio: &mio,
        seed: cfg.seed,
        budget_s: cfg.budget_s,
        max_evaluations: None,
    };
    let outcome = engine.run(&job);

    let (rendered, score) = if cfg.assertions {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut annotated = annotate_suite(&outcome.suite, &module, &mut rng);
        let mutants = generate_mutants(&module.ast);
        let matrix = minimize_assertions(&mut annotated, &module, &mutants);
        (render_annotated_suite(&annotated), mutation_score(&matrix))
    } else {
        (render_suite(&outcome.suite), None)
    };

    let report = RunReport {
        module: module.ast.name.clone(),
        config: config_label(&cfg.algorithm, cfg.use_type_hints),
        seed: cfg.seed,
        coverage: outcome.coverage,
        callables: cluster.callables.len(),
        goals: all_goals(&module).len(),
        tests: outcome.suite.cases.len(),
        mutation_score: score,
        elapsed_s: outcome.virtual_elapsed_s,
        series: outcome.series.rows().collect(),
    };

    fs::create_dir_all(&cfg.out_dir).map_err(|e| io_err(&cfg.out_dir, e))?;
    let write = |name: &str, text: String| -> Result<(), HarnessError> {
        let path = cfg.out_dir.join(name);
        fs::write(&path, text).map_err(|e| io_err(&path, e))
    };
    write("tests.mdyn", rendered)?;
    write("report.csv", report_csv(&report))?;
    write("timeseries.csv", timeseries_csv(&report.series))?;
    Ok(report)
}

const REPORT_HEADER: &str = "module,config,seed,coverage,callables,goals,tests,mutation_score,elapsed_s";

fn report_csv(r: &RunReport) -> String {
    let score = r.mutation_score.map(|s| s.to_string()).unwrap_or_default();
    format!(
        "{}\n{},{},{},{},{},{},{},{},{}\n",
        REPORT_HEADER,
        r.module, r.config, r.seed, r.coverage, r.callables, r.goals, r.tests, score, r.elapsed_s,
    )
}

fn timeseries_csv(series: &[(u64, f64)]) -> String {
    let mut text = String::from("elapsed_s,coverage\n");
    for (second, coverage) in series {
        text.push_str(&format!("{second},{coverage}\n"));
    }
    text
}

/// Reads the report a finished run wrote into `dir`, series included.
/// `read_report_dir(run_one(cfg))` gives back the report `run_one`
/// returned.
pub fn read_report_dir(dir: &Path) -> Result<RunReport, String> {
    let report_path = dir.join("report.csv");
    let text = fs::read_to_string(&report_path)
        .map_err(|e| format!("{}: {e}", report_path.display()))?;
    let mut report = parse_report_csv(&text).map_err(|e| format!("{}: {e}", report_path.display()))?;
    let series_path = dir.join("timeseries.csv");
    let text = fs::read_to_string(&series_path)
        .map_err(|e| format!("{}: {e}", series_path.display()))?;
    report.series = parse_timeseries_csv(&text).map_err(|e| format!("{}: {e}", series_path.display()))?;
    Ok(report)
}

fn parse_report_csv(text: &str) -> Result<RunReport, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == REPORT_HEADER => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    let row = lines.next().ok_or("missing data row")?;
    let fields: Vec<&str> = row.split(',').collect();
    if fields.len() != 9 {
        return Err(format!("expected 9 fields, got {}", fields.len()));
    }
    let num = |i: usize| -> Result<f64, String> {
        fields[i].parse().map_err(|_| format!("bad number `{}`", fields[i]))
    };
    Ok(RunReport {
        module: fields[0].to_string(),
        config: fields[1].to_string(),
        seed: fields[2].parse().map_err(|_| format!("bad seed `{}`", fields[2]))?,
        coverage: num(3)?,
        callables: num(4)? as usize,
        goals: num(5)? as usize,
        tests: num(6)? as usize,
        mutation_score: if fields[7].is_empty() { None } else { Some(num(7)?) },
        elapsed_s: num(8)?,
        series: Vec::new(),
    })
}

fn parse_timeseries_csv(text: &str) -> Result<Vec<(u64, f64)>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some("elapsed_s,coverage") => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    let mut series = Vec::new();
    for line in lines {
        let (s, c) = line.split_once(',').ok_or_else(|| format!("bad row `{line}`"))?;
        let second = s.parse().map_err(|_| format!("bad second `{s}`"))?;
        let coverage = c.parse().map_err(|_| format!("bad coverage `{c}`"))?;
        series.push((second, coverage));
    }
    Ok(series)
}

/// Line-oriented `key = value` settings. Blank lines and `#` comments are
/// skipped; the first `=` splits key from value; later pairs win on
/// repeated keys when callers apply them in order.
pub fn parse_config_file(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut pairs = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`, got `{line}`", index + 1))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(format!("line {}: empty key", index + 1));
        }
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// A corpus walk plus the grid of runs to do over it.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub corpus_dir: PathBuf,
    /// Engine names, in presentation order.
    pub algorithms: Vec<String>,
    /// Hint modes to cross with the algorithms; `[true, false]` yields
    /// the full configuration grid.
    pub hint_modes: Vec<bool>,
    /// Seeds 0 up to this count, exclusive.
    pub seeds: u64,
    pub budget_s: u64,
    pub assertions: bool,
    pub out_dir: PathBuf,
    pub workers: usize,
}

/// Per-configuration aggregate over the completed runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSummary {
    pub config: String,
    pub runs: usize,
    /// Planned runs that failed and were left out of the aggregates.
    pub excluded: usize,
    pub median_coverage: f64,
    pub mean_coverage: f64,
    pub median_tests: f64,
    pub median_elapsed_s: f64,
}

/// Effect size and significance for one configuration pair, over the
/// coverage samples of one module or of the whole corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// A module label, or "overall".
    pub scope: String,
    pub config_a: String,
    pub config_b: String,
    /// Probability that a run of `config_a` beats one of `config_b`.
    pub a12: f64,
    pub p: f64,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    /// Reports of the completed runs, in grid order.
    pub reports: Vec<RunReport>,
    /// One line per failed run: which job, and why.
    pub excluded: Vec<String>,
    pub summaries: Vec<ConfigSummary>,
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone)]
struct JobSpec {
    module_label: String,
    module_path: PathBuf,
    algorithm: String,
    use_type_hints: bool,
    seed: u64,
    out_dir: PathBuf,
}

/// Modules of a corpus directory: `.mdyn` files at the top level and one
/// directory level below it, labeled `file` or `dir.file`, sorted by
/// label.
pub fn scan_corpus(dir: &Path) -> Result<Vec<(String, PathBuf)>, HarnessError> {
    let mut modules = Vec::new();
    let mut subdirs = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            subdirs.push(path);
        } else if path.extension().map(|e| e == "mdyn").unwrap_or(false) {
            modules.push((stem_of(&path), path));
        }
    }
    for sub in subdirs {
        let project = stem_of(&sub);
        for entry in fs::read_dir(&sub).map_err(|e| io_err(&sub, e))? {
            let entry = entry.map_err(|e| io_err(&sub, e))?;
            let path = entry.path();
            if path.is_file() && path.extension().map(|e| e == "mdyn").unwrap_or(false) {
                modules.push((format!("{project}.{}", stem_of(&path)), path));
            }
        }
    }
    modules.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(modules)
}

fn stem_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Worker count for the run pool: the `SBGEN_WORKERS` environment
/// variable when set to a positive number, otherwise the machine's
/// parallelism capped at eight.
pub fn worker_count_from_env() -> usize {
    workers_from(std::env::var("SBGEN_WORKERS").ok().as_deref())
}

fn workers_from(value: Option<&str>) -> usize {
    if let Some(n) = value.and_then(|v| v.trim().parse::<usize>().ok()) {
        if n >= 1 {
            return n;
        }
    }
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8)
}

/// Runs the whole grid and writes `summary.csv` and `comparisons.csv`
/// next to the per-run directories. Failed runs are logged, counted, and
/// left out of the aggregates; everything else proceeds.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, HarnessError> {
    let modules = scan_corpus(&cfg.corpus_dir)?;
    let configs: Vec<(String, bool, String)> = cfg
        .algorithms
        .iter()
        .flat_map(|a| {
            cfg.hint_modes.iter().map(move |&h| (a.clone(), h, config_label(a, h)))
        })
        .collect();

    let mut jobs = Vec::new();
    for (label, path) in &modules {
        for (algorithm, hints, config) in &configs {
            for seed in 0..cfg.seeds {
                jobs.push(JobSpec {
                    module_label: label.clone(),
                    module_path: path.clone(),
                    algorithm: algorithm.clone(),
                    use_type_hints: *hints,
                    seed,
                    out_dir: cfg.out_dir.join(label).join(config).join(seed.to_string()),
                });
            }
        }
    }

    let slots: Mutex<Vec<Option<Result<RunReport, String>>>> =
        Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let workers = cfg.workers.max(1).min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(index) else { break };
                let run = RunConfig {
                    module_path: job.module_path.clone(),
                    algorithm: job.algorithm.clone(),
                    use_type_hints: job.use_type_hints,
                    seed: job.seed,
                    budget_s: cfg.budget_s,
                    assertions: cfg.assertions,
                    out_dir: job.out_dir.clone(),
                };
                let outcome = run_one(&run).map_err(|e| e.to_string());
                slots.lock().unwrap()[index] = Some(outcome);
            });
        }
    });

    // Everything below is single-threaded and reads the per-run CSV
    // files back in, so the summary depends on those files alone.
    let results = slots.into_inner().unwrap();
    let mut reports = Vec::new();
    let mut excluded = Vec::new();
    for (job, result) in jobs.iter().zip(results) {
        let identity = format!("{}/{}", job.module_label, config_label(&job.algorithm, job.use_type_hints));
        match result.expect("every job ran") {
            Ok(_) => match read_report_dir(&job.out_dir) {
                Ok(report) => reports.push(report),
                Err(e) => {
                    log::warn!("excluding {identity} seed {}: {e}", job.seed);
                    excluded.push(format!("{identity}/seed{}: {e}", job.seed));
                }
            },
            Err(e) => {
                log::warn!("excluding {identity} seed {}: {e}", job.seed);
                excluded.push(format!("{identity}/seed{}: {e}", job.seed));
            }
        }
    }

    let config_labels: Vec<String> = configs.iter().map(|(_, _, l)| l.clone()).collect();
    let planned_per_config = modules.len() * cfg.seeds as usize;
    let module_labels: Vec<String> = modules.iter().map(|(l, _)| l.clone()).collect();
    let (summaries, comparisons) =
        aggregate(&reports, &config_labels, planned_per_config, &module_labels);

    fs::create_dir_all(&cfg.out_dir).map_err(|e| io_err(&cfg.out_dir, e))?;
    let summary_path = cfg.out_dir.join("summary.csv");
    fs::write(&summary_path, summary_csv(&summaries)).map_err(|e| io_err(&summary_path, e))?;
    let cmp_path = cfg.out_dir.join("comparisons.csv");
    fs::write(&cmp_path, comparisons_csv(&comparisons)).map_err(|e| io_err(&cmp_path, e))?;

    Ok(ExperimentOutcome { reports, excluded, summaries, comparisons })
}

/// The summary tables, straight from per-run reports: medians and means
/// per configuration, then effect size and significance for every
/// configuration pair, per module when the corpus has more than one and
/// always over the whole corpus.
pub fn aggregate(
    reports: &[RunReport],
    configs: &[String],
    planned_per_config: usize,
    modules: &[String],
) -> (Vec<ConfigSummary>, Vec<Comparison>) {
    let of_config = |config: &str| -> Vec<&RunReport> {
        reports.iter().filter(|r| r.config == config).collect()
    };
    let summaries = configs
        .iter()
        .map(|config| {
            let runs = of_config(config);
            let coverage: Vec<f64> = runs.iter().map(|r| r.coverage).collect();
            let tests: Vec<f64> = runs.iter().map(|r| r.tests as f64).collect();
            let elapsed: Vec<f64> = runs.iter().map(|r| r.elapsed_s).collect();
            ConfigSummary {
                config: config.clone(),
                runs: runs.len(),
                excluded: planned_per_config.saturating_sub(runs.len()),
                median_coverage: median(&coverage),
                mean_coverage: mean(&coverage),
                median_tests: median(&tests),
                median_elapsed_s: median(&elapsed),
            }
        })
        .collect();

    let mut scopes: Vec<Option<&str>> = Vec::new();
    if modules.len() > 1 {
        scopes.extend(modules.iter().map(|m| Some(m.as_str())));
    }
    scopes.push(None);
    let mut comparisons = Vec::new();
    for scope in scopes {
        let sample = |config: &str| -> Vec<f64> {
            reports
                .iter()
                .filter(|r| r.config == config)
                .filter(|r| scope.map(|m| r.module_label_matches(m)).unwrap_or(true))
                .map(|r| r.coverage)
                .collect()
        };
        for (i, a) in configs.iter().enumerate() {
            for b in &configs[i + 1..] {
                let xs = sample(a);
                let ys = sample(b);
                if xs.is_empty() || ys.is_empty() {
                    continue;
                }
                comparisons.push(Comparison {
                    scope: scope.unwrap_or("overall").to_string(),
                    config_a: a.clone(),
                    config_b: b.clone(),
                    a12: vargha_delaney_a12(&xs, &ys),
                    p: mann_whitney_p(&xs, &ys),
                });
            }
        }
    }
    (summaries, comparisons)
}

impl RunReport {
    /// True when this run belongs to the corpus module labeled `label`.
    /// Corpus labels are `dir.file`; the report stores the file stem.
    fn module_label_matches(&self, label: &str) -> bool {
        label == self.module
            || label.rsplit_once('.').map(|(_, stem)| stem == self.module).unwrap_or(false)
    }
}

fn summary_csv(rows: &[ConfigSummary]) -> String {
    let mut text = String::from(
        "config,runs,excluded,median_coverage,mean_coverage,median_tests,median_elapsed_s\n",
    );
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.config, r.runs, r.excluded, r.median_coverage, r.mean_coverage, r.median_tests,
            r.median_elapsed_s,
        ));
    }
    text
}

fn comparisons_csv(rows: &[Comparison]) -> String {
    let mut text = String::from("scope,config_a,config_b,a12,p\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.scope, r.config_a, r.config_b, r.a12, r.p,
        ));
    }
    text
}
