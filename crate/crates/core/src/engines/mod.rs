//! The generation algorithms and what they share: the archive of covering
//! test cases, stopping conditions on a virtual clock, per-second coverage
//! series, and a by-name registry of engines.
//!
//! Time is virtual throughout: one second equals a fixed number of
//! interpreted instructions, and every execution carries a flat overhead
//! charge. Runs with the same module, configuration, and seed therefore
//! replay identically, wall clocks notwithstanding.

mod mio;
mod mosa;
mod random;
mod ranking;
mod whole_suite;

pub use mio::{run_mio, MioConfig, MioPhase};
pub use mosa::{run_dynamosa, run_mosa};
pub use random::run_random;
pub use ranking::{crowding_distances, preference_sort};
pub use whole_suite::run_whole_suite;

use crate::cluster::TestCluster;
use crate::executor::{branch_coverage, ExecutionBudget, ExecutionResult, ExecutionTrace, Executor};
use crate::fitness::{all_goals, goal_covered, CoverageGoal};
use crate::minidyn::CompiledModule;
use crate::operators::{GenerationStats, SearchConfig};
use crate::testmodel::{render_case, TestCase, TestSuite};

/// Virtual-clock rate: interpreted instructions per virtual second.
pub const INSTRUCTIONS_PER_SECOND: u64 = 200_000;
/// Flat per-execution charge covering dispatch, reset, and bookkeeping.
pub const EXECUTION_OVERHEAD: u64 = 100;

/// Search budget plus optional evaluation cap, advanced by charging
/// executions. Engines check it between iterations only.
#[derive(Debug, Clone)]
pub struct StoppingCondition {
    budget_units: u64,
    max_evaluations: Option<u64>,
    used_units: u64,
    evaluations: u64,
}

impl StoppingCondition {
    pub fn from_seconds(seconds: u64) -> StoppingCondition {
        StoppingCondition {
            budget_units: seconds * INSTRUCTIONS_PER_SECOND,
            max_evaluations: None,
            used_units: 0,
            evaluations: 0,
        }
    }

    pub fn with_max_evaluations(mut self, n: u64) -> StoppingCondition {
        self.max_evaluations = Some(n);
        self
    }

    /// Accounts one executed test case.
    pub fn charge(&mut self, result: &ExecutionResult) {
        self.used_units += result.instructions + EXECUTION_OVERHEAD;
        self.evaluations += 1;
    }

    /// Accounts an iteration that did work but executed nothing, so loops
    /// that keep skipping still consume budget.
    pub fn charge_overhead(&mut self) {
        self.used_units += EXECUTION_OVERHEAD;
    }

    pub fn reached(&self) -> bool {
        self.used_units >= self.budget_units
            || self.max_evaluations.map(|m| self.evaluations >= m).unwrap_or(false)
    }

    pub fn elapsed_seconds(&self) -> f64 {
        self.used_units as f64 / INSTRUCTIONS_PER_SECOND as f64
    }

    /// Consumed fraction of the unit budget, clamped to [0, 1].
    pub fn fraction_used(&self) -> f64 {
        if self.budget_units == 0 {
            return 1.0;
        }
        (self.used_units as f64 / self.budget_units as f64).min(1.0)
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }
}

/// Coverage over virtual time at one-second resolution. Each recorded
/// point holds the coverage in effect when that second boundary was
/// crossed; `finish` pads the series out to the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    horizon_s: u64,
    points: Vec<f64>,
}

impl TimeSeries {
    pub fn new(horizon_s: u64) -> TimeSeries {
        TimeSeries { horizon_s, points: Vec::new() }
    }

    pub fn observe(&mut self, elapsed_s: f64, coverage: f64) {
        while (self.points.len() as u64) < self.horizon_s
            && (self.points.len() + 1) as f64 <= elapsed_s
        {
            self.points.push(coverage);
        }
    }

    /// Fills the remaining seconds with the final coverage; an early exit
    /// holds its value to the end of the horizon.
    pub fn finish(&mut self, coverage: f64) {
        while (self.points.len() as u64) < self.horizon_s {
            self.points.push(coverage);
        }
    }

    /// (second, coverage) rows, seconds counted from 1.
    pub fn rows(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.points.iter().enumerate().map(|(i, c)| (i as u64 + 1, *c))
    }

    pub fn final_coverage(&self) -> Option<f64> {
        self.points.last().copied()
    }
}

/// Covering test cases, one slot per coverage goal. A stored case is only
/// displaced by a strictly shorter one; on equal length the incumbent
/// stays, which keeps replays stable.
#[derive(Debug, Clone)]
pub struct Archive {
    goals: Vec<CoverageGoal>,
    entries: Vec<Option<TestCase>>,
}

impl Archive {
    pub fn new(module: &CompiledModule) -> Archive {
        let goals = all_goals(module);
        let entries = vec![None; goals.len()];
        Archive { goals, entries }
    }

    pub fn goals(&self) -> &[CoverageGoal] {
        &self.goals
    }

    /// Offers one executed case. Returns true when a previously uncovered
    /// goal got its first entry.
    pub fn consider(&mut self, case: &TestCase, trace: &ExecutionTrace) -> bool {
        let mut newly_covered = false;
        for (goal, entry) in self.goals.iter().zip(self.entries.iter_mut()) {
            if !goal_covered(trace, *goal) {
                continue;
            }
            match entry {
                None => {
                    *entry = Some(case.clone());
                    newly_covered = true;
                }
                Some(old) if case.len() < old.len() => *entry = Some(case.clone()),
                Some(_) => {}
            }
        }
        newly_covered
    }

    pub fn is_goal_covered(&self, index: usize) -> bool {
        self.entries[index].is_some()
    }

    pub fn entry(&self, index: usize) -> Option<&TestCase> {
        self.entries[index].as_ref()
    }

    pub fn covered(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    pub fn coverage(&self) -> f64 {
        if self.goals.is_empty() {
            return 1.0;
        }
        self.covered() as f64 / self.goals.len() as f64
    }

    pub fn complete(&self) -> bool {
        self.entries.iter().all(|e| e.is_some())
    }

    /// The archived cases as one suite, in goal order, each distinct case
    /// once.
    pub fn to_suite(&self) -> TestSuite {
        let mut seen: Vec<String> = Vec::new();
        let mut cases = Vec::new();
        for entry in self.entries.iter().flatten() {
            let rendered = render_case(entry, 0);
            if !seen.contains(&rendered) {
                seen.push(rendered);
                cases.push(entry.clone());
            }
        }
        TestSuite::new(cases)
    }
}

/// Batch form of archive maintenance: every candidate is offered in order.
pub fn update_archive<'a, I>(archive: &mut Archive, candidates: I)
where
    I: IntoIterator<Item = (&'a TestCase, &'a ExecutionTrace)>,
{
    for (case, trace) in candidates {
        archive.consider(case, trace);
    }
}

/// Settings for the population-based engines.
#[derive(Debug, Clone)]
pub struct GaConfig {
    pub population_size: usize,
    pub tournament_size: usize,
    pub elitism: usize,
    pub crossover_probability: f64,
    /// Most random cases in one initial suite individual.
    pub initial_case_count: usize,
}

impl Default for GaConfig {
    fn default() -> GaConfig {
        GaConfig {
            population_size: 50,
            tournament_size: 5,
            elitism: 1,
            crossover_probability: 0.750,
            initial_case_count: 10,
        }
    }
}

/// Everything one engine run needs, borrowed from the caller.
pub struct SearchJob<'a> {
    pub module: &'a CompiledModule,
    pub cluster: &'a TestCluster,
    pub operators: &'a SearchConfig,
    pub ga: &'a GaConfig,
    pub mio: &'a MioConfig,
    pub seed: u64,
    pub budget_s: u64,
    pub max_evaluations: Option<u64>,
}

impl<'a> SearchJob<'a> {
    pub fn stopping_condition(&self) -> StoppingCondition {
        let stop = StoppingCondition::from_seconds(self.budget_s);
        match self.max_evaluations {
            Some(n) => stop.with_max_evaluations(n),
            None => stop,
        }
    }
}

/// What a finished run hands back, uniform across engines.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// The generated tests. For the random engine this is the union of the
    /// passing and failing suites; for the others the archive or best
    /// individual.
    pub suite: TestSuite,
    /// Cases that raised or ran out of fuse, kept separately by the random
    /// engine; empty for the evolutionary engines.
    pub failing: TestSuite,
    pub series: TimeSeries,
    /// Branch coverage of `suite`, measured by a fresh re-execution.
    pub coverage: f64,
    pub evaluations: u64,
    pub virtual_elapsed_s: f64,
    pub stats: GenerationStats,
    /// Best suite fitness after each generation; only the suite-level
    /// engine fills this.
    pub best_fitness_per_generation: Vec<f64>,
}

/// Branch coverage of a suite under a fresh executor session, the number
/// reported to the outside.
pub fn coverage_of_suite(module: &CompiledModule, suite: &TestSuite) -> f64 {
    let mut executor = Executor::new(module);
    let traces: Vec<ExecutionTrace> = suite
        .cases
        .iter()
        .map(|case| executor.execute(case, &ExecutionBudget::default()).1)
        .collect();
    if traces.is_empty() {
        return branch_coverage(std::iter::empty::<&ExecutionTrace>(), module);
    }
    branch_coverage(traces.iter(), module)
}

/// One generation engine behind a common interface, so the algorithm is a
/// runtime choice.
pub trait SearchAlgorithm: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, job: &SearchJob) -> RunOutcome;
}

struct RandomEngine;
struct WholeSuiteEngine;
struct MosaEngine;
struct DynaMosaEngine;
struct MioEngine;

impl SearchAlgorithm for RandomEngine {
    fn name(&self) -> &'static str {
        "random"
    }
    fn run(&self, job: &SearchJob) -> RunOutcome {
        run_random(job)
    }
}

impl SearchAlgorithm for WholeSuiteEngine {
    fn name(&self) -> &'static str {
        "ws"
    }
    fn run(&self, job: &SearchJob) -> RunOutcome {
        run_whole_suite(job)
    }
}

impl SearchAlgorithm for MosaEngine {
    fn name(&self) -> &'static str {
        "mosa"
    }
    fn run(&self, job: &SearchJob) -> RunOutcome {
        run_mosa(job)
    }
}

impl SearchAlgorithm for DynaMosaEngine {
    fn name(&self) -> &'static str {
        "dynamosa"
    }
    fn run(&self, job: &SearchJob) -> RunOutcome {
        run_dynamosa(job)
    }
}

impl SearchAlgorithm for MioEngine {
    fn name(&self) -> &'static str {
        "mio"
    }
    fn run(&self, job: &SearchJob) -> RunOutcome {
        run_mio(job)
    }
}

/// All registered engines, in presentation order.
pub fn registry() -> Vec<Box<dyn SearchAlgorithm>> {
    vec![
        Box::new(RandomEngine),
        Box::new(WholeSuiteEngine),
        Box::new(MosaEngine),
        Box::new(DynaMosaEngine),
        Box::new(MioEngine),
    ]
}

pub fn algorithm_names() -> Vec<&'static str> {
    registry().iter().map(|a| a.name()).collect()
}

pub fn by_name(name: &str) -> Option<Box<dyn SearchAlgorithm>> {
    registry().into_iter().find(|a| a.name() == name)
}
