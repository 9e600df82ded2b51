//! Fitness functions over execution traces: whole-suite fitness for the
//! suite-level search, per-goal case fitness for the many-objective
//! algorithms, plus normalization and approach levels.

use crate::executor::ExecutionTrace;
use crate::minidyn::bytecode::branch_predicate;
use crate::minidyn::{BranchDependence, CompiledModule};

/// One thing the search wants covered: a code object without branches, or
/// one side of a predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoverageGoal {
    BranchlessCodeObject(usize),
    BranchGoal(usize),
}

/// Every goal of a module, branchless code objects first, in id order.
pub fn all_goals(module: &CompiledModule) -> Vec<CoverageGoal> {
    let mut goals: Vec<CoverageGoal> = module
        .code_objects
        .iter()
        .filter(|co| co.is_branchless())
        .map(|co| CoverageGoal::BranchlessCodeObject(co.id))
        .collect();
    goals.extend((0..module.branch_count()).map(CoverageGoal::BranchGoal));
    goals
}

/// ν(x) = x/(x+1), extended with ν(∞) = 1, the supremum. Keeps every
/// distance inside [0, 1] without disturbing their order.
pub fn normalize(x: f64) -> f64 {
    debug_assert!(x >= 0.0 || x.is_nan());
    if x.is_infinite() {
        1.0
    } else {
        x / (x + 1.0)
    }
}

/// The union of a suite's traces, the view every suite-level measure works
/// on.
pub fn merge_traces<'a, I>(traces: I, module: &CompiledModule) -> ExecutionTrace
where
    I: IntoIterator<Item = &'a ExecutionTrace>,
{
    let mut union = ExecutionTrace::new(module);
    for t in traces {
        union.merge_from(t);
    }
    union
}

/// d(b, T) on the merged trace: 0 when the branch was taken, the
/// normalized minimal distance when its predicate ran at least twice, and
/// 1 otherwise. The two-evaluation guard stops a predicate covered from
/// one side only from pulling the search toward never re-executing it.
pub fn actual_branch_distance<'a, I>(branch: usize, traces: I) -> f64
where
    I: IntoIterator<Item = &'a ExecutionTrace>,
{
    let mut it = traces.into_iter();
    let Some(first) = it.next() else { return 1.0 };
    let mut union = first.clone();
    for t in it {
        union.merge_from(t);
    }
    branch_distance_in(branch, &union)
}

fn branch_distance_in(branch: usize, union: &ExecutionTrace) -> f64 {
    if union.covers(branch) {
        return 0.0;
    }
    if union.predicate_counts[branch_predicate(branch)] >= 2 {
        normalize(union.distances[branch])
    } else {
        1.0
    }
}

/// f(T): the number of unexecuted branchless code objects plus the summed
/// branch distances. Zero exactly at full branch coverage.
pub fn suite_fitness<'a, I>(traces: I, module: &CompiledModule) -> f64
where
    I: IntoIterator<Item = &'a ExecutionTrace>,
{
    let union = merge_traces(traces, module);
    let missed_branchless = module
        .code_objects
        .iter()
        .filter(|co| co.is_branchless() && !union.executed[co.id])
        .count();
    let branch_sum: f64 =
        (0..module.branch_count()).map(|b| branch_distance_in(b, &union)).sum();
    missed_branchless as f64 + branch_sum
}

/// Governing branches of `branch` whose predicate ran, nearest level
/// first: (level, minimal distance of an executed governor at that level).
/// None when nothing on any governing chain was executed.
fn nearest_executed_governor(
    trace: &ExecutionTrace,
    branch: usize,
    deps: &BranchDependence,
) -> Option<(usize, f64)> {
    let mut visited = vec![false; deps.n_branches];
    let mut frontier: Vec<usize> = deps.governed_by[branch].clone();
    for &g in &frontier {
        visited[g] = true;
    }
    let mut level = 1;
    while !frontier.is_empty() {
        let executed: Vec<usize> = frontier
            .iter()
            .copied()
            .filter(|&g| trace.predicate_counts[branch_predicate(g)] > 0)
            .collect();
        if !executed.is_empty() {
            let d = executed.iter().map(|&g| trace.distances[g]).fold(f64::INFINITY, f64::min);
            return Some((level, d));
        }
        let mut next = Vec::new();
        for &g in &frontier {
            for &h in &deps.governed_by[g] {
                if !visited[h] {
                    visited[h] = true;
                    next.push(h);
                }
            }
        }
        frontier = next;
        level += 1;
    }
    None
}

/// How many control-dependency levels separate the target branch from the
/// closest executed governing predicate: 0 when its own predicate ran, the
/// CDG depth of the target when execution never came near. The depth also
/// bounds the count, so a far-off executed governor is never reported
/// worse than a cold start.
pub fn approach_level(trace: &ExecutionTrace, branch: usize, deps: &BranchDependence) -> usize {
    if trace.predicate_counts[branch_predicate(branch)] > 0 {
        return 0;
    }
    match nearest_executed_governor(trace, branch, deps) {
        Some((level, _)) => level.min(deps.depth[branch]),
        None => deps.depth[branch],
    }
}

/// Per-goal fitness of a single test case. Branchless code objects score
/// binary. A branch goal scores its normalized distance once the predicate
/// ran, the approach level plus the critical governor's normalized
/// distance while nearby, and the CDG depth alone from a cold start.
pub fn case_fitness(
    trace: &ExecutionTrace,
    goal: CoverageGoal,
    deps: &BranchDependence,
) -> f64 {
    match goal {
        CoverageGoal::BranchlessCodeObject(id) => {
            if trace.executed[id] {
                0.0
            } else {
                1.0
            }
        }
        CoverageGoal::BranchGoal(branch) => {
            if trace.covers(branch) {
                return 0.0;
            }
            if trace.predicate_counts[branch_predicate(branch)] > 0 {
                return normalize(trace.distances[branch]);
            }
            let depth = deps.depth[branch] as f64;
            match nearest_executed_governor(trace, branch, deps) {
                Some((level, d)) => depth.min(level as f64 + normalize(d)),
                None => depth,
            }
        }
    }
}

/// Whether a single trace covers a goal outright.
pub fn goal_covered(trace: &ExecutionTrace, goal: CoverageGoal) -> bool {
    match goal {
        CoverageGoal::BranchlessCodeObject(id) => trace.executed[id],
        CoverageGoal::BranchGoal(branch) => trace.covers(branch),
    }
}
