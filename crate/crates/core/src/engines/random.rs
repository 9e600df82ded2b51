//! Feedback-directed random generation. Two suites grow side by side: one
//! of cases that ran cleanly, one of cases that raised. Each iteration
//! extends a previously passing case (or an empty one) with a call to a
//! random public callable and routes the result by its outcome. No fitness
//! is involved; coverage is only watched for the early exit.

use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::{coverage_of_suite, RunOutcome, SearchJob, TimeSeries};
use crate::cluster::seed_constants;
use crate::executor::{branch_coverage, ExecutionBudget, ExecutionTrace, Executor};
use crate::operators::{append_call, GenCtx, GenerationStats};
use crate::testmodel::{render_case, TestCase, TestSuite};

pub fn run_random(job: &SearchJob) -> RunOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
    let mut stop = job.stopping_condition();
    let mut series = TimeSeries::new(job.budget_s);
    let mut stats = GenerationStats::default();
    let mut executor = Executor::new(job.module);
    executor.seeds = seed_constants(&job.module.ast);

    let mut passing: Vec<TestCase> = Vec::new();
    let mut failing: Vec<TestCase> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut union = ExecutionTrace::new(job.module);
    let mut coverage = 0.0;

    while !stop.reached() && coverage < 1.0 {
        if job.cluster.callables.is_empty() {
            break;
        }
        let pool = executor.seeds.clone();
        let mut ctx = GenCtx {
            cfg: job.operators,
            cluster: job.cluster,
            pool: &pool,
            rng: &mut rng,
            stats: &mut stats,
        };
        let target = ctx.rng.gen_range(0..job.cluster.callables.len());
        // The base is a random passing case or, one slot further, a fresh
        // empty one.
        let pick = ctx.rng.gen_range(0..=passing.len());
        let mut case =
            if pick == passing.len() { TestCase::new() } else { passing[pick].clone() };
        if !append_call(&mut case, target, &mut ctx) {
            // Nothing buildable this round; the attempt still costs time.
            stop.charge_overhead();
            continue;
        }
        let rendered = render_case(&case, 0);
        if seen.contains(&rendered) {
            stop.charge_overhead();
            continue;
        }
        let (result, trace) = executor.execute(&case, &ExecutionBudget::default());
        stop.charge(&result);
        case.last_raised_at = result.raised_at;
        union.merge_from(&trace);
        coverage = branch_coverage([&union], job.module);
        seen.insert(rendered);
        if result.raised_at.is_some() || result.budget_exhausted {
            failing.push(case);
        } else {
            passing.push(case);
        }
        series.observe(stop.elapsed_seconds(), coverage);
    }
    series.finish(coverage);

    let suite = TestSuite::new(passing.iter().chain(&failing).cloned().collect());
    let coverage = coverage_of_suite(job.module, &suite);
    RunOutcome {
        coverage,
        suite,
        failing: TestSuite::new(failing),
        series,
        evaluations: stop.evaluations(),
        virtual_elapsed_s: stop.elapsed_seconds(),
        stats,
        best_fitness_per_generation: Vec::new(),
    }
}
