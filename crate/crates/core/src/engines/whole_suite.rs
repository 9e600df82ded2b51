//! Whole-suite evolution. Individuals are complete test suites scored by
//! the single aggregate fitness; a monotonic replacement rule keeps a pair
//! of offspring only when their better one beats the better parent, and
//! elitism carries the best suites over unchanged, so the best fitness
//! never regresses between generations.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::{coverage_of_suite, RunOutcome, SearchJob, StoppingCondition, TimeSeries};
use crate::cluster::seed_constants;
use crate::executor::{branch_coverage, ExecutionBudget, Executor};
use crate::fitness::suite_fitness;
use crate::minidyn::CompiledModule;
use crate::operators::{
    crossover_suites, mutate_suite, sample_test_case, GenCtx, GenerationStats,
};
use crate::testmodel::{TestCase, TestSuite};

#[derive(Debug, Clone)]
struct Individual {
    suite: TestSuite,
    fitness: f64,
    statements: usize,
    coverage: f64,
}

/// Lexicographic on (fitness, size): ties in fitness go to the smaller
/// suite.
fn better(a: &Individual, b: &Individual) -> bool {
    (a.fitness, a.statements) < (b.fitness, b.statements)
}

fn best_of<'a>(a: &'a Individual, b: &'a Individual) -> &'a Individual {
    if better(b, a) {
        b
    } else {
        a
    }
}

fn evaluate(
    mut suite: TestSuite,
    executor: &mut Executor,
    stop: &mut StoppingCondition,
    module: &CompiledModule,
) -> Individual {
    let mut traces = Vec::with_capacity(suite.size());
    for case in &mut suite.cases {
        let (result, trace) = executor.execute(case, &ExecutionBudget::default());
        stop.charge(&result);
        case.last_raised_at = result.raised_at;
        traces.push(trace);
    }
    let fitness = suite_fitness(traces.iter(), module);
    let coverage = branch_coverage(traces.iter(), module);
    let statements = suite.total_statements();
    Individual { suite, fitness, statements, coverage }
}

fn tournament<R: Rng>(population: &[Individual], size: usize, rng: &mut R) -> usize {
    let mut best = rng.gen_range(0..population.len());
    for _ in 1..size {
        let i = rng.gen_range(0..population.len());
        if (population[i].fitness, population[i].statements, i)
            < (population[best].fitness, population[best].statements, best)
        {
            best = i;
        }
    }
    best
}

pub fn run_whole_suite(job: &SearchJob) -> RunOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
    let mut stop = job.stopping_condition();
    let mut series = TimeSeries::new(job.budget_s);
    let mut stats = GenerationStats::default();
    let mut executor = Executor::new(job.module);
    executor.seeds = seed_constants(&job.module.ast);
    let ga = job.ga;

    let mut population: Vec<Individual> = Vec::with_capacity(ga.population_size);
    for _ in 0..ga.population_size {
        let suite = {
            let pool = executor.seeds.clone();
            let mut ctx = GenCtx {
                cfg: job.operators,
                cluster: job.cluster,
                pool: &pool,
                rng: &mut rng,
                stats: &mut stats,
            };
            let want = ctx.rng.gen_range(1..=ga.initial_case_count.max(1));
            let mut cases: Vec<TestCase> = Vec::new();
            let mut misses = 0;
            while cases.len() < want && misses < 10 * want {
                let case = sample_test_case(&mut ctx);
                if case.is_empty() {
                    misses += 1;
                } else {
                    cases.push(case);
                }
            }
            TestSuite::new(cases)
        };
        population.push(evaluate(suite, &mut executor, &mut stop, job.module));
    }

    let mut best = population
        .iter()
        .min_by(|a, b| {
            (a.fitness, a.statements)
                .partial_cmp(&(b.fitness, b.statements))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .cloned()
        .expect("population is never empty");
    let mut best_per_generation = vec![best.fitness];
    series.observe(stop.elapsed_seconds(), best.coverage);

    while !stop.reached() && best.fitness > 0.0 {
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| {
            (population[a].fitness, population[a].statements, a)
                .partial_cmp(&(population[b].fitness, population[b].statements, b))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut next: Vec<Individual> = order
            .iter()
            .take(ga.elitism.min(population.len()))
            .map(|&i| population[i].clone())
            .collect();

        let mut interrupted = false;
        while next.len() < ga.population_size {
            if stop.reached() {
                interrupted = true;
                break;
            }
            let i1 = tournament(&population, ga.tournament_size, &mut rng);
            let i2 = tournament(&population, ga.tournament_size, &mut rng);
            let (m1, m2) = {
                let pool = executor.seeds.clone();
                let mut ctx = GenCtx {
                    cfg: job.operators,
                    cluster: job.cluster,
                    pool: &pool,
                    rng: &mut rng,
                    stats: &mut stats,
                };
                let (c1, c2) = if ctx.rng.gen::<f64>() < ga.crossover_probability {
                    crossover_suites(&population[i1].suite, &population[i2].suite, ctx.rng)
                } else {
                    (population[i1].suite.clone(), population[i2].suite.clone())
                };
                (mutate_suite(&c1, &mut ctx), mutate_suite(&c2, &mut ctx))
            };
            let o1 = evaluate(m1, &mut executor, &mut stop, job.module);
            let o2 = evaluate(m2, &mut executor, &mut stop, job.module);
            for candidate in [&o1, &o2] {
                if better(candidate, &best) {
                    best = candidate.clone();
                }
            }
            series.observe(stop.elapsed_seconds(), best.coverage);
            if better(best_of(&o1, &o2), best_of(&population[i1], &population[i2])) {
                next.push(o1);
                next.push(o2);
            } else {
                next.push(population[i1].clone());
                next.push(population[i2].clone());
            }
        }
        // A generation cut short by the budget is thrown away; the previous
        // population already holds every individual that was fully scored.
        if interrupted {
            break;
        }
        next.truncate(ga.population_size);
        population = next;
        best_per_generation.push(best.fitness);
    }
    series.finish(best.coverage);

    let failing: Vec<TestCase> =
        best.suite.cases.iter().filter(|c| c.last_raised_at.is_some()).cloned().collect();
    let coverage = coverage_of_suite(job.module, &best.suite);
    RunOutcome {
        coverage,
        suite: best.suite,
        failing: TestSuite::new(failing),
        series,
        evaluations: stop.evaluations(),
        virtual_elapsed_s: stop.elapsed_seconds(),
        stats,
        best_fitness_per_generation: best_per_generation,
    }
}
