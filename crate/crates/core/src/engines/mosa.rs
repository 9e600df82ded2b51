//! Many-objective search over individual test cases. Every coverage goal
//! is its own objective; preference sorting pulls the per-goal best cases
//! into the first front and an external archive keeps the shortest witness
//! for each goal ever covered. The dynamic variant starts with only the
//! goals whose predicates are reachable without taking any other branch
//! and opens up deeper goals as their governing branches get covered.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::{
    coverage_of_suite, crowding_distances, preference_sort, Archive, RunOutcome, SearchJob,
    StoppingCondition, TimeSeries,
};
use crate::cluster::seed_constants;
use crate::executor::{ExecutionBudget, Executor};
use crate::fitness::{all_goals, case_fitness, CoverageGoal};
use crate::minidyn::{branch_dependence, BranchDependence};
use crate::operators::{crossover_cases, mutate_case, sample_test_case, GenCtx, GenerationStats};
use crate::testmodel::{TestCase, TestSuite};

#[derive(Debug, Clone)]
struct Cand {
    case: TestCase,
    fitness: Vec<f64>,
    rank: usize,
    crowding: f64,
}

pub fn run_mosa(job: &SearchJob) -> RunOutcome {
    many_objective(job, false)
}

pub fn run_dynamosa(job: &SearchJob) -> RunOutcome {
    many_objective(job, true)
}

/// Marks every branch goal whose governing branches are all covered as
/// active, repeating until nothing changes so freshly activated goals can
/// enable their own dependents in the same pass.
fn expand_active(
    active: &mut [bool],
    archive: &Archive,
    deps: &BranchDependence,
    n_branchless: usize,
) {
    loop {
        let mut changed = false;
        for b in 0..deps.n_branches {
            let g = n_branchless + b;
            if active[g] {
                continue;
            }
            let ready = deps.governed_by[b]
                .iter()
                .all(|&gov| archive.is_goal_covered(n_branchless + gov));
            if ready {
                active[g] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

fn evaluate(
    mut case: TestCase,
    executor: &mut Executor,
    stop: &mut StoppingCondition,
    goals: &[CoverageGoal],
    deps: &BranchDependence,
    archive: &mut Archive,
    series: &mut TimeSeries,
) -> Cand {
    let (result, trace) = executor.execute(&case, &ExecutionBudget::default());
    stop.charge(&result);
    case.last_raised_at = result.raised_at;
    archive.consider(&case, &trace);
    series.observe(stop.elapsed_seconds(), archive.coverage());
    let fitness = goals.iter().map(|&g| case_fitness(&trace, g, deps)).collect();
    Cand { case, fitness, rank: 0, crowding: 0.0 }
}

fn tournament<R: Rng>(population: &[Cand], size: usize, rng: &mut R) -> usize {
    let mut best = rng.gen_range(0..population.len());
    for _ in 1..size {
        let i = rng.gen_range(0..population.len());
        let better = population[i].rank < population[best].rank
            || (population[i].rank == population[best].rank
                && population[i].crowding > population[best].crowding);
        if better {
            best = i;
        }
    }
    best
}

/// Rebuilds the population from fronts: whole fronts while they fit, then
/// the next front's most isolated members. Rank and crowding stick to each
/// survivor for the following round of tournaments.
fn environmental_selection(combined: Vec<Cand>, size: usize, goal_idx: &[usize]) -> Vec<Cand> {
    let matrix: Vec<Vec<f64>> = combined.iter().map(|c| c.fitness.clone()).collect();
    let lengths: Vec<usize> = combined.iter().map(|c| c.case.len()).collect();
    let fronts = preference_sort(&matrix, &lengths, goal_idx);
    let mut slots: Vec<Option<Cand>> = combined.into_iter().map(Some).collect();
    let mut next: Vec<Cand> = Vec::with_capacity(size);
    for (r, front) in fronts.iter().enumerate() {
        if next.len() == size {
            break;
        }
        let dist = crowding_distances(front, &matrix, goal_idx);
        if next.len() + front.len() <= size {
            for (k, &i) in front.iter().enumerate() {
                let mut c = slots[i].take().expect("front members are distinct");
                c.rank = r;
                c.crowding = dist[k];
                next.push(c);
            }
        } else {
            let mut order: Vec<usize> = (0..front.len()).collect();
            order.sort_by(|&x, &y| {
                dist[y]
                    .partial_cmp(&dist[x])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(front[x].cmp(&front[y]))
            });
            for &k in order.iter().take(size - next.len()) {
                let mut c = slots[front[k]].take().expect("front members are distinct");
                c.rank = r;
                c.crowding = dist[k];
                next.push(c);
            }
            break;
        }
    }
    next
}

fn many_objective(job: &SearchJob, dynamic: bool) -> RunOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
    let mut stop = job.stopping_condition();
    let mut series = TimeSeries::new(job.budget_s);
    let mut stats = GenerationStats::default();
    let mut executor = Executor::new(job.module);
    executor.seeds = seed_constants(&job.module.ast);
    let deps = branch_dependence(job.module);
    let goals = all_goals(job.module);
    let n_branchless = goals
        .iter()
        .filter(|g| matches!(g, CoverageGoal::BranchlessCodeObject(_)))
        .count();
    let mut archive = Archive::new(job.module);

    let mut active: Vec<bool> = if dynamic {
        goals
            .iter()
            .map(|g| match g {
                CoverageGoal::BranchlessCodeObject(_) => true,
                CoverageGoal::BranchGoal(b) => deps.governed_by[*b].is_empty(),
            })
            .collect()
    } else {
        vec![true; goals.len()]
    };

    let mut population: Vec<Cand> = Vec::with_capacity(job.ga.population_size);
    for _ in 0..job.ga.population_size {
        let case = {
            let pool = executor.seeds.clone();
            let mut ctx = GenCtx {
                cfg: job.operators,
                cluster: job.cluster,
                pool: &pool,
                rng: &mut rng,
                stats: &mut stats,
            };
            sample_test_case(&mut ctx)
        };
        population.push(evaluate(
            case,
            &mut executor,
            &mut stop,
            &goals,
            &deps,
            &mut archive,
            &mut series,
        ));
    }
    if dynamic {
        expand_active(&mut active, &archive, &deps, n_branchless);
    }
    let uncovered =
        |active: &[bool], archive: &Archive| -> Vec<usize> {
            (0..active.len()).filter(|&g| active[g] && !archive.is_goal_covered(g)).collect()
        };
    population = environmental_selection(
        population,
        job.ga.population_size,
        &uncovered(&active, &archive),
    );

    while !stop.reached() && !archive.complete() {
        let mut offspring: Vec<Cand> = Vec::with_capacity(job.ga.population_size);
        while offspring.len() < job.ga.population_size && !stop.reached() {
            let i1 = tournament(&population, job.ga.tournament_size, &mut rng);
            let i2 = tournament(&population, job.ga.tournament_size, &mut rng);
            let (m1, m2) = {
                let pool = executor.seeds.clone();
                let mut ctx = GenCtx {
                    cfg: job.operators,
                    cluster: job.cluster,
                    pool: &pool,
                    rng: &mut rng,
                    stats: &mut stats,
                };
                let (c1, c2) = if ctx.rng.gen::<f64>() < job.ga.crossover_probability {
                    crossover_cases(&population[i1].case, &population[i2].case, &mut ctx)
                } else {
                    (population[i1].case.clone(), population[i2].case.clone())
                };
                (mutate_case(&c1, &mut ctx), mutate_case(&c2, &mut ctx))
            };
            for m in [m1, m2] {
                offspring.push(evaluate(
                    m,
                    &mut executor,
                    &mut stop,
                    &goals,
                    &deps,
                    &mut archive,
                    &mut series,
                ));
            }
        }
        if dynamic {
            expand_active(&mut active, &archive, &deps, n_branchless);
        }
        let mut combined = population;
        combined.extend(offspring);
        population = environmental_selection(
            combined,
            job.ga.population_size,
            &uncovered(&active, &archive),
        );
    }
    series.finish(archive.coverage());

    let suite = archive.to_suite();
    let failing: Vec<TestCase> =
        suite.cases.iter().filter(|c| c.last_raised_at.is_some()).cloned().collect();
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::build_test_cluster;
    use crate::engines::{GaConfig, MioConfig};
    use crate::executor::ExecutionTrace;
    use crate::minidyn::{compile_module, parse_module, CompiledModule};
    use crate::operators::SearchConfig;
    use crate::testmodel::render_suite;

    fn compiled(source: &str) -> CompiledModule {
        let ast = parse_module("m", source).expect("parse");
        compile_module(&ast).expect("compile")
    }

    struct Setup {
        module: CompiledModule,
        cluster: crate::cluster::TestCluster,
        cfg: SearchConfig,
        ga: GaConfig,
        mio: MioConfig,
    }

    impl Setup {
        fn new(source: &str) -> Setup {
            let module = compiled(source);
            let cluster = build_test_cluster(&module, true);
            Setup {
                module,
                cluster,
                cfg: SearchConfig::default(),
                ga: GaConfig::default(),
                mio: MioConfig::default(),
            }
        }

        fn job(&self, seed: u64, budget_s: u64) -> SearchJob<'_> {
            SearchJob {
                module: &self.module,
                cluster: &self.cluster,
                operators: &self.cfg,
                ga: &self.ga,
                mio: &self.mio,
                seed,
                budget_s,
                max_evaluations: None,
            }
        }
    }

    const NESTED: &str = "def f(a: Int, b: Int) -> Int:\n\
                          \x20   if a > 0:\n\
                          \x20       if b > 10:\n\
                          \x20           return 3\n\
                          \x20       return 2\n\
                          \x20   return 1\n";

    #[test]
    fn the_coverage_series_never_decreases() {
        let setup = Setup::new(NESTED);
        let out = run_mosa(&setup.job(2, 5));
        let rows: Vec<(u64, f64)> = out.series.rows().collect();
        for pair in rows.windows(2) {
            assert!(pair[1].1 >= pair[0].1, "coverage dropped: {:?}", rows);
        }
    }

    #[test]
    fn a_branchless_module_is_complete_after_the_first_evaluations() {
        let setup = Setup::new("def seven() -> Int:\n    return 7\n");
        let out = run_mosa(&setup.job(1, 10));
        assert_eq!(out.coverage, 1.0);
        assert!(out.evaluations <= setup.ga.population_size as u64);
    }

    #[test]
    fn nested_branches_get_covered() {
        let setup = Setup::new(NESTED);
        let out = run_mosa(&setup.job(4, 30));
        assert_eq!(out.coverage, 1.0);
        assert!(out.virtual_elapsed_s < 30.0);
    }

    #[test]
    fn identical_seeds_replay_identically() {
        let setup = Setup::new(NESTED);
        let a = run_mosa(&setup.job(17, 3));
        let b = run_mosa(&setup.job(17, 3));
        assert_eq!(render_suite(&a.suite), render_suite(&b.suite));
        assert_eq!(a.series, b.series);
    }

    #[test]
    fn dynamic_goal_expansion_waits_for_the_governing_branch() {
        let module = compiled(NESTED);
        let deps = branch_dependence(&module);
        let goals = all_goals(&module);
        let n_branchless = goals
            .iter()
            .filter(|g| matches!(g, CoverageGoal::BranchlessCodeObject(_)))
            .count();
        let mut archive = Archive::new(&module);
        let mut active: Vec<bool> = goals
            .iter()
            .map(|g| match g {
                CoverageGoal::BranchlessCodeObject(_) => true,
                CoverageGoal::BranchGoal(b) => deps.governed_by[*b].is_empty(),
            })
            .collect();
        // The outer predicate's branches are roots; the inner pair is
        // governed by the outer true branch and starts inactive.
        assert!(active[n_branchless]);
        assert!(active[n_branchless + 1]);
        assert!(!active[n_branchless + 2]);
        assert!(!active[n_branchless + 3]);

        // Covering only the outer false branch unlocks nothing new.
        let mut trace = ExecutionTrace::new(&module);
        trace.record(0, 5.0, 0.0);
        archive.consider(&TestCase::new(), &trace);
        expand_active(&mut active, &archive, &deps, n_branchless);
        assert!(!active[n_branchless + 2]);

        // Covering the outer true branch makes the inner goals active.
        let mut trace = ExecutionTrace::new(&module);
        trace.record(0, 0.0, 5.0);
        archive.consider(&TestCase::new(), &trace);
        expand_active(&mut active, &archive, &deps, n_branchless);
        assert!(active[n_branchless + 2]);
        assert!(active[n_branchless + 3]);
    }

    #[test]
    fn dynamic_and_plain_variants_agree_on_a_branchless_module() {
        let setup = Setup::new("def seven() -> Int:\n    return 7\n");
        let a = run_mosa(&setup.job(9, 5));
        let b = run_dynamosa(&setup.job(9, 5));
        assert_eq!(render_suite(&a.suite), render_suite(&b.suite));
    }

    #[test]
    fn the_dynamic_variant_covers_nested_branches() {
        let setup = Setup::new(NESTED);
        let out = run_dynamosa(&setup.job(6, 30));
        assert_eq!(out.coverage, 1.0);
    }
}
