//! Single-individual search with one small population per coverage goal.
//! Each round produces one test case: a continued mutation of the previous
//! one, a fresh random case, or a mutant of a stored case for an uncovered
//! goal. Control parameters slide linearly from an exploring setting to a
//! focused one and stay there once the focus point of the budget is passed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::{coverage_of_suite, Archive, RunOutcome, SearchJob, TimeSeries};
use crate::cluster::seed_constants;
use crate::executor::{ExecutionBudget, Executor};
use crate::fitness::{all_goals, case_fitness, CoverageGoal};
use crate::minidyn::branch_dependence;
use crate::operators::{mutate_case, sample_test_case, GenCtx, GenerationStats};
use crate::testmodel::{TestCase, TestSuite};

/// One point in parameter space: per-goal population capacity, probability
/// of sampling a brand new case, and how many times a case is mutated
/// before the next one is drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MioPhase {
    pub population_size: usize,
    pub random_probability: f64,
    pub mutation_count: u32,
}

#[derive(Debug, Clone)]
pub struct MioConfig {
    pub exploration: MioPhase,
    pub exploitation: MioPhase,
    /// Fraction of the budget after which the exploitation settings hold
    /// exactly.
    pub focus_start: f64,
}

impl Default for MioConfig {
    fn default() -> MioConfig {
        MioConfig {
            exploration: MioPhase {
                population_size: 10,
                random_probability: 0.5,
                mutation_count: 1,
            },
            exploitation: MioPhase {
                population_size: 1,
                random_probability: 0.0,
                mutation_count: 10,
            },
            focus_start: 0.5,
        }
    }
}

impl MioConfig {
    /// Parameters in effect after `fraction` of the budget is spent:
    /// a linear blend of the two phases before the focus point, the
    /// exploitation phase from there on. The integer parameters round to
    /// the nearest value and never drop below one.
    pub fn parameters_at(&self, fraction: f64) -> MioPhase {
        if fraction >= self.focus_start {
            return self.exploitation;
        }
        let w = if self.focus_start > 0.0 {
            (fraction / self.focus_start).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let lerp = |a: f64, b: f64| a + (b - a) * w;
        let population = lerp(
            self.exploration.population_size as f64,
            self.exploitation.population_size as f64,
        );
        let mutations = lerp(
            self.exploration.mutation_count as f64,
            self.exploitation.mutation_count as f64,
        );
        MioPhase {
            population_size: (population.round() as usize).max(1),
            random_probability: lerp(
                self.exploration.random_probability,
                self.exploitation.random_probability,
            ),
            mutation_count: (mutations.round() as u32).max(1),
        }
    }
}

#[derive(Debug, Clone)]
struct StoredCase {
    case: TestCase,
    fitness: f64,
}

/// Drops the entry with the worst (fitness, length) pair; ties fall on the
/// most recently added one.
fn remove_worst(entries: &mut Vec<StoredCase>) {
    if entries.is_empty() {
        return;
    }
    let mut worst = 0;
    for i in 1..entries.len() {
        let candidate = (entries[i].fitness, entries[i].case.len());
        let incumbent = (entries[worst].fitness, entries[worst].case.len());
        if candidate >= incumbent {
            worst = i;
        }
    }
    entries.remove(worst);
}

pub fn run_mio(job: &SearchJob) -> RunOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
    let mut stop = job.stopping_condition();
    let mut series = TimeSeries::new(job.budget_s);
    let mut stats = GenerationStats::default();
    let mut executor = Executor::new(job.module);
    executor.seeds = seed_constants(&job.module.ast);
    let deps = branch_dependence(job.module);
    let goals = all_goals(job.module);
    let mut archive = Archive::new(job.module);

    // A goal's stored cases only ever made progress toward it; the
    // baseline a branch goal has to beat is its cold-start fitness.
    let threshold: Vec<f64> = goals
        .iter()
        .map(|g| match g {
            CoverageGoal::BranchlessCodeObject(_) => 1.0,
            CoverageGoal::BranchGoal(b) => deps.depth[*b] as f64,
        })
        .collect();
    let mut stored: Vec<Vec<StoredCase>> = vec![Vec::new(); goals.len()];
    let mut sample_counts: Vec<u64> = vec![0; goals.len()];
    let mut current: Option<TestCase> = None;
    let mut mutations_done: u32 = 1;

    while !stop.reached() && !archive.complete() {
        let params = job.mio.parameters_at(stop.fraction_used());
        for entries in stored.iter_mut() {
            while entries.len() > params.population_size {
                remove_worst(entries);
            }
        }

        let sampleable: Vec<usize> = (0..goals.len())
            .filter(|&g| !archive.is_goal_covered(g) && !stored[g].is_empty())
            .collect();
        let case = {
            let pool = executor.seeds.clone();
            let mut ctx = GenCtx {
                cfg: job.operators,
                cluster: job.cluster,
                pool: &pool,
                rng: &mut rng,
                stats: &mut stats,
            };
            if let Some(prev) = current
                .as_ref()
                .filter(|_| mutations_done < params.mutation_count)
            {
                mutations_done += 1;
                mutate_case(prev, &mut ctx)
            } else if current.is_none()
                || sampleable.is_empty()
                || ctx.rng.gen::<f64>() < params.random_probability
            {
                mutations_done = 1;
                sample_test_case(&mut ctx)
            } else {
                mutations_done = 1;
                let goal = sampleable
                    .iter()
                    .copied()
                    .min_by_key(|&g| (sample_counts[g], g))
                    .expect("sampleable is non-empty");
                sample_counts[goal] += 1;
                let pick = ctx.rng.gen_range(0..stored[goal].len());
                let base = stored[goal][pick].case.clone();
                mutate_case(&base, &mut ctx)
            }
        };

        let (result, trace) = executor.execute(&case, &ExecutionBudget::default());
        stop.charge(&result);
        let mut case = case;
        case.last_raised_at = result.raised_at;
        archive.consider(&case, &trace);
        series.observe(stop.elapsed_seconds(), archive.coverage());

        for g in 0..goals.len() {
            let f = case_fitness(&trace, goals[g], &deps);
            if f == 0.0 {
                // Covered: the archive holds a witness, the working set is
                // no longer needed.
                stored[g].clear();
            } else if f < threshold[g] && !archive.is_goal_covered(g) {
                stored[g].push(StoredCase { case: case.clone(), fitness: f });
                sample_counts[g] = 0;
                while stored[g].len() > params.population_size {
                    remove_worst(&mut stored[g]);
                }
            }
        }
        current = Some(case);
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
    use crate::engines::GaConfig;
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

    #[test]
    fn parameters_interpolate_toward_the_focus_point() {
        let cfg = MioConfig::default();
        assert_eq!(
            cfg.parameters_at(0.0),
            MioPhase { population_size: 10, random_probability: 0.5, mutation_count: 1 }
        );
        assert_eq!(
            cfg.parameters_at(0.1),
            MioPhase { population_size: 8, random_probability: 0.4, mutation_count: 3 }
        );
        assert_eq!(
            cfg.parameters_at(0.25),
            MioPhase { population_size: 6, random_probability: 0.25, mutation_count: 6 }
        );
        assert_eq!(cfg.parameters_at(0.5), cfg.exploitation);
        assert_eq!(cfg.parameters_at(1.0), cfg.exploitation);
    }

    fn entry(fitness: f64, len: usize) -> StoredCase {
        let mut case = TestCase::new();
        for _ in 0..len {
            let var = case.fresh_var();
            case.statements.push(crate::testmodel::Statement {
                var,
                declared_type: crate::testmodel::TypeRef::Int,
                kind: crate::testmodel::StatementKind::Primitive(
                    crate::testmodel::PrimitiveValue::Int(0),
                ),
            });
        }
        StoredCase { case, fitness }
    }

    #[test]
    fn the_worst_entry_leaves_first() {
        let mut entries = vec![entry(0.25, 3), entry(0.75, 1), entry(0.5, 2)];
        remove_worst(&mut entries);
        let left: Vec<f64> = entries.iter().map(|e| e.fitness).collect();
        assert_eq!(left, vec![0.25, 0.5]);

        // Equal fitness: the longer case goes; full ties drop the newest.
        let mut entries = vec![entry(0.5, 1), entry(0.5, 4), entry(0.5, 2)];
        remove_worst(&mut entries);
        assert_eq!(entries.iter().map(|e| e.case.len()).collect::<Vec<_>>(), vec![1, 2]);
        let mut entries = vec![entry(0.5, 2), entry(0.5, 2)];
        remove_worst(&mut entries);
        assert_eq!(entries.len(), 1);
    }

    #[test]
    fn a_branching_module_reaches_full_coverage() {
        let setup = Setup::new(
            "def ceil_div(a: Int, b: Int) -> Int:\n\
             \x20   if b == 0:\n\
             \x20       raise ZeroDivisionError(\"division by zero\")\n\
             \x20   return (a + b - 1) // b\n",
        );
        let out = run_mio(&setup.job(8, 30));
        assert_eq!(out.coverage, 1.0);
        assert!(out.virtual_elapsed_s < 30.0);
    }

    #[test]
    fn a_branchless_module_finishes_almost_immediately() {
        let setup = Setup::new("def seven() -> Int:\n    return 7\n");
        let out = run_mio(&setup.job(2, 10));
        assert_eq!(out.coverage, 1.0);
        assert!(out.evaluations <= 2);
    }

    #[test]
    fn identical_seeds_replay_identically() {
        let setup = Setup::new(
            "def sign(x: Int) -> Int:\n\
             \x20   if x > 0:\n\
             \x20       return 1\n\
             \x20   if x < 0:\n\
             \x20       return 0 - 1\n\
             \x20   return 0\n",
        );
        let a = run_mio(&setup.job(13, 3));
        let b = run_mio(&setup.job(13, 3));
        assert_eq!(render_suite(&a.suite), render_suite(&b.suite));
        assert_eq!(a.series, b.series);
    }
}
