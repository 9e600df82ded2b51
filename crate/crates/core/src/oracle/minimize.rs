//! Mutation analysis: which mutants does the annotated suite kill, and
//! which assertions earn their place. An assertion is kept exactly when
//! removing it would let some currently killed mutant survive, so the
//! mutation score after minimisation equals the score of the full
//! assertion set.

use crate::executor::{ExecutionBudget, Executor};
use crate::minidyn::CompiledModule;

use super::mutants::Mutant;
use super::{grade, AnnotatedCase, Assertion, Check, TestOutcome};

/// A mutant run may legitimately diverge, so it gets a bounded multiple of
/// the original run's work before it counts as a timeout.
const BUDGET_FACTOR: u64 = 4;
const BUDGET_FLOOR: u64 = 20_000;

fn mutant_budget(original_instructions: u64) -> ExecutionBudget {
    ExecutionBudget {
        max_instructions: original_instructions
            .saturating_mul(BUDGET_FACTOR)
            .max(BUDGET_FLOOR),
        ..ExecutionBudget::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KillOutcome {
    /// The case's verdict differs between original and mutant.
    Killed,
    /// The mutant behaves like the original as far as this case can tell.
    Survived,
    /// The mutant exhausted its budget; that never counts as a kill.
    Timeout,
}

/// Case-by-mutant table: `outcomes[case][mutant]`.
#[derive(Debug, Clone)]
pub struct KillMatrix {
    pub n_mutants: usize,
    pub outcomes: Vec<Vec<KillOutcome>>,
}

impl KillMatrix {
    pub fn mutant_killed(&self, mutant: usize) -> bool {
        self.outcomes.iter().any(|row| row[mutant] == KillOutcome::Killed)
    }

    pub fn killed_count(&self) -> usize {
        (0..self.n_mutants).filter(|&m| self.mutant_killed(m)).count()
    }
}

/// Fraction of mutants some case kills; nothing to report without mutants.
pub fn mutation_score(matrix: &KillMatrix) -> Option<f64> {
    if matrix.n_mutants == 0 {
        None
    } else {
        Some(matrix.killed_count() as f64 / matrix.n_mutants as f64)
    }
}

fn run(annotated: &AnnotatedCase, module: &CompiledModule, budget: &ExecutionBudget) -> (TestOutcome, u64) {
    let mut executor = Executor::new(module);
    let (result, _) = executor.execute(&annotated.case, budget);
    (grade(annotated, &result), result.instructions)
}

fn kills(original: TestOutcome, mutant: TestOutcome) -> bool {
    original != TestOutcome::Timeout && mutant != TestOutcome::Timeout && original != mutant
}

/// Drops every assertion whose removal leaves all currently killed mutants
/// killed, then reports the kill table of what remains. Weaker checks are
/// offered up first so the stronger ones carry the kills. Removing an
/// assertion can only shrink a case's kill set, never grow it, so only the
/// killed mutants need re-checking. A case that kills nothing keeps its
/// assertions: there is no evidence to trim on.
pub fn minimize_assertions(
    cases: &mut [AnnotatedCase],
    module: &CompiledModule,
    mutants: &[Mutant],
) -> KillMatrix {
    if mutants.is_empty() {
        return KillMatrix { n_mutants: 0, outcomes: vec![Vec::new(); cases.len()] };
    }

    let originals: Vec<(TestOutcome, ExecutionBudget)> = cases
        .iter()
        .map(|annotated| {
            let (outcome, instructions) = run(annotated, module, &ExecutionBudget::default());
            (outcome, mutant_budget(instructions))
        })
        .collect();

    for (annotated, (original, budget)) in cases.iter_mut().zip(&originals) {
        let killed: Vec<usize> = (0..mutants.len())
            .filter(|&m| kills(*original, run(annotated, &mutants[m].module, budget).0))
            .collect();
        if killed.is_empty() {
            continue;
        }
        for candidate in removal_plan(&annotated.assertions) {
            let Some(index) = annotated.assertions.iter().position(|a| *a == candidate) else {
                continue;
            };
            let removed = annotated.assertions.remove(index);
            let still_killed = killed
                .iter()
                .all(|&m| kills(*original, run(annotated, &mutants[m].module, budget).0));
            if !still_killed {
                annotated.assertions.insert(index, removed);
            }
        }
    }

    let outcomes = cases
        .iter()
        .zip(&originals)
        .map(|(annotated, (original, budget))| {
            mutants
                .iter()
                .map(|mutant| {
                    let (outcome, _) = run(annotated, &mutant.module, budget);
                    if outcome == TestOutcome::Timeout {
                        KillOutcome::Timeout
                    } else if kills(*original, outcome) {
                        KillOutcome::Killed
                    } else {
                        KillOutcome::Survived
                    }
                })
                .collect()
        })
        .collect();
    KillMatrix { n_mutants: mutants.len(), outcomes }
}

fn strength(check: &Check) -> u8 {
    match check {
        Check::NotNone => 0,
        Check::Len(_) => 1,
        Check::Approx { .. } => 2,
        Check::Eq(_) => 3,
    }
}

/// Removal candidates, weakest check first; later assertions go before
/// earlier ones of the same strength.
fn removal_plan(assertions: &[Assertion]) -> Vec<Assertion> {
    let mut order: Vec<usize> = (0..assertions.len()).collect();
    order.sort_by(|&a, &b| {
        strength(&assertions[a].check)
            .cmp(&strength(&assertions[b].check))
            .then(b.cmp(&a))
    });
    order.into_iter().map(|i| assertions[i].clone()).collect()
}
