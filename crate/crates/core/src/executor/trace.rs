//! What one execution leaves behind: which code objects ran, how often each
//! predicate was evaluated, and the minimal branch distances observed.

use std::time::Duration;

use crate::minidyn::bytecode::{false_branch, true_branch};
use crate::minidyn::{CompiledModule, Value};

/// Per-execution record. Branch ids index `distances`; a branch counts as
/// taken exactly when its minimal distance reached zero, so the taken set
/// needs no separate storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace {
    /// Indexed by code object id.
    pub executed: Vec<bool>,
    /// Evaluation count per predicate id.
    pub predicate_counts: Vec<u64>,
    /// Minimal observed distance per branch id, ∞ until first evaluation.
    pub distances: Vec<f64>,
}

impl ExecutionTrace {
    /// An empty trace: nothing executed, no distances. `execute` applies the
    /// import-time floor on top; synthetic traces for formula checks start
    /// from this blank state.
    pub fn new(module: &CompiledModule) -> Self {
        ExecutionTrace {
            executed: vec![false; module.code_objects.len()],
            predicate_counts: vec![0; module.predicates.len()],
            distances: vec![f64::INFINITY; module.branch_count()],
        }
    }

    pub fn mark_executed(&mut self, code_object: usize) {
        self.executed[code_object] = true;
    }

    /// Records one evaluation of a predicate, min-merging both branch
    /// distances.
    pub fn record(&mut self, predicate: usize, d_true: f64, d_false: f64) {
        debug_assert!((d_true == 0.0) ^ (d_false == 0.0));
        self.predicate_counts[predicate] += 1;
        let t = true_branch(predicate);
        let f = false_branch(predicate);
        if d_true < self.distances[t] {
            self.distances[t] = d_true;
        }
        if d_false < self.distances[f] {
            self.distances[f] = d_false;
        }
    }

    pub fn covers(&self, branch: usize) -> bool {
        self.distances[branch] == 0.0
    }

    pub fn taken_branches(&self) -> impl Iterator<Item = usize> + '_ {
        self.distances.iter().enumerate().filter(|(_, d)| **d == 0.0).map(|(b, _)| b)
    }

    /// Folds another trace in: suite-level views work on the pointwise union.
    pub fn merge_from(&mut self, other: &ExecutionTrace) {
        for (mine, theirs) in self.executed.iter_mut().zip(&other.executed) {
            *mine |= *theirs;
        }
        for (mine, theirs) in self.predicate_counts.iter_mut().zip(&other.predicate_counts) {
            *mine += *theirs;
        }
        for (mine, theirs) in self.distances.iter_mut().zip(&other.distances) {
            if *theirs < *mine {
                *mine = *theirs;
            }
        }
    }
}

/// What happened at one statement of a test case.
#[derive(Debug, Clone)]
pub enum StatementOutcome {
    /// Control never reached the statement (earlier exception or cutoff).
    NotExecuted,
    /// The statement completed and defined this value.
    Value(Value),
    /// The statement raised.
    Raised { class: String, message: String },
}

impl StatementOutcome {
    pub fn value(&self) -> Option<&Value> {
        match self {
            StatementOutcome::Value(v) => Some(v),
            _ => None,
        }
    }
}

/// Per-case execution verdict, one outcome per statement.
#[derive(Debug, Clone)]
pub struct ExecutionResult {
    pub outcomes: Vec<StatementOutcome>,
    /// Index of the first raising statement, if any.
    pub raised_at: Option<usize>,
    /// The instruction or wall-clock fuse fired before the case finished.
    pub budget_exhausted: bool,
    /// Interpreted instructions consumed, module import included.
    pub instructions: u64,
    pub wall: Duration,
}

impl ExecutionResult {
    /// Ran to completion without raising.
    pub fn passed(&self) -> bool {
        self.raised_at.is_none() && !self.budget_exhausted
    }

    pub fn raised_class(&self) -> Option<&str> {
        let at = self.raised_at?;
        match &self.outcomes[at] {
            StatementOutcome::Raised { class, .. } => Some(class),
            _ => None,
        }
    }
}

/// Interpreter fuse: both limits must be positive.
#[derive(Debug, Clone)]
pub struct ExecutionBudget {
    pub max_instructions: u64,
    pub max_wall: Duration,
}

impl Default for ExecutionBudget {
    fn default() -> Self {
        ExecutionBudget { max_instructions: 1_000_000, max_wall: Duration::from_secs(1) }
    }
}
