//! Sandboxed execution of test cases against a compiled module: a bytecode
//! interpreter with an instruction fuse, per-predicate branch distance
//! recording, and the coverage computation over recorded traces.

mod distance;
mod interp;
mod trace;

pub use distance::{comparison_distances, levenshtein, truthiness_distances, K};
pub use interp::{branch_coverage, ExecSession, Executor};
pub use trace::{
    ExecutionBudget, ExecutionResult, ExecutionTrace, StatementOutcome,
};
