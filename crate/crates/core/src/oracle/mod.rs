//! Regression assertions for generated test cases.
//!
//! A generated case initially records only whether it raised. This module
//! runs each case twice in randomised order against a shared interpreter
//! session, snapshots the values produced by call statements, and keeps an
//! assertion only when both runs agree on its payload, so values that
//! depend on session state or ordering never become assertions. Raising
//! cases are classified by whether the callee declares the raised class:
//! declared raises become an expectation on the exact statement and class,
//! undeclared ones mark the whole case as an expected failure.
//!
//! Assertions capture the state at the end of the case, and rendered test
//! files place the checks after the last statement, so evaluating a case
//! in process and running its rendered form agree with each other.

pub mod minimize;
pub mod mutants;
pub mod snapshot;

mod emit;

pub use emit::render_annotated_suite;
pub use minimize::{minimize_assertions, mutation_score, KillMatrix, KillOutcome};
pub use mutants::{generate_mutants, Mutant};
pub use snapshot::{is_assertable, snapshot, SnapshotValue};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::cluster::declared_exceptions;
use crate::executor::{ExecutionBudget, ExecutionResult, Executor, StatementOutcome};
use crate::minidyn::{CompiledModule, Value};
use crate::testmodel::{StatementKind, TestCase, TestSuite, TypeRef};

/// Tolerance for float assertions, relative to the expected magnitude.
pub const RELATIVE_TOLERANCE: f64 = 1e-6;
/// Lower bound on the tolerance so expectations near zero stay satisfiable.
pub const ABSOLUTE_TOLERANCE: f64 = 1e-12;

pub fn float_tolerance(expected: f64) -> f64 {
    (expected.abs() * RELATIVE_TOLERANCE).max(ABSOLUTE_TOLERANCE)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Check {
    /// The value equals the recorded snapshot exactly.
    Eq(SnapshotValue),
    /// The value is a float within `tolerance` of `expected`.
    Approx { expected: f64, tolerance: f64 },
    /// The value is a collection of this length.
    Len(usize),
    /// The value is anything but `None`.
    NotNone,
}

/// One check against the value a statement defined, or against one of its
/// attributes, as observed after the whole case has run.
#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub statement: usize,
    pub attr: Option<String>,
    pub check: Check,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExceptionExpectation {
    /// The case runs to completion.
    None,
    /// The callee declares the raised class; the case must raise exactly
    /// this class at exactly this statement.
    Declared { statement: usize, class: String },
    /// The raise is undeclared or unstable; the case passes as long as it
    /// keeps failing somewhere.
    UndeclaredFailure,
}

/// A test case plus its regression oracle. For raising cases the statements
/// after the raise are dropped, since they never ran.
#[derive(Debug, Clone)]
pub struct AnnotatedCase {
    pub case: TestCase,
    pub assertions: Vec<Assertion>,
    pub exception: ExceptionExpectation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestOutcome {
    Pass,
    Fail,
    Timeout,
}

struct Observation {
    /// Snapshot per statement; filled only for call statements that
    /// completed.
    values: Vec<Option<SnapshotValue>>,
    raised: Option<(usize, String)>,
}

fn is_call(kind: &StatementKind) -> bool {
    matches!(
        kind,
        StatementKind::Constructor { .. }
            | StatementKind::Method { .. }
            | StatementKind::Function { .. }
    )
}

fn observe(executor: &mut Executor, case: &TestCase) -> Observation {
    let (result, _) = executor.execute(case, &ExecutionBudget::default());
    let mut values = vec![None; case.len()];
    for (i, stmt) in case.statements.iter().enumerate() {
        if !is_call(&stmt.kind) {
            continue;
        }
        if let StatementOutcome::Value(v) = &result.outcomes[i] {
            values[i] = Some(snapshot(v));
        }
    }
    let raised =
        result.raised_at.map(|at| (at, result.raised_class().unwrap_or_default().to_string()));
    Observation { values, raised }
}

/// Exception classes the callee of statement `s` declares, either by raising
/// them directly or by listing them in its docstring.
fn declared_for_statement(module: &CompiledModule, case: &TestCase, s: usize) -> Vec<String> {
    match &case.statements[s].kind {
        StatementKind::Function { function, .. } => module
            .ast
            .functions()
            .find(|f| f.name == *function)
            .map(declared_exceptions)
            .unwrap_or_default(),
        StatementKind::Constructor { class, .. } => module
            .ast
            .classes()
            .find(|c| c.name == *class)
            .and_then(|c| c.constructor.as_ref())
            .map(declared_exceptions)
            .unwrap_or_default(),
        StatementKind::Method { receiver, method, .. } => match case.type_of(*receiver) {
            Some(TypeRef::Class(class)) => module
                .ast
                .classes()
                .find(|c| c.name == *class)
                .and_then(|c| c.methods.iter().find(|m| m.name == *method))
                .map(declared_exceptions)
                .unwrap_or_default(),
            _ => Vec::new(),
        },
        StatementKind::Primitive(_) | StatementKind::Collection { .. } => Vec::new(),
    }
}

fn truncated_at_raise(case: &TestCase, at: usize) -> TestCase {
    let mut out = case.clone();
    out.statements.truncate(at + 1);
    out.last_raised_at = Some(at);
    out
}

/// Runs every case twice in shuffled order over one shared session and
/// builds the per-case oracles. The result is indexed like `suite.cases`.
pub fn annotate_suite<R: Rng>(
    suite: &TestSuite,
    module: &CompiledModule,
    rng: &mut R,
) -> Vec<AnnotatedCase> {
    let n = suite.cases.len();
    let mut executor = Executor::new(module);
    let mut first: Vec<Option<Observation>> = (0..n).map(|_| None).collect();
    let mut second: Vec<Option<Observation>> = (0..n).map(|_| None).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for &i in &order {
        first[i] = Some(observe(&mut executor, &suite.cases[i]));
    }
    order.shuffle(rng);
    for &i in &order {
        second[i] = Some(observe(&mut executor, &suite.cases[i]));
    }
    (0..n)
        .map(|i| {
            annotate_case(
                &suite.cases[i],
                module,
                first[i].as_ref().unwrap(),
                second[i].as_ref().unwrap(),
            )
        })
        .collect()
}

fn annotate_case(
    case: &TestCase,
    module: &CompiledModule,
    first: &Observation,
    second: &Observation,
) -> AnnotatedCase {
    match (&first.raised, &second.raised) {
        (Some((p1, c1)), Some((p2, c2))) if p1 == p2 && c1 == c2 => {
            let exception = if declared_for_statement(module, case, *p1).iter().any(|d| d == c1) {
                ExceptionExpectation::Declared { statement: *p1, class: c1.clone() }
            } else {
                ExceptionExpectation::UndeclaredFailure
            };
            AnnotatedCase { case: truncated_at_raise(case, *p1), assertions: Vec::new(), exception }
        }
        (None, None) => AnnotatedCase {
            case: case.clone(),
            assertions: assertions_for(case, first, second),
            exception: ExceptionExpectation::None,
        },
        // The runs disagree on whether or where the case raises. Pin it as
        // an expected failure, cut at the observed raise.
        (Some((p, _)), _) | (_, Some((p, _))) => AnnotatedCase {
            case: truncated_at_raise(case, *p),
            assertions: Vec::new(),
            exception: ExceptionExpectation::UndeclaredFailure,
        },
    }
}

fn assertions_for(case: &TestCase, first: &Observation, second: &Observation) -> Vec<Assertion> {
    let mut out = Vec::new();
    for s in 0..case.len() {
        let (Some(v1), Some(v2)) = (&first.values[s], &second.values[s]) else { continue };
        for a in candidate_assertions(s, v1) {
            if stable(&a, v2) {
                out.push(a);
            }
        }
    }
    out
}

/// The checks the first run suggests for one statement's value, strongest
/// applicable kind first: exact equality for builtin content, approximate
/// equality for floats, attribute checks for objects, a length check for
/// collections holding objects, and not-`None` as the last resort.
fn candidate_assertions(s: usize, value: &SnapshotValue) -> Vec<Assertion> {
    match value {
        SnapshotValue::Float(x) if x.is_finite() => vec![Assertion {
            statement: s,
            attr: None,
            check: Check::Approx { expected: *x, tolerance: float_tolerance(*x) },
        }],
        v if is_assertable(v) => {
            vec![Assertion { statement: s, attr: None, check: Check::Eq(v.clone()) }]
        }
        SnapshotValue::Object { attrs, .. } => {
            let mut out = Vec::new();
            for (name, value) in attrs {
                if name.starts_with('_') {
                    continue;
                }
                let check = match value {
                    SnapshotValue::Float(x) if x.is_finite() => {
                        Check::Approx { expected: *x, tolerance: float_tolerance(*x) }
                    }
                    v if is_assertable(v) => Check::Eq(v.clone()),
                    _ => continue,
                };
                out.push(Assertion { statement: s, attr: Some(name.clone()), check });
            }
            if out.is_empty() {
                out.push(Assertion { statement: s, attr: None, check: Check::NotNone });
            }
            out
        }
        SnapshotValue::List(_)
        | SnapshotValue::Tuple(_)
        | SnapshotValue::Set(_)
        | SnapshotValue::Map(_) => {
            let len = snapshot_len(value).unwrap();
            vec![Assertion { statement: s, attr: None, check: Check::Len(len) }]
        }
        _ => vec![Assertion { statement: s, attr: None, check: Check::NotNone }],
    }
}

/// Whether the second run produced the same payload the assertion captures.
/// An unstable candidate is dropped without falling back to a weaker check,
/// so a nondeterministic value yields no assertion at all.
fn stable(assertion: &Assertion, second: &SnapshotValue) -> bool {
    let target = match &assertion.attr {
        None => second,
        Some(name) => {
            let SnapshotValue::Object { attrs, .. } = second else { return false };
            match attrs.iter().find(|(n, _)| n == name) {
                Some((_, v)) => v,
                None => return false,
            }
        }
    };
    match &assertion.check {
        Check::Eq(expected) => target == expected,
        Check::Approx { expected, .. } => {
            matches!(target, SnapshotValue::Float(y) if y == expected)
        }
        Check::Len(n) => snapshot_len(target) == Some(*n),
        Check::NotNone => !matches!(target, SnapshotValue::None),
    }
}

fn snapshot_len(value: &SnapshotValue) -> Option<usize> {
    match value {
        SnapshotValue::List(items) | SnapshotValue::Tuple(items) | SnapshotValue::Set(items) => {
            Some(items.len())
        }
        SnapshotValue::Map(pairs) => Some(pairs.len()),
        _ => None,
    }
}

/// Runs an annotated case on a fresh interpreter and grades it. A fresh
/// session keeps the verdict independent of whatever ran before, which the
/// mutation analysis relies on when it compares original and mutant runs.
pub fn evaluate_case(
    annotated: &AnnotatedCase,
    module: &CompiledModule,
    budget: &ExecutionBudget,
) -> TestOutcome {
    let mut executor = Executor::new(module);
    let (result, _) = executor.execute(&annotated.case, budget);
    grade(annotated, &result)
}

pub(crate) fn grade(annotated: &AnnotatedCase, result: &ExecutionResult) -> TestOutcome {
    if result.budget_exhausted {
        return TestOutcome::Timeout;
    }
    let pass = match &annotated.exception {
        ExceptionExpectation::Declared { statement, class } => {
            result.raised_at == Some(*statement) && result.raised_class() == Some(class.as_str())
        }
        ExceptionExpectation::UndeclaredFailure => result.raised_at.is_some(),
        ExceptionExpectation::None => {
            result.raised_at.is_none()
                && annotated.assertions.iter().all(|a| assertion_holds(a, &result.outcomes))
        }
    };
    if pass {
        TestOutcome::Pass
    } else {
        TestOutcome::Fail
    }
}

fn assertion_holds(assertion: &Assertion, outcomes: &[StatementOutcome]) -> bool {
    let value = match outcomes.get(assertion.statement) {
        Some(StatementOutcome::Value(v)) => v,
        _ => return false,
    };
    let actual = match &assertion.attr {
        None => snapshot(value),
        Some(name) => match value {
            Value::Object(data) => match data.borrow().get(name) {
                Some(v) => snapshot(v),
                None => return false,
            },
            _ => return false,
        },
    };
    check_holds(&assertion.check, &actual)
}

fn check_holds(check: &Check, actual: &SnapshotValue) -> bool {
    match check {
        Check::Eq(expected) => actual == expected,
        // Written as two one-sided drift tests so the verdict matches the
        // rendered form of the check exactly, non-finite values included.
        Check::Approx { expected, tolerance } => match actual {
            SnapshotValue::Float(y) => !(y - expected > *tolerance || expected - y > *tolerance),
            _ => false,
        },
        Check::Len(n) => snapshot_len(actual) == Some(*n),
        Check::NotNone => !matches!(actual, SnapshotValue::None),
    }
}
