//! Turns annotated cases into a renderable test module. Each case becomes a
//! `test_case_N` function whose body repeats the case's statements and then
//! checks the recorded assertions, so running the rendered file reproduces
//! the in-process verdict. A declared raise wraps its statement in an
//! `expect` block; an expected failure is flagged in the docstring because
//! the language has nothing like a test marker.

use crate::minidyn::ast::{
    Arg, AssignTarget, CallTarget, Cond, Expr, FunctionDef, Item, Literal, ParamKind, Stmt,
};
use crate::minidyn::render::render_module;
use crate::minidyn::value::{BinOp, CmpOp};
use crate::minidyn::ModuleAst;
use crate::testmodel::{
    variable_names, BoundValue, CollectionKind, ParamBinding, Statement, StatementKind, VarId,
};

use super::{AnnotatedCase, Assertion, Check, ExceptionExpectation, SnapshotValue};

pub fn render_annotated_suite(cases: &[AnnotatedCase]) -> String {
    render_module(&tests_module(cases))
}

/// The test file as an AST, one function per case, in suite order.
pub fn tests_module(cases: &[AnnotatedCase]) -> ModuleAst {
    ModuleAst {
        name: "tests".to_string(),
        items: cases
            .iter()
            .enumerate()
            .map(|(i, c)| Item::Function(test_function(c, i)))
            .collect(),
    }
}

fn test_function(annotated: &AnnotatedCase, index: usize) -> FunctionDef {
    let names = variable_names(&annotated.case);
    let name_of =
        |var: VarId| names[annotated.case.index_of(var).expect("undefined variable")].clone();
    let mut body: Vec<Stmt> =
        annotated.case.statements.iter().map(|s| statement_stmt(s, &name_of)).collect();
    if let ExceptionExpectation::Declared { class, .. } = &annotated.exception {
        let raising = body.pop().expect("a raising case has at least one statement");
        body.push(Stmt::Expect { class: class.clone(), body: Box::new(raising) });
    }
    for assertion in &annotated.assertions {
        body.push(assertion_stmt(assertion, &names));
    }
    if body.is_empty() {
        body.push(Stmt::Assign {
            target: AssignTarget::Name("pass_placeholder".to_string()),
            value: Expr::Literal(Literal::Int(0)),
        });
    }
    let docstring = match &annotated.exception {
        ExceptionExpectation::UndeclaredFailure => {
            Some("expected failure: this case must raise".to_string())
        }
        _ => None,
    };
    FunctionDef { name: format!("test_case_{index}"), params: vec![], return_type: None, docstring, body }
}

fn statement_stmt(stmt: &Statement, name_of: &dyn Fn(VarId) -> String) -> Stmt {
    let value = match &stmt.kind {
        StatementKind::Primitive(p) => Expr::Literal(p.to_literal()),
        StatementKind::Constructor { class, bindings } => Expr::Call {
            target: CallTarget::Name(class.clone()),
            args: call_args(bindings, name_of),
        },
        StatementKind::Method { receiver, method, bindings } => Expr::Call {
            target: CallTarget::Method {
                object: Box::new(Expr::Name(name_of(*receiver))),
                name: method.clone(),
            },
            args: call_args(bindings, name_of),
        },
        StatementKind::Function { function, bindings } => Expr::Call {
            target: CallTarget::Name(function.clone()),
            args: call_args(bindings, name_of),
        },
        StatementKind::Collection { kind, elements, pairs } => {
            collection_expr(kind, elements, pairs, name_of)
        }
    };
    Stmt::Assign { target: AssignTarget::Name(name_of(stmt.var)), value }
}

fn call_args(bindings: &[ParamBinding], name_of: &dyn Fn(VarId) -> String) -> Vec<Arg> {
    let mut args = Vec::new();
    for b in bindings {
        let value = match b.value {
            BoundValue::Omitted => continue,
            BoundValue::NoneVal => Expr::Literal(Literal::None),
            BoundValue::Var(v) => Expr::Name(name_of(v)),
        };
        args.push(match b.kind {
            ParamKind::Normal => {
                if b.by_keyword {
                    Arg::Keyword(b.param.clone(), value)
                } else {
                    Arg::Positional(value)
                }
            }
            ParamKind::Star => Arg::Star(value),
            ParamKind::DoubleStar => Arg::DoubleStar(value),
        });
    }
    args
}

fn collection_expr(
    kind: &CollectionKind,
    elements: &[VarId],
    pairs: &[(VarId, VarId)],
    name_of: &dyn Fn(VarId) -> String,
) -> Expr {
    let as_names = |vars: &[VarId]| vars.iter().map(|v| Expr::Name(name_of(*v))).collect();
    match kind {
        CollectionKind::List => Expr::ListLit(as_names(elements)),
        CollectionKind::Tuple => Expr::TupleLit(as_names(elements)),
        CollectionKind::Set => {
            if elements.is_empty() {
                Expr::EmptySet
            } else {
                Expr::SetLit(as_names(elements))
            }
        }
        CollectionKind::Map => Expr::MapLit(
            pairs
                .iter()
                .map(|(k, v)| (Expr::Name(name_of(*k)), Expr::Name(name_of(*v))))
                .collect(),
        ),
    }
}

/// One assertion as a guard: `if <violated>: raise AssertionError(...)`.
fn assertion_stmt(assertion: &Assertion, names: &[String]) -> Stmt {
    let base = names[assertion.statement].clone();
    let (target, label) = match &assertion.attr {
        None => (Expr::Name(base.clone()), base),
        Some(attr) => (
            Expr::Attr { object: Box::new(Expr::Name(base.clone())), attr: attr.clone() },
            format!("{base}.{attr}"),
        ),
    };
    match &assertion.check {
        Check::Eq(expected) => guard(
            Cond::Atom(Expr::Compare {
                op: CmpOp::Ne,
                lhs: Box::new(target),
                rhs: Box::new(snapshot_expr(expected)),
            }),
            format!("{label} changed"),
        ),
        Check::Approx { expected, tolerance } => {
            let drift = |lhs: Expr, rhs: Expr| {
                Cond::Atom(Expr::Compare {
                    op: CmpOp::Gt,
                    lhs: Box::new(Expr::Binary {
                        op: BinOp::Sub,
                        lhs: Box::new(lhs),
                        rhs: Box::new(rhs),
                    }),
                    rhs: Box::new(Expr::Literal(Literal::Float(*tolerance))),
                })
            };
            let expected_lit = Expr::Literal(Literal::Float(*expected));
            guard(
                Cond::Or(
                    Box::new(drift(target.clone(), expected_lit.clone())),
                    Box::new(drift(expected_lit, target)),
                ),
                format!("{label} drifted"),
            )
        }
        Check::Len(n) => guard(
            Cond::Atom(Expr::Compare {
                op: CmpOp::Ne,
                lhs: Box::new(Expr::Call {
                    target: CallTarget::Name("len".to_string()),
                    args: vec![Arg::Positional(target)],
                }),
                rhs: Box::new(Expr::Literal(Literal::Int(*n as i64))),
            }),
            format!("len({label}) changed"),
        ),
        Check::NotNone => guard(
            Cond::Atom(Expr::Compare {
                op: CmpOp::Is,
                lhs: Box::new(target),
                rhs: Box::new(Expr::Literal(Literal::None)),
            }),
            format!("{label} is None"),
        ),
    }
}

fn guard(violated: Cond, message: String) -> Stmt {
    Stmt::If {
        arms: vec![(
            violated,
            vec![Stmt::Raise {
                class: "AssertionError".to_string(),
                message: Expr::Literal(Literal::Str(message)),
            }],
        )],
        else_body: None,
    }
}

/// Spells an assertable snapshot out as a literal expression.
fn snapshot_expr(value: &SnapshotValue) -> Expr {
    match value {
        SnapshotValue::Int(n) => Expr::Literal(Literal::Int(*n)),
        SnapshotValue::Float(x) => Expr::Literal(Literal::Float(*x)),
        SnapshotValue::Bool(b) => Expr::Literal(Literal::Bool(*b)),
        SnapshotValue::Str(s) => Expr::Literal(Literal::Str(s.clone())),
        SnapshotValue::Bytes(b) => Expr::Literal(Literal::Bytes(b.clone())),
        SnapshotValue::None => Expr::Literal(Literal::None),
        SnapshotValue::List(items) => Expr::ListLit(items.iter().map(snapshot_expr).collect()),
        SnapshotValue::Tuple(items) => Expr::TupleLit(items.iter().map(snapshot_expr).collect()),
        SnapshotValue::Set(items) => {
            if items.is_empty() {
                Expr::EmptySet
            } else {
                Expr::SetLit(items.iter().map(snapshot_expr).collect())
            }
        }
        SnapshotValue::Map(pairs) => Expr::MapLit(
            pairs.iter().map(|(k, v)| (snapshot_expr(k), snapshot_expr(v))).collect(),
        ),
        SnapshotValue::Object { .. } | SnapshotValue::Opaque => {
            unreachable!("equality checks are only built from assertable snapshots")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{annotate_suite, evaluate_case, TestOutcome};
    use super::*;
    use crate::executor::ExecutionBudget;
    use crate::minidyn::{compile_module, parse_module};
    use crate::testmodel::{PrimitiveValue, TestCase, TestSuite, TypeRef};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn compiled(src: &str) -> crate::minidyn::CompiledModule {
        compile_module(&parse_module("m", src).unwrap()).unwrap()
    }

    const SUT: &str = "class Counter:\n    def __init__(self, start: Int):\n        self.count = start\n\n    def bump(self) -> Int:\n        self.count = self.count + 1\n        return self.count\n\ndef divide(x: Int, y: Int) -> Float:\n    if y < 0:\n        raise ValueError(\"negative denominator\")\n    return x / y\n";

    fn int_stmt(case: &mut TestCase, value: i64) -> VarId {
        let var = case.fresh_var();
        case.statements.push(Statement {
            var,
            declared_type: TypeRef::Int,
            kind: StatementKind::Primitive(PrimitiveValue::Int(value)),
        });
        var
    }

    fn call_divide(case: &mut TestCase, x: VarId, y: VarId) -> VarId {
        let var = case.fresh_var();
        let bind = |param: &str, v: VarId| ParamBinding {
            param: param.to_string(),
            kind: ParamKind::Normal,
            has_default: false,
            declared_type: TypeRef::Int,
            value: BoundValue::Var(v),
            by_keyword: false,
        };
        case.statements.push(Statement {
            var,
            declared_type: TypeRef::Float,
            kind: StatementKind::Function {
                function: "divide".to_string(),
                bindings: vec![bind("x", x), bind("y", y)],
            },
        });
        var
    }

    fn sample_suite() -> TestSuite {
        let mut passing = TestCase::new();
        let a = int_stmt(&mut passing, 1);
        let b = int_stmt(&mut passing, 2);
        call_divide(&mut passing, a, b);

        let mut declared = TestCase::new();
        let a = int_stmt(&mut declared, 1);
        let b = int_stmt(&mut declared, -1);
        call_divide(&mut declared, a, b);

        let mut undeclared = TestCase::new();
        let a = int_stmt(&mut undeclared, 1);
        let b = int_stmt(&mut undeclared, 0);
        call_divide(&mut undeclared, a, b);

        let mut counting = TestCase::new();
        let start = int_stmt(&mut counting, 0);
        let recv = counting.fresh_var();
        counting.statements.push(Statement {
            var: recv,
            declared_type: TypeRef::Class("Counter".to_string()),
            kind: StatementKind::Constructor {
                class: "Counter".to_string(),
                bindings: vec![ParamBinding {
                    param: "start".to_string(),
                    kind: ParamKind::Normal,
                    has_default: false,
                    declared_type: TypeRef::Int,
                    value: BoundValue::Var(start),
                    by_keyword: false,
                }],
            },
        });
        let var = counting.fresh_var();
        counting.statements.push(Statement {
            var,
            declared_type: TypeRef::Int,
            kind: StatementKind::Method {
                receiver: recv,
                method: "bump".to_string(),
                bindings: vec![],
            },
        });

        TestSuite { cases: vec![passing, declared, undeclared, counting] }
    }

    #[test]
    fn the_rendered_suite_parses_back() {
        let module = compiled(SUT);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let annotated = annotate_suite(&sample_suite(), &module, &mut rng);
        let rendered = render_annotated_suite(&annotated);
        parse_module("tests", &rendered).expect("rendered tests must parse");
        assert!(rendered.contains("def test_case_0():"));
        assert!(rendered.contains("expect ValueError:"));
        assert!(rendered.contains("expected failure"));
        assert!(rendered.contains("raise AssertionError("));
    }

    #[test]
    fn assertions_render_as_guards_on_the_recorded_values() {
        let module = compiled(SUT);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let annotated = annotate_suite(&sample_suite(), &module, &mut rng);
        let rendered = render_annotated_suite(&annotated);
        // The counter case asserts the attribute and the returned value.
        assert!(rendered.contains("counter_0.count != 1"));
        assert!(rendered.contains("int_1 != 1"));
        // The float case asserts drift in both directions.
        assert!(rendered.contains("float_0 - 0.5 >"));
        assert!(rendered.contains("0.5 - float_0 >"));
    }

    #[test]
    fn rendered_passing_tests_run_clean_against_the_module_under_test() {
        let module = compiled(SUT);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let annotated = annotate_suite(&sample_suite(), &module, &mut rng);

        // Only completing cases go into the combined module; expect blocks
        // exist for the test runner, not the compiler.
        let completing: Vec<AnnotatedCase> = annotated
            .iter()
            .filter(|a| a.exception == ExceptionExpectation::None)
            .cloned()
            .collect();
        assert_eq!(completing.len(), 2);
        for case in &completing {
            assert_eq!(
                evaluate_case(case, &module, &ExecutionBudget::default()),
                TestOutcome::Pass
            );
        }

        let sut_ast = parse_module("m", SUT).unwrap();
        let tests = tests_module(&completing);
        let mut combined_items = sut_ast.items.clone();
        combined_items.extend(tests.items.clone());
        let combined = compile_module(&ModuleAst {
            name: "combined".to_string(),
            items: combined_items,
        })
        .expect("module plus passing tests must compile");

        for (i, _) in completing.iter().enumerate() {
            let mut driver = TestCase::new();
            let var = driver.fresh_var();
            driver.statements.push(Statement {
                var,
                declared_type: TypeRef::Dynamic,
                kind: StatementKind::Function {
                    function: format!("test_case_{i}"),
                    bindings: vec![],
                },
            });
            let mut executor = crate::executor::Executor::new(&combined);
            let (result, _) = executor.execute(&driver, &ExecutionBudget::default());
            assert_eq!(result.raised_at, None, "test_case_{i} raised when run as code");
        }
    }

    #[test]
    fn an_empty_case_renders_a_placeholder_body() {
        let annotated = AnnotatedCase {
            case: TestCase::new(),
            assertions: Vec::new(),
            exception: ExceptionExpectation::None,
        };
        let rendered = render_annotated_suite(&[annotated]);
        assert!(rendered.contains("pass_placeholder = 0"));
        parse_module("tests", &rendered).unwrap();
    }

    #[test]
    fn snapshot_literals_cover_collections() {
        let value = SnapshotValue::Map(vec![
            (
                SnapshotValue::Str("k".to_string()),
                SnapshotValue::List(vec![SnapshotValue::Int(1), SnapshotValue::Float(0.5)]),
            ),
            (SnapshotValue::Str("empty".to_string()), SnapshotValue::Set(vec![])),
        ]);
        let mut case = TestCase::new();
        let var = case.fresh_var();
        case.statements.push(Statement {
            var,
            declared_type: TypeRef::Map,
            kind: StatementKind::Function { function: "make".to_string(), bindings: vec![] },
        });
        let annotated = AnnotatedCase {
            case,
            assertions: vec![Assertion { statement: 0, attr: None, check: Check::Eq(value) }],
            exception: ExceptionExpectation::None,
        };
        let rendered = render_annotated_suite(&[annotated]);
        assert!(rendered.contains("{\"k\": [1, 0.5], \"empty\": set()}"));
        parse_module("tests", &rendered).unwrap();
    }
}
