//! The chromosome representation: statements, test cases, and suites.
//!
//! A test case is a straight-line sequence of statements. Each statement
//! defines one variable, identified by a [`VarId`] that is unique within
//! its case; later statements refer to earlier variables only. Rendering
//! derives the surface names (`int_0`, `point_1`, ...) from statement
//! order, so two structurally equal cases always render identically.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::minidyn::ast::{Literal, ParamKind};
use crate::minidyn::render::render_literal;

/// Upper bound L on statements per test case.
pub const MAX_CASE_LEN: usize = 50;
/// Upper bound N on test cases per suite.
pub const MAX_SUITE_SIZE: usize = 50;

pub type VarId = u32;

/// The statically known type of a variable, used to find reuse candidates
/// and to check binding legality. Collections are matched by their outer
/// constructor only.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypeRef {
    Int,
    Float,
    Bool,
    Str,
    Bytes,
    List,
    Set,
    Tuple,
    Map,
    Class(String),
    /// Statically unknown, e.g. the result of an unannotated function.
    Dynamic,
}

impl TypeRef {
    /// Whether a variable of this type satisfies a request for `wanted`.
    /// `Dynamic` matches nothing statically; callers that want to gamble
    /// on dynamic values must opt in explicitly.
    pub fn satisfies(&self, wanted: &TypeRef) -> bool {
        self == wanted
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrimitiveValue {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Bytes(Vec<u8>),
}

impl PrimitiveValue {
    pub fn type_ref(&self) -> TypeRef {
        match self {
            PrimitiveValue::Int(_) => TypeRef::Int,
            PrimitiveValue::Float(_) => TypeRef::Float,
            PrimitiveValue::Bool(_) => TypeRef::Bool,
            PrimitiveValue::Str(_) => TypeRef::Str,
            PrimitiveValue::Bytes(_) => TypeRef::Bytes,
        }
    }

    pub fn to_literal(&self) -> Literal {
        match self {
            PrimitiveValue::Int(v) => Literal::Int(*v),
            PrimitiveValue::Float(v) => Literal::Float(*v),
            PrimitiveValue::Bool(v) => Literal::Bool(*v),
            PrimitiveValue::Str(s) => Literal::Str(s.clone()),
            PrimitiveValue::Bytes(b) => Literal::Bytes(b.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollectionKind {
    List,
    Set,
    Tuple,
    Map,
}

impl CollectionKind {
    pub fn type_ref(&self) -> TypeRef {
        match self {
            CollectionKind::List => TypeRef::List,
            CollectionKind::Set => TypeRef::Set,
            CollectionKind::Tuple => TypeRef::Tuple,
            CollectionKind::Map => TypeRef::Map,
        }
    }
}

/// What a call statement passes for one formal parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundValue {
    /// Parameter left out; legal only with a default or for star kinds.
    Omitted,
    /// The literal `None` passed directly.
    NoneVal,
    Var(VarId),
}

/// One formal parameter of the callee together with what is passed for it.
/// Bindings go in declaration order of the callee's parameters, `self`
/// excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBinding {
    pub param: String,
    pub kind: ParamKind,
    pub has_default: bool,
    pub declared_type: TypeRef,
    pub value: BoundValue,
    /// Render as `name=value`; ignored for star kinds.
    pub by_keyword: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StatementKind {
    Primitive(PrimitiveValue),
    Constructor { class: String, bindings: Vec<ParamBinding> },
    Method { receiver: VarId, method: String, bindings: Vec<ParamBinding> },
    Function { function: String, bindings: Vec<ParamBinding> },
    Collection { kind: CollectionKind, elements: Vec<VarId>, pairs: Vec<(VarId, VarId)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    /// The variable this statement defines.
    pub var: VarId,
    /// Static type of the defined variable, fixed at creation time.
    pub declared_type: TypeRef,
    pub kind: StatementKind,
}

impl Statement {
    /// Variables this statement reads, in positional order.
    pub fn references(&self) -> Vec<VarId> {
        let mut refs = Vec::new();
        match &self.kind {
            StatementKind::Primitive(_) => {}
            StatementKind::Constructor { bindings, .. }
            | StatementKind::Function { bindings, .. } => {
                for b in bindings {
                    if let BoundValue::Var(v) = b.value {
                        refs.push(v);
                    }
                }
            }
            StatementKind::Method { receiver, bindings, .. } => {
                refs.push(*receiver);
                for b in bindings {
                    if let BoundValue::Var(v) = b.value {
                        refs.push(v);
                    }
                }
            }
            StatementKind::Collection { elements, pairs, .. } => {
                refs.extend(elements.iter().copied());
                for (k, v) in pairs {
                    refs.push(*k);
                    refs.push(*v);
                }
            }
        }
        refs
    }

    /// Rewrites every variable reference through `map`.
    pub fn remap(&mut self, map: &dyn Fn(VarId) -> VarId) {
        self.var = map(self.var);
        match &mut self.kind {
            StatementKind::Primitive(_) => {}
            StatementKind::Constructor { bindings, .. }
            | StatementKind::Function { bindings, .. } => {
                for b in bindings {
                    if let BoundValue::Var(v) = &mut b.value {
                        *v = map(*v);
                    }
                }
            }
            StatementKind::Method { receiver, bindings, .. } => {
                *receiver = map(*receiver);
                for b in bindings {
                    if let BoundValue::Var(v) = &mut b.value {
                        *v = map(*v);
                    }
                }
            }
            StatementKind::Collection { elements, pairs, .. } => {
                for e in elements {
                    *e = map(*e);
                }
                for (k, v) in pairs {
                    *k = map(*k);
                    *v = map(*v);
                }
            }
        }
    }

    /// Whether this statement calls into the module under test.
    pub fn is_call(&self) -> bool {
        matches!(
            self.kind,
            StatementKind::Constructor { .. }
                | StatementKind::Method { .. }
                | StatementKind::Function { .. }
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TestCase {
    pub statements: Vec<Statement>,
    next_var: VarId,
    /// Statement index of the exception in this case's last execution.
    /// Not part of structural equality concerns; carried for the
    /// exception-truncation mutation.
    pub last_raised_at: Option<usize>,
}

impl TestCase {
    pub fn new() -> TestCase {
        TestCase::default()
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn fresh_var(&mut self) -> VarId {
        let v = self.next_var;
        self.next_var += 1;
        v
    }

    pub fn statement_of(&self, var: VarId) -> Option<&Statement> {
        self.statements.iter().find(|s| s.var == var)
    }

    pub fn index_of(&self, var: VarId) -> Option<usize> {
        self.statements.iter().position(|s| s.var == var)
    }

    pub fn type_of(&self, var: VarId) -> Option<&TypeRef> {
        self.statement_of(var).map(|s| &s.declared_type)
    }

    /// Variables defined strictly before statement `index` whose type
    /// satisfies `wanted`.
    pub fn vars_before(&self, index: usize, wanted: &TypeRef) -> Vec<VarId> {
        self.statements[..index.min(self.statements.len())]
            .iter()
            .filter(|s| s.declared_type.satisfies(wanted))
            .map(|s| s.var)
            .collect()
    }

    /// Deep copy with fresh variable identities starting from zero.
    pub fn clone_with_rename(&self) -> TestCase {
        let mut clone = TestCase::new();
        let mut mapping: Vec<(VarId, VarId)> = Vec::with_capacity(self.statements.len());
        for stmt in &self.statements {
            let new_var = clone.fresh_var();
            mapping.push((stmt.var, new_var));
            let mut s = stmt.clone();
            s.remap(&|v| {
                mapping.iter().find(|(old, _)| *old == v).map(|(_, new)| *new).unwrap_or(v)
            });
            clone.statements.push(s);
        }
        clone.last_raised_at = self.last_raised_at;
        clone
    }

    /// Drops statement `index` and every later statement that transitively
    /// referenced its variable. Returns how many statements were removed.
    pub fn remove_statement_cascading(&mut self, index: usize) -> usize {
        let mut dead: HashSet<VarId> = HashSet::new();
        dead.insert(self.statements[index].var);
        let mut keep = Vec::with_capacity(self.statements.len());
        let mut removed = 0;
        for (i, s) in self.statements.drain(..).enumerate() {
            if i == index || s.references().iter().any(|v| dead.contains(v)) {
                dead.insert(s.var);
                removed += 1;
            } else {
                keep.push(s);
            }
        }
        self.statements = keep;
        self.last_raised_at = None;
        removed
    }
}

#[derive(Debug, Clone, Default)]
pub struct TestSuite {
    pub cases: Vec<TestCase>,
}

impl TestSuite {
    pub fn new(cases: Vec<TestCase>) -> TestSuite {
        TestSuite { cases }
    }

    pub fn size(&self) -> usize {
        self.cases.len()
    }

    pub fn total_statements(&self) -> usize {
        self.cases.iter().map(|c| c.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ForwardReference { statement: usize, var: VarId },
    DuplicateDefinition { statement: usize, var: VarId },
    IllegalBinding { statement: usize, param: String, reason: String },
    SizeBound { len: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::ForwardReference { statement, var } => {
                write!(f, "statement {statement} references undefined variable {var}")
            }
            Violation::DuplicateDefinition { statement, var } => {
                write!(f, "statement {statement} redefines variable {var}")
            }
            Violation::IllegalBinding { statement, param, reason } => {
                write!(f, "statement {statement}, parameter `{param}`: {reason}")
            }
            Violation::SizeBound { len } => {
                write!(f, "case has {len} statements, allowed range is 1..={MAX_CASE_LEN}")
            }
        }
    }
}

/// Structural validity: definition-before-use, binding legality, and the
/// size bound. Violations are collected, not thrown.
pub fn validate_test_case(case: &TestCase) -> Vec<Violation> {
    let mut violations = Vec::new();
    if case.is_empty() || case.len() > MAX_CASE_LEN {
        violations.push(Violation::SizeBound { len: case.len() });
    }
    let mut defined: HashSet<VarId> = HashSet::new();
    for (i, stmt) in case.statements.iter().enumerate() {
        for var in stmt.references() {
            if !defined.contains(&var) {
                violations.push(Violation::ForwardReference { statement: i, var });
            }
        }
        if let StatementKind::Constructor { bindings, .. }
        | StatementKind::Method { bindings, .. }
        | StatementKind::Function { bindings, .. } = &stmt.kind
        {
            validate_bindings(case, i, bindings, &mut violations);
        }
        if !defined.insert(stmt.var) {
            violations.push(Violation::DuplicateDefinition { statement: i, var: stmt.var });
        }
    }
    violations
}

fn validate_bindings(
    case: &TestCase,
    statement: usize,
    bindings: &[ParamBinding],
    violations: &mut Vec<Violation>,
) {
    let mut keyword_seen = false;
    for b in bindings {
        match b.kind {
            ParamKind::Normal => match b.value {
                BoundValue::Omitted => {
                    if !b.has_default {
                        violations.push(Violation::IllegalBinding {
                            statement,
                            param: b.param.clone(),
                            reason: "omitted without a default".into(),
                        });
                    }
                    // An omitted optional forces later bindings to go by
                    // keyword; treat it like a keyword for ordering.
                    keyword_seen = true;
                }
                _ => {
                    if b.by_keyword {
                        keyword_seen = true;
                    } else if keyword_seen {
                        violations.push(Violation::IllegalBinding {
                            statement,
                            param: b.param.clone(),
                            reason: "positional argument after a keyword argument".into(),
                        });
                    }
                }
            },
            ParamKind::Star => match b.value {
                BoundValue::Omitted => {}
                BoundValue::NoneVal => violations.push(Violation::IllegalBinding {
                    statement,
                    param: b.param.clone(),
                    reason: "star parameter cannot take None".into(),
                }),
                BoundValue::Var(v) => {
                    if case.type_of(v) != Some(&TypeRef::List) {
                        violations.push(Violation::IllegalBinding {
                            statement,
                            param: b.param.clone(),
                            reason: "star unpacking needs a List variable".into(),
                        });
                    }
                }
            },
            ParamKind::DoubleStar => match b.value {
                BoundValue::Omitted => {}
                BoundValue::NoneVal => violations.push(Violation::IllegalBinding {
                    statement,
                    param: b.param.clone(),
                    reason: "doublestar parameter cannot take None".into(),
                }),
                BoundValue::Var(v) => {
                    if case.type_of(v) != Some(&TypeRef::Map) {
                        violations.push(Violation::IllegalBinding {
                            statement,
                            param: b.param.clone(),
                            reason: "doublestar unpacking needs a Map variable".into(),
                        });
                    }
                }
            },
        }
    }
}

/// Lower-snake-case name stem for a variable of the given type.
fn name_stem(t: &TypeRef) -> String {
    match t {
        TypeRef::Int => "int".into(),
        TypeRef::Float => "float".into(),
        TypeRef::Bool => "bool".into(),
        TypeRef::Str => "str".into(),
        TypeRef::Bytes => "bytes".into(),
        TypeRef::List => "list".into(),
        TypeRef::Set => "set".into(),
        TypeRef::Tuple => "tuple".into(),
        TypeRef::Map => "map".into(),
        TypeRef::Class(name) => {
            let mut out = String::new();
            for (i, ch) in name.chars().enumerate() {
                if ch.is_ascii_uppercase() {
                    if i > 0 {
                        out.push('_');
                    }
                    out.push(ch.to_ascii_lowercase());
                } else {
                    out.push(ch);
                }
            }
            out
        }
        TypeRef::Dynamic => "var".into(),
    }
}

/// Surface names for every variable of the case, by statement order:
/// `<stem>_<counter>` with one counter per stem.
pub fn variable_names(case: &TestCase) -> Vec<String> {
    let mut counters: Vec<(String, usize)> = Vec::new();
    let mut names = Vec::with_capacity(case.len());
    for stmt in &case.statements {
        let stem = name_stem(&stmt.declared_type);
        let counter = match counters.iter_mut().find(|(s, _)| *s == stem) {
            Some((_, c)) => {
                *c += 1;
                *c
            }
            None => {
                counters.push((stem.clone(), 0));
                0
            }
        };
        names.push(format!("{stem}_{counter}"));
    }
    names
}

fn render_args(bindings: &[ParamBinding], name_of: &dyn Fn(VarId) -> String) -> String {
    let mut parts = Vec::new();
    for b in bindings {
        let value = match b.value {
            BoundValue::Omitted => continue,
            BoundValue::NoneVal => "None".to_string(),
            BoundValue::Var(v) => name_of(v),
        };
        match b.kind {
            ParamKind::Normal => {
                if b.by_keyword {
                    parts.push(format!("{}={}", b.param, value));
                } else {
                    parts.push(value);
                }
            }
            ParamKind::Star => parts.push(format!("*{value}")),
            ParamKind::DoubleStar => parts.push(format!("**{value}")),
        }
    }
    parts.join(", ")
}

/// Renders one statement body line (without indentation or trailing
/// newline).
pub fn render_statement(stmt: &Statement, names: &dyn Fn(VarId) -> String) -> String {
    let target = names(stmt.var);
    match &stmt.kind {
        StatementKind::Primitive(p) => {
            format!("{target} = {}", render_literal(&p.to_literal()))
        }
        StatementKind::Constructor { class, bindings } => {
            format!("{target} = {class}({})", render_args(bindings, names))
        }
        StatementKind::Method { receiver, method, bindings } => {
            format!("{target} = {}.{method}({})", names(*receiver), render_args(bindings, names))
        }
        StatementKind::Function { function, bindings } => {
            format!("{target} = {function}({})", render_args(bindings, names))
        }
        StatementKind::Collection { kind, elements, pairs } => {
            let rendered = match kind {
                CollectionKind::List => format!(
                    "[{}]",
                    elements.iter().map(|v| names(*v)).collect::<Vec<_>>().join(", ")
                ),
                CollectionKind::Set => {
                    if elements.is_empty() {
                        "set()".to_string()
                    } else {
                        format!(
                            "{{{}}}",
                            elements.iter().map(|v| names(*v)).collect::<Vec<_>>().join(", ")
                        )
                    }
                }
                CollectionKind::Tuple => match elements.len() {
                    0 => "()".to_string(),
                    1 => format!("({},)", names(elements[0])),
                    _ => format!(
                        "({})",
                        elements.iter().map(|v| names(*v)).collect::<Vec<_>>().join(", ")
                    ),
                },
                CollectionKind::Map => format!(
                    "{{{}}}",
                    pairs
                        .iter()
                        .map(|(k, v)| format!("{}: {}", names(*k), names(*v)))
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            };
            format!("{target} = {rendered}")
        }
    }
}

/// Renders a case as `def test_case_<index>():` with one statement per
/// line.
pub fn render_case(case: &TestCase, index: usize) -> String {
    let names = variable_names(case);
    let name_of = |v: VarId| -> String {
        case.index_of(v).map(|i| names[i].clone()).unwrap_or_else(|| format!("missing_{v}"))
    };
    let mut out = String::new();
    let _ = writeln!(out, "def test_case_{index}():");
    if case.is_empty() {
        out.push_str("    pass_placeholder = 0\n");
        return out;
    }
    for stmt in &case.statements {
        let _ = writeln!(out, "    {}", render_statement(stmt, &name_of));
    }
    out
}

/// Renders a whole suite, one test function per case, blank lines between.
pub fn render_suite(suite: &TestSuite) -> String {
    let mut out = String::new();
    for (i, case) in suite.cases.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&render_case(case, i));
    }
    out
}
