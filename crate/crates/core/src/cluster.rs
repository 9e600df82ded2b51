//! Static analysis of the module under test. Produces the test cluster (the
//! public callables, plus maps answering which callables produce or consume
//! which types), extracts declared exceptions, and harvests the constant
//! pool used to bias primitive generation. Comparison operands observed at
//! run time are appended to the same pool, so generation gradually picks up
//! the magic values the module actually branches on.

use std::collections::{HashSet, VecDeque};

use rand::Rng;
use thiserror::Error;

use crate::minidyn::ast::{
    Arg, ClassDef, Cond, Expr, FunctionDef, Item, Literal, ModuleAst, Param, ParamKind, Stmt,
    TypeExpr,
};
use crate::minidyn::{CompiledModule, Value};
use crate::testmodel::TypeRef;

/// Observed constants beyond this count evict the oldest entry of the same
/// kind.
pub const CONSTANT_POOL_CAPACITY: usize = 500;

/// Literal values harvested from the module source plus comparison operands
/// seen during execution. Per-kind FIFO with deduplication.
#[derive(Debug, Clone, Default)]
pub struct ConstantPool {
    ints: VecDeque<i64>,
    int_seen: HashSet<i64>,
    floats: VecDeque<f64>,
    float_seen: HashSet<u64>,
    strs: VecDeque<String>,
    str_seen: HashSet<String>,
    byte_strs: VecDeque<Vec<u8>>,
    bytes_seen: HashSet<Vec<u8>>,
}

impl ConstantPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_int(&mut self, v: i64) {
        if self.int_seen.insert(v) {
            self.ints.push_back(v);
            if self.ints.len() > CONSTANT_POOL_CAPACITY {
                let old = self.ints.pop_front().unwrap();
                self.int_seen.remove(&old);
            }
        }
    }

    pub fn add_float(&mut self, v: f64) {
        if self.float_seen.insert(v.to_bits()) {
            self.floats.push_back(v);
            if self.floats.len() > CONSTANT_POOL_CAPACITY {
                let old = self.floats.pop_front().unwrap();
                self.float_seen.remove(&old.to_bits());
            }
        }
    }

    pub fn add_str(&mut self, v: &str) {
        if self.str_seen.insert(v.to_owned()) {
            self.strs.push_back(v.to_owned());
            if self.strs.len() > CONSTANT_POOL_CAPACITY {
                let old = self.strs.pop_front().unwrap();
                self.str_seen.remove(&old);
            }
        }
    }

    pub fn add_bytes(&mut self, v: &[u8]) {
        if self.bytes_seen.insert(v.to_owned()) {
            self.byte_strs.push_back(v.to_owned());
            if self.byte_strs.len() > CONSTANT_POOL_CAPACITY {
                let old = self.byte_strs.pop_front().unwrap();
                self.bytes_seen.remove(&old);
            }
        }
    }

    /// Records a runtime comparison operand. Only primitive kinds are worth
    /// keeping; collections and objects are skipped.
    pub fn observe(&mut self, v: &Value) {
        match v {
            Value::Int(i) => self.add_int(*i),
            Value::Float(f) => self.add_float(*f),
            Value::Str(s) => self.add_str(s),
            Value::Bytes(b) => self.add_bytes(b),
            _ => {}
        }
    }

    pub fn pick_int(&self, rng: &mut impl Rng) -> Option<i64> {
        pick(&self.ints, rng).copied()
    }

    pub fn pick_float(&self, rng: &mut impl Rng) -> Option<f64> {
        pick(&self.floats, rng).copied()
    }

    pub fn pick_str(&self, rng: &mut impl Rng) -> Option<&str> {
        pick(&self.strs, rng).map(String::as_str)
    }

    pub fn pick_bytes(&self, rng: &mut impl Rng) -> Option<&[u8]> {
        pick(&self.byte_strs, rng).map(Vec::as_slice)
    }

    pub fn counts(&self) -> (usize, usize, usize, usize) {
        (self.ints.len(), self.floats.len(), self.strs.len(), self.byte_strs.len())
    }
}

fn pick<'a, T>(q: &'a VecDeque<T>, rng: &mut impl Rng) -> Option<&'a T> {
    if q.is_empty() {
        None
    } else {
        q.get(rng.gen_range(0..q.len()))
    }
}

/// Collects every int, float, string and bytes literal appearing anywhere in
/// the module source, including parameter defaults.
pub fn seed_constants(ast: &ModuleAst) -> ConstantPool {
    let mut pool = ConstantPool::new();
    for item in &ast.items {
        match item {
            Item::Constant(c) => seed_literal(&mut pool, &c.value),
            Item::Function(f) => seed_function(&mut pool, f),
            Item::Class(c) => {
                if let Some(ctor) = &c.constructor {
                    seed_function(&mut pool, ctor);
                }
                for m in &c.methods {
                    seed_function(&mut pool, m);
                }
            }
        }
    }
    pool
}

fn seed_function(pool: &mut ConstantPool, f: &FunctionDef) {
    for p in &f.params {
        if let Some(d) = &p.default {
            seed_literal(pool, d);
        }
    }
    seed_block(pool, &f.body);
}

fn seed_block(pool: &mut ConstantPool, body: &[Stmt]) {
    for stmt in body {
        match stmt {
            Stmt::Assign { value, .. } => seed_expr(pool, value),
            Stmt::If { arms, else_body } => {
                for (cond, block) in arms {
                    seed_cond(pool, cond);
                    seed_block(pool, block);
                }
                if let Some(b) = else_body {
                    seed_block(pool, b);
                }
            }
            Stmt::While { cond, body } => {
                seed_cond(pool, cond);
                seed_block(pool, body);
            }
            Stmt::Return { value } => {
                if let Some(e) = value {
                    seed_expr(pool, e);
                }
            }
            Stmt::Raise { message, .. } => seed_expr(pool, message),
            Stmt::Expr(e) => seed_expr(pool, e),
            Stmt::Expect { .. } => {}
        }
    }
}

fn seed_cond(pool: &mut ConstantPool, cond: &Cond) {
    match cond {
        Cond::Or(l, r) | Cond::And(l, r) => {
            seed_cond(pool, l);
            seed_cond(pool, r);
        }
        Cond::Atom(e) => seed_expr(pool, e),
    }
}

fn seed_expr(pool: &mut ConstantPool, expr: &Expr) {
    match expr {
        Expr::Literal(lit) => seed_literal(pool, lit),
        Expr::Name(_) | Expr::EmptySet => {}
        Expr::Attr { object, .. } => seed_expr(pool, object),
        Expr::Binary { lhs, rhs, .. } | Expr::Compare { lhs, rhs, .. } => {
            seed_expr(pool, lhs);
            seed_expr(pool, rhs);
        }
        Expr::Neg(inner) => seed_expr(pool, inner),
        Expr::Call { args, target } => {
            if let crate::minidyn::ast::CallTarget::Method { object, .. } = target {
                seed_expr(pool, object);
            }
            for arg in args {
                match arg {
                    Arg::Positional(e)
                    | Arg::Keyword(_, e)
                    | Arg::Star(e)
                    | Arg::DoubleStar(e) => seed_expr(pool, e),
                }
            }
        }
        Expr::ListLit(items) | Expr::TupleLit(items) | Expr::SetLit(items) => {
            for e in items {
                seed_expr(pool, e);
            }
        }
        Expr::MapLit(pairs) => {
            for (k, v) in pairs {
                seed_expr(pool, k);
                seed_expr(pool, v);
            }
        }
    }
}

fn seed_literal(pool: &mut ConstantPool, lit: &Literal) {
    match lit {
        Literal::Int(v) => pool.add_int(*v),
        Literal::Float(v) => pool.add_float(*v),
        Literal::Str(s) => pool.add_str(s),
        Literal::Bytes(b) => pool.add_bytes(b),
        Literal::Bool(_) | Literal::None => {}
    }
}

/// Types a test can synthesize as a literal without calling anything.
pub const BUILTIN_TYPES: [TypeRef; 9] = [
    TypeRef::Int,
    TypeRef::Float,
    TypeRef::Bool,
    TypeRef::Str,
    TypeRef::Bytes,
    TypeRef::List,
    TypeRef::Set,
    TypeRef::Tuple,
    TypeRef::Map,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallableKind {
    Function,
    Method,
    Constructor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamInfo {
    pub name: String,
    pub kind: ParamKind,
    /// `Dynamic` when unannotated, or when the cluster was built with
    /// type hints disabled.
    pub annotation: TypeRef,
    pub has_default: bool,
}

/// One invocable element of the module's public interface.
#[derive(Debug, Clone, PartialEq)]
pub struct CallableInfo {
    pub kind: CallableKind,
    /// Function or method name; for constructors, the class name.
    pub name: String,
    pub class: Option<String>,
    /// Declaration order, `self` excluded.
    pub params: Vec<ParamInfo>,
    pub returns: TypeRef,
    /// Exception classes raised in the body or documented under a
    /// `Raises:` doc-comment heading, sorted.
    pub declared_exceptions: Vec<String>,
}

impl CallableInfo {
    pub fn display_name(&self) -> String {
        match (&self.kind, &self.class) {
            (CallableKind::Method, Some(class)) => format!("{class}.{}", self.name),
            _ => self.name.clone(),
        }
    }
}

/// One way to bring a value of a requested type into existence.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// Synthesize a literal of this builtin type.
    Literal(TypeRef),
    /// Call `cluster.callables[index]` and use the result.
    Call(usize),
}

#[derive(Debug, Error, PartialEq)]
#[error("no values of type `{0}` can be requested: the module neither defines nor mentions it")]
pub struct UnknownType(pub String);

/// The static interface of the module under test: its public callables,
/// plus maps answering which callables produce or consume which types.
#[derive(Debug, Clone)]
pub struct TestCluster {
    pub callables: Vec<CallableInfo>,
    pub use_type_hints: bool,
    /// type -> callables whose return or constructed type is it.
    generators: Vec<(TypeRef, Vec<usize>)>,
    /// type -> callables taking a parameter or receiver of it.
    modifiers: Vec<(TypeRef, Vec<usize>)>,
    /// Class names the module defines or mentions in an annotation.
    known_classes: Vec<String>,
}

impl TestCluster {
    /// Everything that can produce a value of type `t`: a literal
    /// pseudo-generator for builtins, plus any callable returning `t`.
    /// A class the module only mentions yields an empty list; a name the
    /// module has never heard of is an error. `Dynamic` names no concrete
    /// type, so nothing can be requested for it.
    pub fn generators_for_type(&self, t: &TypeRef) -> Result<Vec<Generator>, UnknownType> {
        let calls = lookup(&self.generators, t).iter().map(|&i| Generator::Call(i));
        match t {
            TypeRef::Dynamic => Ok(Vec::new()),
            TypeRef::Class(name) => {
                if self.known_classes.iter().any(|n| n == name) {
                    Ok(calls.collect())
                } else {
                    Err(UnknownType(name.clone()))
                }
            }
            _ => Ok(std::iter::once(Generator::Literal(t.clone())).chain(calls).collect()),
        }
    }

    /// Indexes of callables that take `t` as a parameter or receiver.
    pub fn modifiers_for_type(&self, t: &TypeRef) -> &[usize] {
        lookup(&self.modifiers, t)
    }

    /// Every concrete type the cluster knows: the builtins plus all class
    /// names the module defines or mentions, in a deterministic order.
    pub fn types(&self) -> Vec<TypeRef> {
        BUILTIN_TYPES
            .iter()
            .cloned()
            .chain(self.known_classes.iter().map(|n| TypeRef::Class(n.clone())))
            .collect()
    }

    pub fn callable(&self, index: usize) -> &CallableInfo {
        &self.callables[index]
    }

    pub fn find_callable(&self, display_name: &str) -> Option<usize> {
        self.callables.iter().position(|c| c.display_name() == display_name)
    }
}

fn lookup<'a>(map: &'a [(TypeRef, Vec<usize>)], t: &TypeRef) -> &'a [usize] {
    map.iter().find(|(k, _)| k == t).map(|(_, v)| v.as_slice()).unwrap_or(&[])
}

/// Analyzes the module's public interface. Leading-underscore functions,
/// classes, and methods stay out of the accessible set. With hints off,
/// every annotation is erased to `Dynamic`; the erasure touches nothing
/// else, so both hint modes produce identical callables (up to
/// annotations) and identical generator and modifier maps.
pub fn build_test_cluster(module: &CompiledModule, use_type_hints: bool) -> TestCluster {
    let ast = &module.ast;
    let mut known_classes = Vec::new();
    let mut callables = Vec::new();
    for item in &ast.items {
        match item {
            Item::Function(f) => {
                note_annotated_classes(f, &mut known_classes);
                if !f.name.starts_with('_') {
                    callables.push(function_info(f));
                }
            }
            Item::Class(c) => {
                push_unique(&mut known_classes, c.name.clone());
                for f in c.constructor.iter().chain(&c.methods) {
                    note_annotated_classes(f, &mut known_classes);
                }
                if !c.name.starts_with('_') {
                    callables.push(constructor_info(c));
                    for m in &c.methods {
                        if !m.name.starts_with('_') {
                            callables.push(method_info(c, m));
                        }
                    }
                }
            }
            Item::Constant(_) => {}
        }
    }
    // The maps are built from the raw annotations before any erasure, so
    // both hint modes agree on them.
    let mut generators = Vec::new();
    let mut modifiers = Vec::new();
    for (i, info) in callables.iter().enumerate() {
        if info.returns != TypeRef::Dynamic {
            map_insert(&mut generators, info.returns.clone(), i);
        }
        if info.kind == CallableKind::Method {
            let class = info.class.clone().expect("methods carry their class");
            map_insert(&mut modifiers, TypeRef::Class(class), i);
        }
        for p in &info.params {
            if p.kind == ParamKind::Normal && p.annotation != TypeRef::Dynamic {
                map_insert(&mut modifiers, p.annotation.clone(), i);
            }
        }
    }
    if !use_type_hints {
        for info in &mut callables {
            for p in &mut info.params {
                p.annotation = TypeRef::Dynamic;
            }
            // Constructing a class yields that class with or without
            // hints; only annotations are erased.
            if info.kind != CallableKind::Constructor {
                info.returns = TypeRef::Dynamic;
            }
        }
    }
    TestCluster { callables, use_type_hints, generators, modifiers, known_classes }
}

fn function_info(f: &FunctionDef) -> CallableInfo {
    CallableInfo {
        kind: CallableKind::Function,
        name: f.name.clone(),
        class: None,
        params: param_infos(&f.params, false),
        returns: return_ref(f),
        declared_exceptions: declared_exceptions(f),
    }
}

fn constructor_info(c: &ClassDef) -> CallableInfo {
    CallableInfo {
        kind: CallableKind::Constructor,
        name: c.name.clone(),
        class: Some(c.name.clone()),
        params: c.constructor.as_ref().map(|f| param_infos(&f.params, true)).unwrap_or_default(),
        returns: TypeRef::Class(c.name.clone()),
        declared_exceptions: c.constructor.as_ref().map(declared_exceptions).unwrap_or_default(),
    }
}

fn method_info(c: &ClassDef, m: &FunctionDef) -> CallableInfo {
    CallableInfo {
        kind: CallableKind::Method,
        name: m.name.clone(),
        class: Some(c.name.clone()),
        params: param_infos(&m.params, true),
        returns: return_ref(m),
        declared_exceptions: declared_exceptions(m),
    }
}

fn param_infos(params: &[Param], skip_self: bool) -> Vec<ParamInfo> {
    params
        .iter()
        .skip(skip_self as usize)
        .map(|p| ParamInfo {
            name: p.name.clone(),
            kind: p.kind,
            annotation: p.annotation.as_ref().map(type_ref).unwrap_or(TypeRef::Dynamic),
            has_default: p.default.is_some(),
        })
        .collect()
}

fn return_ref(f: &FunctionDef) -> TypeRef {
    f.return_type.as_ref().map(type_ref).unwrap_or(TypeRef::Dynamic)
}

/// Collection annotations are matched on the outer constructor only; the
/// element types are advisory. A `None` annotation carries no generation
/// signal, so it degrades to `Dynamic` like a missing one.
fn type_ref(t: &TypeExpr) -> TypeRef {
    match t {
        TypeExpr::Int => TypeRef::Int,
        TypeExpr::Float => TypeRef::Float,
        TypeExpr::Bool => TypeRef::Bool,
        TypeExpr::Str => TypeRef::Str,
        TypeExpr::Bytes => TypeRef::Bytes,
        TypeExpr::NoneType | TypeExpr::Any => TypeRef::Dynamic,
        TypeExpr::List(_) => TypeRef::List,
        TypeExpr::Set(_) => TypeRef::Set,
        TypeExpr::Tuple(_) => TypeRef::Tuple,
        TypeExpr::Map(_) => TypeRef::Map,
        TypeExpr::Named(n) => TypeRef::Class(n.clone()),
    }
}

fn note_annotated_classes(f: &FunctionDef, out: &mut Vec<String>) {
    for p in &f.params {
        if let Some(t) = &p.annotation {
            collect_class_names(t, out);
        }
    }
    if let Some(t) = &f.return_type {
        collect_class_names(t, out);
    }
}

fn collect_class_names(t: &TypeExpr, out: &mut Vec<String>) {
    match t {
        TypeExpr::Named(n) => push_unique(out, n.clone()),
        TypeExpr::List(Some(e)) | TypeExpr::Set(Some(e)) | TypeExpr::Tuple(Some(e)) => {
            collect_class_names(e, out);
        }
        TypeExpr::Map(Some(kv)) => {
            collect_class_names(&kv.0, out);
            collect_class_names(&kv.1, out);
        }
        _ => {}
    }
}

/// Exception classes a callable is known to raise: every `raise` target in
/// its body (there is no construct that could catch one) plus class names
/// listed under a `Raises:` heading in its doc comment.
pub fn declared_exceptions(f: &FunctionDef) -> Vec<String> {
    let mut out = Vec::new();
    collect_raises(&f.body, &mut out);
    if let Some(doc) = &f.docstring {
        for name in docstring_raises(doc) {
            push_unique(&mut out, name);
        }
    }
    out.sort();
    out
}

fn collect_raises(body: &[Stmt], out: &mut Vec<String>) {
    for stmt in body {
        match stmt {
            Stmt::Raise { class, .. } => push_unique(out, class.clone()),
            Stmt::If { arms, else_body } => {
                for (_, arm_body) in arms {
                    collect_raises(arm_body, out);
                }
                if let Some(else_body) = else_body {
                    collect_raises(else_body, out);
                }
            }
            Stmt::While { body, .. } => collect_raises(body, out),
            Stmt::Assign { .. } | Stmt::Return { .. } | Stmt::Expr(_) => {}
            Stmt::Expect { body, .. } => collect_raises(std::slice::from_ref(&**body), out),
        }
    }
}

/// Reads `Name: description` lines following a `Raises:` heading; the
/// section ends at the first line that does not fit that shape.
fn docstring_raises(doc: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut in_section = false;
    for line in doc.lines() {
        let trimmed = line.trim();
        if trimmed.eq_ignore_ascii_case("raises:") {
            in_section = true;
            continue;
        }
        if !in_section {
            continue;
        }
        match trimmed.split_once(':') {
            Some((name, _)) if is_identifier(name.trim()) => {
                push_unique(&mut out, name.trim().to_string());
            }
            _ => in_section = false,
        }
    }
    out
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn push_unique<T: PartialEq>(v: &mut Vec<T>, item: T) {
    if !v.contains(&item) {
        v.push(item);
    }
}

fn map_insert(map: &mut Vec<(TypeRef, Vec<usize>)>, key: TypeRef, index: usize) {
    match map.iter_mut().find(|(k, _)| *k == key) {
        Some((_, v)) => push_unique(v, index),
        None => map.push((key, vec![index])),
    }
}
