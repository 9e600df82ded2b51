//! Bytecode for the MiniDyn stack machine.
//!
//! Every atomic condition compiles to one `Branch` instruction carrying a
//! predicate id. Branch ids are derived from predicate ids: the true branch
//! of predicate p is `2 * p`, the false branch is `2 * p + 1`, so branches
//! always come in complementary pairs.

use super::ast::ParamKind;
use super::value::{BinOp, CmpOp, Value};

/// A compile-time constant. Unlike [`Value`] this owns its data, so compiled
/// modules can be stored or sent across threads freely.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstValue {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Bytes(Vec<u8>),
    None,
}

impl ConstValue {
    pub fn to_value(&self) -> Value {
        match self {
            ConstValue::Int(v) => Value::Int(*v),
            ConstValue::Float(v) => Value::Float(*v),
            ConstValue::Bool(v) => Value::Bool(*v),
            ConstValue::Str(s) => Value::str(s),
            ConstValue::Bytes(b) => Value::bytes(b),
            ConstValue::None => Value::None,
        }
    }
}

/// Built-in functions callable from MiniDyn code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    /// `len(x)` — length of a sized value.
    Len,
    /// `tick()` — a session-scoped monotonic counter; the one deliberate
    /// source of nondeterminism available to modules.
    Tick,
}

/// One element of a call's argument shape, in source order.
#[derive(Debug, Clone, PartialEq)]
pub enum ArgItem {
    Positional,
    /// Keyword argument; the index points into the names table.
    Keyword(usize),
    /// `*expr` spread of a List as positional arguments.
    Star,
    /// `**expr` spread of a Str-keyed Map as keyword arguments.
    DoubleStar,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instr {
    LoadConst(usize),
    LoadLocal(usize),
    StoreLocal(usize),
    LoadGlobal(usize),
    StoreGlobal(usize),
    /// Pops the object, pushes the named attribute.
    LoadAttr(usize),
    /// Pops the object, then the value to store.
    StoreAttr(usize),
    BuildList(usize),
    BuildTuple(usize),
    BuildSet(usize),
    BuildMap(usize),
    Binary(BinOp),
    Neg,
    /// Value-context comparison; pushes a Bool and creates no branch.
    Compare(CmpOp),
    /// Two-way conditional jump: with `cmp` set it pops rhs then lhs and
    /// compares; otherwise it pops one value and tests truthiness.
    Branch { pred: usize, cmp: Option<CmpOp>, true_to: usize, false_to: usize },
    Jump(usize),
    /// Calls a module-level function or class; `spec` indexes the arg-shape
    /// table. Argument values sit on the stack in source order.
    CallFunction { global: usize, spec: usize },
    /// Calls a method on the receiver below the arguments.
    CallMethod { name: usize, spec: usize },
    CallBuiltin { builtin: Builtin, argc: usize },
    /// Pops the message, raises the named exception class.
    Raise { class: usize },
    Return,
    Pop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeObjectKind {
    ModuleBody,
    Function,
    Method,
    Constructor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub default: Option<ConstValue>,
}

#[derive(Debug, Clone)]
pub struct CodeObject {
    pub id: usize,
    pub kind: CodeObjectKind,
    /// Qualified name, e.g. `f` or `Point.norm`.
    pub name: String,
    pub params: Vec<ParamSpec>,
    pub n_locals: usize,
    /// Slot names in slot order; parameters occupy the leading slots.
    pub local_names: Vec<String>,
    pub code: Vec<Instr>,
    /// Predicates whose `Branch` instruction lives in this code object.
    pub predicate_ids: Vec<usize>,
}

impl CodeObject {
    pub fn is_branchless(&self) -> bool {
        self.predicate_ids.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct PredicateInfo {
    pub id: usize,
    pub code_object: usize,
    /// Human-readable shape, e.g. `==` or `truthy`; used in diagnostics.
    pub repr: String,
}

/// The true branch of a predicate.
pub fn true_branch(pred: usize) -> usize {
    2 * pred
}

/// The false branch of a predicate.
pub fn false_branch(pred: usize) -> usize {
    2 * pred + 1
}

/// The predicate a branch id belongs to.
pub fn branch_predicate(branch: usize) -> usize {
    branch / 2
}

/// Whether a branch id is the true side of its predicate.
pub fn is_true_branch(branch: usize) -> bool {
    branch % 2 == 0
}

#[derive(Debug, Clone)]
pub enum GlobalEntry {
    Function(usize),
    Class(usize),
    /// A module constant; the value is stored by the module body at import.
    Constant(ConstValue),
}

#[derive(Debug, Clone)]
pub struct ClassInfo {
    pub id: usize,
    pub name: String,
    pub constructor: Option<usize>,
    /// Method name → code object id, in declaration order.
    pub methods: Vec<(String, usize)>,
}

impl ClassInfo {
    pub fn method(&self, name: &str) -> Option<usize> {
        self.methods.iter().find(|(n, _)| n == name).map(|(_, id)| *id)
    }
}

/// The exception classes a `raise` statement may name.
pub const EXCEPTION_CLASSES: &[&str] = &[
    "ArithmeticError",
    "AssertionError",
    "AttributeError",
    "IndexError",
    "KeyError",
    "NameError",
    "OverflowError",
    "RecursionError",
    "RuntimeError",
    "TypeError",
    "ValueError",
    "ZeroDivisionError",
];
