//! Abstract syntax for MiniDyn modules.
//!
//! The AST is span-free and derives structural equality, so a parse /
//! render / reparse cycle can be compared node for node. Docstrings are
//! pulled out of function bodies into their own field during parsing.

use super::value::{BinOp, CmpOp};

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleAst {
    pub name: String,
    pub items: Vec<Item>,
}

impl ModuleAst {
    pub fn functions(&self) -> impl Iterator<Item = &FunctionDef> {
        self.items.iter().filter_map(|i| match i {
            Item::Function(f) => Some(f),
            _ => None,
        })
    }

    pub fn classes(&self) -> impl Iterator<Item = &ClassDef> {
        self.items.iter().filter_map(|i| match i {
            Item::Class(c) => Some(c),
            _ => None,
        })
    }

    pub fn constants(&self) -> impl Iterator<Item = &ConstantDef> {
        self.items.iter().filter_map(|i| match i {
            Item::Constant(c) => Some(c),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Constant(ConstantDef),
    Function(FunctionDef),
    Class(ClassDef),
}

/// A module-level `NAME = literal` binding.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantDef {
    pub name: String,
    pub value: Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<Param>,
    pub return_type: Option<TypeExpr>,
    pub docstring: Option<String>,
    pub body: Vec<Stmt>,
}

/// A class has at most one constructor (`__init__`) and plain methods; there
/// is no inheritance.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDef {
    pub name: String,
    pub docstring: Option<String>,
    pub constructor: Option<FunctionDef>,
    pub methods: Vec<FunctionDef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Normal,
    /// `*args`: collects extra positional arguments into a Tuple.
    Star,
    /// `**kwargs`: collects extra keyword arguments into a Map.
    DoubleStar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
    pub annotation: Option<TypeExpr>,
    pub default: Option<Literal>,
}

/// A type annotation. Annotations are hints for the test generator; the
/// runtime never enforces them.
#[derive(Debug, Clone, PartialEq)]
pub enum TypeExpr {
    Int,
    Float,
    Bool,
    Str,
    Bytes,
    NoneType,
    Any,
    List(Option<Box<TypeExpr>>),
    Set(Option<Box<TypeExpr>>),
    Tuple(Option<Box<TypeExpr>>),
    Map(Option<Box<(TypeExpr, TypeExpr)>>),
    Named(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Bytes(Vec<u8>),
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Assign { target: AssignTarget, value: Expr },
    If { arms: Vec<(Cond, Vec<Stmt>)>, else_body: Option<Vec<Stmt>> },
    While { cond: Cond, body: Vec<Stmt> },
    Return { value: Option<Expr> },
    Raise { class: String, message: Expr },
    /// An expression evaluated for its effect; the result is discarded.
    Expr(Expr),
    /// `expect ClassName: stmt` — used in emitted test files to mark a
    /// statement whose execution must raise the named exception.
    Expect { class: String, body: Box<Stmt> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum AssignTarget {
    Name(String),
    /// `obj.attr = value`; in practice `self.attr` inside constructors.
    Attr { object: String, attr: String },
}

/// A condition in `if`/`while` position. `and`/`or` only appear here, so
/// every atomic condition lowers to its own two-way branch.
#[derive(Debug, Clone, PartialEq)]
pub enum Cond {
    Or(Box<Cond>, Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Atom(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Literal),
    Name(String),
    Attr { object: Box<Expr>, attr: String },
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Neg(Box<Expr>),
    Compare { op: CmpOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Call { target: CallTarget, args: Vec<Arg> },
    ListLit(Vec<Expr>),
    TupleLit(Vec<Expr>),
    SetLit(Vec<Expr>),
    MapLit(Vec<(Expr, Expr)>),
    /// `set()`: the only spelling of an empty set ("{}" is an empty map).
    EmptySet,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CallTarget {
    Name(String),
    Method { object: Box<Expr>, name: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Positional(Expr),
    Keyword(String, Expr),
    /// `*expr`: spreads a List as extra positional arguments.
    Star(Expr),
    /// `**expr`: spreads a Map with Str keys as extra keyword arguments.
    DoubleStar(Expr),
}
