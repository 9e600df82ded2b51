//! The MiniDyn language: values, syntax, bytecode, and control-flow analysis.
//!
//! MiniDyn is a small dynamically typed language with Python-flavoured
//! surface syntax. A module is a single `.mdyn` file containing constants,
//! functions, and classes. Functions compile to stack-machine bytecode in
//! which every atomic condition becomes a two-way branch instruction, which
//! is what the coverage instrumentation and the control-dependence analysis
//! operate on.

pub mod ast;
pub mod bytecode;
pub mod cdg;
pub mod cfg;
pub mod compiler;
pub mod lexer;
pub mod parser;
pub mod render;
pub mod value;

pub use ast::ModuleAst;
pub use cdg::{branch_dependence, control_dependence, BranchDependence, ControlDependenceGraph};
pub use cfg::{build_cfg, ControlFlowGraph};
pub use compiler::{compile_module, CompiledModule};
pub use parser::{parse_module, ParseError};
pub use value::{DynError, Value};
