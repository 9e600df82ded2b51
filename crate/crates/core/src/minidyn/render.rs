//! Canonical pretty-printer for MiniDyn ASTs.
//!
//! Rendering is deterministic and the output parses back to a structurally
//! identical AST. Formatting is normalised: four-space indents, one space
//! around operators, double-quoted strings.

use super::ast::*;
use super::value::{BinOp, CmpOp};
use std::fmt::Write;

pub fn render_module(m: &ModuleAst) -> String {
    let mut out = String::new();
    let mut first = true;
    for item in &m.items {
        if !first {
            out.push('\n');
        }
        first = false;
        match item {
            Item::Constant(c) => {
                let _ = writeln!(out, "{} = {}", c.name, render_literal(&c.value));
            }
            Item::Function(f) => render_function(&mut out, f, 0),
            Item::Class(c) => render_class(&mut out, c),
        }
    }
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn render_class(out: &mut String, c: &ClassDef) {
    let _ = writeln!(out, "class {}:", c.name);
    if let Some(doc) = &c.docstring {
        indent(out, 1);
        let _ = writeln!(out, "{}", render_docstring(doc));
    }
    let mut first = c.docstring.is_none();
    if let Some(ctor) = &c.constructor {
        if !first {
            out.push('\n');
        }
        first = false;
        render_function(out, ctor, 1);
    }
    for m in &c.methods {
        if !first {
            out.push('\n');
        }
        first = false;
        render_function(out, m, 1);
    }
}

fn render_function(out: &mut String, f: &FunctionDef, level: usize) {
    indent(out, level);
    out.push_str("def ");
    out.push_str(&f.name);
    out.push('(');
    for (i, p) in f.params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match p.kind {
            ParamKind::Normal => {}
            ParamKind::Star => out.push('*'),
            ParamKind::DoubleStar => out.push_str("**"),
        }
        out.push_str(&p.name);
        if let Some(t) = &p.annotation {
            out.push_str(": ");
            out.push_str(&render_type(t));
        }
        if let Some(d) = &p.default {
            out.push_str(" = ");
            out.push_str(&render_literal(d));
        }
    }
    out.push(')');
    if let Some(t) = &f.return_type {
        out.push_str(" -> ");
        out.push_str(&render_type(t));
    }
    out.push_str(":\n");
    if let Some(doc) = &f.docstring {
        indent(out, level + 1);
        let _ = writeln!(out, "{}", render_docstring(doc));
    }
    for s in &f.body {
        render_stmt(out, s, level + 1);
    }
}

pub fn render_type(t: &TypeExpr) -> String {
    match t {
        TypeExpr::Int => "Int".into(),
        TypeExpr::Float => "Float".into(),
        TypeExpr::Bool => "Bool".into(),
        TypeExpr::Str => "Str".into(),
        TypeExpr::Bytes => "Bytes".into(),
        TypeExpr::NoneType => "None".into(),
        TypeExpr::Any => "Any".into(),
        TypeExpr::List(inner) => match inner {
            Some(i) => format!("List[{}]", render_type(i)),
            None => "List".into(),
        },
        TypeExpr::Set(inner) => match inner {
            Some(i) => format!("Set[{}]", render_type(i)),
            None => "Set".into(),
        },
        TypeExpr::Tuple(inner) => match inner {
            Some(i) => format!("Tuple[{}]", render_type(i)),
            None => "Tuple".into(),
        },
        TypeExpr::Map(inner) => match inner {
            Some(kv) => format!("Map[{}, {}]", render_type(&kv.0), render_type(&kv.1)),
            None => "Map".into(),
        },
        TypeExpr::Named(n) => n.clone(),
    }
}

fn render_stmt(out: &mut String, s: &Stmt, level: usize) {
    match s {
        Stmt::Assign { target, value } => {
            indent(out, level);
            match target {
                AssignTarget::Name(n) => {
                    let _ = writeln!(out, "{} = {}", n, render_expr(value));
                }
                AssignTarget::Attr { object, attr } => {
                    let _ = writeln!(out, "{}.{} = {}", object, attr, render_expr(value));
                }
            }
        }
        Stmt::If { arms, else_body } => {
            for (i, (cond, body)) in arms.iter().enumerate() {
                indent(out, level);
                let kw = if i == 0 { "if" } else { "elif" };
                let _ = writeln!(out, "{} {}:", kw, render_cond(cond));
                for s in body {
                    render_stmt(out, s, level + 1);
                }
            }
            if let Some(body) = else_body {
                indent(out, level);
                out.push_str("else:\n");
                for s in body {
                    render_stmt(out, s, level + 1);
                }
            }
        }
        Stmt::While { cond, body } => {
            indent(out, level);
            let _ = writeln!(out, "while {}:", render_cond(cond));
            for s in body {
                render_stmt(out, s, level + 1);
            }
        }
        Stmt::Return { value } => {
            indent(out, level);
            match value {
                Some(v) => {
                    let _ = writeln!(out, "return {}", render_expr(v));
                }
                None => out.push_str("return\n"),
            }
        }
        Stmt::Raise { class, message } => {
            indent(out, level);
            let _ = writeln!(out, "raise {}({})", class, render_expr(message));
        }
        Stmt::Expr(e) => {
            indent(out, level);
            let _ = writeln!(out, "{}", render_expr(e));
        }
        Stmt::Expect { class, body } => {
            indent(out, level);
            let mut inner = String::new();
            render_stmt(&mut inner, body, 0);
            let _ = writeln!(out, "expect {}: {}", class, inner.trim_end());
        }
    }
}

fn render_cond(c: &Cond) -> String {
    match c {
        Cond::Or(l, r) => format!("{} or {}", render_cond(l), render_cond(r)),
        Cond::And(l, r) => {
            // `and` binds tighter than `or`; there are no condition parens,
            // so an `or` can never appear under an `and` in a parsed tree.
            format!("{} and {}", render_cond(l), render_cond(r))
        }
        Cond::Atom(e) => render_expr(e),
    }
}

/// Operator precedence used to decide where parentheses are required.
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Compare { .. } => 1,
        Expr::Binary { op: BinOp::Add | BinOp::Sub, .. } => 2,
        Expr::Binary { .. } => 3,
        Expr::Neg(_) => 4,
        _ => 5,
    }
}

pub fn render_expr(e: &Expr) -> String {
    match e {
        Expr::Literal(l) => render_literal(l),
        Expr::Name(n) => n.clone(),
        Expr::Attr { object, attr } => {
            format!("{}.{}", wrap(object, prec(e) > prec(object)), attr)
        }
        Expr::Binary { op, lhs, rhs } => {
            let p = prec(e);
            format!(
                "{} {} {}",
                wrap(lhs, prec(lhs) < p),
                op.symbol(),
                wrap(rhs, prec(rhs) <= p)
            )
        }
        Expr::Neg(inner) => format!("-{}", wrap(inner, prec(inner) < 4)),
        Expr::Compare { op, lhs, rhs } => {
            let op_text = match op {
                CmpOp::NotIn => "not in",
                CmpOp::IsNot => "is not",
                other => other.symbol(),
            };
            format!("{} {} {}", wrap(lhs, prec(lhs) <= 1), op_text, wrap(rhs, prec(rhs) <= 1))
        }
        Expr::Call { target, args } => {
            let callee = match target {
                CallTarget::Name(n) => n.clone(),
                CallTarget::Method { object, name } => {
                    format!("{}.{}", wrap(object, prec(object) < 5), name)
                }
            };
            let rendered: Vec<String> = args
                .iter()
                .map(|a| match a {
                    Arg::Positional(e) => render_expr(e),
                    Arg::Keyword(k, e) => format!("{}={}", k, render_expr(e)),
                    Arg::Star(e) => format!("*{}", render_expr(e)),
                    Arg::DoubleStar(e) => format!("**{}", render_expr(e)),
                })
                .collect();
            format!("{}({})", callee, rendered.join(", "))
        }
        Expr::ListLit(items) => {
            let rendered: Vec<String> = items.iter().map(render_expr).collect();
            format!("[{}]", rendered.join(", "))
        }
        Expr::TupleLit(items) => match items.len() {
            0 => "()".into(),
            1 => format!("({},)", render_expr(&items[0])),
            _ => {
                let rendered: Vec<String> = items.iter().map(render_expr).collect();
                format!("({})", rendered.join(", "))
            }
        },
        Expr::SetLit(items) => {
            let rendered: Vec<String> = items.iter().map(render_expr).collect();
            format!("{{{}}}", rendered.join(", "))
        }
        Expr::MapLit(pairs) => {
            let rendered: Vec<String> = pairs
                .iter()
                .map(|(k, v)| format!("{}: {}", render_expr(k), render_expr(v)))
                .collect();
            format!("{{{}}}", rendered.join(", "))
        }
        Expr::EmptySet => "set()".into(),
    }
}

fn wrap(e: &Expr, parens: bool) -> String {
    if parens {
        format!("({})", render_expr(e))
    } else {
        render_expr(e)
    }
}

pub fn render_literal(l: &Literal) -> String {
    match l {
        Literal::Int(v) => v.to_string(),
        Literal::Float(v) => render_float(*v),
        Literal::Bool(true) => "True".into(),
        Literal::Bool(false) => "False".into(),
        Literal::Str(s) => render_str(s),
        Literal::Bytes(b) => render_bytes(b),
        Literal::None => "None".into(),
    }
}

/// Shortest representation that round-trips; always contains '.' or 'e'.
pub fn render_float(v: f64) -> String {
    debug_assert!(v.is_finite(), "non-finite floats have no literal form");
    format!("{:?}", v)
}

pub fn render_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            '\0' => out.push_str("\\0"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\x{:02x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn render_bytes(b: &[u8]) -> String {
    let mut out = String::with_capacity(b.len() + 3);
    out.push_str("b\"");
    for &byte in b {
        match byte {
            b'"' => out.push_str("\\\""),
            b'\\' => out.push_str("\\\\"),
            b'\n' => out.push_str("\\n"),
            b'\t' => out.push_str("\\t"),
            b'\r' => out.push_str("\\r"),
            0x20..=0x7e => out.push(byte as char),
            other => {
                let _ = write!(out, "\\x{:02x}", other);
            }
        }
    }
    out.push('"');
    out
}

/// Docstrings prefer triple quotes; fall back to a plain string when the
/// content would break the triple-quoted form.
fn render_docstring(doc: &str) -> String {
    let triple_safe = !doc.contains("\"\"\"") && !doc.contains('\\') && !doc.ends_with('"');
    if triple_safe && doc.chars().all(|c| c == '\n' || c == '\t' || (c as u32) >= 0x20) {
        format!("\"\"\"{}\"\"\"", doc)
    } else {
        render_str(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_module;
    use super::*;

    fn round_trip(src: &str) {
        let ast = parse_module("m", src).unwrap();
        let rendered = render_module(&ast);
        let reparsed = parse_module("m", &rendered)
            .unwrap_or_else(|e| panic!("rendered output failed to parse: {}\n{}", e, rendered));
        assert_eq!(ast, reparsed, "round trip changed the AST:\n{}", rendered);
    }

    #[test]
    fn round_trips_arithmetic_grouping() {
        round_trip("def ceil_div(a: Int, b: Int) -> Int:\n    return (a - 1) // b + 1\n");
        round_trip("def f(a, b, c):\n    return a - (b - c)\n");
        round_trip("def f(a, b):\n    return -(a + b) * 2\n");
    }

    #[test]
    fn round_trips_control_flow() {
        round_trip(
            "def f(a: Int, b: Int) -> Int:\n    \"\"\"Docs here.\"\"\"\n    if a < 42 and b == 23 or a > 100:\n        return 1\n    while a > 0:\n        a = a - 1\n    return 0\n",
        );
    }

    #[test]
    fn round_trips_class_and_calls() {
        round_trip(
            "class Foo:\n    \"\"\"A class.\"\"\"\n    def __init__(self, x: Int = 3):\n        self.x = x\n    def bump(self, by: Int) -> Int:\n        self.x = self.x + by\n        return self.x\n\ndef use(f: Foo, *rest, **opts) -> Int:\n    return f.bump(2)\n",
        );
    }

    #[test]
    fn round_trips_literals_and_collections() {
        round_trip(
            "X = -7\nY = 2.5\nZ = \"he\\\"llo\\n\"\nW = b\"ab\\x00\"\n\ndef f():\n    a = [1, 2.0, \"x\"]\n    b = (1,)\n    c = ()\n    d = {1, 2}\n    e = {\"k\": 1}\n    g = {}\n    h = set()\n    return g(1, k=2, *a, **e)\n",
        );
    }

    #[test]
    fn round_trips_expect_statement() {
        round_trip("def test_case_0():\n    expect ValueError: f(1)\n");
    }

    #[test]
    fn float_rendering_keeps_a_marker() {
        assert_eq!(render_float(0.5), "0.5");
        assert_eq!(render_float(2.0), "2.0");
        assert!(render_float(1e300).contains('e') || render_float(1e300).contains('.'));
    }
}
