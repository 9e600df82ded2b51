//! Systematic single-point mutations of a module under test. A mutant swaps
//! one arithmetic or comparison operator, one `and`/`or` connective, one
//! numeric or boolean literal, or replaces one returned value with `None`.
//! Raise messages, strings, and parameter defaults are left alone; mutating
//! them changes nothing a test outcome can see.

use crate::minidyn::ast::{Arg, CallTarget, Cond, Expr, Item, Literal, Stmt};
use crate::minidyn::value::{BinOp, CmpOp};
use crate::minidyn::{compile_module, CompiledModule, ModuleAst};

#[derive(Debug)]
pub struct Mutant {
    pub id: usize,
    /// Which kind of change was applied.
    pub operator: &'static str,
    /// Name of the enclosing function, method, or constant.
    pub location: String,
    pub module: CompiledModule,
}

pub const ARITH_OP: &str = "arith-op";
pub const COMPARE_OP: &str = "compare-op";
pub const CONNECTIVE: &str = "connective";
pub const INT_CONST: &str = "int-const";
pub const FLOAT_CONST: &str = "float-const";
pub const BOOL_CONST: &str = "bool-const";
pub const RETURN_NONE: &str = "return-none";

/// Every mutant of the module that compiles, in a stable order. Both walks
/// of the tree visit sites identically, so site numbering is reproducible.
pub fn generate_mutants(ast: &ModuleAst) -> Vec<Mutant> {
    let mut collector = Walker::collecting();
    collector.walk_module(&mut ast.clone());
    let sites = std::mem::take(&mut collector.sites);

    let mut mutants = Vec::new();
    for (site, record) in sites.iter().enumerate() {
        for variant in 0..record.variants {
            let mut tree = ast.clone();
            let mut applier = Walker::applying(site, variant);
            applier.walk_module(&mut tree);
            debug_assert!(applier.applied, "site {site} must exist on the second walk");
            match compile_module(&tree) {
                Ok(module) => mutants.push(Mutant {
                    id: mutants.len(),
                    operator: record.operator,
                    location: record.location.clone(),
                    module,
                }),
                Err(err) => {
                    log::warn!("dropping uncompilable mutant in {}: {err}", record.location)
                }
            }
        }
    }
    mutants
}

struct SiteRecord {
    operator: &'static str,
    location: String,
    variants: usize,
}

enum Mode {
    Collect,
    Apply { site: usize, variant: usize },
}

struct Walker {
    mode: Mode,
    next_site: usize,
    sites: Vec<SiteRecord>,
    applied: bool,
    context: String,
}

impl Walker {
    fn collecting() -> Walker {
        Walker {
            mode: Mode::Collect,
            next_site: 0,
            sites: Vec::new(),
            applied: false,
            context: String::new(),
        }
    }

    fn applying(site: usize, variant: usize) -> Walker {
        Walker {
            mode: Mode::Apply { site, variant },
            next_site: 0,
            sites: Vec::new(),
            applied: false,
            context: String::new(),
        }
    }

    /// Registers the next site. Returns the variant to apply when this walk
    /// targets exactly this site.
    fn site(&mut self, operator: &'static str, variants: usize) -> Option<usize> {
        let index = self.next_site;
        self.next_site += 1;
        match self.mode {
            Mode::Collect => {
                self.sites.push(SiteRecord {
                    operator,
                    location: self.context.clone(),
                    variants,
                });
                None
            }
            Mode::Apply { site, variant } => {
                if site == index {
                    self.applied = true;
                    Some(variant)
                } else {
                    None
                }
            }
        }
    }

    fn walk_module(&mut self, module: &mut ModuleAst) {
        for item in &mut module.items {
            match item {
                Item::Constant(c) => {
                    self.context = c.name.clone();
                    self.literal(&mut c.value);
                }
                Item::Function(f) => {
                    self.context = f.name.clone();
                    self.walk_body(&mut f.body);
                }
                Item::Class(c) => {
                    let class = c.name.clone();
                    if let Some(ctor) = &mut c.constructor {
                        self.context = format!("{class}.{}", ctor.name);
                        self.walk_body(&mut ctor.body);
                    }
                    for method in &mut c.methods {
                        self.context = format!("{class}.{}", method.name);
                        self.walk_body(&mut method.body);
                    }
                }
            }
        }
    }

    fn walk_body(&mut self, body: &mut [Stmt]) {
        for stmt in body {
            self.walk_stmt(stmt);
        }
    }

    fn walk_stmt(&mut self, stmt: &mut Stmt) {
        match stmt {
            Stmt::Assign { value, .. } => self.walk_expr(value),
            Stmt::If { arms, else_body } => {
                for (cond, body) in arms {
                    self.walk_cond(cond);
                    self.walk_body(body);
                }
                if let Some(body) = else_body {
                    self.walk_body(body);
                }
            }
            Stmt::While { cond, body } => {
                self.walk_cond(cond);
                self.walk_body(body);
            }
            Stmt::Return { value } => {
                let replaceable = !matches!(value, None | Some(Expr::Literal(Literal::None)));
                if replaceable && self.site(RETURN_NONE, 1).is_some() {
                    *value = Some(Expr::Literal(Literal::None));
                }
                if let Some(v) = value {
                    self.walk_expr(v);
                }
            }
            Stmt::Raise { .. } => {}
            Stmt::Expr(e) => self.walk_expr(e),
            Stmt::Expect { body, .. } => self.walk_stmt(body),
        }
    }

    fn walk_cond(&mut self, cond: &mut Cond) {
        match cond {
            Cond::Or(..) | Cond::And(..) => {
                let was_or = matches!(cond, Cond::Or(..));
                if self.site(CONNECTIVE, 1).is_some() {
                    let placeholder = Cond::Atom(Expr::Literal(Literal::None));
                    let (a, b) = match std::mem::replace(cond, placeholder) {
                        Cond::Or(a, b) | Cond::And(a, b) => (a, b),
                        Cond::Atom(_) => unreachable!(),
                    };
                    *cond = if was_or { Cond::And(a, b) } else { Cond::Or(a, b) };
                }
                if let Cond::Or(a, b) | Cond::And(a, b) = cond {
                    self.walk_cond(a);
                    self.walk_cond(b);
                }
            }
            Cond::Atom(e) => self.walk_expr(e),
        }
    }

    fn walk_expr(&mut self, expr: &mut Expr) {
        match expr {
            Expr::Literal(lit) => self.literal(lit),
            Expr::Name(_) | Expr::EmptySet => {}
            Expr::Attr { object, .. } => self.walk_expr(object),
            Expr::Binary { op, lhs, rhs } => {
                let others = arith_alternatives(*op);
                if let Some(v) = self.site(ARITH_OP, others.len()) {
                    *op = others[v];
                }
                self.walk_expr(lhs);
                self.walk_expr(rhs);
            }
            Expr::Neg(inner) => self.walk_expr(inner),
            Expr::Compare { op, lhs, rhs } => {
                let others = compare_alternatives(*op);
                if let Some(v) = self.site(COMPARE_OP, others.len()) {
                    *op = others[v];
                }
                self.walk_expr(lhs);
                self.walk_expr(rhs);
            }
            Expr::Call { target, args } => {
                if let CallTarget::Method { object, .. } = target {
                    self.walk_expr(object);
                }
                for arg in args {
                    match arg {
                        Arg::Positional(e)
                        | Arg::Keyword(_, e)
                        | Arg::Star(e)
                        | Arg::DoubleStar(e) => self.walk_expr(e),
                    }
                }
            }
            Expr::ListLit(items) | Expr::TupleLit(items) | Expr::SetLit(items) => {
                for item in items {
                    self.walk_expr(item);
                }
            }
            Expr::MapLit(pairs) => {
                for (k, v) in pairs {
                    self.walk_expr(k);
                    self.walk_expr(v);
                }
            }
        }
    }

    fn literal(&mut self, lit: &mut Literal) {
        match lit {
            Literal::Int(n) => {
                let alts = int_alternatives(*n);
                if let Some(v) = self.site(INT_CONST, alts.len()) {
                    *lit = Literal::Int(alts[v]);
                }
            }
            Literal::Float(x) => {
                let alts = float_alternatives(*x);
                if !alts.is_empty() {
                    if let Some(v) = self.site(FLOAT_CONST, alts.len()) {
                        *lit = Literal::Float(alts[v]);
                    }
                }
            }
            Literal::Bool(b) => {
                if self.site(BOOL_CONST, 1).is_some() {
                    *lit = Literal::Bool(!*b);
                }
            }
            Literal::Str(_) | Literal::Bytes(_) | Literal::None => {}
        }
    }
}

fn arith_alternatives(op: BinOp) -> Vec<BinOp> {
    [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::FloorDiv, BinOp::Mod]
        .into_iter()
        .filter(|o| *o != op)
        .collect()
}

fn compare_alternatives(op: CmpOp) -> Vec<CmpOp> {
    match op {
        CmpOp::Eq | CmpOp::Ne | CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge => {
            [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge]
                .into_iter()
                .filter(|o| *o != op)
                .collect()
        }
        CmpOp::In => vec![CmpOp::NotIn],
        CmpOp::NotIn => vec![CmpOp::In],
        CmpOp::Is => vec![CmpOp::IsNot],
        CmpOp::IsNot => vec![CmpOp::Is],
    }
}

/// Neighbours and zero, the original and overflow excluded.
fn int_alternatives(n: i64) -> Vec<i64> {
    let mut alts = Vec::new();
    for candidate in [n.checked_sub(1), n.checked_add(1), (n != 0).then_some(0)] {
        if let Some(c) = candidate {
            if !alts.contains(&c) {
                alts.push(c);
            }
        }
    }
    alts
}

fn float_alternatives(x: f64) -> Vec<f64> {
    if !x.is_finite() {
        return Vec::new();
    }
    let mut alts = Vec::new();
    for candidate in [x - 1.0, x + 1.0, 0.0] {
        let fresh = candidate.to_bits() != x.to_bits()
            && !alts.iter().any(|a: &f64| a.to_bits() == candidate.to_bits());
        if fresh {
            alts.push(candidate);
        }
    }
    alts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minidyn::parse_module;
    use crate::minidyn::render::render_module;

    fn ast(src: &str) -> ModuleAst {
        parse_module("m", src).unwrap()
    }

    fn by_operator<'a>(mutants: &'a [Mutant], operator: &str) -> Vec<&'a Mutant> {
        mutants.iter().filter(|m| m.operator == operator).collect()
    }

    #[test]
    fn a_comparison_has_five_alternatives() {
        let mutants = generate_mutants(&ast("def less(a: Int, b: Int) -> Bool:\n    return a < b\n"));
        let compares = by_operator(&mutants, COMPARE_OP);
        assert_eq!(compares.len(), 5);
        let mut seen = Vec::new();
        for m in compares {
            let f = m.module.ast.functions().next().unwrap();
            let Stmt::Return { value: Some(Expr::Compare { op, .. }) } = &f.body[0] else {
                panic!("mutant lost its comparison")
            };
            assert_ne!(*op, CmpOp::Lt);
            assert!(!seen.contains(op));
            seen.push(*op);
        }
        // The only other site is the returned value itself.
        assert_eq!(by_operator(&mutants, RETURN_NONE).len(), 1);
        assert_eq!(mutants.len(), 6);
    }

    #[test]
    fn an_int_constant_moves_to_its_neighbours_and_zero() {
        let mutants = generate_mutants(&ast("def answer() -> Int:\n    return 42\n"));
        let mut values: Vec<i64> = by_operator(&mutants, INT_CONST)
            .iter()
            .map(|m| {
                let f = m.module.ast.functions().next().unwrap();
                let Stmt::Return { value: Some(Expr::Literal(Literal::Int(n))) } = &f.body[0]
                else {
                    panic!("mutant lost its literal")
                };
                *n
            })
            .collect();
        values.sort();
        assert_eq!(values, vec![0, 41, 43]);
        assert_eq!(mutants.len(), 4);
    }

    #[test]
    fn neighbouring_alternatives_collapse_when_they_collide() {
        assert_eq!(int_alternatives(1), vec![0, 2]);
        assert_eq!(int_alternatives(0), vec![-1, 1]);
        assert_eq!(int_alternatives(i64::MAX), vec![i64::MAX - 1, 0]);
        assert_eq!(float_alternatives(0.5), vec![-0.5, 1.5, 0.0]);
        assert_eq!(float_alternatives(0.0).len(), 2);
    }

    #[test]
    fn module_constants_are_sites_too() {
        let mutants = generate_mutants(&ast("LIMIT = 1\n"));
        assert_eq!(mutants.len(), 2);
        assert!(mutants.iter().all(|m| m.location == "LIMIT"));
    }

    #[test]
    fn strings_and_raise_messages_are_not_mutated() {
        let src = "GREETING = \"hello\"\n\ndef shout() -> Str:\n    raise ValueError(\"boom\")\n";
        assert!(generate_mutants(&ast(src)).is_empty());
    }

    #[test]
    fn connectives_swap_and_bools_flip() {
        let src = "def both(a: Bool, b: Bool) -> Bool:\n    if a and b:\n        return True\n    return False\n";
        let mutants = generate_mutants(&ast(src));
        assert_eq!(by_operator(&mutants, CONNECTIVE).len(), 1);
        assert_eq!(by_operator(&mutants, BOOL_CONST).len(), 2);
        assert_eq!(by_operator(&mutants, RETURN_NONE).len(), 2);
        let swapped = &by_operator(&mutants, CONNECTIVE)[0];
        let f = swapped.module.ast.functions().next().unwrap();
        let Stmt::If { arms, .. } = &f.body[0] else { panic!("mutant lost its if") };
        assert!(matches!(arms[0].0, Cond::Or(..)));
    }

    #[test]
    fn methods_and_constructors_carry_their_class_in_the_location() {
        let src = "class Acc:\n    def __init__(self, start: Int):\n        self.total = start + 0\n\n    def add(self, n: Int) -> Int:\n        self.total = self.total + n\n        return self.total\n";
        let mutants = generate_mutants(&ast(src));
        assert!(mutants.iter().any(|m| m.location == "Acc.__init__"));
        assert!(mutants.iter().any(|m| m.location == "Acc.add"));
    }

    #[test]
    fn every_mutant_differs_from_the_original_and_from_each_other() {
        let src = "def mix(a: Int, b: Int) -> Int:\n    if a > 0 or b > 1:\n        return a + b * 2\n    return 0\n";
        let original = ast(src);
        let mutants = generate_mutants(&original);
        assert!(!mutants.is_empty());
        let base = render_module(&original);
        let mut renders: Vec<String> =
            mutants.iter().map(|m| render_module(&m.module.ast)).collect();
        assert!(renders.iter().all(|r| *r != base));
        renders.sort();
        renders.dedup();
        assert_eq!(renders.len(), mutants.len());
    }

    #[test]
    fn generation_is_deterministic() {
        let src = "def mix(a: Int, b: Int) -> Int:\n    if a > 0 or b > 1:\n        return a + b * 2\n    return 0\n";
        let a = generate_mutants(&ast(src));
        let b = generate_mutants(&ast(src));
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.id, y.id);
            assert_eq!(x.operator, y.operator);
            assert_eq!(x.location, y.location);
            assert_eq!(render_module(&x.module.ast), render_module(&y.module.ast));
        }
    }
}
