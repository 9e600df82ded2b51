//! AST to bytecode compiler.
//!
//! All names are resolved statically: a module that mentions an unknown
//! name, calls something that is not callable, or raises an unknown
//! exception class is rejected here rather than at run time. Globals are
//! collected before bodies are compiled, so definition order does not
//! matter for references between module items.
//!
//! Conditions are lowered by short-circuit jump threading: every atomic
//! condition becomes its own `Branch` instruction with a fresh predicate
//! id, so an `a or b` guard contributes two predicates (four branches).

use thiserror::Error;

use super::ast::{
    Arg, AssignTarget, CallTarget, ClassDef, Cond, Expr, FunctionDef, Item, Literal, ModuleAst,
    Stmt,
};
use super::bytecode::{
    ArgItem, Builtin, ClassInfo, CodeObject, CodeObjectKind, ConstValue, GlobalEntry, Instr,
    ParamSpec, PredicateInfo, EXCEPTION_CLASSES,
};

#[derive(Debug, Error)]
#[error("compile error in `{module}`: {message}")]
pub struct CompileError {
    pub module: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct CompiledModule {
    pub name: String,
    pub ast: ModuleAst,
    /// Code object 0 is always the module body.
    pub code_objects: Vec<CodeObject>,
    pub classes: Vec<ClassInfo>,
    pub globals: Vec<GlobalEntry>,
    pub global_names: Vec<String>,
    /// Attribute, method, and keyword names referenced by instructions.
    pub names: Vec<String>,
    pub consts: Vec<ConstValue>,
    pub arg_specs: Vec<Vec<ArgItem>>,
    pub predicates: Vec<PredicateInfo>,
}

impl CompiledModule {
    /// Total number of branches, two per predicate.
    pub fn branch_count(&self) -> usize {
        2 * self.predicates.len()
    }

    pub fn global_index(&self, name: &str) -> Option<usize> {
        self.global_names.iter().position(|n| n == name)
    }

    pub fn code_object_named(&self, name: &str) -> Option<&CodeObject> {
        self.code_objects.iter().find(|c| c.name == name)
    }

    pub fn class_named(&self, name: &str) -> Option<&ClassInfo> {
        self.classes.iter().find(|c| c.name == name)
    }
}

pub fn compile_module(ast: &ModuleAst) -> Result<CompiledModule, CompileError> {
    let mut ctx = ModuleCtx::new(ast.name.clone());
    ctx.collect_globals(ast)?;
    ctx.compile_bodies(ast)?;
    Ok(CompiledModule {
        name: ast.name.clone(),
        ast: ast.clone(),
        code_objects: ctx.code_objects,
        classes: ctx.classes,
        globals: ctx.globals,
        global_names: ctx.global_names,
        names: ctx.names,
        consts: ctx.consts,
        arg_specs: ctx.arg_specs,
        predicates: ctx.predicates,
    })
}

struct ModuleCtx {
    module: String,
    globals: Vec<GlobalEntry>,
    global_names: Vec<String>,
    names: Vec<String>,
    consts: Vec<ConstValue>,
    arg_specs: Vec<Vec<ArgItem>>,
    predicates: Vec<PredicateInfo>,
    code_objects: Vec<CodeObject>,
    classes: Vec<ClassInfo>,
}

impl ModuleCtx {
    fn new(module: String) -> Self {
        ModuleCtx {
            module,
            globals: Vec::new(),
            global_names: Vec::new(),
            names: Vec::new(),
            consts: Vec::new(),
            arg_specs: Vec::new(),
            predicates: Vec::new(),
            code_objects: Vec::new(),
            classes: Vec::new(),
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, CompileError> {
        Err(CompileError { module: self.module.clone(), message: message.into() })
    }

    /// First pass: register every module-level name so forward references
    /// resolve. Code object ids are assigned here (module body is 0) and
    /// bodies are filled in by the second pass.
    fn collect_globals(&mut self, ast: &ModuleAst) -> Result<(), CompileError> {
        self.code_objects.push(CodeObject {
            id: 0,
            kind: CodeObjectKind::ModuleBody,
            name: format!("<module {}>", ast.name),
            params: Vec::new(),
            n_locals: 0,
            local_names: Vec::new(),
            code: Vec::new(),
            predicate_ids: Vec::new(),
        });
        for item in &ast.items {
            let (name, entry) = match item {
                Item::Constant(c) => {
                    (c.name.clone(), GlobalEntry::Constant(literal_const(&c.value)))
                }
                Item::Function(f) => {
                    let id = self.reserve_code_object(CodeObjectKind::Function, f.name.clone());
                    (f.name.clone(), GlobalEntry::Function(id))
                }
                Item::Class(c) => {
                    let class_id = self.classes.len();
                    let constructor = c.constructor.as_ref().map(|_| {
                        self.reserve_code_object(
                            CodeObjectKind::Constructor,
                            format!("{}.__init__", c.name),
                        )
                    });
                    let mut methods = Vec::new();
                    for m in &c.methods {
                        if methods.iter().any(|(n, _)| n == &m.name) {
                            return self.err(format!(
                                "duplicate method `{}` in class `{}`",
                                m.name, c.name
                            ));
                        }
                        let id = self.reserve_code_object(
                            CodeObjectKind::Method,
                            format!("{}.{}", c.name, m.name),
                        );
                        methods.push((m.name.clone(), id));
                    }
                    self.classes.push(ClassInfo {
                        id: class_id,
                        name: c.name.clone(),
                        constructor,
                        methods,
                    });
                    (c.name.clone(), GlobalEntry::Class(class_id))
                }
            };
            if self.global_names.contains(&name) {
                return self.err(format!("duplicate module-level name `{name}`"));
            }
            self.global_names.push(name);
            self.globals.push(entry);
        }
        Ok(())
    }

    fn reserve_code_object(&mut self, kind: CodeObjectKind, name: String) -> usize {
        let id = self.code_objects.len();
        self.code_objects.push(CodeObject {
            id,
            kind,
            name,
            params: Vec::new(),
            n_locals: 0,
            local_names: Vec::new(),
            code: Vec::new(),
            predicate_ids: Vec::new(),
        });
        id
    }

    fn compile_bodies(&mut self, ast: &ModuleAst) -> Result<(), CompileError> {
        self.compile_module_body(ast)?;
        for item in &ast.items {
            match item {
                Item::Constant(_) => {}
                Item::Function(f) => {
                    let id = match self.globals[self.global_index(&f.name).unwrap()] {
                        GlobalEntry::Function(id) => id,
                        _ => unreachable!(),
                    };
                    self.compile_callable(f, id)?;
                }
                Item::Class(c) => self.compile_class(c)?,
            }
        }
        Ok(())
    }

    /// The module body stores each constant into its global slot. Importing
    /// a module means executing this code object.
    fn compile_module_body(&mut self, ast: &ModuleAst) -> Result<(), CompileError> {
        let mut code = Vec::new();
        for item in &ast.items {
            if let Item::Constant(c) = item {
                let cid = self.intern_const(literal_const(&c.value));
                let gid = self.global_index(&c.name).unwrap();
                code.push(Instr::LoadConst(cid));
                code.push(Instr::StoreGlobal(gid));
            }
        }
        let none = self.intern_const(ConstValue::None);
        code.push(Instr::LoadConst(none));
        code.push(Instr::Return);
        self.code_objects[0].code = code;
        Ok(())
    }

    fn compile_class(&mut self, class: &ClassDef) -> Result<(), CompileError> {
        let info = self.classes.iter().find(|c| c.name == class.name).unwrap().clone();
        if let (Some(ctor), Some(id)) = (&class.constructor, info.constructor) {
            self.compile_callable(ctor, id)?;
        }
        for m in &class.methods {
            let id = info.method(&m.name).unwrap();
            self.compile_callable(m, id)?;
        }
        Ok(())
    }

    fn compile_callable(&mut self, def: &FunctionDef, id: usize) -> Result<(), CompileError> {
        let params: Vec<ParamSpec> = def
            .params
            .iter()
            .map(|p| ParamSpec {
                name: p.name.clone(),
                kind: p.kind,
                default: p.default.as_ref().map(literal_const),
            })
            .collect();
        let mut locals: Vec<String> = params.iter().map(|p| p.name.clone()).collect();
        collect_assigned_names(&def.body, &mut locals);

        let mut fc = FuncCompiler {
            ctx: self,
            code_object: id,
            locals,
            code: Vec::new(),
            labels: Vec::new(),
        };
        fc.block(&def.body)?;
        if fc.fallthrough_reachable() {
            let none = fc.ctx.intern_const(ConstValue::None);
            fc.code.push(Instr::LoadConst(none));
            fc.code.push(Instr::Return);
        }
        fc.resolve_labels();
        let FuncCompiler { locals, code, .. } = fc;

        let predicate_ids: Vec<usize> =
            self.predicates.iter().filter(|p| p.code_object == id).map(|p| p.id).collect();
        let co = &mut self.code_objects[id];
        co.params = params;
        co.n_locals = locals.len();
        co.local_names = locals;
        co.code = code;
        co.predicate_ids = predicate_ids;
        Ok(())
    }

    fn global_index(&self, name: &str) -> Option<usize> {
        self.global_names.iter().position(|n| n == name)
    }

    fn intern_const(&mut self, value: ConstValue) -> usize {
        if let Some(i) = self.consts.iter().position(|c| c == &value) {
            return i;
        }
        self.consts.push(value);
        self.consts.len() - 1
    }

    fn intern_name(&mut self, name: &str) -> usize {
        if let Some(i) = self.names.iter().position(|n| n == name) {
            return i;
        }
        self.names.push(name.to_string());
        self.names.len() - 1
    }

    fn intern_arg_spec(&mut self, spec: Vec<ArgItem>) -> usize {
        self.arg_specs.push(spec);
        self.arg_specs.len() - 1
    }

    fn new_predicate(&mut self, code_object: usize, repr: &str) -> usize {
        let id = self.predicates.len();
        self.predicates.push(PredicateInfo { id, code_object, repr: repr.to_string() });
        id
    }
}

fn literal_const(lit: &Literal) -> ConstValue {
    match lit {
        Literal::Int(v) => ConstValue::Int(*v),
        Literal::Float(v) => ConstValue::Float(*v),
        Literal::Bool(v) => ConstValue::Bool(*v),
        Literal::Str(s) => ConstValue::Str(s.clone()),
        Literal::Bytes(b) => ConstValue::Bytes(b.clone()),
        Literal::None => ConstValue::None,
    }
}

fn collect_assigned_names(body: &[Stmt], out: &mut Vec<String>) {
    for stmt in body {
        match stmt {
            Stmt::Assign { target: AssignTarget::Name(name), .. } => {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
            Stmt::Assign { .. } => {}
            Stmt::If { arms, else_body } => {
                for (_, b) in arms {
                    collect_assigned_names(b, out);
                }
                if let Some(b) = else_body {
                    collect_assigned_names(b, out);
                }
            }
            Stmt::While { body, .. } => collect_assigned_names(body, out),
            _ => {}
        }
    }
}

/// Jump targets are emitted as label ids and rewritten to instruction
/// offsets by `resolve_labels` once the body is complete.
struct FuncCompiler<'a> {
    ctx: &'a mut ModuleCtx,
    code_object: usize,
    locals: Vec<String>,
    code: Vec<Instr>,
    labels: Vec<usize>,
}

impl<'a> FuncCompiler<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, CompileError> {
        let name = &self.ctx.code_objects[self.code_object].name;
        Err(CompileError {
            module: self.ctx.module.clone(),
            message: format!("in `{}`: {}", name, message.into()),
        })
    }

    fn new_label(&mut self) -> usize {
        self.labels.push(usize::MAX);
        self.labels.len() - 1
    }

    fn bind_label(&mut self, label: usize) {
        self.labels[label] = self.code.len();
    }

    fn resolve_labels(&mut self) {
        for instr in &mut self.code {
            match instr {
                Instr::Jump(t) => *t = self.labels[*t],
                Instr::Branch { true_to, false_to, .. } => {
                    *true_to = self.labels[*true_to];
                    *false_to = self.labels[*false_to];
                }
                _ => {}
            }
        }
        debug_assert!(self.labels.iter().all(|&t| t != usize::MAX));
    }

    fn local_index(&self, name: &str) -> Option<usize> {
        self.locals.iter().position(|n| n == name)
    }

    /// Whether execution can arrive at the current end of the code, either
    /// by falling through the last instruction or by a jump to a label
    /// bound here. Used to avoid emitting dead jumps and dead returns.
    fn fallthrough_reachable(&self) -> bool {
        if !matches!(self.code.last(), Some(Instr::Return | Instr::Raise { .. })) {
            return true;
        }
        let here = self.code.len();
        let at_end: Vec<usize> = (0..self.labels.len()).filter(|&l| self.labels[l] == here).collect();
        if at_end.is_empty() {
            return false;
        }
        self.code.iter().any(|instr| match instr {
            Instr::Jump(t) => at_end.contains(t),
            Instr::Branch { true_to, false_to, .. } => {
                at_end.contains(true_to) || at_end.contains(false_to)
            }
            _ => false,
        })
    }

    fn block(&mut self, body: &[Stmt]) -> Result<(), CompileError> {
        for stmt in body {
            self.statement(stmt)?;
        }
        Ok(())
    }

    fn statement(&mut self, stmt: &Stmt) -> Result<(), CompileError> {
        match stmt {
            Stmt::Assign { target, value } => {
                self.expression(value)?;
                match target {
                    AssignTarget::Name(name) => {
                        let slot = self.local_index(name).unwrap();
                        self.code.push(Instr::StoreLocal(slot));
                    }
                    AssignTarget::Attr { object, attr } => {
                        self.load_name(object)?;
                        let idx = self.ctx.intern_name(attr);
                        self.code.push(Instr::StoreAttr(idx));
                    }
                }
            }
            Stmt::If { arms, else_body } => {
                let end = self.new_label();
                for (cond, body) in arms {
                    let body_l = self.new_label();
                    let next_l = self.new_label();
                    self.condition(cond, body_l, next_l)?;
                    self.bind_label(body_l);
                    self.block(body)?;
                    if self.fallthrough_reachable() {
                        self.code.push(Instr::Jump(end));
                    }
                    self.bind_label(next_l);
                }
                if let Some(body) = else_body {
                    self.block(body)?;
                }
                self.bind_label(end);
            }
            Stmt::While { cond, body } => {
                let head = self.new_label();
                let body_l = self.new_label();
                let end = self.new_label();
                self.bind_label(head);
                self.condition(cond, body_l, end)?;
                self.bind_label(body_l);
                self.block(body)?;
                if self.fallthrough_reachable() {
                    self.code.push(Instr::Jump(head));
                }
                self.bind_label(end);
            }
            Stmt::Return { value } => {
                match value {
                    Some(expr) => self.expression(expr)?,
                    None => {
                        let none = self.ctx.intern_const(ConstValue::None);
                        self.code.push(Instr::LoadConst(none));
                    }
                }
                self.code.push(Instr::Return);
            }
            Stmt::Raise { class, message } => {
                if !EXCEPTION_CLASSES.contains(&class.as_str()) {
                    return self.err(format!("unknown exception class `{class}`"));
                }
                self.expression(message)?;
                let idx = self.ctx.intern_name(class);
                self.code.push(Instr::Raise { class: idx });
            }
            Stmt::Expr(expr) => {
                self.expression(expr)?;
                self.code.push(Instr::Pop);
            }
            Stmt::Expect { .. } => {
                return self.err("expect statements are only valid in rendered test files");
            }
        }
        Ok(())
    }

    /// Short-circuit lowering: each atom gets its own Branch instruction.
    fn condition(
        &mut self,
        cond: &Cond,
        true_to: usize,
        false_to: usize,
    ) -> Result<(), CompileError> {
        match cond {
            Cond::Or(lhs, rhs) => {
                let mid = self.new_label();
                self.condition(lhs, true_to, mid)?;
                self.bind_label(mid);
                self.condition(rhs, true_to, false_to)?;
            }
            Cond::And(lhs, rhs) => {
                let mid = self.new_label();
                self.condition(lhs, mid, false_to)?;
                self.bind_label(mid);
                self.condition(rhs, true_to, false_to)?;
            }
            Cond::Atom(expr) => match expr {
                Expr::Compare { op, lhs, rhs } => {
                    self.expression(lhs)?;
                    self.expression(rhs)?;
                    let pred = self.ctx.new_predicate(self.code_object, op.symbol());
                    self.code.push(Instr::Branch { pred, cmp: Some(*op), true_to, false_to });
                }
                other => {
                    self.expression(other)?;
                    let pred = self.ctx.new_predicate(self.code_object, "truthy");
                    self.code.push(Instr::Branch { pred, cmp: None, true_to, false_to });
                }
            },
        }
        Ok(())
    }

    fn load_name(&mut self, name: &str) -> Result<(), CompileError> {
        if let Some(slot) = self.local_index(name) {
            self.code.push(Instr::LoadLocal(slot));
        } else if let Some(gid) = self.ctx.global_index(name) {
            // Functions and classes are not first-class values.
            match self.ctx.globals[gid] {
                GlobalEntry::Constant(_) => self.code.push(Instr::LoadGlobal(gid)),
                GlobalEntry::Function(_) | GlobalEntry::Class(_) => {
                    return self.err(format!("`{name}` can only be called"));
                }
            }
        } else if builtin_named(name).is_some() {
            return self.err(format!("builtin `{name}` can only be called"));
        } else {
            return self.err(format!("unresolved name `{name}`"));
        }
        Ok(())
    }

    fn expression(&mut self, expr: &Expr) -> Result<(), CompileError> {
        match expr {
            Expr::Literal(lit) => {
                let cid = self.ctx.intern_const(literal_const(lit));
                self.code.push(Instr::LoadConst(cid));
            }
            Expr::Name(name) => self.load_name(name)?,
            Expr::Attr { object, attr } => {
                self.expression(object)?;
                let idx = self.ctx.intern_name(attr);
                self.code.push(Instr::LoadAttr(idx));
            }
            Expr::Binary { op, lhs, rhs } => {
                self.expression(lhs)?;
                self.expression(rhs)?;
                self.code.push(Instr::Binary(*op));
            }
            Expr::Neg(inner) => {
                self.expression(inner)?;
                self.code.push(Instr::Neg);
            }
            Expr::Compare { op, lhs, rhs } => {
                self.expression(lhs)?;
                self.expression(rhs)?;
                self.code.push(Instr::Compare(*op));
            }
            Expr::Call { target, args } => self.call(target, args)?,
            Expr::ListLit(items) => {
                for item in items {
                    self.expression(item)?;
                }
                self.code.push(Instr::BuildList(items.len()));
            }
            Expr::TupleLit(items) => {
                for item in items {
                    self.expression(item)?;
                }
                self.code.push(Instr::BuildTuple(items.len()));
            }
            Expr::SetLit(items) => {
                for item in items {
                    self.expression(item)?;
                }
                self.code.push(Instr::BuildSet(items.len()));
            }
            Expr::EmptySet => self.code.push(Instr::BuildSet(0)),
            Expr::MapLit(pairs) => {
                for (key, value) in pairs {
                    self.expression(key)?;
                    self.expression(value)?;
                }
                self.code.push(Instr::BuildMap(pairs.len()));
            }
        }
        Ok(())
    }

    fn call(&mut self, target: &CallTarget, args: &[Arg]) -> Result<(), CompileError> {
        match target {
            CallTarget::Name(name) => {
                if self.local_index(name).is_some() {
                    return self.err(format!("`{name}` is a local variable and not callable"));
                }
                if let Some(gid) = self.ctx.global_index(name) {
                    match self.ctx.globals[gid] {
                        GlobalEntry::Function(_) | GlobalEntry::Class(_) => {
                            let spec = self.push_args(args)?;
                            self.code.push(Instr::CallFunction { global: gid, spec });
                        }
                        GlobalEntry::Constant(_) => {
                            return self.err(format!("constant `{name}` is not callable"));
                        }
                    }
                } else if let Some(builtin) = builtin_named(name) {
                    let argc = args.len();
                    if args.iter().any(|a| !matches!(a, Arg::Positional(_))) {
                        return self.err(format!(
                            "builtin `{name}` takes only positional arguments"
                        ));
                    }
                    let expected = match builtin {
                        Builtin::Len => 1,
                        Builtin::Tick => 0,
                    };
                    if argc != expected {
                        return self.err(format!(
                            "builtin `{name}` takes {expected} argument(s), got {argc}"
                        ));
                    }
                    for arg in args {
                        if let Arg::Positional(e) = arg {
                            self.expression(e)?;
                        }
                    }
                    self.code.push(Instr::CallBuiltin { builtin, argc });
                } else {
                    return self.err(format!("unresolved name `{name}`"));
                }
            }
            CallTarget::Method { object, name } => {
                self.expression(object)?;
                let spec = self.push_args(args)?;
                let idx = self.ctx.intern_name(name);
                self.code.push(Instr::CallMethod { name: idx, spec });
            }
        }
        Ok(())
    }

    /// Evaluates arguments in source order and interns their shape.
    fn push_args(&mut self, args: &[Arg]) -> Result<usize, CompileError> {
        let mut shape = Vec::with_capacity(args.len());
        for arg in args {
            match arg {
                Arg::Positional(e) => {
                    self.expression(e)?;
                    shape.push(ArgItem::Positional);
                }
                Arg::Keyword(name, value) => {
                    self.expression(value)?;
                    let idx = self.ctx.intern_name(name);
                    shape.push(ArgItem::Keyword(idx));
                }
                Arg::Star(e) => {
                    self.expression(e)?;
                    shape.push(ArgItem::Star);
                }
                Arg::DoubleStar(e) => {
                    self.expression(e)?;
                    shape.push(ArgItem::DoubleStar);
                }
            }
        }
        Ok(self.ctx.intern_arg_spec(shape))
    }
}

fn builtin_named(name: &str) -> Option<Builtin> {
    match name {
        "len" => Some(Builtin::Len),
        "tick" => Some(Builtin::Tick),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_module;
    use super::super::value::CmpOp;
    use super::*;

    fn compile(source: &str) -> CompiledModule {
        let ast = parse_module("m", source).expect("parse");
        compile_module(&ast).expect("compile")
    }

    fn compile_err(source: &str) -> String {
        let ast = parse_module("m", source).expect("parse");
        compile_module(&ast).unwrap_err().message
    }

    #[test]
    fn branchless_function_has_no_predicates() {
        let m = compile("def ceil_div(a: Int, b: Int) -> Int:\n    return (a + b - 1) // b\n");
        assert_eq!(m.predicates.len(), 0);
        assert_eq!(m.branch_count(), 0);
        let co = m.code_object_named("ceil_div").unwrap();
        assert!(co.is_branchless());
        assert_eq!(m.code_objects.len(), 2);
    }

    #[test]
    fn each_condition_atom_is_one_predicate() {
        let m = compile(concat!(
            "def f(x, y):\n",
            "    if x > 0 and y > 0 or x == y:\n",
            "        return 1\n",
            "    return 0\n",
        ));
        assert_eq!(m.predicates.len(), 3);
        assert_eq!(m.branch_count(), 6);
        let branches: Vec<_> = m
            .code_objects
            .iter()
            .flat_map(|c| &c.code)
            .filter(|i| matches!(i, Instr::Branch { .. }))
            .collect();
        assert_eq!(branches.len(), 3);
    }

    #[test]
    fn predicates_are_numbered_in_compile_order() {
        let m = compile(concat!(
            "def f(x):\n",
            "    if x < 0:\n",
            "        return 0\n",
            "    return 1\n",
            "\n",
            "def g(x):\n",
            "    while x > 0:\n",
            "        x = x - 1\n",
            "    return x\n",
        ));
        assert_eq!(m.predicates.len(), 2);
        let f = m.code_object_named("f").unwrap();
        let g = m.code_object_named("g").unwrap();
        assert_eq!(f.predicate_ids, vec![0]);
        assert_eq!(g.predicate_ids, vec![1]);
        assert_eq!(m.predicates[0].repr, "<");
        assert_eq!(m.predicates[1].repr, ">");
    }

    #[test]
    fn module_body_stores_constants() {
        let m = compile("LIMIT = 10\nSCALE = 2.5\n");
        let body = &m.code_objects[0];
        assert_eq!(body.kind, CodeObjectKind::ModuleBody);
        let stores: Vec<_> =
            body.code.iter().filter(|i| matches!(i, Instr::StoreGlobal(_))).collect();
        assert_eq!(stores.len(), 2);
        assert!(matches!(m.globals[0], GlobalEntry::Constant(ConstValue::Int(10))));
    }

    #[test]
    fn forward_references_between_functions_resolve() {
        let m = compile(concat!(
            "def first(x):\n",
            "    return second(x) + 1\n",
            "\n",
            "def second(x):\n",
            "    return x * 2\n",
        ));
        assert_eq!(m.code_objects.len(), 3);
    }

    #[test]
    fn classes_compile_constructor_and_methods() {
        let m = compile(concat!(
            "class Point:\n",
            "    def __init__(self, x: Float, y: Float):\n",
            "        self.x = x\n",
            "        self.y = y\n",
            "\n",
            "    def shifted(self, dx: Float) -> Float:\n",
            "        return self.x + dx\n",
        ));
        let info = m.class_named("Point").unwrap();
        assert!(info.constructor.is_some());
        assert_eq!(info.methods.len(), 1);
        let ctor = &m.code_objects[info.constructor.unwrap()];
        assert_eq!(ctor.kind, CodeObjectKind::Constructor);
        assert_eq!(ctor.name, "Point.__init__");
        assert!(ctor.code.iter().any(|i| matches!(i, Instr::StoreAttr(_))));
    }

    #[test]
    fn unresolved_name_is_rejected() {
        let msg = compile_err("def f(x):\n    return x + missing\n");
        assert!(msg.contains("unresolved name `missing`"), "{msg}");
    }

    #[test]
    fn unknown_exception_class_is_rejected() {
        let msg = compile_err("def f(x):\n    raise BogusError(\"nope\")\n");
        assert!(msg.contains("unknown exception class"), "{msg}");
    }

    #[test]
    fn builtin_arity_is_checked() {
        let msg = compile_err("def f(x):\n    return len(x, x)\n");
        assert!(msg.contains("takes 1 argument"), "{msg}");
    }

    #[test]
    fn calling_a_constant_is_rejected() {
        let msg = compile_err("K = 3\n\ndef f():\n    return K()\n");
        assert!(msg.contains("not callable"), "{msg}");
    }

    #[test]
    fn duplicate_global_name_is_rejected() {
        let msg = compile_err("def f():\n    return 1\n\ndef f():\n    return 2\n");
        assert!(msg.contains("duplicate module-level name"), "{msg}");
    }

    #[test]
    fn value_context_comparison_makes_no_predicate() {
        let m = compile("def f(a, b):\n    eq = a == b\n    return eq\n");
        assert_eq!(m.predicates.len(), 0);
        let co = m.code_object_named("f").unwrap();
        assert!(co.code.iter().any(|i| matches!(i, Instr::Compare(CmpOp::Eq))));
    }

    #[test]
    fn while_loop_jumps_back_to_condition() {
        let m = compile(concat!(
            "def count(n):\n",
            "    total = 0\n",
            "    while n > 0:\n",
            "        total = total + n\n",
            "        n = n - 1\n",
            "    return total\n",
        ));
        let co = m.code_object_named("count").unwrap();
        let branch_pc = co
            .code
            .iter()
            .position(|i| matches!(i, Instr::Branch { .. }))
            .expect("has branch");
        let cond_start = branch_pc.saturating_sub(2);
        assert!(co.code.iter().any(|i| matches!(i, Instr::Jump(t) if *t == cond_start)));
    }
}
