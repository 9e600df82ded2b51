//! Bytecode interpreter for compiled modules. Each call to `execute` runs
//! one test case in a fresh global environment: the module body is executed
//! first (the import), then the case's statements in order. Exceptions raised
//! by the module under test are captured as statement outcomes and never
//! propagate out of the executor.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::time::Instant;

use crate::cluster::ConstantPool;
use crate::minidyn::bytecode::{
    ArgItem, Builtin, CodeObject, GlobalEntry, Instr,
};
use crate::minidyn::value::{binary_op, compare, negate, ObjectData};
use crate::minidyn::{CompiledModule, DynError, Value};
use crate::testmodel::{BoundValue, ParamBinding, PrimitiveValue, Statement, StatementKind, TestCase};

use super::distance::{comparison_distances, truthiness_distances};
use super::trace::{ExecutionBudget, ExecutionResult, ExecutionTrace, StatementOutcome};

/// Frames beyond this depth raise `RecursionError`.
const RECURSION_LIMIT: usize = 64;
/// Sequence results beyond this length raise `OverflowError`; guards the
/// host against runaway allocation from repetition and concatenation.
const SEQUENCE_LIMIT: usize = 100_000;
/// Wall-clock is polled once per this many instructions.
const WALL_CHECK_INTERVAL: u64 = 4096;

/// Monotonic counter shared by every execution of one search run; the
/// `tick()` builtin reads and advances it, which makes repeated runs of the
/// same test case observably different on purpose.
#[derive(Debug, Clone, Default)]
pub struct ExecSession {
    pub ticks: u64,
}

/// Runs test cases against one compiled module. The session and the observed
/// constant pool persist across executions; globals do not.
pub struct Executor<'m> {
    module: &'m CompiledModule,
    pub session: ExecSession,
    pub seeds: ConstantPool,
}

impl<'m> Executor<'m> {
    pub fn new(module: &'m CompiledModule) -> Self {
        Executor { module, session: ExecSession::default(), seeds: ConstantPool::new() }
    }

    pub fn module(&self) -> &'m CompiledModule {
        self.module
    }

    /// Interprets the case statement by statement. The first exception stops
    /// the case; remaining statements stay `NotExecuted`. A fired fuse sets
    /// `budget_exhausted` and keeps the partial trace.
    pub fn execute(&mut self, case: &TestCase, budget: &ExecutionBudget) -> (ExecutionResult, ExecutionTrace) {
        debug_assert!(budget.max_instructions > 0 && !budget.max_wall.is_zero());
        let started = Instant::now();
        let mut trace = ExecutionTrace::new(self.module);
        // Loading a module executes its body and brings every definition
        // into being, so all code objects count as executed up front.
        for id in 0..self.module.code_objects.len() {
            trace.mark_executed(id);
        }

        let mut vm = Vm {
            module: self.module,
            globals: vec![None; self.module.globals.len()],
            trace: &mut trace,
            session: &mut self.session,
            seeds: &mut self.seeds,
            instructions: 0,
            max_instructions: budget.max_instructions,
            started,
            max_wall: budget.max_wall,
            depth: 0,
        };

        let mut outcomes = vec![StatementOutcome::NotExecuted; case.len()];
        let mut raised_at = None;
        let mut budget_exhausted = false;

        // The module body stores constants and cannot raise.
        match vm.call_code(0, Vec::new()) {
            Ok(_) => {
                let mut env: HashMap<u32, Value> = HashMap::new();
                for (i, stmt) in case.statements.iter().enumerate() {
                    match vm.exec_statement(stmt, &env) {
                        Ok(value) => {
                            env.insert(stmt.var, value.clone());
                            outcomes[i] = StatementOutcome::Value(value);
                        }
                        Err(VmError::Dyn(e)) => {
                            outcomes[i] =
                                StatementOutcome::Raised { class: e.class, message: e.message };
                            raised_at = Some(i);
                            break;
                        }
                        Err(VmError::Budget) => {
                            budget_exhausted = true;
                            break;
                        }
                    }
                }
            }
            Err(VmError::Budget) => budget_exhausted = true,
            Err(VmError::Dyn(e)) => {
                debug_assert!(false, "module body raised: {e}");
            }
        }

        let instructions = vm.instructions;
        let result = ExecutionResult {
            outcomes,
            raised_at,
            budget_exhausted,
            instructions,
            wall: started.elapsed(),
        };
        (result, trace)
    }
}

/// Computes branch coverage of a set of traces: covered branchless code
/// objects plus taken branches, over all branchless code objects plus all
/// branches. Traces are unioned first.
pub fn branch_coverage<'a, I>(traces: I, module: &CompiledModule) -> f64
where
    I: IntoIterator<Item = &'a ExecutionTrace>,
{
    let mut union = ExecutionTrace::new(module);
    for t in traces {
        union.merge_from(t);
    }
    let branchless: Vec<usize> =
        module.code_objects.iter().filter(|co| co.is_branchless()).map(|co| co.id).collect();
    let covered = branchless.iter().filter(|id| union.executed[**id]).count();
    let taken = union.taken_branches().count();
    let denominator = branchless.len() + module.branch_count();
    if denominator == 0 {
        return 1.0;
    }
    (covered + taken) as f64 / denominator as f64
}

enum VmError {
    Dyn(DynError),
    Budget,
}

impl From<DynError> for VmError {
    fn from(e: DynError) -> Self {
        VmError::Dyn(e)
    }
}

type VmResult<T> = Result<T, VmError>;

fn dyn_err(class: &str, message: impl Into<String>) -> VmError {
    VmError::Dyn(DynError::new(class, message))
}

/// Call arguments after callsite star and double-star expansion.
struct CallArgs {
    pos: Vec<Value>,
    kw: Vec<(String, Value)>,
}

struct Vm<'a> {
    module: &'a CompiledModule,
    globals: Vec<Option<Value>>,
    trace: &'a mut ExecutionTrace,
    session: &'a mut ExecSession,
    seeds: &'a mut ConstantPool,
    instructions: u64,
    max_instructions: u64,
    started: Instant,
    max_wall: std::time::Duration,
    depth: usize,
}

impl<'a> Vm<'a> {
    fn step(&mut self) -> VmResult<()> {
        self.instructions += 1;
        if self.instructions > self.max_instructions {
            return Err(VmError::Budget);
        }
        if self.instructions % WALL_CHECK_INTERVAL == 0 && self.started.elapsed() > self.max_wall {
            return Err(VmError::Budget);
        }
        Ok(())
    }

    fn call_code(&mut self, co_id: usize, locals: Vec<Option<Value>>) -> VmResult<Value> {
        if self.depth >= RECURSION_LIMIT {
            return Err(dyn_err("RecursionError", "maximum call depth exceeded"));
        }
        self.depth += 1;
        let result = self.run_frame(co_id, locals);
        self.depth -= 1;
        result
    }

    fn run_frame(&mut self, co_id: usize, mut locals: Vec<Option<Value>>) -> VmResult<Value> {
        let module = self.module;
        let co = &module.code_objects[co_id];
        locals.resize(co.n_locals, None);
        self.trace.mark_executed(co_id);
        let mut stack: Vec<Value> = Vec::new();
        let mut pc = 0usize;
        loop {
            self.step()?;
            let instr = &co.code[pc];
            pc += 1;
            match instr {
                Instr::LoadConst(c) => stack.push(module.consts[*c].to_value()),
                Instr::LoadLocal(slot) => match &locals[*slot] {
                    Some(v) => stack.push(v.clone()),
                    None => {
                        let name = co
                            .local_names
                            .get(*slot)
                            .map(String::as_str)
                            .unwrap_or("<anonymous>");
                        return Err(dyn_err(
                            "NameError",
                            format!("local variable `{name}` referenced before assignment"),
                        ));
                    }
                },
                Instr::StoreLocal(slot) => {
                    let v = pop(&mut stack);
                    locals[*slot] = Some(v);
                }
                Instr::LoadGlobal(g) => match &self.globals[*g] {
                    Some(v) => stack.push(v.clone()),
                    None => {
                        return Err(dyn_err(
                            "NameError",
                            format!("global `{}` is not initialized", module.global_names[*g]),
                        ))
                    }
                },
                Instr::StoreGlobal(g) => {
                    let v = pop(&mut stack);
                    self.globals[*g] = Some(v);
                }
                Instr::LoadAttr(n) => {
                    let name = &module.names[*n];
                    let obj = pop(&mut stack);
                    let value = attr_get(&obj, name)?;
                    stack.push(value);
                }
                Instr::StoreAttr(n) => {
                    let name = &module.names[*n];
                    let obj = pop(&mut stack);
                    let value = pop(&mut stack);
                    match &obj {
                        Value::Object(o) => o.borrow_mut().set(name, value),
                        other => {
                            return Err(dyn_err(
                                "AttributeError",
                                format!(
                                    "{} value has no settable attribute `{name}`",
                                    other.kind_name()
                                ),
                            ))
                        }
                    }
                }
                Instr::BuildList(n) => {
                    let items = pop_n(&mut stack, *n);
                    stack.push(Value::list(items));
                }
                Instr::BuildTuple(n) => {
                    let items = pop_n(&mut stack, *n);
                    stack.push(Value::tuple(items));
                }
                Instr::BuildSet(n) => {
                    let items = pop_n(&mut stack, *n);
                    for it in &items {
                        require_hashable(it)?;
                    }
                    stack.push(Value::set(items));
                }
                Instr::BuildMap(n) => {
                    let flat = pop_n(&mut stack, *n * 2);
                    let mut pairs = Vec::with_capacity(*n);
                    let mut it = flat.into_iter();
                    while let (Some(k), Some(v)) = (it.next(), it.next()) {
                        require_hashable(&k)?;
                        pairs.push((k, v));
                    }
                    stack.push(Value::map(pairs));
                }
                Instr::Binary(op) => {
                    let rhs = pop(&mut stack);
                    let lhs = pop(&mut stack);
                    guard_sequence_size(*op, &lhs, &rhs)?;
                    stack.push(binary_op(*op, &lhs, &rhs)?);
                }
                Instr::Neg => {
                    let v = pop(&mut stack);
                    stack.push(negate(&v)?);
                }
                Instr::Compare(op) => {
                    let rhs = pop(&mut stack);
                    let lhs = pop(&mut stack);
                    self.seeds.observe(&lhs);
                    self.seeds.observe(&rhs);
                    let truth = compare(*op, &lhs, &rhs)?;
                    stack.push(Value::Bool(truth));
                }
                Instr::Branch { pred, cmp, true_to, false_to } => {
                    let truth = match cmp {
                        Some(op) => {
                            let rhs = pop(&mut stack);
                            let lhs = pop(&mut stack);
                            self.seeds.observe(&lhs);
                            self.seeds.observe(&rhs);
                            // A raising comparison takes neither branch, so
                            // nothing is recorded for the predicate.
                            let truth = compare(*op, &lhs, &rhs)?;
                            let (dt, df) = comparison_distances(*op, &lhs, &rhs);
                            self.trace.record(*pred, dt, df);
                            truth
                        }
                        None => {
                            let v = pop(&mut stack);
                            let (dt, df) = truthiness_distances(&v);
                            self.trace.record(*pred, dt, df);
                            v.is_truthy()
                        }
                    };
                    pc = if truth { *true_to } else { *false_to };
                }
                Instr::Jump(target) => pc = *target,
                Instr::CallFunction { global, spec } => {
                    let args = self.pop_call_args(&mut stack, *spec)?;
                    let result = match &module.globals[*global] {
                        GlobalEntry::Function(co) => self.call_function(*co, args)?,
                        GlobalEntry::Class(class) => self.instantiate(*class, args)?,
                        GlobalEntry::Constant(_) => unreachable!("rejected at compile time"),
                    };
                    stack.push(result);
                }
                Instr::CallMethod { name, spec } => {
                    let args = self.pop_call_args(&mut stack, *spec)?;
                    let receiver = pop(&mut stack);
                    let result = self.call_method(&receiver, &module.names[*name], args)?;
                    stack.push(result);
                }
                Instr::CallBuiltin { builtin, argc } => {
                    let mut args = pop_n(&mut stack, *argc);
                    let result = match builtin {
                        Builtin::Len => {
                            let v = args.pop().unwrap();
                            match v.len() {
                                Some(n) => Value::Int(n as i64),
                                None => {
                                    return Err(dyn_err(
                                        "TypeError",
                                        format!("{} value has no length", v.kind_name()),
                                    ))
                                }
                            }
                        }
                        Builtin::Tick => {
                            let t = self.session.ticks;
                            self.session.ticks += 1;
                            Value::Int(t as i64)
                        }
                    };
                    stack.push(result);
                }
                Instr::Raise { class } => {
                    let msg = pop(&mut stack);
                    return Err(dyn_err(&module.names[*class], message_text(&msg)));
                }
                Instr::Return => return Ok(pop(&mut stack)),
                Instr::Pop => {
                    pop(&mut stack);
                }
            }
        }
    }

    /// Pops one callsite's evaluated arguments off the stack and expands
    /// star and double-star items.
    fn pop_call_args(&mut self, stack: &mut Vec<Value>, spec: usize) -> VmResult<CallArgs> {
        let shape = &self.module.arg_specs[spec];
        let values = pop_n(stack, shape.len());
        let mut args = CallArgs { pos: Vec::new(), kw: Vec::new() };
        for (item, value) in shape.iter().zip(values) {
            match item {
                ArgItem::Positional => args.pos.push(value),
                ArgItem::Keyword(n) => args.kw.push((self.module.names[*n].clone(), value)),
                ArgItem::Star => match &value {
                    Value::List(items) => args.pos.extend(items.borrow().iter().cloned()),
                    Value::Tuple(items) => args.pos.extend(items.iter().cloned()),
                    other => {
                        return Err(dyn_err(
                            "TypeError",
                            format!("argument after * must be a List or Tuple, not {}", other.kind_name()),
                        ))
                    }
                },
                ArgItem::DoubleStar => match &value {
                    Value::Map(pairs) => {
                        for (k, v) in pairs.borrow().iter() {
                            match k {
                                Value::Str(s) => args.kw.push((s.to_string(), v.clone())),
                                other => {
                                    return Err(dyn_err(
                                        "TypeError",
                                        format!("keywords must be Str, not {}", other.kind_name()),
                                    ))
                                }
                            }
                        }
                    }
                    other => {
                        return Err(dyn_err(
                            "TypeError",
                            format!("argument after ** must be a Map, not {}", other.kind_name()),
                        ))
                    }
                },
            }
        }
        Ok(args)
    }

    fn call_function(&mut self, co_id: usize, args: CallArgs) -> VmResult<Value> {
        let locals = bind_arguments(&self.module.code_objects[co_id], args, None)?;
        self.call_code(co_id, locals)
    }

    fn instantiate(&mut self, class_id: usize, args: CallArgs) -> VmResult<Value> {
        let class = &self.module.classes[class_id];
        let object = Value::Object(Rc::new(RefCell::new(ObjectData {
            class_id,
            class_name: class.name.clone(),
            attrs: Vec::new(),
        })));
        match class.constructor {
            Some(ctor) => {
                let locals =
                    bind_arguments(&self.module.code_objects[ctor], args, Some(object.clone()))?;
                // The constructor's return value is discarded.
                self.call_code(ctor, locals)?;
            }
            None => {
                if !args.pos.is_empty() || !args.kw.is_empty() {
                    return Err(dyn_err(
                        "TypeError",
                        format!("{}() takes no arguments", class.name),
                    ));
                }
            }
        }
        Ok(object)
    }

    fn call_method(&mut self, receiver: &Value, name: &str, args: CallArgs) -> VmResult<Value> {
        match receiver {
            Value::Object(o) => {
                let class_id = o.borrow().class_id;
                let class = &self.module.classes[class_id];
                match class.method(name) {
                    Some(co_id) => {
                        let locals = bind_arguments(
                            &self.module.code_objects[co_id],
                            args,
                            Some(receiver.clone()),
                        )?;
                        self.call_code(co_id, locals)
                    }
                    None => Err(dyn_err(
                        "AttributeError",
                        format!("`{}` object has no method `{name}`", class.name),
                    )),
                }
            }
            other => Err(dyn_err(
                "AttributeError",
                format!("{} value has no method `{name}`", other.kind_name()),
            )),
        }
    }

    /// Runs a single test-case statement against the current globals.
    fn exec_statement(&mut self, stmt: &Statement, env: &HashMap<u32, Value>) -> VmResult<Value> {
        let lookup = |var: u32| -> VmResult<Value> {
            env.get(&var)
                .cloned()
                .ok_or_else(|| dyn_err("NameError", format!("variable {var} is not defined")))
        };
        match &stmt.kind {
            StatementKind::Primitive(p) => Ok(primitive_value(p)),
            StatementKind::Collection { kind, elements, pairs } => {
                let items: VmResult<Vec<Value>> = elements.iter().map(|v| lookup(*v)).collect();
                let items = items?;
                match kind {
                    crate::testmodel::CollectionKind::List => Ok(Value::list(items)),
                    crate::testmodel::CollectionKind::Tuple => Ok(Value::tuple(items)),
                    crate::testmodel::CollectionKind::Set => {
                        for it in &items {
                            require_hashable(it)?;
                        }
                        Ok(Value::set(items))
                    }
                    crate::testmodel::CollectionKind::Map => {
                        let mut out = Vec::with_capacity(pairs.len());
                        for (k, v) in pairs {
                            let key = lookup(*k)?;
                            require_hashable(&key)?;
                            out.push((key, lookup(*v)?));
                        }
                        Ok(Value::map(out))
                    }
                }
            }
            StatementKind::Function { function, bindings } => {
                let co_id = self
                    .module
                    .global_index(function)
                    .and_then(|g| match self.module.globals[g] {
                        GlobalEntry::Function(id) => Some(id),
                        _ => None,
                    })
                    .ok_or_else(|| {
                        dyn_err("NameError", format!("function `{function}` is not defined"))
                    })?;
                let args = self.bound_args(bindings, env)?;
                self.call_function(co_id, args)
            }
            StatementKind::Constructor { class, bindings } => {
                let class_id = self
                    .module
                    .class_named(class)
                    .map(|c| c.id)
                    .ok_or_else(|| dyn_err("NameError", format!("class `{class}` is not defined")))?;
                let args = self.bound_args(bindings, env)?;
                self.instantiate(class_id, args)
            }
            StatementKind::Method { receiver, method, bindings } => {
                let receiver = lookup(*receiver)?;
                let args = self.bound_args(bindings, env)?;
                self.call_method(&receiver, method, args)
            }
        }
    }

    /// Turns parameter bindings into call arguments, expanding star and
    /// double-star bindings from their collection variables.
    fn bound_args(
        &mut self,
        bindings: &[ParamBinding],
        env: &HashMap<u32, Value>,
    ) -> VmResult<CallArgs> {
        let mut args = CallArgs { pos: Vec::new(), kw: Vec::new() };
        for b in bindings {
            let value = match b.value {
                BoundValue::Omitted => continue,
                BoundValue::NoneVal => Value::None,
                BoundValue::Var(id) => env.get(&id).cloned().ok_or_else(|| {
                    dyn_err("NameError", format!("variable {id} is not defined"))
                })?,
            };
            match b.kind {
                crate::minidyn::ast::ParamKind::Normal => {
                    if b.by_keyword {
                        args.kw.push((b.param.clone(), value));
                    } else {
                        args.pos.push(value);
                    }
                }
                crate::minidyn::ast::ParamKind::Star => match &value {
                    Value::List(items) => args.pos.extend(items.borrow().iter().cloned()),
                    Value::Tuple(items) => args.pos.extend(items.iter().cloned()),
                    other => {
                        return Err(dyn_err(
                            "TypeError",
                            format!("argument after * must be a List or Tuple, not {}", other.kind_name()),
                        ))
                    }
                },
                crate::minidyn::ast::ParamKind::DoubleStar => match &value {
                    Value::Map(pairs) => {
                        for (k, v) in pairs.borrow().iter() {
                            match k {
                                Value::Str(s) => args.kw.push((s.to_string(), v.clone())),
                                other => {
                                    return Err(dyn_err(
                                        "TypeError",
                                        format!("keywords must be Str, not {}", other.kind_name()),
                                    ))
                                }
                            }
                        }
                    }
                    other => {
                        return Err(dyn_err(
                            "TypeError",
                            format!("argument after ** must be a Map, not {}", other.kind_name()),
                        ))
                    }
                },
            }
        }
        Ok(args)
    }
}

/// Binds call arguments to parameter slots: positionals fill normal
/// parameters in declaration order, overflow goes to a star parameter,
/// keywords bind by name, leftovers go to a double-star parameter, then
/// defaults fill the gaps. `self_value`, when given, is prepended as the
/// first positional.
fn bind_arguments(
    co: &CodeObject,
    args: CallArgs,
    self_value: Option<Value>,
) -> VmResult<Vec<Option<Value>>> {
    use crate::minidyn::ast::ParamKind;

    let fname = &co.name;
    let mut locals: Vec<Option<Value>> = vec![None; co.n_locals];
    let mut pos = args.pos;
    if let Some(s) = self_value {
        pos.insert(0, s);
    }

    let star_slot = co.params.iter().position(|p| p.kind == ParamKind::Star);
    let dstar_slot = co.params.iter().position(|p| p.kind == ParamKind::DoubleStar);

    // Positional filling stops at the star parameter; normals after it are
    // keyword-only.
    let positional_end = star_slot.unwrap_or(co.params.len());
    let mut cursor = 0usize;
    for slot in 0..positional_end {
        if co.params[slot].kind != ParamKind::Normal || cursor >= pos.len() {
            continue;
        }
        locals[slot] = Some(pos[cursor].clone());
        cursor += 1;
    }
    let leftover: Vec<Value> = pos.drain(cursor..).collect();
    match star_slot {
        Some(slot) => locals[slot] = Some(Value::tuple(leftover)),
        None => {
            if !leftover.is_empty() {
                let takes = co.params.iter().filter(|p| p.kind == ParamKind::Normal).count();
                return Err(dyn_err(
                    "TypeError",
                    format!(
                        "{fname}() takes {takes} positional argument(s) but {} were given",
                        takes + leftover.len()
                    ),
                ));
            }
        }
    }

    let mut extras: Vec<(Value, Value)> = Vec::new();
    for (name, value) in args.kw {
        let named = co
            .params
            .iter()
            .position(|p| p.kind == ParamKind::Normal && p.name == name);
        match named {
            Some(slot) => {
                if locals[slot].is_some() {
                    return Err(dyn_err(
                        "TypeError",
                        format!("{fname}() got multiple values for argument `{name}`"),
                    ));
                }
                locals[slot] = Some(value);
            }
            None => match dstar_slot {
                Some(_) => {
                    let key = Value::str(&name);
                    if extras.iter().any(|(k, _)| crate::minidyn::value::value_eq(k, &key)) {
                        return Err(dyn_err(
                            "TypeError",
                            format!("{fname}() got multiple values for argument `{name}`"),
                        ));
                    }
                    extras.push((key, value));
                }
                None => {
                    return Err(dyn_err(
                        "TypeError",
                        format!("{fname}() got an unexpected keyword argument `{name}`"),
                    ))
                }
            },
        }
    }
    if let Some(slot) = dstar_slot {
        locals[slot] = Some(Value::map(extras));
    }

    for (slot, param) in co.params.iter().enumerate() {
        if locals[slot].is_some() || param.kind != ParamKind::Normal {
            continue;
        }
        match &param.default {
            Some(d) => locals[slot] = Some(d.to_value()),
            None => {
                return Err(dyn_err(
                    "TypeError",
                    format!("{fname}() missing required argument `{}`", param.name),
                ))
            }
        }
    }
    Ok(locals)
}

fn attr_get(obj: &Value, name: &str) -> VmResult<Value> {
    match obj {
        Value::Object(o) => o.borrow().get(name).cloned().ok_or_else(|| {
            dyn_err(
                "AttributeError",
                format!("`{}` object has no attribute `{name}`", o.borrow().class_name),
            )
        }),
        other => Err(dyn_err(
            "AttributeError",
            format!("{} value has no attribute `{name}`", other.kind_name()),
        )),
    }
}

fn require_hashable(v: &Value) -> VmResult<()> {
    if v.is_hashable() {
        Ok(())
    } else {
        Err(dyn_err("TypeError", format!("unhashable kind: {}", v.kind_name())))
    }
}

/// Rejects sequence results that would exceed the allocation guard before
/// the operation runs.
fn guard_sequence_size(op: crate::minidyn::value::BinOp, lhs: &Value, rhs: &Value) -> VmResult<()> {
    use crate::minidyn::value::BinOp;
    let overflow = || dyn_err("OverflowError", "sequence result too large");
    match op {
        BinOp::Mul => {
            let (seq_len, times) = match (lhs.len(), rhs.len()) {
                (Some(n), None) => (n, rhs),
                (None, Some(n)) => (n, lhs),
                _ => return Ok(()),
            };
            if let Value::Int(k) = times {
                if *k > 0 && seq_len.saturating_mul(*k as usize) > SEQUENCE_LIMIT {
                    return Err(overflow());
                }
            }
            Ok(())
        }
        BinOp::Add => match (lhs.len(), rhs.len()) {
            (Some(a), Some(b)) if a.saturating_add(b) > SEQUENCE_LIMIT => Err(overflow()),
            _ => Ok(()),
        },
        _ => Ok(()),
    }
}

fn primitive_value(p: &PrimitiveValue) -> Value {
    match p {
        PrimitiveValue::Int(v) => Value::Int(*v),
        PrimitiveValue::Float(v) => Value::Float(*v),
        PrimitiveValue::Bool(v) => Value::Bool(*v),
        PrimitiveValue::Str(s) => Value::str(s),
        PrimitiveValue::Bytes(b) => Value::bytes(b),
    }
}

fn message_text(v: &Value) -> String {
    match v {
        Value::Str(s) => s.to_string(),
        Value::Int(i) => i.to_string(),
        Value::Float(f) => f.to_string(),
        Value::Bool(b) => if *b { "True" } else { "False" }.to_string(),
        Value::None => "None".to_string(),
        other => other.kind_name().to_string(),
    }
}

fn pop(stack: &mut Vec<Value>) -> Value {
    stack.pop().expect("stack underflow: compiler emitted malformed bytecode")
}

fn pop_n(stack: &mut Vec<Value>, n: usize) -> Vec<Value> {
    stack.split_off(stack.len() - n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minidyn::value::value_eq;
    use crate::minidyn::{compile_module, parse_module};
    use crate::testmodel::{CollectionKind, TestCase, TypeRef};

    fn compiled(src: &str) -> CompiledModule {
        compile_module(&parse_module("m", src).unwrap()).unwrap()
    }

    fn int_stmt(case: &mut TestCase, v: i64) -> u32 {
        let var = case.fresh_var();
        case.statements.push(Statement {
            var,
            declared_type: TypeRef::Int,
            kind: StatementKind::Primitive(PrimitiveValue::Int(v)),
        });
        var
    }

    fn str_stmt(case: &mut TestCase, s: &str) -> u32 {
        let var = case.fresh_var();
        case.statements.push(Statement {
            var,
            declared_type: TypeRef::Str,
            kind: StatementKind::Primitive(PrimitiveValue::Str(s.into())),
        });
        var
    }

    fn list_stmt(case: &mut TestCase, elements: Vec<u32>) -> u32 {
        let var = case.fresh_var();
        case.statements.push(Statement {
            var,
            declared_type: TypeRef::List,
            kind: StatementKind::Collection { kind: CollectionKind::List, elements, pairs: vec![] },
        });
        var
    }

    fn map_stmt(case: &mut TestCase, pairs: Vec<(u32, u32)>) -> u32 {
        let var = case.fresh_var();
        case.statements.push(Statement {
            var,
            declared_type: TypeRef::Map,
            kind: StatementKind::Collection { kind: CollectionKind::Map, elements: vec![], pairs },
        });
        var
    }

    fn binding(param: &str, value: BoundValue) -> ParamBinding {
        ParamBinding {
            param: param.into(),
            kind: crate::minidyn::ast::ParamKind::Normal,
            has_default: false,
            declared_type: TypeRef::Dynamic,
            value,
            by_keyword: false,
        }
    }

    fn star_binding(param: &str, value: BoundValue) -> ParamBinding {
        ParamBinding {
            param: param.into(),
            kind: crate::minidyn::ast::ParamKind::Star,
            has_default: false,
            declared_type: TypeRef::List,
            value,
            by_keyword: false,
        }
    }

    fn dstar_binding(param: &str, value: BoundValue) -> ParamBinding {
        ParamBinding {
            param: param.into(),
            kind: crate::minidyn::ast::ParamKind::DoubleStar,
            has_default: false,
            declared_type: TypeRef::Map,
            value,
            by_keyword: false,
        }
    }

    fn call_stmt(case: &mut TestCase, function: &str, bindings: Vec<ParamBinding>) -> u32 {
        let var = case.fresh_var();
        case.statements.push(Statement {
            var,
            declared_type: TypeRef::Dynamic,
            kind: StatementKind::Function { function: function.into(), bindings },
        });
        var
    }

    fn ctor_stmt(case: &mut TestCase, class: &str, bindings: Vec<ParamBinding>) -> u32 {
        let var = case.fresh_var();
        case.statements.push(Statement {
            var,
            declared_type: TypeRef::Class(class.into()),
            kind: StatementKind::Constructor { class: class.into(), bindings },
        });
        var
    }

    fn method_stmt(case: &mut TestCase, receiver: u32, method: &str, bindings: Vec<ParamBinding>) -> u32 {
        let var = case.fresh_var();
        case.statements.push(Statement {
            var,
            declared_type: TypeRef::Dynamic,
            kind: StatementKind::Method { receiver, method: method.into(), bindings },
        });
        var
    }

    fn run(module: &CompiledModule, case: &TestCase) -> (ExecutionResult, ExecutionTrace) {
        Executor::new(module).execute(case, &ExecutionBudget::default())
    }

    fn int_outcome(result: &ExecutionResult, index: usize) -> i64 {
        match &result.outcomes[index] {
            StatementOutcome::Value(Value::Int(n)) => *n,
            other => panic!("expected Int outcome at {index}, got {other:?}"),
        }
    }

    #[test]
    fn function_call_returns_its_value() {
        let m = compiled("def add(a, b):\n    return a + b\n");
        let mut case = TestCase::new();
        let a = int_stmt(&mut case, 2);
        let b = int_stmt(&mut case, 3);
        call_stmt(&mut case, "add", vec![
            binding("a", BoundValue::Var(a)),
            binding("b", BoundValue::Var(b)),
        ]);
        let (result, _) = run(&m, &case);
        assert!(result.passed());
        assert_eq!(int_outcome(&result, 2), 5);
    }

    #[test]
    fn division_by_zero_surfaces_at_the_calling_statement() {
        let m = compiled("def ceil_div(a, b):\n    return (a + b - 1) // b\n");
        let mut case = TestCase::new();
        let a = int_stmt(&mut case, 1);
        let b = int_stmt(&mut case, 0);
        call_stmt(&mut case, "ceil_div", vec![
            binding("a", BoundValue::Var(a)),
            binding("b", BoundValue::Var(b)),
        ]);
        int_stmt(&mut case, 9);
        let (result, _) = run(&m, &case);
        assert_eq!(result.raised_at, Some(2));
        assert_eq!(result.raised_class(), Some("ZeroDivisionError"));
        assert!(matches!(result.outcomes[3], StatementOutcome::NotExecuted));
        assert!(!result.passed());
    }

    #[test]
    fn empty_case_marks_module_body_and_every_definition_executed() {
        let m = compiled(
            "def f():\n    return 1\n\nclass C:\n    def g(self):\n        return 2\n",
        );
        let (result, trace) = run(&m, &TestCase::new());
        assert!(result.passed());
        assert!(result.outcomes.is_empty());
        assert!(trace.executed.iter().all(|e| *e), "{:?}", trace.executed);
        assert_eq!(trace.taken_branches().count(), 0);
    }

    #[test]
    fn infinite_loop_trips_the_instruction_fuse() {
        let m = compiled("def spin():\n    while True:\n        x = 1\n");
        let mut case = TestCase::new();
        int_stmt(&mut case, 7);
        call_stmt(&mut case, "spin", vec![]);
        int_stmt(&mut case, 8);
        let budget =
            ExecutionBudget { max_instructions: 20_000, ..ExecutionBudget::default() };
        let (result, trace) = Executor::new(&m).execute(&case, &budget);
        assert!(result.budget_exhausted);
        assert_eq!(result.raised_at, None);
        assert_eq!(int_outcome(&result, 0), 7);
        assert!(matches!(result.outcomes[1], StatementOutcome::NotExecuted));
        assert!(matches!(result.outcomes[2], StatementOutcome::NotExecuted));
        // The loop predicate kept evaluating until the fuse fired.
        assert!(trace.predicate_counts[0] > 1_000);
        assert!(trace.covers(crate::minidyn::bytecode::true_branch(0)));
        assert!(result.instructions > 20_000);
    }

    #[test]
    fn branch_distances_min_merge_within_one_case() {
        let m = compiled(
            "def lt(a, b):\n    if a < b:\n        return 1\n    return 0\n",
        );
        let mut case = TestCase::new();
        let a = int_stmt(&mut case, 5);
        let b = int_stmt(&mut case, 3);
        call_stmt(&mut case, "lt", vec![
            binding("a", BoundValue::Var(a)),
            binding("b", BoundValue::Var(b)),
        ]);
        let c = int_stmt(&mut case, 4);
        call_stmt(&mut case, "lt", vec![
            binding("a", BoundValue::Var(c)),
            binding("b", BoundValue::Var(b)),
        ]);
        let (result, trace) = run(&m, &case);
        assert!(result.passed());
        // 5 < 3 gives d_true 3; 4 < 3 tightens it to 2. False side was taken
        // both times.
        assert_eq!(trace.distances[0], 2.0);
        assert_eq!(trace.distances[1], 0.0);
        assert_eq!(trace.predicate_counts[0], 2);
    }

    #[test]
    fn truthiness_branch_records_collection_size() {
        let m = compiled(
            "def t(v):\n    if v:\n        return 1\n    return 0\n",
        );
        let mut case = TestCase::new();
        let a = int_stmt(&mut case, 1);
        let b = int_stmt(&mut case, 2);
        let l = list_stmt(&mut case, vec![a, b]);
        call_stmt(&mut case, "t", vec![binding("v", BoundValue::Var(l))]);
        let (result, trace) = run(&m, &case);
        assert!(result.passed());
        assert_eq!(trace.distances[0], 0.0);
        assert_eq!(trace.distances[1], 2.0);
    }

    #[test]
    fn tick_builtin_advances_across_executions_of_one_session() {
        let m = compiled("def t():\n    return tick()\n");
        let mut case = TestCase::new();
        call_stmt(&mut case, "t", vec![]);
        let mut executor = Executor::new(&m);
        let budget = ExecutionBudget::default();
        let (first, _) = executor.execute(&case, &budget);
        let (second, _) = executor.execute(&case, &budget);
        assert_eq!(int_outcome(&first, 0), 0);
        assert_eq!(int_outcome(&second, 0), 1);
    }

    #[test]
    fn comparison_operands_enter_the_constant_pool() {
        let m = compiled(
            "def lt(a, b):\n    if a < b:\n        return 1\n    return 0\n",
        );
        let mut case = TestCase::new();
        let a = int_stmt(&mut case, 41);
        let b = int_stmt(&mut case, 17);
        call_stmt(&mut case, "lt", vec![
            binding("a", BoundValue::Var(a)),
            binding("b", BoundValue::Var(b)),
        ]);
        let mut executor = Executor::new(&m);
        executor.execute(&case, &ExecutionBudget::default());
        assert_eq!(executor.seeds.counts().0, 2);
    }

    #[test]
    fn recursion_depth_is_bounded() {
        let m = compiled("def rec(n):\n    return rec(n + 1)\n");
        let mut case = TestCase::new();
        let n = int_stmt(&mut case, 0);
        call_stmt(&mut case, "rec", vec![binding("n", BoundValue::Var(n))]);
        let (result, _) = run(&m, &case);
        assert_eq!(result.raised_class(), Some("RecursionError"));
    }

    #[test]
    fn star_binding_expands_a_list_into_positionals() {
        let m = compiled("def total(*xs, **kv):\n    return len(xs) + len(kv)\n");
        let mut case = TestCase::new();
        let a = int_stmt(&mut case, 1);
        let b = int_stmt(&mut case, 2);
        let c = int_stmt(&mut case, 3);
        let l = list_stmt(&mut case, vec![a, b, c]);
        let k = str_stmt(&mut case, "a");
        let v = int_stmt(&mut case, 9);
        let mp = map_stmt(&mut case, vec![(k, v)]);
        call_stmt(&mut case, "total", vec![
            star_binding("xs", BoundValue::Var(l)),
            dstar_binding("kv", BoundValue::Var(mp)),
        ]);
        let (result, _) = run(&m, &case);
        assert!(result.passed(), "{:?}", result.outcomes.last());
        assert_eq!(int_outcome(&result, 7), 4);
    }

    #[test]
    fn keyword_binding_reaches_the_named_parameter() {
        let m = compiled("def sub(a, b):\n    return a - b\n");
        let mut case = TestCase::new();
        let a = int_stmt(&mut case, 10);
        let b = int_stmt(&mut case, 4);
        let mut bb = binding("b", BoundValue::Var(a));
        bb.by_keyword = true;
        let mut ba = binding("a", BoundValue::Var(b));
        ba.by_keyword = true;
        // Both by keyword, declaration order flipped at the callsite.
        call_stmt(&mut case, "sub", vec![bb, ba]);
        let (result, _) = run(&m, &case);
        assert_eq!(int_outcome(&result, 2), -6);
    }

    #[test]
    fn omitted_parameter_takes_its_default() {
        let m = compiled("def inc(x, step=5):\n    return x + step\n");
        let mut case = TestCase::new();
        let x = int_stmt(&mut case, 2);
        let mut step = binding("step", BoundValue::Omitted);
        step.has_default = true;
        call_stmt(&mut case, "inc", vec![binding("x", BoundValue::Var(x)), step]);
        let (result, _) = run(&m, &case);
        assert_eq!(int_outcome(&result, 1), 7);
    }

    #[test]
    fn none_binding_passes_none() {
        let m = compiled("def is_none(x):\n    if x is None:\n        return 1\n    return 0\n");
        let mut case = TestCase::new();
        call_stmt(&mut case, "is_none", vec![binding("x", BoundValue::NoneVal)]);
        let (result, _) = run(&m, &case);
        assert_eq!(int_outcome(&result, 0), 1);
    }

    #[test]
    fn missing_required_argument_is_a_type_error() {
        let m = compiled(
            "def pair(a, b):\n    return a + b\n\ndef outer():\n    return pair(1)\n",
        );
        let mut case = TestCase::new();
        call_stmt(&mut case, "outer", vec![]);
        let (result, _) = run(&m, &case);
        assert_eq!(result.raised_class(), Some("TypeError"));
    }

    #[test]
    fn unexpected_keyword_is_a_type_error() {
        let m = compiled(
            "def pair(a, b):\n    return a + b\n\ndef outer():\n    return pair(1, c=2)\n",
        );
        let mut case = TestCase::new();
        call_stmt(&mut case, "outer", vec![]);
        let (result, _) = run(&m, &case);
        assert_eq!(result.raised_class(), Some("TypeError"));
    }

    #[test]
    fn doubly_bound_argument_is_a_type_error() {
        let m = compiled(
            "def pair(a, b):\n    return a + b\n\ndef outer():\n    return pair(1, a=2)\n",
        );
        let mut case = TestCase::new();
        call_stmt(&mut case, "outer", vec![]);
        let (result, _) = run(&m, &case);
        assert_eq!(result.raised_class(), Some("TypeError"));
    }

    #[test]
    fn constructor_sets_attributes_and_methods_read_them() {
        let m = compiled(
            "class Point:\n    def __init__(self, x, y):\n        self.x = x\n        self.y = y\n\n    def manhattan(self):\n        ax = self.x\n        if ax < 0:\n            ax = 0 - ax\n        ay = self.y\n        if ay < 0:\n            ay = 0 - ay\n        return ax + ay\n",
        );
        let mut case = TestCase::new();
        let x = int_stmt(&mut case, -3);
        let y = int_stmt(&mut case, 4);
        let p = ctor_stmt(&mut case, "Point", vec![
            binding("x", BoundValue::Var(x)),
            binding("y", BoundValue::Var(y)),
        ]);
        method_stmt(&mut case, p, "manhattan", vec![]);
        let (result, _) = run(&m, &case);
        assert!(result.passed(), "{:?}", result.outcomes);
        assert_eq!(int_outcome(&result, 3), 7);
    }

    #[test]
    fn method_call_on_primitive_receiver_is_an_attribute_error() {
        let m = compiled("class Box:\n    def get(self):\n        return 1\n");
        let mut case = TestCase::new();
        let n = int_stmt(&mut case, 3);
        method_stmt(&mut case, n, "get", vec![]);
        let (result, _) = run(&m, &case);
        assert_eq!(result.raised_class(), Some("AttributeError"));
    }

    #[test]
    fn unknown_method_is_an_attribute_error() {
        let m = compiled("class Box:\n    def get(self):\n        return 1\n");
        let mut case = TestCase::new();
        let b = ctor_stmt(&mut case, "Box", vec![]);
        method_stmt(&mut case, b, "missing", vec![]);
        let (result, _) = run(&m, &case);
        assert_eq!(result.raised_class(), Some("AttributeError"));
    }

    #[test]
    fn constructorless_class_rejects_arguments() {
        let m = compiled("class Box:\n    def get(self):\n        return 1\n");
        let mut case = TestCase::new();
        let n = int_stmt(&mut case, 3);
        ctor_stmt(&mut case, "Box", vec![binding("x", BoundValue::Var(n))]);
        let (result, _) = run(&m, &case);
        assert_eq!(result.raised_class(), Some("TypeError"));
    }

    #[test]
    fn unhashable_set_member_raises_inside_the_module() {
        let m = compiled("def to_set(a, b):\n    return {a, b}\n");
        let mut case = TestCase::new();
        let x = int_stmt(&mut case, 1);
        let l = list_stmt(&mut case, vec![x]);
        call_stmt(&mut case, "to_set", vec![
            binding("a", BoundValue::Var(x)),
            binding("b", BoundValue::Var(l)),
        ]);
        let (result, _) = run(&m, &case);
        assert_eq!(result.raised_class(), Some("TypeError"));
    }

    #[test]
    fn runaway_concatenation_hits_the_allocation_guard() {
        let m = compiled(
            "def blow(s, n):\n    while n > 0:\n        s = s + s\n        n = n - 1\n    return s\n",
        );
        let mut case = TestCase::new();
        let s = str_stmt(&mut case, "abcd");
        let n = int_stmt(&mut case, 20);
        call_stmt(&mut case, "blow", vec![
            binding("s", BoundValue::Var(s)),
            binding("n", BoundValue::Var(n)),
        ]);
        let (result, _) = run(&m, &case);
        assert_eq!(result.raised_class(), Some("OverflowError"));
    }

    #[test]
    fn oversized_repetition_hits_the_allocation_guard() {
        let m = compiled("def rep(s, n):\n    return s * n\n");
        let mut case = TestCase::new();
        let s = str_stmt(&mut case, "ab");
        let n = int_stmt(&mut case, 60_000);
        call_stmt(&mut case, "rep", vec![
            binding("s", BoundValue::Var(s)),
            binding("n", BoundValue::Var(n)),
        ]);
        let (result, _) = run(&m, &case);
        assert_eq!(result.raised_class(), Some("OverflowError"));
    }

    #[test]
    fn len_of_unsized_value_is_a_type_error() {
        let m = compiled("def l(x):\n    return len(x)\n");
        let mut case = TestCase::new();
        let n = int_stmt(&mut case, 5);
        call_stmt(&mut case, "l", vec![binding("x", BoundValue::Var(n))]);
        let (result, _) = run(&m, &case);
        assert_eq!(result.raised_class(), Some("TypeError"));
    }

    #[test]
    fn declared_raise_surfaces_with_class_and_message() {
        let m = compiled(
            "def guard(x):\n    if x < 0:\n        raise ValueError(\"negative\")\n    return x\n",
        );
        let mut case = TestCase::new();
        let n = int_stmt(&mut case, -1);
        call_stmt(&mut case, "guard", vec![binding("x", BoundValue::Var(n))]);
        let (result, _) = run(&m, &case);
        match &result.outcomes[1] {
            StatementOutcome::Raised { class, message } => {
                assert_eq!(class, "ValueError");
                assert_eq!(message, "negative");
            }
            other => panic!("expected raise, got {other:?}"),
        }
    }

    #[test]
    fn identical_executions_leave_identical_traces() {
        let m = compiled(
            "def lt(a, b):\n    if a < b:\n        return 1\n    return 0\n",
        );
        let mut case = TestCase::new();
        let a = int_stmt(&mut case, 5);
        let b = int_stmt(&mut case, 9);
        call_stmt(&mut case, "lt", vec![
            binding("a", BoundValue::Var(a)),
            binding("b", BoundValue::Var(b)),
        ]);
        let (r1, t1) = run(&m, &case);
        let (r2, t2) = run(&m, &case);
        assert_eq!(t1, t2);
        assert_eq!(r1.instructions, r2.instructions);
        assert!(value_eq(
            r1.outcomes[2].value().unwrap(),
            r2.outcomes[2].value().unwrap()
        ));
    }

    #[test]
    fn coverage_of_no_traces_is_zero() {
        let m = compiled("def f():\n    return 1\n");
        assert_eq!(branch_coverage(std::iter::empty::<&ExecutionTrace>(), &m), 0.0);
    }

    #[test]
    fn coverage_formula_counts_branchless_objects_and_taken_branches() {
        // Four branchless code objects (module body plus three functions),
        // zero branches; a synthetic trace with two executed gives one half.
        let m = compiled(
            "def a():\n    return 1\n\ndef b():\n    return 2\n\ndef c():\n    return 3\n",
        );
        let mut t = ExecutionTrace::new(&m);
        t.mark_executed(0);
        t.mark_executed(1);
        assert_eq!(branch_coverage(std::iter::once(&t), &m), 0.5);
    }

    #[test]
    fn import_floor_on_a_branchy_module() {
        let m = compiled(
            "def lt(a, b):\n    if a < b:\n        return 1\n    return 0\n",
        );
        let (_, trace) = run(&m, &TestCase::new());
        // One branchless code object (the module body) out of one, zero of
        // two branches.
        let cov = branch_coverage(std::iter::once(&trace), &m);
        assert!((cov - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn full_coverage_when_both_branches_are_taken() {
        let m = compiled(
            "def lt(a, b):\n    if a < b:\n        return 1\n    return 0\n",
        );
        let mut case = TestCase::new();
        let a = int_stmt(&mut case, 1);
        let b = int_stmt(&mut case, 5);
        call_stmt(&mut case, "lt", vec![
            binding("a", BoundValue::Var(a)),
            binding("b", BoundValue::Var(b)),
        ]);
        call_stmt(&mut case, "lt", vec![
            binding("a", BoundValue::Var(b)),
            binding("b", BoundValue::Var(a)),
        ]);
        let (_, trace) = run(&m, &case);
        assert_eq!(branch_coverage(std::iter::once(&trace), &m), 1.0);
    }

    #[test]
    fn adding_traces_never_lowers_coverage() {
        let m = compiled(
            "def classify(x):\n    if x < 0:\n        return 0 - 1\n    if x == 0:\n        return 0\n    return 1\n",
        );
        let mut traces = Vec::new();
        for v in [-5i64, 0, 3, 7] {
            let mut case = TestCase::new();
            let n = int_stmt(&mut case, v);
            call_stmt(&mut case, "classify", vec![binding("x", BoundValue::Var(n))]);
            let (_, t) = run(&m, &case);
            traces.push(t);
        }
        let mut last = 0.0;
        for k in 1..=traces.len() {
            let cov = branch_coverage(traces[..k].iter(), &m);
            assert!(cov >= last, "coverage dropped from {last} to {cov} at {k}");
            last = cov;
        }
        assert_eq!(last, 1.0);
    }
}
