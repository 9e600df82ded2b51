//! Genetic operators over the chromosome representation: random case
//! sampling, statement insertion, change, and removal, case and suite
//! crossover with repair, and case and suite mutation.
//!
//! Every operator leaves its output satisfying `validate_test_case` and the
//! size bounds L and N. Operators that could break validity (insertion,
//! crossover) work on a backup and fall back to the unmodified input when a
//! repair or generation attempt fails.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::cluster::{CallableInfo, CallableKind, ConstantPool, Generator, TestCluster};
use crate::minidyn::ast::ParamKind;
use crate::testmodel::{
    BoundValue, CollectionKind, ParamBinding, PrimitiveValue, Statement, StatementKind, TestCase,
    TestSuite, TypeRef, VarId, MAX_CASE_LEN, MAX_SUITE_SIZE,
};

/// Recursion bound for backwards construction of complex parameters.
const MAX_GENERATION_DEPTH: usize = 4;
/// Attempt bound when repeatedly applying insertion during sampling.
const SAMPLE_ATTEMPT_FACTOR: usize = 3;

#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// L: statements per test case.
    pub max_case_len: usize,
    /// N: test cases per suite.
    pub max_suite_size: usize,
    pub crossover_probability: f64,
    pub sigma_test_case: f64,
    pub sigma_statement: f64,
    pub sigma_str: f64,
    pub delta_int: i64,
    pub delta_float: f64,
    pub delta_digits: u32,
    /// Chance to leave an optional or star parameter unbound.
    pub omit_optional_probability: f64,
    /// Chance to pass the literal None for a parameter.
    pub none_probability: f64,
    /// Chance to ignore a present type hint and pick a random type.
    pub disregard_hint_probability: f64,
    /// Chance to reuse an in-scope value instead of generating one.
    pub reuse_probability: f64,
    /// Chance to draw a primitive from the constant pool when it has one.
    pub seed_probability: f64,
    pub int_range: i64,
    pub float_range: f64,
    pub max_string_len: usize,
    pub max_collection_size: usize,
}

impl Default for SearchConfig {
    fn default() -> SearchConfig {
        SearchConfig {
            max_case_len: MAX_CASE_LEN,
            max_suite_size: MAX_SUITE_SIZE,
            crossover_probability: 0.750,
            sigma_test_case: 0.5,
            sigma_statement: 0.5,
            sigma_str: 0.5,
            delta_int: 20,
            delta_float: 20.0,
            delta_digits: 7,
            omit_optional_probability: 0.7,
            none_probability: 0.05,
            disregard_hint_probability: 0.05,
            reuse_probability: 0.5,
            seed_probability: 0.3,
            int_range: 1000,
            float_range: 1000.0,
            max_string_len: 10,
            max_collection_size: 3,
        }
    }
}

/// Counters accumulated across a run, used to check configuration effects.
#[derive(Debug, Clone, Default)]
pub struct GenerationStats {
    /// How often a type hint decided which type to generate or reuse.
    pub hint_guided_selections: u64,
}

/// Everything generation needs in one place: configuration, the module
/// interface, harvested constants, randomness, and counters.
pub struct GenCtx<'a, R: Rng> {
    pub cfg: &'a SearchConfig,
    pub cluster: &'a TestCluster,
    pub pool: &'a ConstantPool,
    pub rng: &'a mut R,
    pub stats: &'a mut GenerationStats,
}

impl<'a, R: Rng> GenCtx<'a, R> {
    /// A uniformly drawn concrete type from the cluster.
    pub fn random_type(&mut self) -> TypeRef {
        let types = self.cluster.types();
        types[self.rng.gen_range(0..types.len())].clone()
    }
}

/// Types whose values are always hashable, usable as set members and map
/// keys without risking a runtime TypeError.
const HASHABLE_TYPES: [TypeRef; 5] =
    [TypeRef::Int, TypeRef::Float, TypeRef::Bool, TypeRef::Str, TypeRef::Bytes];

fn is_hashable_type(t: &TypeRef) -> bool {
    HASHABLE_TYPES.contains(t)
}

/// Variables defined before `index` that can stand in for a value of type
/// `wanted`. A `Dynamic` request accepts anything in scope.
fn reuse_candidates(case: &TestCase, index: usize, wanted: &TypeRef) -> Vec<VarId> {
    if *wanted == TypeRef::Dynamic {
        case.statements[..index.min(case.len())].iter().map(|s| s.var).collect()
    } else {
        case.vars_before(index, wanted)
    }
}

fn pick_var<R: Rng>(candidates: &[VarId], rng: &mut R) -> Option<VarId> {
    if candidates.is_empty() {
        None
    } else {
        Some(candidates[rng.gen_range(0..candidates.len())])
    }
}

fn push_statement_at(
    case: &mut TestCase,
    at: &mut usize,
    declared_type: TypeRef,
    kind: StatementKind,
) -> VarId {
    let var = case.fresh_var();
    case.statements.insert(*at, Statement { var, declared_type, kind });
    *at += 1;
    var
}

fn random_char<R: Rng>(rng: &mut R) -> char {
    rng.gen_range(b' '..=b'~') as char
}

fn random_primitive<R: Rng>(t: &TypeRef, ctx: &mut GenCtx<R>) -> PrimitiveValue {
    let seeded = ctx.rng.gen_bool(ctx.cfg.seed_probability);
    match t {
        TypeRef::Int => {
            if seeded {
                if let Some(v) = ctx.pool.pick_int(ctx.rng) {
                    return PrimitiveValue::Int(v);
                }
            }
            PrimitiveValue::Int(ctx.rng.gen_range(-ctx.cfg.int_range..=ctx.cfg.int_range))
        }
        TypeRef::Float => {
            if seeded {
                if let Some(v) = ctx.pool.pick_float(ctx.rng) {
                    return PrimitiveValue::Float(v);
                }
            }
            PrimitiveValue::Float(ctx.rng.gen_range(-ctx.cfg.float_range..=ctx.cfg.float_range))
        }
        TypeRef::Bool => PrimitiveValue::Bool(ctx.rng.gen()),
        TypeRef::Str => {
            if seeded {
                if let Some(v) = ctx.pool.pick_str(ctx.rng) {
                    return PrimitiveValue::Str(v.to_string());
                }
            }
            let len = ctx.rng.gen_range(0..=ctx.cfg.max_string_len);
            PrimitiveValue::Str((0..len).map(|_| random_char(ctx.rng)).collect())
        }
        TypeRef::Bytes => {
            if seeded {
                if let Some(v) = ctx.pool.pick_bytes(ctx.rng) {
                    return PrimitiveValue::Bytes(v.to_vec());
                }
            }
            let len = ctx.rng.gen_range(0..=ctx.cfg.max_string_len);
            PrimitiveValue::Bytes((0..len).map(|_| ctx.rng.gen()).collect())
        }
        other => unreachable!("`{other:?}` is not a primitive type"),
    }
}

/// Brings a value of type `wanted` into scope at the insertion cursor,
/// recursively constructing dependencies. Returns the defining variable, or
/// None when nothing of that type can be built within the depth bound.
fn generate_value<R: Rng>(
    case: &mut TestCase,
    at: &mut usize,
    wanted: &TypeRef,
    depth: usize,
    ctx: &mut GenCtx<R>,
) -> Option<VarId> {
    match wanted {
        TypeRef::Dynamic => {
            let t = ctx.random_type();
            generate_value(case, at, &t, depth, ctx)
        }
        TypeRef::Int | TypeRef::Float | TypeRef::Bool | TypeRef::Str | TypeRef::Bytes => {
            let value = random_primitive(wanted, ctx);
            Some(push_statement_at(case, at, wanted.clone(), StatementKind::Primitive(value)))
        }
        TypeRef::List | TypeRef::Set | TypeRef::Tuple => {
            let kind = match wanted {
                TypeRef::List => CollectionKind::List,
                TypeRef::Set => CollectionKind::Set,
                TypeRef::Tuple => CollectionKind::Tuple,
                _ => unreachable!(),
            };
            let size =
                if depth >= MAX_GENERATION_DEPTH { 0 } else { ctx.rng.gen_range(0..=ctx.cfg.max_collection_size) };
            let elem_type = element_type(*wanted == TypeRef::Set, ctx);
            let mut elements = Vec::new();
            for _ in 0..size {
                if let Some(v) = reuse_or_generate(case, at, &elem_type, depth + 1, ctx) {
                    elements.push(v);
                }
            }
            Some(push_statement_at(
                case,
                at,
                wanted.clone(),
                StatementKind::Collection { kind, elements, pairs: Vec::new() },
            ))
        }
        TypeRef::Map => {
            let size =
                if depth >= MAX_GENERATION_DEPTH { 0 } else { ctx.rng.gen_range(0..=ctx.cfg.max_collection_size) };
            let key_type = element_type(true, ctx);
            let value_type = element_type(false, ctx);
            let mut pairs = Vec::new();
            for _ in 0..size {
                let key = reuse_or_generate(case, at, &key_type, depth + 1, ctx);
                let value = reuse_or_generate(case, at, &value_type, depth + 1, ctx);
                if let (Some(k), Some(v)) = (key, value) {
                    pairs.push((k, v));
                }
            }
            Some(push_statement_at(
                case,
                at,
                TypeRef::Map,
                StatementKind::Collection {
                    kind: CollectionKind::Map,
                    elements: Vec::new(),
                    pairs,
                },
            ))
        }
        TypeRef::Class(_) => {
            if depth >= MAX_GENERATION_DEPTH {
                return None;
            }
            let mut generators = match ctx.cluster.generators_for_type(wanted) {
                Ok(g) => g,
                Err(_) => return None,
            };
            // Random preference order; first generator that can actually be
            // built wins.
            shuffle(&mut generators, ctx.rng);
            for g in generators {
                if let Generator::Call(index) = g {
                    if let Some(var) = build_call(case, at, index, depth, ctx) {
                        return Some(var);
                    }
                }
            }
            None
        }
    }
}

/// Element and key types for generated collections. Keys stay hashable so
/// collection construction cannot raise at run time.
fn element_type<R: Rng>(hashable_only: bool, ctx: &mut GenCtx<R>) -> TypeRef {
    if hashable_only {
        HASHABLE_TYPES[ctx.rng.gen_range(0..HASHABLE_TYPES.len())].clone()
    } else {
        ctx.random_type()
    }
}

fn shuffle<T, R: Rng>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        items.swap(i, rng.gen_range(0..=i));
    }
}

fn reuse_or_generate<R: Rng>(
    case: &mut TestCase,
    at: &mut usize,
    wanted: &TypeRef,
    depth: usize,
    ctx: &mut GenCtx<R>,
) -> Option<VarId> {
    let candidates = reuse_candidates(case, *at, wanted);
    if !candidates.is_empty() && ctx.rng.gen_bool(ctx.cfg.reuse_probability) {
        return pick_var(&candidates, ctx.rng);
    }
    generate_value(case, at, wanted, depth, ctx).or_else(|| pick_var(&candidates, ctx.rng))
}

/// Builds the call statement for `cluster.callables[index]` at the cursor,
/// generating or reusing everything it needs.
fn build_call<R: Rng>(
    case: &mut TestCase,
    at: &mut usize,
    index: usize,
    depth: usize,
    ctx: &mut GenCtx<R>,
) -> Option<VarId> {
    let info = ctx.cluster.callable(index).clone();
    let receiver = match info.kind {
        CallableKind::Method => {
            let class = TypeRef::Class(info.class.clone().expect("methods carry their class"));
            Some(reuse_or_generate(case, at, &class, depth + 1, ctx)?)
        }
        _ => None,
    };
    let bindings = build_bindings(case, at, &info, depth, ctx);
    let kind = match info.kind {
        CallableKind::Function => StatementKind::Function { function: info.name.clone(), bindings },
        CallableKind::Constructor => StatementKind::Constructor { class: info.name.clone(), bindings },
        CallableKind::Method => StatementKind::Method {
            receiver: receiver.expect("receiver resolved above"),
            method: info.name.clone(),
            bindings,
        },
    };
    Some(push_statement_at(case, at, info.returns.clone(), kind))
}

fn build_bindings<R: Rng>(
    case: &mut TestCase,
    at: &mut usize,
    info: &CallableInfo,
    depth: usize,
    ctx: &mut GenCtx<R>,
) -> Vec<ParamBinding> {
    let mut bindings = Vec::with_capacity(info.params.len());
    for p in &info.params {
        let value = match p.kind {
            ParamKind::Star => {
                if ctx.rng.gen_bool(ctx.cfg.omit_optional_probability) {
                    BoundValue::Omitted
                } else {
                    reuse_or_generate(case, at, &TypeRef::List, depth + 1, ctx)
                        .map(BoundValue::Var)
                        .unwrap_or(BoundValue::Omitted)
                }
            }
            ParamKind::DoubleStar => {
                if ctx.rng.gen_bool(ctx.cfg.omit_optional_probability) {
                    BoundValue::Omitted
                } else {
                    reuse_or_generate(case, at, &TypeRef::Map, depth + 1, ctx)
                        .map(BoundValue::Var)
                        .unwrap_or(BoundValue::Omitted)
                }
            }
            ParamKind::Normal => {
                if p.has_default && ctx.rng.gen_bool(ctx.cfg.omit_optional_probability) {
                    BoundValue::Omitted
                } else if ctx.rng.gen_bool(ctx.cfg.none_probability) {
                    BoundValue::NoneVal
                } else {
                    let wanted = resolve_param_type(&p.annotation, ctx);
                    reuse_or_generate(case, at, &wanted, depth + 1, ctx)
                        .map(BoundValue::Var)
                        // Any parameter accepts None at run time; better a
                        // None than an invalid statement.
                        .unwrap_or(BoundValue::NoneVal)
                }
            }
        };
        bindings.push(ParamBinding {
            param: p.name.clone(),
            kind: p.kind,
            has_default: p.has_default,
            declared_type: p.annotation.clone(),
            value,
            by_keyword: false,
        });
    }
    normalize_keywords(&mut bindings);
    bindings
}

/// The type to aim for when filling a parameter: its hint when present and
/// honored, otherwise a random cluster type.
fn resolve_param_type<R: Rng>(annotation: &TypeRef, ctx: &mut GenCtx<R>) -> TypeRef {
    if *annotation != TypeRef::Dynamic
        && !ctx.rng.gen_bool(ctx.cfg.disregard_hint_probability)
    {
        ctx.stats.hint_guided_selections += 1;
        return annotation.clone();
    }
    ctx.random_type()
}

/// Once a positional slot is skipped, everything bound after it has to go
/// by keyword to keep the call well formed.
fn normalize_keywords(bindings: &mut [ParamBinding]) {
    let mut keyword_from_here = false;
    for b in bindings {
        if b.kind != ParamKind::Normal {
            continue;
        }
        if keyword_from_here {
            b.by_keyword = true;
        }
        if b.value == BoundValue::Omitted || b.by_keyword {
            keyword_from_here = true;
        }
    }
}

/// Appends a call to one specific cluster callable at the end of the case,
/// generating or reusing everything it needs. Reverts on failure or when
/// the result would exceed L.
pub fn append_call<R: Rng>(case: &mut TestCase, callable: usize, ctx: &mut GenCtx<R>) -> bool {
    let backup = case.clone();
    let mut at = case.len();
    if build_call(case, &mut at, callable, 0, ctx).is_none() || case.len() > ctx.cfg.max_case_len {
        *case = backup;
        return false;
    }
    true
}

/// One insertion event: a new call on the module under test, or a method
/// call on a value already in scope, at a random position. Restores the
/// case and reports failure when nothing could be built within the length
/// bound.
pub fn insert_statement<R: Rng>(case: &mut TestCase, ctx: &mut GenCtx<R>) -> bool {
    if case.len() >= ctx.cfg.max_case_len {
        return false;
    }
    let backup = case.clone();
    let mut at = ctx.rng.gen_range(0..=case.len());
    let inserted = if ctx.rng.gen_bool(0.5) {
        insert_method_on_value(case, &mut at, ctx) || insert_new_call(case, &mut at, ctx)
    } else {
        insert_new_call(case, &mut at, ctx)
    };
    if !inserted || case.len() > ctx.cfg.max_case_len {
        *case = backup;
        return false;
    }
    true
}

fn insert_new_call<R: Rng>(case: &mut TestCase, at: &mut usize, ctx: &mut GenCtx<R>) -> bool {
    if ctx.cluster.callables.is_empty() {
        return false;
    }
    let index = ctx.rng.gen_range(0..ctx.cluster.callables.len());
    build_call(case, at, index, 0, ctx).is_some()
}

fn insert_method_on_value<R: Rng>(case: &mut TestCase, at: &mut usize, ctx: &mut GenCtx<R>) -> bool {
    // Receiver candidates: in-scope values of a class that has methods.
    let candidates: Vec<(VarId, Vec<usize>)> = case.statements[..*at]
        .iter()
        .filter_map(|s| match &s.declared_type {
            TypeRef::Class(_) => {
                let methods: Vec<usize> = ctx
                    .cluster
                    .modifiers_for_type(&s.declared_type)
                    .iter()
                    .copied()
                    .filter(|&i| ctx.cluster.callable(i).kind == CallableKind::Method)
                    .collect();
                if methods.is_empty() {
                    None
                } else {
                    Some((s.var, methods))
                }
            }
            _ => None,
        })
        .collect();
    let Some((receiver, methods)) = candidates.get(ctx.rng.gen_range(0..candidates.len().max(1)))
    else {
        return false;
    };
    let index = methods[ctx.rng.gen_range(0..methods.len())];
    let info = ctx.cluster.callable(index).clone();
    let bindings = build_bindings(case, at, &info, 0, ctx);
    push_statement_at(
        case,
        at,
        info.returns.clone(),
        StatementKind::Method { receiver: *receiver, method: info.name.clone(), bindings },
    );
    true
}

/// Applies the variant-appropriate change to statement `index`. A no-op is
/// permitted when nothing applicable is in scope.
pub fn change_statement<R: Rng>(case: &mut TestCase, index: usize, ctx: &mut GenCtx<R>) {
    let mut stmt = case.statements[index].clone();
    match &mut stmt.kind {
        StatementKind::Primitive(value) => {
            mutate_primitive(value, ctx);
            case.statements[index] = stmt;
        }
        StatementKind::Collection { kind, elements, pairs } => {
            match kind {
                CollectionKind::Tuple => {
                    change_tuple(case, index, elements, ctx);
                }
                CollectionKind::List | CollectionKind::Set => {
                    let hashable_only = *kind == CollectionKind::Set;
                    change_element_collection(case, index, elements, hashable_only, ctx);
                }
                CollectionKind::Map => change_map(case, index, pairs, ctx),
            }
            case.statements[index] = stmt;
        }
        StatementKind::Function { .. } | StatementKind::Method { .. } | StatementKind::Constructor { .. } => {
            change_call(case, index, ctx);
        }
    }
}

fn mutate_primitive<R: Rng>(value: &mut PrimitiveValue, ctx: &mut GenCtx<R>) {
    match value {
        PrimitiveValue::Int(v) => {
            let alpha: f64 = ctx.rng.sample(StandardNormal);
            *v = v.saturating_add((alpha * ctx.cfg.delta_int as f64).round() as i64);
        }
        PrimitiveValue::Float(v) => {
            let old = *v;
            match ctx.rng.gen_range(0..3) {
                0 => {
                    let alpha: f64 = ctx.rng.sample(StandardNormal);
                    *v += alpha * ctx.cfg.delta_float;
                }
                1 => {
                    let alpha: f64 = ctx.rng.sample(StandardNormal);
                    *v += alpha;
                }
                _ => {
                    let digits = ctx.rng.gen_range(0..=ctx.cfg.delta_digits);
                    let factor = 10f64.powi(digits as i32);
                    *v = (*v * factor).round() / factor;
                }
            }
            // Floats must stay literal-renderable.
            if !v.is_finite() {
                *v = old;
            }
        }
        PrimitiveValue::Bool(v) => *v = !*v,
        PrimitiveValue::Str(s) => {
            let mut chars: Vec<char> = s.chars().collect();
            mutate_sequence(&mut chars, ctx, random_char);
            *s = chars.into_iter().collect();
        }
        PrimitiveValue::Bytes(b) => {
            mutate_sequence(b, ctx, |rng| rng.gen());
        }
    }
}

/// Shared shape of string and bytes mutation: one of delete, replace, or
/// insert, each picked with probability 1/3.
fn mutate_sequence<T, R: Rng>(
    items: &mut Vec<T>,
    ctx: &mut GenCtx<R>,
    mut fresh: impl FnMut(&mut R) -> T,
) {
    match ctx.rng.gen_range(0..3) {
        0 => {
            if !items.is_empty() {
                let p = 1.0 / items.len() as f64;
                let mut i = 0;
                while i < items.len() {
                    if ctx.rng.gen_bool(p) {
                        items.remove(i);
                    } else {
                        i += 1;
                    }
                }
            }
        }
        1 => {
            if !items.is_empty() {
                let p = 1.0 / items.len() as f64;
                for item in items.iter_mut() {
                    if ctx.rng.gen_bool(p) {
                        *item = fresh(ctx.rng);
                    }
                }
            }
        }
        _ => {
            let mut i = 1;
            while ctx.rng.gen_bool(ctx.cfg.sigma_str.powi(i)) {
                let pos = ctx.rng.gen_range(0..=items.len());
                items.insert(pos, fresh(ctx.rng));
                i += 1;
            }
        }
    }
}

fn change_tuple<R: Rng>(
    case: &TestCase,
    index: usize,
    elements: &mut [VarId],
    ctx: &mut GenCtx<R>,
) {
    if elements.is_empty() {
        return;
    }
    let p = 1.0 / elements.len() as f64;
    for e in elements.iter_mut() {
        if !ctx.rng.gen_bool(p) {
            continue;
        }
        let wanted = case.type_of(*e).cloned().unwrap_or(TypeRef::Dynamic);
        let candidates: Vec<VarId> =
            reuse_candidates(case, index, &wanted).into_iter().filter(|v| v != e).collect();
        if let Some(v) = pick_var(&candidates, ctx.rng) {
            *e = v;
        }
    }
}

fn change_element_collection<R: Rng>(
    case: &TestCase,
    index: usize,
    elements: &mut Vec<VarId>,
    hashable_only: bool,
    ctx: &mut GenCtx<R>,
) {
    let insert_pool: Vec<VarId> = case.statements[..index]
        .iter()
        .filter(|s| !hashable_only || is_hashable_type(&s.declared_type))
        .map(|s| s.var)
        .collect();
    match ctx.rng.gen_range(0..3) {
        0 => {
            if !elements.is_empty() {
                let p = 1.0 / elements.len() as f64;
                let mut i = 0;
                while i < elements.len() {
                    if ctx.rng.gen_bool(p) {
                        elements.remove(i);
                    } else {
                        i += 1;
                    }
                }
            }
        }
        1 => {
            if !elements.is_empty() {
                let p = 1.0 / elements.len() as f64;
                for e in elements.iter_mut() {
                    if !ctx.rng.gen_bool(p) {
                        continue;
                    }
                    let wanted = case.type_of(*e).cloned().unwrap_or(TypeRef::Dynamic);
                    let candidates: Vec<VarId> = reuse_candidates(case, index, &wanted)
                        .into_iter()
                        .filter(|v| v != e && (!hashable_only || type_is_hashable(case, *v)))
                        .collect();
                    if let Some(v) = pick_var(&candidates, ctx.rng) {
                        *e = v;
                    }
                }
            }
        }
        _ => {
            let mut i = 1;
            while ctx.rng.gen_bool(ctx.cfg.sigma_str.powi(i)) {
                let Some(v) = pick_var(&insert_pool, ctx.rng) else { break };
                let pos = ctx.rng.gen_range(0..=elements.len());
                elements.insert(pos, v);
                i += 1;
            }
        }
    }
}

fn type_is_hashable(case: &TestCase, var: VarId) -> bool {
    case.type_of(var).map(is_hashable_type).unwrap_or(false)
}

fn change_map<R: Rng>(
    case: &TestCase,
    index: usize,
    pairs: &mut Vec<(VarId, VarId)>,
    ctx: &mut GenCtx<R>,
) {
    let key_pool: Vec<VarId> = case.statements[..index]
        .iter()
        .filter(|s| is_hashable_type(&s.declared_type))
        .map(|s| s.var)
        .collect();
    let value_pool: Vec<VarId> = case.statements[..index].iter().map(|s| s.var).collect();
    match ctx.rng.gen_range(0..3) {
        0 => {
            if !pairs.is_empty() {
                let p = 1.0 / pairs.len() as f64;
                let mut i = 0;
                while i < pairs.len() {
                    if ctx.rng.gen_bool(p) {
                        pairs.remove(i);
                    } else {
                        i += 1;
                    }
                }
            }
        }
        1 => {
            if !pairs.is_empty() {
                let p = 1.0 / pairs.len() as f64;
                for (key, value) in pairs.iter_mut() {
                    if !ctx.rng.gen_bool(p) {
                        continue;
                    }
                    if ctx.rng.gen_bool(0.5) {
                        let candidates: Vec<VarId> =
                            key_pool.iter().copied().filter(|v| v != key).collect();
                        if let Some(v) = pick_var(&candidates, ctx.rng) {
                            *key = v;
                        }
                    } else {
                        let candidates: Vec<VarId> =
                            value_pool.iter().copied().filter(|v| v != value).collect();
                        if let Some(v) = pick_var(&candidates, ctx.rng) {
                            *value = v;
                        }
                    }
                }
            }
        }
        _ => {
            let mut i = 1;
            while ctx.rng.gen_bool(ctx.cfg.sigma_str.powi(i)) {
                let (Some(k), Some(v)) =
                    (pick_var(&key_pool, ctx.rng), pick_var(&value_pool, ctx.rng))
                else {
                    break;
                };
                pairs.push((k, v));
                i += 1;
            }
        }
    }
}

fn change_call<R: Rng>(case: &mut TestCase, index: usize, ctx: &mut GenCtx<R>) {
    let mut stmt = case.statements[index].clone();
    let mut changed = false;
    // The receiver of a method counts as one changeable slot alongside the
    // formal parameters.
    let (bindings, receiver) = match &mut stmt.kind {
        StatementKind::Function { bindings, .. } | StatementKind::Constructor { bindings, .. } => {
            (bindings, None)
        }
        StatementKind::Method { bindings, receiver, .. } => (bindings, Some(receiver)),
        _ => unreachable!("change_call only sees call statements"),
    };
    let slots = bindings.len() + receiver.is_some() as usize;
    if slots > 0 {
        let p = 1.0 / slots as f64;
        if let Some(receiver) = receiver {
            if ctx.rng.gen_bool(p) {
                let class = case.type_of(*receiver).cloned().unwrap_or(TypeRef::Dynamic);
                let candidates: Vec<VarId> = reuse_candidates(case, index, &class)
                    .into_iter()
                    .filter(|v| v != receiver)
                    .collect();
                if let Some(v) = pick_var(&candidates, ctx.rng) {
                    *receiver = v;
                    changed = true;
                }
            }
        }
        for b in bindings.iter_mut() {
            if !ctx.rng.gen_bool(p) {
                continue;
            }
            changed |= change_binding(case, index, b, ctx);
        }
        normalize_keywords(bindings);
    }
    if changed {
        case.statements[index] = stmt;
    } else {
        replace_call(case, index, ctx);
    }
}

/// Changes what is passed for one parameter. Optional parameters toggle
/// between bound and omitted; otherwise the argument is replaced with
/// another in-scope value of the right type, or None.
fn change_binding<R: Rng>(
    case: &TestCase,
    index: usize,
    b: &mut ParamBinding,
    ctx: &mut GenCtx<R>,
) -> bool {
    let optional = b.has_default || b.kind != ParamKind::Normal;
    let wanted = match b.kind {
        ParamKind::Star => TypeRef::List,
        ParamKind::DoubleStar => TypeRef::Map,
        ParamKind::Normal => b.declared_type.clone(),
    };
    if optional && ctx.rng.gen_bool(ctx.cfg.omit_optional_probability) {
        if b.value == BoundValue::Omitted {
            let candidates = reuse_candidates(case, index, &wanted);
            if let Some(v) = pick_var(&candidates, ctx.rng) {
                b.value = BoundValue::Var(v);
                return true;
            }
            return false;
        }
        b.value = BoundValue::Omitted;
        return true;
    }
    if b.kind == ParamKind::Normal && ctx.rng.gen_bool(ctx.cfg.none_probability) {
        let was_none = b.value == BoundValue::NoneVal;
        b.value = BoundValue::NoneVal;
        return !was_none;
    }
    let current = match b.value {
        BoundValue::Var(v) => Some(v),
        _ => None,
    };
    let candidates: Vec<VarId> = reuse_candidates(case, index, &wanted)
        .into_iter()
        .filter(|v| Some(*v) != current)
        .collect();
    if let Some(v) = pick_var(&candidates, ctx.rng) {
        b.value = BoundValue::Var(v);
        return true;
    }
    false
}

/// Swaps the whole call for another callable with the same return type
/// whose required parameters can be bound from values already in scope. The
/// defined variable and its declared type survive, so later statements stay
/// valid.
fn replace_call<R: Rng>(case: &mut TestCase, index: usize, ctx: &mut GenCtx<R>) {
    let wanted_return = case.statements[index].declared_type.clone();
    let current = callee_identity(&case.statements[index].kind);
    let candidates: Vec<usize> = (0..ctx.cluster.callables.len())
        .filter(|&i| {
            let info = ctx.cluster.callable(i);
            info.returns == wanted_return
                && callable_identity(info) != current
                && satisfiable_in_scope(case, index, info)
        })
        .collect();
    let Some(&choice) = candidates.get(ctx.rng.gen_range(0..candidates.len().max(1))) else {
        return;
    };
    let info = ctx.cluster.callable(choice).clone();
    let receiver = match info.kind {
        CallableKind::Method => {
            let class = TypeRef::Class(info.class.clone().expect("methods carry their class"));
            pick_var(&reuse_candidates(case, index, &class), ctx.rng)
        }
        _ => None,
    };
    if info.kind == CallableKind::Method && receiver.is_none() {
        return;
    }
    let mut bindings = Vec::with_capacity(info.params.len());
    for p in &info.params {
        let value = if p.kind != ParamKind::Normal || p.has_default {
            BoundValue::Omitted
        } else {
            let candidates = reuse_candidates(case, index, &p.annotation);
            match pick_var(&candidates, ctx.rng) {
                Some(v) => BoundValue::Var(v),
                None => return,
            }
        };
        bindings.push(ParamBinding {
            param: p.name.clone(),
            kind: p.kind,
            has_default: p.has_default,
            declared_type: p.annotation.clone(),
            value,
            by_keyword: false,
        });
    }
    normalize_keywords(&mut bindings);
    let stmt = &mut case.statements[index];
    stmt.kind = match info.kind {
        CallableKind::Function => StatementKind::Function { function: info.name.clone(), bindings },
        CallableKind::Constructor => StatementKind::Constructor { class: info.name.clone(), bindings },
        CallableKind::Method => StatementKind::Method {
            receiver: receiver.expect("checked above"),
            method: info.name.clone(),
            bindings,
        },
    };
}

fn callee_identity(kind: &StatementKind) -> (CallableKind, String) {
    match kind {
        StatementKind::Function { function, .. } => (CallableKind::Function, function.clone()),
        StatementKind::Constructor { class, .. } => (CallableKind::Constructor, class.clone()),
        StatementKind::Method { method, .. } => (CallableKind::Method, method.clone()),
        _ => unreachable!("callee_identity only sees call statements"),
    }
}

fn callable_identity(info: &CallableInfo) -> (CallableKind, String) {
    (info.kind, info.name.clone())
}

fn satisfiable_in_scope(case: &TestCase, index: usize, info: &CallableInfo) -> bool {
    if info.kind == CallableKind::Method {
        let class = TypeRef::Class(info.class.clone().expect("methods carry their class"));
        if reuse_candidates(case, index, &class).is_empty() {
            return false;
        }
    }
    info.params.iter().all(|p| {
        p.kind != ParamKind::Normal
            || p.has_default
            || !reuse_candidates(case, index, &p.annotation).is_empty()
    })
}

/// Deletes statement `index`. Later references to the deleted value are
/// rebound to another in-scope value of the same type when one exists,
/// otherwise the referring statement is deleted as well, recursively.
pub fn remove_statement<R: Rng>(case: &mut TestCase, index: usize, rng: &mut R) {
    // Types of everything deleted so far, for rebinding lookups.
    let mut dead: Vec<(VarId, TypeRef)> = Vec::new();
    let removed = case.statements.remove(index);
    dead.push((removed.var, removed.declared_type));
    let mut j = index;
    while j < case.len() {
        let dead_refs: Vec<VarId> = case.statements[j]
            .references()
            .into_iter()
            .filter(|r| dead.iter().any(|(v, _)| v == r))
            .collect();
        if dead_refs.is_empty() {
            j += 1;
            continue;
        }
        let mut rebind: Vec<(VarId, VarId)> = Vec::new();
        let mut ok = true;
        for r in dead_refs {
            if rebind.iter().any(|(from, _)| *from == r) {
                continue;
            }
            let wanted = dead.iter().find(|(v, _)| *v == r).map(|(_, t)| t.clone()).unwrap();
            let candidates = reuse_candidates(case, j, &wanted);
            match pick_var(&candidates, rng) {
                Some(v) => rebind.push((r, v)),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            case.statements[j].remap(&|v| {
                rebind.iter().find(|(from, _)| *from == v).map(|(_, to)| *to).unwrap_or(v)
            });
            j += 1;
        } else {
            let victim = case.statements.remove(j);
            dead.push((victim.var, victim.declared_type));
        }
    }
    case.last_raised_at = None;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationKind {
    Remove,
    Change,
    Insert,
}

impl MutationKind {
    pub fn pick<R: Rng>(rng: &mut R) -> MutationKind {
        match rng.gen_range(0..3) {
            0 => MutationKind::Remove,
            1 => MutationKind::Change,
            _ => MutationKind::Insert,
        }
    }
}

/// Mutates a copy of `case` with one of remove, change, or insert, chosen
/// uniformly. May return an empty case; the caller decides what to do with
/// it.
pub fn mutate_case<R: Rng>(case: &TestCase, ctx: &mut GenCtx<R>) -> TestCase {
    let kind = MutationKind::pick(ctx.rng);
    mutate_case_with(case, kind, ctx)
}

pub fn mutate_case_with<R: Rng>(
    case: &TestCase,
    kind: MutationKind,
    ctx: &mut GenCtx<R>,
) -> TestCase {
    let mut out = case.clone();
    // A case that raised at statement i: drop the unreached trailing
    // statements when the case is full, and mutate only up to i either way.
    if let Some(i) = out.last_raised_at {
        if out.len() >= ctx.cfg.max_case_len && i + 1 < out.len() {
            out.statements.truncate(i + 1);
        }
    }
    let candidates = match out.last_raised_at {
        Some(i) => (i + 1).min(out.len()),
        None => out.len(),
    };
    match kind {
        MutationKind::Remove => {
            if candidates > 0 {
                let p = 1.0 / candidates as f64;
                for idx in (0..candidates).rev() {
                    if idx < out.len() && ctx.rng.gen_bool(p) {
                        remove_statement(&mut out, idx, ctx.rng);
                    }
                }
            }
        }
        MutationKind::Change => {
            if candidates > 0 {
                let p = 1.0 / candidates as f64;
                for idx in 0..candidates.min(out.len()) {
                    if ctx.rng.gen_bool(p) {
                        change_statement(&mut out, idx, ctx);
                    }
                }
            }
        }
        MutationKind::Insert => {
            let mut i = 1;
            while out.len() < ctx.cfg.max_case_len
                && ctx.rng.gen_bool(ctx.cfg.sigma_statement.powi(i))
            {
                if !insert_statement(&mut out, ctx) {
                    break;
                }
                i += 1;
            }
        }
    }
    out.last_raised_at = None;
    out
}

/// Mutates each case with probability 1/|T|, drops cases that end up
/// empty, and appends fresh random cases with geometrically decreasing
/// probability while the suite stays within N.
pub fn mutate_suite<R: Rng>(suite: &TestSuite, ctx: &mut GenCtx<R>) -> TestSuite {
    let n = suite.size().max(1);
    let p = 1.0 / n as f64;
    let mut cases = Vec::with_capacity(suite.size());
    for case in &suite.cases {
        let mutated = if ctx.rng.gen_bool(p) { mutate_case(case, ctx) } else { case.clone() };
        if !mutated.is_empty() {
            cases.push(mutated);
        }
    }
    let mut i = 1;
    while cases.len() < ctx.cfg.max_suite_size
        && ctx.rng.gen_bool(ctx.cfg.sigma_test_case.powi(i))
    {
        let fresh = sample_test_case(ctx);
        if fresh.is_empty() {
            break;
        }
        cases.push(fresh);
        i += 1;
    }
    TestSuite::new(cases)
}

/// Samples a random test case by drawing a target size r uniformly from
/// [1, L] and inserting statements until the case reaches it.
pub fn sample_test_case<R: Rng>(ctx: &mut GenCtx<R>) -> TestCase {
    let r = ctx.rng.gen_range(1..=ctx.cfg.max_case_len);
    let mut case = TestCase::new();
    let mut failures = 0;
    // The attempt budget has a floor so a tight L still gets enough tries
    // to hit a callable that fits.
    let max_failures = (SAMPLE_ATTEMPT_FACTOR * ctx.cfg.max_case_len).max(100);
    while case.len() < r && failures < max_failures {
        if !insert_statement(&mut case, ctx) {
            failures += 1;
        }
    }
    case
}

/// Single-point relative crossover on suites: both parents split at the
/// same relative point, tails exchanged. Test cases carry no dependencies
/// between each other, so no repair is needed.
pub fn crossover_suites<R: Rng>(
    p1: &TestSuite,
    p2: &TestSuite,
    rng: &mut R,
) -> (TestSuite, TestSuite) {
    let alpha: f64 = rng.gen();
    crossover_suites_at(p1, p2, alpha)
}

pub fn crossover_suites_at(p1: &TestSuite, p2: &TestSuite, alpha: f64) -> (TestSuite, TestSuite) {
    let a1 = split_index(alpha, p1.size());
    let a2 = split_index(alpha, p2.size());
    let o1 = p1.cases[..a1].iter().chain(&p2.cases[a2..]).cloned().collect();
    let o2 = p2.cases[..a2].iter().chain(&p1.cases[a1..]).cloned().collect();
    (TestSuite::new(o1), TestSuite::new(o2))
}

fn split_index(alpha: f64, len: usize) -> usize {
    ((alpha * len as f64).floor() as usize).min(len)
}

/// Single-point relative crossover on test cases. The transplanted tail is
/// repaired statement by statement; a repair that cannot be completed, or
/// an offspring that would exceed L, falls back to a clone of the
/// corresponding parent.
pub fn crossover_cases<R: Rng>(
    p1: &TestCase,
    p2: &TestCase,
    ctx: &mut GenCtx<R>,
) -> (TestCase, TestCase) {
    let alpha: f64 = ctx.rng.gen();
    crossover_cases_at(p1, p2, alpha, ctx)
}

pub fn crossover_cases_at<R: Rng>(
    p1: &TestCase,
    p2: &TestCase,
    alpha: f64,
    ctx: &mut GenCtx<R>,
) -> (TestCase, TestCase) {
    (crossed(p1, p2, alpha, ctx), crossed(p2, p1, alpha, ctx))
}

fn crossed<R: Rng>(head: &TestCase, tail: &TestCase, alpha: f64, ctx: &mut GenCtx<R>) -> TestCase {
    let h = split_index(alpha, head.len());
    let t = split_index(alpha, tail.len());
    let mut out = head.clone();
    out.statements.truncate(h);
    out.last_raised_at = None;
    if transplant(&mut out, tail, t, ctx).is_none() || out.len() > ctx.cfg.max_case_len {
        return head.clone();
    }
    out
}

/// Appends `src.statements[from..]` to `dest` under fresh variable ids.
/// References into the part of `src` that was not transplanted are repaired
/// by reusing an in-scope value or generating a new one. None means the
/// repair failed.
fn transplant<R: Rng>(
    dest: &mut TestCase,
    src: &TestCase,
    from: usize,
    ctx: &mut GenCtx<R>,
) -> Option<()> {
    let mut mapping: Vec<(VarId, VarId)> = Vec::new();
    for stmt in &src.statements[from..] {
        for r in stmt.references() {
            if mapping.iter().any(|(old, _)| *old == r) {
                continue;
            }
            let wanted = src.type_of(r).cloned().unwrap_or(TypeRef::Dynamic);
            let candidates = reuse_candidates(dest, dest.len(), &wanted);
            let reused = if !candidates.is_empty() && ctx.rng.gen_bool(ctx.cfg.reuse_probability) {
                pick_var(&candidates, ctx.rng)
            } else {
                None
            };
            let mut at = dest.len();
            let choice = reused
                .or_else(|| generate_value(dest, &mut at, &wanted, 0, ctx))
                .or_else(|| pick_var(&candidates, ctx.rng))?;
            mapping.push((r, choice));
        }
        let fresh = dest.fresh_var();
        let mut s = stmt.clone();
        mapping.push((stmt.var, fresh));
        s.remap(&|v| mapping.iter().find(|(old, _)| *old == v).map(|(_, new)| *new).unwrap_or(v));
        dest.statements.push(s);
    }
    Some(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{build_test_cluster, seed_constants};
    use crate::minidyn::{compile_module, parse_module};
    use crate::testmodel::{render_case, validate_test_case};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    const ARITH_MODULE: &str = "\
def ceil_div(a: Int, b: Int) -> Int:
    if b == 0:
        raise ZeroDivisionError(\"division by zero\")
    return (a + b - 1) // b

def seven() -> Int:
    return 7

class Counter:
    def __init__(self, start: Int):
        self.total = start

    def add(self, amount: Int) -> Int:
        self.total = self.total + amount
        return self.total

    def peek(self) -> Int:
        return self.total
";

    const FOO_MODULE: &str = "\
class Foo:
    def __init__(self, foo: Str):
        self.foo = foo

    def bar(self, suffix: Str) -> Str:
        return self.foo + suffix

    def baz(self, repeat: Int) -> Str:
        return self.foo * repeat
";

    struct Fixture {
        cfg: SearchConfig,
        cluster: TestCluster,
        pool: ConstantPool,
        stats: GenerationStats,
        rng: StdRng,
    }

    impl Fixture {
        fn new(src: &str, use_type_hints: bool, seed: u64) -> Fixture {
            let ast = parse_module("m", src).unwrap();
            let module = compile_module(&ast).unwrap();
            Fixture {
                cfg: SearchConfig::default(),
                cluster: build_test_cluster(&module, use_type_hints),
                pool: seed_constants(&ast),
                stats: GenerationStats::default(),
                rng: StdRng::seed_from_u64(seed),
            }
        }

        fn ctx(&mut self) -> GenCtx<'_, StdRng> {
            GenCtx {
                cfg: &self.cfg,
                cluster: &self.cluster,
                pool: &self.pool,
                rng: &mut self.rng,
                stats: &mut self.stats,
            }
        }
    }

    fn int_stmt(case: &mut TestCase, v: i64) -> VarId {
        let var = case.fresh_var();
        case.statements.push(Statement {
            var,
            declared_type: TypeRef::Int,
            kind: StatementKind::Primitive(PrimitiveValue::Int(v)),
        });
        var
    }

    fn str_stmt(case: &mut TestCase, s: &str) -> VarId {
        let var = case.fresh_var();
        case.statements.push(Statement {
            var,
            declared_type: TypeRef::Str,
            kind: StatementKind::Primitive(PrimitiveValue::Str(s.into())),
        });
        var
    }

    fn binding(param: &str, t: TypeRef, value: BoundValue) -> ParamBinding {
        ParamBinding {
            param: param.into(),
            kind: ParamKind::Normal,
            has_default: false,
            declared_type: t,
            value,
            by_keyword: false,
        }
    }

    fn func_stmt(case: &mut TestCase, name: &str, returns: TypeRef, args: &[(VarId, TypeRef)]) -> VarId {
        let var = case.fresh_var();
        let bindings = args
            .iter()
            .enumerate()
            .map(|(i, (v, t))| binding(&format!("p{i}"), t.clone(), BoundValue::Var(*v)))
            .collect();
        case.statements.push(Statement {
            var,
            declared_type: returns,
            kind: StatementKind::Function { function: name.into(), bindings },
        });
        var
    }

    fn ctor_stmt(case: &mut TestCase, class: &str, args: &[(VarId, TypeRef)]) -> VarId {
        let var = case.fresh_var();
        let bindings = args
            .iter()
            .enumerate()
            .map(|(i, (v, t))| binding(&format!("p{i}"), t.clone(), BoundValue::Var(*v)))
            .collect();
        case.statements.push(Statement {
            var,
            declared_type: TypeRef::Class(class.into()),
            kind: StatementKind::Constructor { class: class.into(), bindings },
        });
        var
    }

    fn method_stmt(
        case: &mut TestCase,
        receiver: VarId,
        method: &str,
        returns: TypeRef,
        args: &[(VarId, TypeRef)],
    ) -> VarId {
        let var = case.fresh_var();
        let bindings = args
            .iter()
            .enumerate()
            .map(|(i, (v, t))| binding(&format!("p{i}"), t.clone(), BoundValue::Var(*v)))
            .collect();
        case.statements.push(Statement {
            var,
            declared_type: returns,
            kind: StatementKind::Method { receiver, method: method.into(), bindings },
        });
        var
    }

    fn dummy_case(stamp: i64) -> TestCase {
        let mut case = TestCase::new();
        int_stmt(&mut case, stamp);
        case
    }

    fn dummy_suite(size: usize) -> TestSuite {
        TestSuite::new((0..size).map(|i| dummy_case(i as i64)).collect())
    }

    #[test]
    fn suite_crossover_at_the_midpoint_keeps_symmetric_sizes() {
        let (o1, o2) = crossover_suites_at(&dummy_suite(4), &dummy_suite(4), 0.5);
        assert_eq!((o1.size(), o2.size()), (4, 4));
    }

    #[test]
    fn suite_crossover_shrinks_the_size_gap() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..10_000 {
            let n1 = rng.gen_range(1..=10);
            let n2 = rng.gen_range(1..=10);
            let (o1, o2) = crossover_suites(&dummy_suite(n1), &dummy_suite(n2), &mut rng);
            let parent_gap = (n1 as i64 - n2 as i64).abs();
            let offspring_gap = (o1.size() as i64 - o2.size() as i64).abs();
            assert!(offspring_gap <= parent_gap, "gap grew: {offspring_gap} > {parent_gap}");
            let larger = n1.max(n2);
            assert!(o1.size() <= larger && o2.size() <= larger);
        }
    }

    #[test]
    fn suite_crossover_of_identical_parents_reproduces_them() {
        let parent = dummy_suite(5);
        let (o1, o2) = crossover_suites_at(&parent, &parent, 0.4);
        for o in [o1, o2] {
            assert_eq!(o.size(), parent.size());
            for (a, b) in o.cases.iter().zip(&parent.cases) {
                assert_eq!(render_case(a, 0), render_case(b, 0));
            }
        }
    }

    /// p1 and p2 mirror the two-class example: build a Foo from a string,
    /// then call a method on it.
    fn foo_parents() -> (TestCase, TestCase) {
        let mut p1 = TestCase::new();
        let s0 = str_stmt(&mut p1, "string a");
        let foo = ctor_stmt(&mut p1, "Foo", &[(s0, TypeRef::Str)]);
        let s1 = str_stmt(&mut p1, "string b");
        method_stmt(&mut p1, foo, "bar", TypeRef::Str, &[(s1, TypeRef::Str)]);
        let mut p2 = TestCase::new();
        let s0 = str_stmt(&mut p2, "string c");
        let foo = ctor_stmt(&mut p2, "Foo", &[(s0, TypeRef::Str)]);
        let i0 = int_stmt(&mut p2, 1337);
        method_stmt(&mut p2, foo, "baz", TypeRef::Str, &[(i0, TypeRef::Int)]);
        (p1, p2)
    }

    #[test]
    fn case_crossover_repairs_by_generating_when_reuse_is_off() {
        let mut fx = Fixture::new(FOO_MODULE, true, 3);
        fx.cfg.reuse_probability = 0.0;
        fx.cfg.none_probability = 0.0;
        let (p1, p2) = foo_parents();
        // Split after statement 3 in both parents: the baz call crosses
        // from p2 into p1's prefix.
        let (o1, _) = crossover_cases_at(&p1, &p2, 0.8, &mut fx.ctx());
        assert!(validate_test_case(&o1).is_empty(), "{:?}", validate_test_case(&o1));
        let ctors = o1
            .statements
            .iter()
            .filter(|s| matches!(s.kind, StatementKind::Constructor { .. }))
            .count();
        assert_eq!(ctors, 2, "repair built a fresh Foo:\n{}", render_case(&o1, 0));
        let last = o1.statements.last().unwrap();
        assert!(
            matches!(&last.kind, StatementKind::Method { method, .. } if method == "baz"),
            "tail call survived the transplant:\n{}",
            render_case(&o1, 0)
        );
    }

    #[test]
    fn case_crossover_repairs_by_reuse_when_reuse_is_certain() {
        let mut fx = Fixture::new(FOO_MODULE, true, 3);
        fx.cfg.reuse_probability = 1.0;
        let (p1, p2) = foo_parents();
        let (_, o2) = crossover_cases_at(&p1, &p2, 0.8, &mut fx.ctx());
        assert!(validate_test_case(&o2).is_empty());
        // p2's prefix already holds a Foo and a Str; the transplanted bar
        // call reuses both instead of growing the case.
        assert_eq!(o2.len(), 4, "{}", render_case(&o2, 0));
        let last = o2.statements.last().unwrap();
        match &last.kind {
            StatementKind::Method { receiver, method, bindings } => {
                assert_eq!(method, "bar");
                assert_eq!(o2.type_of(*receiver), Some(&TypeRef::Class("Foo".into())));
                match bindings[0].value {
                    BoundValue::Var(v) => assert_eq!(o2.type_of(v), Some(&TypeRef::Str)),
                    other => panic!("expected a reused Str argument, got {other:?}"),
                }
            }
            other => panic!("expected a method call, got {other:?}"),
        }
    }

    #[test]
    fn case_crossover_at_zero_hands_over_whole_cases() {
        let mut fx = Fixture::new(FOO_MODULE, true, 5);
        let (p1, p2) = foo_parents();
        let (o1, o2) = crossover_cases_at(&p1, &p2, 0.0, &mut fx.ctx());
        // Empty head plus the full tail of the other parent: render-equal
        // to that parent.
        assert_eq!(render_case(&o1, 0), render_case(&p2, 0));
        assert_eq!(render_case(&o2, 0), render_case(&p1, 0));
    }

    #[test]
    fn case_crossover_offspring_always_validate() {
        let mut fx = Fixture::new(ARITH_MODULE, true, 17);
        let samples: Vec<TestCase> =
            (0..40).map(|_| sample_test_case(&mut fx.ctx())).filter(|c| !c.is_empty()).collect();
        assert!(samples.len() >= 20, "sampling should mostly succeed");
        for _ in 0..10_000 {
            let a = fx.rng.gen_range(0..samples.len());
            let b = fx.rng.gen_range(0..samples.len());
            let (p1, p2) = (samples[a].clone(), samples[b].clone());
            let (o1, o2) = crossover_cases(&p1, &p2, &mut fx.ctx());
            for o in [&o1, &o2] {
                let violations = validate_test_case(o);
                assert!(violations.is_empty(), "{violations:?}\n{}", render_case(o, 0));
                assert!(o.len() <= fx.cfg.max_case_len);
            }
        }
    }

    #[test]
    fn mutation_kinds_are_picked_uniformly() {
        let mut rng = StdRng::seed_from_u64(23);
        let mut counts = [0u32; 3];
        let draws = 30_000;
        for _ in 0..draws {
            match MutationKind::pick(&mut rng) {
                MutationKind::Remove => counts[0] += 1,
                MutationKind::Change => counts[1] += 1,
                MutationKind::Insert => counts[2] += 1,
            }
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 1.0 / 3.0).abs() < 0.02, "frequency {freq} strays from 1/3");
        }
    }

    #[test]
    fn forced_remove_on_a_single_statement_case_empties_it() {
        let mut fx = Fixture::new(ARITH_MODULE, true, 1);
        let case = dummy_case(5);
        let out = mutate_case_with(&case, MutationKind::Remove, &mut fx.ctx());
        assert!(out.is_empty());
    }

    #[test]
    fn raising_case_at_full_length_is_truncated_before_mutation() {
        let mut fx = Fixture::new(ARITH_MODULE, true, 2);
        let mut case = TestCase::new();
        for i in 0..fx.cfg.max_case_len {
            int_stmt(&mut case, i as i64);
        }
        case.last_raised_at = Some(2);
        let out = mutate_case_with(&case, MutationKind::Change, &mut fx.ctx());
        assert_eq!(out.len(), 3, "statements after the raise are gone");
    }

    #[test]
    fn short_raising_case_keeps_unreached_statements() {
        let mut fx = Fixture::new(ARITH_MODULE, true, 2);
        let mut case = TestCase::new();
        for i in 0..5 {
            int_stmt(&mut case, i);
        }
        case.last_raised_at = Some(1);
        let out = mutate_case_with(&case, MutationKind::Change, &mut fx.ctx());
        // Below L nothing is truncated; the trailing statements are merely
        // not mutation candidates.
        assert_eq!(out.len(), 5);
        for (i, s) in out.statements.iter().enumerate().skip(2) {
            assert_eq!(
                s.kind,
                StatementKind::Primitive(PrimitiveValue::Int(i as i64)),
                "unreached statement {i} was mutated"
            );
        }
    }

    #[test]
    fn removing_a_value_rebinds_references_to_a_same_typed_survivor() {
        let mut rng = StdRng::seed_from_u64(4);
        let mut case = TestCase::new();
        let a = int_stmt(&mut case, 1);
        let b = int_stmt(&mut case, 2);
        func_stmt(&mut case, "ceil_div", TypeRef::Int, &[(a, TypeRef::Int), (a, TypeRef::Int)]);
        remove_statement(&mut case, 0, &mut rng);
        assert_eq!(case.len(), 2);
        assert!(validate_test_case(&case).is_empty());
        match &case.statements[1].kind {
            StatementKind::Function { bindings, .. } => {
                for binding in bindings {
                    assert_eq!(binding.value, BoundValue::Var(b));
                }
            }
            other => panic!("expected the call to survive, got {other:?}"),
        }
    }

    #[test]
    fn removing_an_unsubstitutable_value_cascades() {
        let mut rng = StdRng::seed_from_u64(4);
        let mut case = TestCase::new();
        let start = int_stmt(&mut case, 3);
        let counter = ctor_stmt(&mut case, "Counter", &[(start, TypeRef::Int)]);
        method_stmt(&mut case, counter, "peek", TypeRef::Int, &[]);
        remove_statement(&mut case, 1, &mut rng);
        // No other Counter exists, so the method call dies with it.
        assert_eq!(case.len(), 1);
        assert_eq!(case.statements[0].kind, StatementKind::Primitive(PrimitiveValue::Int(3)));
        assert!(validate_test_case(&case).is_empty());
    }

    #[test]
    fn random_deletions_always_validate() {
        let mut fx = Fixture::new(ARITH_MODULE, true, 31);
        let samples: Vec<TestCase> =
            (0..40).map(|_| sample_test_case(&mut fx.ctx())).filter(|c| !c.is_empty()).collect();
        assert!(!samples.is_empty());
        for _ in 0..10_000 {
            let mut case = samples[fx.rng.gen_range(0..samples.len())].clone();
            let index = fx.rng.gen_range(0..case.len());
            remove_statement(&mut case, index, &mut fx.rng);
            let violations = validate_test_case(&case);
            assert!(
                violations.is_empty() || case.is_empty(),
                "{violations:?}\n{}",
                render_case(&case, 0)
            );
        }
    }

    #[test]
    fn insertion_on_an_empty_case_builds_arguments_then_the_call() {
        let mut fx = Fixture::new(
            "def ceil_div(a: Int, b: Int) -> Int:\n    return (a + b - 1) // b\n",
            true,
            6,
        );
        fx.cfg.none_probability = 0.0;
        fx.cfg.disregard_hint_probability = 0.0;
        fx.cfg.reuse_probability = 0.0;
        let mut case = TestCase::new();
        assert!(insert_statement(&mut case, &mut fx.ctx()));
        assert_eq!(case.len(), 3, "{}", render_case(&case, 0));
        assert!(matches!(
            case.statements[0].kind,
            StatementKind::Primitive(PrimitiveValue::Int(_))
        ));
        assert!(matches!(
            case.statements[1].kind,
            StatementKind::Primitive(PrimitiveValue::Int(_))
        ));
        match &case.statements[2].kind {
            StatementKind::Function { function, bindings } => {
                assert_eq!(function, "ceil_div");
                assert!(bindings.iter().all(|b| matches!(b.value, BoundValue::Var(_))));
            }
            other => panic!("expected the call last, got {other:?}"),
        }
        assert!(validate_test_case(&case).is_empty());
    }

    #[test]
    fn certain_omission_leaves_optional_parameters_unbound() {
        let mut fx = Fixture::new("def f(x: Int = 3) -> Int:\n    return x\n", true, 7);
        fx.cfg.omit_optional_probability = 1.0;
        let mut case = TestCase::new();
        assert!(insert_statement(&mut case, &mut fx.ctx()));
        assert_eq!(case.len(), 1);
        match &case.statements[0].kind {
            StatementKind::Function { bindings, .. } => {
                assert_eq!(bindings[0].value, BoundValue::Omitted);
            }
            other => panic!("expected a call, got {other:?}"),
        }
    }

    #[test]
    fn a_case_length_bound_of_one_yields_single_statement_cases() {
        let mut fx = Fixture::new(ARITH_MODULE, true, 8);
        fx.cfg.max_case_len = 1;
        for _ in 0..20 {
            let case = sample_test_case(&mut fx.ctx());
            assert_eq!(case.len(), 1, "{}", render_case(&case, 0));
            assert!(validate_test_case(&case).is_empty());
        }
    }

    #[test]
    fn random_types_are_drawn_uniformly_from_the_cluster() {
        let mut fx = Fixture::new(ARITH_MODULE, false, 9);
        let types = fx.cluster.types();
        let mut counts = vec![0u32; types.len()];
        let draws = 10_000;
        for _ in 0..draws {
            let t = fx.ctx().random_type();
            let i = types.iter().position(|x| *x == t).unwrap();
            counts[i] += 1;
        }
        let p = 1.0 / types.len() as f64;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (t, c) in types.iter().zip(&counts) {
            let expected = draws as f64 * p;
            assert!(
                (*c as f64 - expected).abs() <= 3.0 * sigma,
                "type {t:?} drawn {c} times, expected about {expected}"
            );
        }
    }

    #[test]
    fn hints_off_generation_never_consults_type_hints() {
        let mut fx = Fixture::new(ARITH_MODULE, false, 10);
        let mut cases = Vec::new();
        for _ in 0..100 {
            cases.push(sample_test_case(&mut fx.ctx()));
        }
        for case in &cases {
            if !case.is_empty() {
                let _ = mutate_case(case, &mut fx.ctx());
            }
        }
        assert_eq!(fx.stats.hint_guided_selections, 0);
    }

    #[test]
    fn hints_on_generation_uses_type_hints() {
        let mut fx = Fixture::new(ARITH_MODULE, true, 10);
        for _ in 0..20 {
            let _ = sample_test_case(&mut fx.ctx());
        }
        assert!(fx.stats.hint_guided_selections > 0);
    }

    #[test]
    fn changing_a_bool_negates_it() {
        let mut fx = Fixture::new(ARITH_MODULE, true, 12);
        let mut case = TestCase::new();
        let var = case.fresh_var();
        case.statements.push(Statement {
            var,
            declared_type: TypeRef::Bool,
            kind: StatementKind::Primitive(PrimitiveValue::Bool(true)),
        });
        change_statement(&mut case, 0, &mut fx.ctx());
        assert_eq!(case.statements[0].kind, StatementKind::Primitive(PrimitiveValue::Bool(false)));
    }

    #[test]
    fn changing_an_int_shifts_it_by_a_scaled_normal_draw() {
        let seed = 77;
        let mut oracle_rng = StdRng::seed_from_u64(seed);
        let alpha: f64 = oracle_rng.sample(StandardNormal);
        let expected = 10 + (alpha * 20.0).round() as i64;
        let mut fx = Fixture::new(ARITH_MODULE, true, seed);
        let mut case = TestCase::new();
        int_stmt(&mut case, 10);
        change_statement(&mut case, 0, &mut fx.ctx());
        assert_eq!(case.statements[0].kind, StatementKind::Primitive(PrimitiveValue::Int(expected)));
    }

    #[test]
    fn map_entry_changes_flip_key_or_value_evenly() {
        let mut fx = Fixture::new(ARITH_MODULE, true, 13);
        let mut base = TestCase::new();
        let k0 = int_stmt(&mut base, 1);
        let v0 = int_stmt(&mut base, 2);
        int_stmt(&mut base, 3);
        int_stmt(&mut base, 4);
        let map = base.fresh_var();
        base.statements.push(Statement {
            var: map,
            declared_type: TypeRef::Map,
            kind: StatementKind::Collection {
                kind: CollectionKind::Map,
                elements: Vec::new(),
                pairs: vec![(k0, v0)],
            },
        });
        let mut key_changes = 0u32;
        let mut value_changes = 0u32;
        for _ in 0..30_000 {
            let mut case = base.clone();
            change_statement(&mut case, 4, &mut fx.ctx());
            if let StatementKind::Collection { pairs, .. } = &case.statements[4].kind {
                // Only the replace arm keeps exactly one pair with one
                // side changed; delete and insert arms change the count.
                if pairs.len() == 1 {
                    let (k, v) = pairs[0];
                    match (k != k0, v != v0) {
                        (true, false) => key_changes += 1,
                        (false, true) => value_changes += 1,
                        _ => {}
                    }
                }
            }
        }
        let total = (key_changes + value_changes) as f64;
        assert!(total > 5_000.0, "replace arm should fire about a third of the time");
        let key_share = key_changes as f64 / total;
        assert!((key_share - 0.5).abs() < 0.02, "key share {key_share} strays from 1/2");
    }

    #[test]
    fn unchanged_arguments_force_whole_statement_replacement() {
        let src = "\
def f(x: Int) -> Int:
    return x + 1

def g(x: Int) -> Int:
    return x + 2
";
        let mut fx = Fixture::new(src, true, 14);
        // One Int in scope: replacing the only argument finds no other
        // candidate, None is disabled, omission is impossible, so the call
        // itself must be swapped for the other Int-returning function.
        fx.cfg.none_probability = 0.0;
        let mut case = TestCase::new();
        let a = int_stmt(&mut case, 5);
        func_stmt(&mut case, "f", TypeRef::Int, &[(a, TypeRef::Int)]);
        let var_before = case.statements[1].var;
        change_statement(&mut case, 1, &mut fx.ctx());
        match &case.statements[1].kind {
            StatementKind::Function { function, bindings } => {
                assert_eq!(function, "g");
                assert_eq!(bindings[0].value, BoundValue::Var(a));
            }
            other => panic!("expected the call to be replaced, got {other:?}"),
        }
        assert_eq!(case.statements[1].var, var_before, "the defined variable survives");
        assert_eq!(case.statements[1].declared_type, TypeRef::Int);
        assert!(validate_test_case(&case).is_empty());
    }

    #[test]
    fn suite_mutation_without_sigma_never_grows_the_suite() {
        let mut fx = Fixture::new(ARITH_MODULE, true, 15);
        fx.cfg.sigma_test_case = 0.0;
        let suite = dummy_suite(3);
        for _ in 0..50 {
            let out = mutate_suite(&suite, &mut fx.ctx());
            assert!(out.size() <= 3);
            assert!(out.cases.iter().all(|c| !c.is_empty()));
        }
    }

    #[test]
    fn suite_mutation_respects_the_size_bound() {
        let mut fx = Fixture::new(ARITH_MODULE, true, 16);
        fx.cfg.sigma_test_case = 1.0;
        fx.cfg.max_suite_size = 6;
        let suite = dummy_suite(6);
        let out = mutate_suite(&suite, &mut fx.ctx());
        assert!(out.size() <= 6, "a full suite accepts no additions");
        let smaller = dummy_suite(3);
        let grown = mutate_suite(&smaller, &mut fx.ctx());
        assert!(grown.size() <= 6);
        assert!(grown.size() > 3, "certain addition fills the suite up to the bound");
    }

    #[test]
    fn empty_mutated_cases_are_dropped_from_the_suite() {
        let mut fx = Fixture::new(ARITH_MODULE, true, 18);
        fx.cfg.sigma_test_case = 0.0;
        let suite = dummy_suite(1);
        let mut shrank = false;
        for _ in 0..100 {
            let out = mutate_suite(&suite, &mut fx.ctx());
            assert!(out.cases.iter().all(|c| !c.is_empty()));
            if out.size() < suite.size() {
                shrank = true;
            }
        }
        assert!(shrank, "the remove arm should empty the single case eventually");
    }

    #[test]
    fn sampled_cases_validate_and_respect_the_length_bound() {
        let mut fx = Fixture::new(ARITH_MODULE, true, 19);
        fx.cfg.max_case_len = 8;
        let mut sizes = vec![0u32; 9];
        let draws = 2_000;
        for _ in 0..draws {
            let case = sample_test_case(&mut fx.ctx());
            assert!(!case.is_empty());
            assert!(case.len() <= 8);
            assert!(validate_test_case(&case).is_empty());
            sizes[case.len()] += 1;
        }
        // Uniform r plus overshoot from multi-statement insertions: every
        // admissible size shows up, with mass spread across the range.
        let nonzero = sizes.iter().skip(1).filter(|&&c| c > 0).count();
        assert!(nonzero >= 6, "sizes collapsed: {sizes:?}");
        let mean: f64 = sizes
            .iter()
            .enumerate()
            .map(|(len, &c)| len as f64 * c as f64)
            .sum::<f64>()
            / draws as f64;
        assert!((3.0..=7.5).contains(&mean), "mean size {mean} outside the plausible band");
    }

    #[test]
    fn random_mutations_always_validate() {
        let mut fx = Fixture::new(ARITH_MODULE, true, 20);
        let samples: Vec<TestCase> =
            (0..30).map(|_| sample_test_case(&mut fx.ctx())).filter(|c| !c.is_empty()).collect();
        assert!(!samples.is_empty());
        for i in 0..10_000 {
            let case = &samples[i % samples.len()];
            let out = mutate_case(case, &mut fx.ctx());
            let violations = validate_test_case(&out);
            assert!(
                violations.is_empty() || out.is_empty(),
                "{violations:?}\n{}",
                render_case(&out, 0)
            );
            assert!(out.len() <= fx.cfg.max_case_len);
        }
    }

    #[test]
    fn hints_off_sampling_still_produces_valid_calls() {
        let mut fx = Fixture::new(ARITH_MODULE, false, 21);
        let mut calls = 0;
        for _ in 0..50 {
            let case = sample_test_case(&mut fx.ctx());
            assert!(validate_test_case(&case).is_empty() || case.is_empty());
            calls += case.statements.iter().filter(|s| s.is_call()).count();
        }
        assert!(calls > 0, "sampling without hints should still call the module");
    }
}
