//! Runtime values and the semantics shared by the interpreter and the
//! branch-distance instrumentation.
//!
//! Collections use reference semantics (`Rc<RefCell<..>>`) so that aliasing
//! and in-place mutation behave the way a caller of a dynamic language would
//! expect. Sets and maps are insertion-ordered vectors deduplicated by value
//! equality; this keeps iteration deterministic and keeps membership exactly
//! consistent with the equality relation the branch distances are built on.

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

/// A raised MiniDyn exception: a class name plus a message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynError {
    pub class: String,
    pub message: String,
}

impl DynError {
    pub fn new(class: &str, message: impl Into<String>) -> Self {
        DynError { class: class.to_string(), message: message.into() }
    }
}

impl fmt::Display for DynError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.class, self.message)
    }
}

pub type DynResult<T> = Result<T, DynError>;

/// Attribute storage for a class instance.
#[derive(Debug)]
pub struct ObjectData {
    pub class_id: usize,
    pub class_name: String,
    /// Insertion-ordered attribute table.
    pub attrs: Vec<(String, Value)>,
}

impl ObjectData {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.attrs.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn set(&mut self, name: &str, value: Value) {
        if let Some(slot) = self.attrs.iter_mut().find(|(n, _)| n == name) {
            slot.1 = value;
        } else {
            self.attrs.push((name.to_string(), value));
        }
    }
}

/// A MiniDyn runtime value.
#[derive(Debug, Clone)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(Rc<str>),
    Bytes(Rc<[u8]>),
    None,
    List(Rc<RefCell<Vec<Value>>>),
    Tuple(Rc<Vec<Value>>),
    Set(Rc<RefCell<Vec<Value>>>),
    Map(Rc<RefCell<Vec<(Value, Value)>>>),
    Object(Rc<RefCell<ObjectData>>),
}

impl Value {
    pub fn str(s: impl AsRef<str>) -> Value {
        Value::Str(Rc::from(s.as_ref()))
    }

    pub fn bytes(b: impl AsRef<[u8]>) -> Value {
        Value::Bytes(Rc::from(b.as_ref()))
    }

    pub fn list(items: Vec<Value>) -> Value {
        Value::List(Rc::new(RefCell::new(items)))
    }

    pub fn tuple(items: Vec<Value>) -> Value {
        Value::Tuple(Rc::new(items))
    }

    /// Builds a set, deduplicating by value equality, keeping first insertions.
    pub fn set(items: Vec<Value>) -> Value {
        let mut out: Vec<Value> = Vec::new();
        for it in items {
            if !out.iter().any(|e| value_eq(e, &it)) {
                out.push(it);
            }
        }
        Value::Set(Rc::new(RefCell::new(out)))
    }

    /// Builds a map; later bindings for an equal key overwrite earlier ones.
    pub fn map(pairs: Vec<(Value, Value)>) -> Value {
        let mut out: Vec<(Value, Value)> = Vec::new();
        for (k, v) in pairs {
            if let Some(slot) = out.iter_mut().find(|(ek, _)| value_eq(ek, &k)) {
                slot.1 = v;
            } else {
                out.push((k, v));
            }
        }
        Value::Map(Rc::new(RefCell::new(out)))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "Int",
            Value::Float(_) => "Float",
            Value::Bool(_) => "Bool",
            Value::Str(_) => "Str",
            Value::Bytes(_) => "Bytes",
            Value::None => "None",
            Value::List(_) => "List",
            Value::Tuple(_) => "Tuple",
            Value::Set(_) => "Set",
            Value::Map(_) => "Map",
            Value::Object(_) => "Object",
        }
    }

    /// Int, Float, and Bool form the numeric family.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Value::Int(_) | Value::Float(_) | Value::Bool(_))
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            Value::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
            _ => None,
        }
    }

    /// Length for sized values (strings, bytes, and collections).
    pub fn len(&self) -> Option<usize> {
        match self {
            Value::Str(s) => Some(s.chars().count()),
            Value::Bytes(b) => Some(b.len()),
            Value::List(v) => Some(v.borrow().len()),
            Value::Tuple(v) => Some(v.len()),
            Value::Set(v) => Some(v.borrow().len()),
            Value::Map(v) => Some(v.borrow().len()),
            _ => None,
        }
    }

    /// Truthiness: numbers by non-zero, sized values by non-emptiness,
    /// `None` is false, class instances are true.
    pub fn is_truthy(&self) -> bool {
        match self {
            Value::Int(i) => *i != 0,
            Value::Float(f) => *f != 0.0,
            Value::Bool(b) => *b,
            Value::None => false,
            Value::Object(_) => true,
            _ => self.len().map(|l| l > 0).unwrap_or(true),
        }
    }

    /// Whether this value may be used as a set element or map key.
    pub fn is_hashable(&self) -> bool {
        match self {
            Value::Int(_)
            | Value::Float(_)
            | Value::Bool(_)
            | Value::Str(_)
            | Value::Bytes(_)
            | Value::None => true,
            Value::Tuple(items) => items.iter().all(|v| v.is_hashable()),
            _ => false,
        }
    }
}

/// Structural equality with cross-kind numeric comparison; class instances
/// compare by identity.
pub fn value_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Str(x), Value::Str(y)) => x == y,
        (Value::Bytes(x), Value::Bytes(y)) => x == y,
        (Value::None, Value::None) => true,
        (Value::List(x), Value::List(y)) => {
            Rc::ptr_eq(x, y) || seq_eq(&x.borrow(), &y.borrow())
        }
        (Value::Tuple(x), Value::Tuple(y)) => Rc::ptr_eq(x, y) || seq_eq(x, y),
        (Value::Set(x), Value::Set(y)) => {
            Rc::ptr_eq(x, y) || set_eq(&x.borrow(), &y.borrow())
        }
        (Value::Map(x), Value::Map(y)) => {
            Rc::ptr_eq(x, y) || map_eq(&x.borrow(), &y.borrow())
        }
        (Value::Object(x), Value::Object(y)) => Rc::ptr_eq(x, y),
        _ => match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        },
    }
}

fn seq_eq(a: &[Value], b: &[Value]) -> bool {
    a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| value_eq(x, y))
}

fn set_eq(a: &[Value], b: &[Value]) -> bool {
    a.len() == b.len() && a.iter().all(|x| b.iter().any(|y| value_eq(x, y)))
}

fn map_eq(a: &[(Value, Value)], b: &[(Value, Value)]) -> bool {
    a.len() == b.len()
        && a.iter().all(|(k, v)| {
            b.iter().any(|(bk, bv)| value_eq(k, bk) && value_eq(v, bv))
        })
}

/// A deep, immutable copy: shared structure is duplicated so later mutation
/// of the source cannot be observed through the copy.
pub fn deep_copy(v: &Value) -> Value {
    match v {
        Value::List(items) => {
            Value::List(Rc::new(RefCell::new(items.borrow().iter().map(deep_copy).collect())))
        }
        Value::Tuple(items) => Value::Tuple(Rc::new(items.iter().map(deep_copy).collect())),
        Value::Set(items) => {
            Value::Set(Rc::new(RefCell::new(items.borrow().iter().map(deep_copy).collect())))
        }
        Value::Map(pairs) => Value::Map(Rc::new(RefCell::new(
            pairs.borrow().iter().map(|(k, v)| (deep_copy(k), deep_copy(v))).collect(),
        ))),
        Value::Object(obj) => {
            let o = obj.borrow();
            Value::Object(Rc::new(RefCell::new(ObjectData {
                class_id: o.class_id,
                class_name: o.class_name.clone(),
                attrs: o.attrs.iter().map(|(n, v)| (n.clone(), deep_copy(v))).collect(),
            })))
        }
        other => other.clone(),
    }
}

/// Binary arithmetic operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Mod,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::FloorDiv => "//",
            BinOp::Mod => "%",
        }
    }

    pub const ALL: [BinOp; 6] =
        [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::FloorDiv, BinOp::Mod];
}

/// Comparison operators; the full set the language and the branch distances
/// support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    In,
    NotIn,
    Is,
    IsNot,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::In => "in",
            CmpOp::NotIn => "not in",
            CmpOp::Is => "is",
            CmpOp::IsNot => "is not",
        }
    }

    /// The six value comparisons that may replace each other under mutation.
    pub const VALUE_OPS: [CmpOp; 6] =
        [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];
}

fn type_error(op: &str, a: &Value, b: &Value) -> DynError {
    DynError::new(
        "TypeError",
        format!("unsupported operand kinds for {}: {} and {}", op, a.kind_name(), b.kind_name()),
    )
}

fn int_like(v: &Value) -> Option<i64> {
    match v {
        Value::Int(i) => Some(*i),
        Value::Bool(b) => Some(if *b { 1 } else { 0 }),
        _ => None,
    }
}

/// Applies a binary arithmetic operator with Python-flavoured semantics:
/// `/` always yields a Float, `//` and `%` follow floored division, `+`
/// concatenates sequences, and `*` repeats strings and bytes.
pub fn binary_op(op: BinOp, a: &Value, b: &Value) -> DynResult<Value> {
    if let (Some(x), Some(y)) = (int_like(a), int_like(b)) {
        return int_binary(op, x, y);
    }
    if a.is_numeric() && b.is_numeric() {
        let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
        return float_binary(op, x, y);
    }
    match (op, a, b) {
        (BinOp::Add, Value::Str(x), Value::Str(y)) => {
            Ok(Value::str(format!("{}{}", x, y)))
        }
        (BinOp::Add, Value::Bytes(x), Value::Bytes(y)) => {
            let mut out = x.to_vec();
            out.extend_from_slice(y);
            Ok(Value::Bytes(Rc::from(out)))
        }
        (BinOp::Add, Value::List(x), Value::List(y)) => {
            let mut out = x.borrow().clone();
            out.extend(y.borrow().iter().cloned());
            Ok(Value::list(out))
        }
        (BinOp::Add, Value::Tuple(x), Value::Tuple(y)) => {
            let mut out = x.as_ref().clone();
            out.extend(y.iter().cloned());
            Ok(Value::tuple(out))
        }
        (BinOp::Mul, Value::Str(s), n) | (BinOp::Mul, n, Value::Str(s)) => {
            let k = int_like(n).ok_or_else(|| type_error("*", a, b))?;
            Ok(Value::str(s.repeat(k.max(0) as usize)))
        }
        (BinOp::Mul, Value::Bytes(s), n) | (BinOp::Mul, n, Value::Bytes(s)) => {
            let k = int_like(n).ok_or_else(|| type_error("*", a, b))?;
            Ok(Value::Bytes(Rc::from(s.repeat(k.max(0) as usize))))
        }
        _ => Err(type_error(op.symbol(), a, b)),
    }
}

fn int_binary(op: BinOp, x: i64, y: i64) -> DynResult<Value> {
    let div_zero = || DynError::new("ZeroDivisionError", "division by zero");
    match op {
        BinOp::Add => Ok(x.checked_add(y).map(Value::Int).unwrap_or(Value::Float(x as f64 + y as f64))),
        BinOp::Sub => Ok(x.checked_sub(y).map(Value::Int).unwrap_or(Value::Float(x as f64 - y as f64))),
        BinOp::Mul => Ok(x.checked_mul(y).map(Value::Int).unwrap_or(Value::Float(x as f64 * y as f64))),
        BinOp::Div => {
            if y == 0 {
                Err(div_zero())
            } else {
                Ok(Value::Float(x as f64 / y as f64))
            }
        }
        BinOp::FloorDiv => {
            if y == 0 {
                Err(div_zero())
            } else {
                Ok(Value::Int(floor_div(x, y)))
            }
        }
        BinOp::Mod => {
            if y == 0 {
                Err(div_zero())
            } else {
                Ok(Value::Int(x - floor_div(x, y) * y))
            }
        }
    }
}

/// Floored integer division (rounds toward negative infinity).
fn floor_div(x: i64, y: i64) -> i64 {
    let q = x.wrapping_div(y);
    let r = x.wrapping_rem(y);
    if (r != 0) && ((r < 0) != (y < 0)) {
        q - 1
    } else {
        q
    }
}

fn float_binary(op: BinOp, x: f64, y: f64) -> DynResult<Value> {
    let div_zero = || DynError::new("ZeroDivisionError", "division by zero");
    match op {
        BinOp::Add => Ok(Value::Float(x + y)),
        BinOp::Sub => Ok(Value::Float(x - y)),
        BinOp::Mul => Ok(Value::Float(x * y)),
        BinOp::Div => {
            if y == 0.0 {
                Err(div_zero())
            } else {
                Ok(Value::Float(x / y))
            }
        }
        BinOp::FloorDiv => {
            if y == 0.0 {
                Err(div_zero())
            } else {
                Ok(Value::Float((x / y).floor()))
            }
        }
        BinOp::Mod => {
            if y == 0.0 {
                Err(div_zero())
            } else {
                Ok(Value::Float(x - (x / y).floor() * y))
            }
        }
    }
}

pub fn negate(v: &Value) -> DynResult<Value> {
    match v {
        Value::Int(i) => Ok(i.checked_neg().map(Value::Int).unwrap_or(Value::Float(-(*i as f64)))),
        Value::Float(f) => Ok(Value::Float(-f)),
        Value::Bool(b) => Ok(Value::Int(if *b { -1 } else { 0 })),
        _ => Err(DynError::new(
            "TypeError",
            format!("bad operand kind for unary -: {}", v.kind_name()),
        )),
    }
}

fn ordering_error(op: CmpOp, a: &Value, b: &Value) -> DynError {
    DynError::new(
        "TypeError",
        format!(
            "'{}' not supported between instances of {} and {}",
            op.symbol(),
            a.kind_name(),
            b.kind_name()
        ),
    )
}

/// Evaluates a comparison, raising `TypeError` for unordered kind pairs and
/// for membership tests against non-containers.
pub fn compare(op: CmpOp, a: &Value, b: &Value) -> DynResult<bool> {
    match op {
        CmpOp::Eq => Ok(value_eq(a, b)),
        CmpOp::Ne => Ok(!value_eq(a, b)),
        CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge => {
            let ord = match (a, b) {
                (Value::Str(x), Value::Str(y)) => x.as_ref().partial_cmp(y.as_ref()),
                (Value::Bytes(x), Value::Bytes(y)) => x.as_ref().partial_cmp(y.as_ref()),
                _ => {
                    if a.is_numeric() && b.is_numeric() {
                        a.as_f64().unwrap().partial_cmp(&b.as_f64().unwrap())
                    } else {
                        return Err(ordering_error(op, a, b));
                    }
                }
            };
            let ord = match ord {
                Some(o) => o,
                // NaN involved: every ordering comparison is false.
                None => return Ok(false),
            };
            Ok(match op {
                CmpOp::Lt => ord.is_lt(),
                CmpOp::Le => ord.is_le(),
                CmpOp::Gt => ord.is_gt(),
                CmpOp::Ge => ord.is_ge(),
                _ => unreachable!(),
            })
        }
        CmpOp::In => contains(b, a),
        CmpOp::NotIn => contains(b, a).map(|r| !r),
        CmpOp::Is => Ok(identical(a, b)),
        CmpOp::IsNot => Ok(!identical(a, b)),
    }
}

/// Membership: maps test key membership, strings test substring containment.
pub fn contains(container: &Value, item: &Value) -> DynResult<bool> {
    match container {
        Value::List(v) => Ok(v.borrow().iter().any(|e| value_eq(e, item))),
        Value::Tuple(v) => Ok(v.iter().any(|e| value_eq(e, item))),
        Value::Set(v) => Ok(v.borrow().iter().any(|e| value_eq(e, item))),
        Value::Map(v) => Ok(v.borrow().iter().any(|(k, _)| value_eq(k, item))),
        Value::Str(s) => match item {
            Value::Str(sub) => Ok(s.contains(sub.as_ref())),
            _ => Err(DynError::new(
                "TypeError",
                format!("'in <Str>' requires Str operand, not {}", item.kind_name()),
            )),
        },
        Value::Bytes(bs) => match item {
            Value::Bytes(sub) => {
                Ok(sub.is_empty() || bs.windows(sub.len().max(1)).any(|w| w == sub.as_ref()))
            }
            _ => Err(DynError::new(
                "TypeError",
                format!("'in <Bytes>' requires Bytes operand, not {}", item.kind_name()),
            )),
        },
        _ => Err(DynError::new(
            "TypeError",
            format!("argument of kind {} is not a container", container.kind_name()),
        )),
    }
}

/// Identity: reference kinds compare by pointer, immutable kinds fall back
/// to structural equality.
pub fn identical(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::List(x), Value::List(y)) => Rc::ptr_eq(x, y),
        (Value::Set(x), Value::Set(y)) => Rc::ptr_eq(x, y),
        (Value::Map(x), Value::Map(y)) => Rc::ptr_eq(x, y),
        (Value::Object(x), Value::Object(y)) => Rc::ptr_eq(x, y),
        (Value::List(_) | Value::Set(_) | Value::Map(_) | Value::Object(_), _)
        | (_, Value::List(_) | Value::Set(_) | Value::Map(_) | Value::Object(_)) => false,
        _ => value_eq(a, b),
    }
}
