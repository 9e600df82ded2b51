//! Branch distance functions. Each predicate evaluation yields a pair
//! (d_true, d_false): how far the operands are from making the predicate
//! true respectively false. Exactly one side of the pair is always zero,
//! and it is the side the interpreter actually took, so recorded traces
//! can never disagree with control flow.

use crate::minidyn::value::{compare, contains, identical, value_eq, CmpOp, Value};

/// Offset added to strict-inequality distances so that a == b is not
/// mistaken for a < b.
pub const K: f64 = 1.0;

const INF: f64 = f64::INFINITY;

/// Distance pair for a comparison predicate `lhs op rhs`. Total: kind
/// combinations the runtime would reject evaluate as "false branch taken
/// at distance zero", matching the interpreter, which never records a
/// distance for a raising comparison anyway.
pub fn comparison_distances(op: CmpOp, lhs: &Value, rhs: &Value) -> (f64, f64) {
    match op {
        CmpOp::Eq => {
            if value_eq(lhs, rhs) {
                (0.0, K)
            } else {
                (eq_distance(lhs, rhs), 0.0)
            }
        }
        CmpOp::Ne => {
            if value_eq(lhs, rhs) {
                (K, 0.0)
            } else {
                (0.0, eq_distance(lhs, rhs))
            }
        }
        CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge => ordered_distances(op, lhs, rhs),
        CmpOp::In => match contains(rhs, lhs) {
            Ok(true) => (0.0, K),
            Ok(false) => (membership_distance(lhs, rhs), 0.0),
            Err(_) => (INF, 0.0),
        },
        CmpOp::NotIn => match contains(rhs, lhs) {
            Ok(true) => (K, 0.0),
            Ok(false) => (0.0, membership_distance(lhs, rhs)),
            Err(_) => (0.0, INF),
        },
        CmpOp::Is => {
            if identical(lhs, rhs) {
                (0.0, K)
            } else {
                (K, 0.0)
            }
        }
        CmpOp::IsNot => {
            if identical(lhs, rhs) {
                (K, 0.0)
            } else {
                (0.0, K)
            }
        }
    }
}

/// Distance pair for a bare truthiness predicate `if v:`.
pub fn truthiness_distances(v: &Value) -> (f64, f64) {
    if !v.is_truthy() {
        return (K, 0.0);
    }
    let d_false = if let Some(n) = v.len() {
        n as f64
    } else if v.is_numeric() {
        let x = v.as_f64().unwrap();
        if x.is_nan() {
            INF
        } else {
            x.abs()
        }
    } else {
        INF
    };
    (0.0, d_false)
}

/// How far `a` is from comparing equal to `b`, given that it does not.
/// Numbers use the absolute difference, text uses edit distance, any other
/// pairing cannot be bridged by a gradual change.
fn eq_distance(a: &Value, b: &Value) -> f64 {
    if a.is_numeric() && b.is_numeric() {
        let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
        if x.is_nan() || y.is_nan() {
            return INF;
        }
        return (x - y).abs();
    }
    match (a, b) {
        (Value::Str(x), Value::Str(y)) => {
            let xs: Vec<char> = x.chars().collect();
            let ys: Vec<char> = y.chars().collect();
            levenshtein(&xs, &ys) as f64
        }
        (Value::Bytes(x), Value::Bytes(y)) => levenshtein(x, y) as f64,
        _ => INF,
    }
}

fn ordered_distances(op: CmpOp, lhs: &Value, rhs: &Value) -> (f64, f64) {
    if lhs.is_numeric() && rhs.is_numeric() {
        let (a, b) = (lhs.as_f64().unwrap(), rhs.as_f64().unwrap());
        if !a.is_nan() && !b.is_nan() {
            return match op {
                CmpOp::Lt => {
                    if a < b {
                        (0.0, b - a + K)
                    } else {
                        (a - b + K, 0.0)
                    }
                }
                CmpOp::Le => {
                    if a <= b {
                        (0.0, b - a + K)
                    } else {
                        (a - b + K, 0.0)
                    }
                }
                CmpOp::Gt => {
                    if a > b {
                        (0.0, a - b + K)
                    } else {
                        (b - a + K, 0.0)
                    }
                }
                CmpOp::Ge => {
                    if a >= b {
                        (0.0, a - b + K)
                    } else {
                        (b - a + K, 0.0)
                    }
                }
                _ => unreachable!(),
            };
        }
    }
    // Strings and bytes are ordered but have no gradient; NaN operands take
    // the branch the runtime comparison takes (always the false one).
    match compare(op, lhs, rhs) {
        Ok(true) => (0.0, INF),
        Ok(false) => (INF, 0.0),
        // The runtime rejects this comparison, so no branch is ever taken
        // and the pair only has to honor operator complementarity.
        Err(_) => match op {
            CmpOp::Lt | CmpOp::Le => (INF, 0.0),
            _ => (0.0, INF),
        },
    }
}

/// Minimal equality distance from `item` to any element of `container`,
/// given that it is not a member. Maps measure against their keys, text
/// against its single-character slices. Empty containers give ∞.
fn membership_distance(item: &Value, container: &Value) -> f64 {
    let mut best = INF;
    let mut consider = |e: &Value| {
        let d = if value_eq(item, e) { 0.0 } else { eq_distance(item, e) };
        if d < best {
            best = d;
        }
    };
    match container {
        Value::List(v) => v.borrow().iter().for_each(&mut consider),
        Value::Tuple(v) => v.iter().for_each(&mut consider),
        Value::Set(v) => v.borrow().iter().for_each(&mut consider),
        Value::Map(v) => v.borrow().iter().for_each(|(k, _)| consider(k)),
        Value::Str(s) => {
            for c in s.chars() {
                consider(&Value::str(c.to_string()));
            }
        }
        Value::Bytes(bs) => {
            for b in bs.iter() {
                consider(&Value::bytes([*b]));
            }
        }
        _ => {}
    }
    best
}

/// Edit distance over arbitrary symbol slices, two-row dynamic program.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
