//! Deep, immutable snapshots of runtime values. A snapshot taken after an
//! execution cannot be changed by anything the interpreter does later, so
//! two snapshots of the same variable from different runs compare
//! meaningfully. Sets and maps are stored in a canonical order to make the
//! comparison insensitive to insertion history.

use std::cmp::Ordering;

use crate::minidyn::Value;

/// Object graphs can be cyclic; deeper structure than this is recorded as
/// opaque rather than followed.
const SNAPSHOT_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum SnapshotValue {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Bytes(Vec<u8>),
    None,
    List(Vec<SnapshotValue>),
    Tuple(Vec<SnapshotValue>),
    Set(Vec<SnapshotValue>),
    Map(Vec<(SnapshotValue, SnapshotValue)>),
    Object { class: String, attrs: Vec<(String, SnapshotValue)> },
    /// Structure beyond the depth bound. Compares equal to itself, which
    /// errs toward keeping an assertion candidate; candidates never assert
    /// on opaque content directly.
    Opaque,
}

pub fn snapshot(value: &Value) -> SnapshotValue {
    snap(value, SNAPSHOT_DEPTH)
}

fn snap(value: &Value, depth: usize) -> SnapshotValue {
    if depth == 0 {
        return SnapshotValue::Opaque;
    }
    match value {
        Value::Int(v) => SnapshotValue::Int(*v),
        Value::Float(v) => SnapshotValue::Float(*v),
        Value::Bool(v) => SnapshotValue::Bool(*v),
        Value::Str(s) => SnapshotValue::Str(s.to_string()),
        Value::Bytes(b) => SnapshotValue::Bytes(b.to_vec()),
        Value::None => SnapshotValue::None,
        Value::List(items) => {
            SnapshotValue::List(items.borrow().iter().map(|v| snap(v, depth - 1)).collect())
        }
        Value::Tuple(items) => {
            SnapshotValue::Tuple(items.iter().map(|v| snap(v, depth - 1)).collect())
        }
        Value::Set(items) => {
            let mut out: Vec<SnapshotValue> =
                items.borrow().iter().map(|v| snap(v, depth - 1)).collect();
            out.sort_by(cmp_snapshot);
            SnapshotValue::Set(out)
        }
        Value::Map(pairs) => {
            let mut out: Vec<(SnapshotValue, SnapshotValue)> = pairs
                .borrow()
                .iter()
                .map(|(k, v)| (snap(k, depth - 1), snap(v, depth - 1)))
                .collect();
            out.sort_by(|a, b| cmp_snapshot(&a.0, &b.0));
            SnapshotValue::Map(out)
        }
        Value::Object(data) => {
            let data = data.borrow();
            SnapshotValue::Object {
                class: data.class_name.clone(),
                attrs: data
                    .attrs
                    .iter()
                    .map(|(name, v)| (name.clone(), snap(v, depth - 1)))
                    .collect(),
            }
        }
    }
}

/// Whether a snapshot consists only of builtin values, so an equality
/// assertion can spell the expected value out as a literal.
pub fn is_assertable(s: &SnapshotValue) -> bool {
    match s {
        SnapshotValue::Int(_)
        | SnapshotValue::Float(_)
        | SnapshotValue::Bool(_)
        | SnapshotValue::Str(_)
        | SnapshotValue::Bytes(_)
        | SnapshotValue::None => true,
        SnapshotValue::List(items) | SnapshotValue::Tuple(items) | SnapshotValue::Set(items) => {
            items.iter().all(is_assertable)
        }
        SnapshotValue::Map(pairs) => {
            pairs.iter().all(|(k, v)| is_assertable(k) && is_assertable(v))
        }
        SnapshotValue::Object { .. } | SnapshotValue::Opaque => false,
    }
}

fn kind_rank(s: &SnapshotValue) -> u8 {
    match s {
        SnapshotValue::Int(_) => 0,
        SnapshotValue::Float(_) => 1,
        SnapshotValue::Bool(_) => 2,
        SnapshotValue::Str(_) => 3,
        SnapshotValue::Bytes(_) => 4,
        SnapshotValue::None => 5,
        SnapshotValue::List(_) => 6,
        SnapshotValue::Tuple(_) => 7,
        SnapshotValue::Set(_) => 8,
        SnapshotValue::Map(_) => 9,
        SnapshotValue::Object { .. } => 10,
        SnapshotValue::Opaque => 11,
    }
}

/// Total order used only for canonicalisation; it has no semantic meaning.
pub fn cmp_snapshot(a: &SnapshotValue, b: &SnapshotValue) -> Ordering {
    use SnapshotValue::*;
    match (a, b) {
        (Int(x), Int(y)) => x.cmp(y),
        (Float(x), Float(y)) => x.total_cmp(y),
        (Bool(x), Bool(y)) => x.cmp(y),
        (Str(x), Str(y)) => x.cmp(y),
        (Bytes(x), Bytes(y)) => x.cmp(y),
        (None, None) => Ordering::Equal,
        (List(x), List(y)) | (Tuple(x), Tuple(y)) | (Set(x), Set(y)) => cmp_seq(x, y),
        (Map(x), Map(y)) => {
            for (pa, pb) in x.iter().zip(y.iter()) {
                let c = cmp_snapshot(&pa.0, &pb.0).then_with(|| cmp_snapshot(&pa.1, &pb.1));
                if c != Ordering::Equal {
                    return c;
                }
            }
            x.len().cmp(&y.len())
        }
        (Object { class: ca, attrs: aa }, Object { class: cb, attrs: ab }) => {
            ca.cmp(cb).then_with(|| {
                for (pa, pb) in aa.iter().zip(ab.iter()) {
                    let c = pa.0.cmp(&pb.0).then_with(|| cmp_snapshot(&pa.1, &pb.1));
                    if c != Ordering::Equal {
                        return c;
                    }
                }
                aa.len().cmp(&ab.len())
            })
        }
        (Opaque, Opaque) => Ordering::Equal,
        _ => kind_rank(a).cmp(&kind_rank(b)),
    }
}

fn cmp_seq(a: &[SnapshotValue], b: &[SnapshotValue]) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let c = cmp_snapshot(x, y);
        if c != Ordering::Equal {
            return c;
        }
    }
    a.len().cmp(&b.len())
}
