//! Dynamically typed scalar values and their comparison semantics.
//!
//! Queries compare values with `=`, `!=`, `<`, `<=`, `>`, `>=`. The rules:
//!
//! * `Null` compared with anything (including `Null`) via any comparator is
//!   false.
//! * `Int` and `Float` coerce to a numeric comparison.
//! * A `Str` compared against a `Timestamp` is coerced to a timestamp when it
//!   parses as RFC 3339 or `MM/DD/YYYY`.
//! * Any other cross-type `=` is false and `!=` is true; cross-type ordering
//!   comparisons are errors.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use chrono::{DateTime, NaiveDate, SecondsFormat, TimeZone, Utc};
use thiserror::Error;

/// A scalar field value. Timestamps are UTC with microsecond precision.
#[derive(Debug, Clone)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Timestamp(DateTime<Utc>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValueError {
    #[error("cannot order {0} against {1}")]
    Incomparable(&'static str, &'static str),
    #[error("arithmetic requires numeric operands, got {0} and {1}")]
    NonNumeric(&'static str, &'static str),
    #[error("invalid timestamp {0:?}")]
    BadTimestamp(String),
}

/// Comparison operators shared by the query language and inline filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        };
        f.write_str(s)
    }
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "string",
            Value::Timestamp(_) => "timestamp",
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Truncate a timestamp to microsecond precision.
    pub fn timestamp(ts: DateTime<Utc>) -> Value {
        let micros = ts.timestamp_micros();
        Value::Timestamp(Utc.timestamp_micros(micros).unwrap())
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Null, Value::Null) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => norm_bits(*a) == norm_bits(*b),
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Timestamp(a), Value::Timestamp(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Value::Null => {}
            Value::Bool(b) => b.hash(state),
            Value::Int(i) => i.hash(state),
            Value::Float(f) => norm_bits(*f).hash(state),
            Value::Str(s) => s.hash(state),
            Value::Timestamp(t) => t.timestamp_micros().hash(state),
        }
    }
}

fn norm_bits(f: f64) -> u64 {
    // fold -0.0 onto 0.0 so Eq and Hash agree
    if f == 0.0 {
        0f64.to_bits()
    } else {
        f.to_bits()
    }
}

fn class_rank(v: &Value) -> u8 {
    match v {
        Value::Null => 0,
        Value::Bool(_) => 1,
        Value::Int(_) | Value::Float(_) => 2,
        Value::Str(_) => 3,
        Value::Timestamp(_) => 4,
    }
}

/// Total order used by `sort by`: Null < Bool < numeric < Str < Timestamp,
/// with Int and Float merged into one numeric class. Int(1) and Float(1.0)
/// compare equal here, so sorting must be stable.
pub fn sort_cmp(a: &Value, b: &Value) -> Ordering {
    let (ra, rb) = (class_rank(a), class_rank(b));
    if ra != rb {
        return ra.cmp(&rb);
    }
    match (a, b) {
        (Value::Null, Value::Null) => Ordering::Equal,
        (Value::Bool(x), Value::Bool(y)) => x.cmp(y),
        (Value::Str(x), Value::Str(y)) => x.cmp(y),
        (Value::Timestamp(x), Value::Timestamp(y)) => x.cmp(y),
        _ => num_cmp(a, b),
    }
}

/// Strict total order consistent with `Eq`, used to canonicalize multisets:
/// like [`sort_cmp`] but numeric ties break on the type tag.
pub fn canon_cmp(a: &Value, b: &Value) -> Ordering {
    match sort_cmp(a, b) {
        Ordering::Equal => match (a, b) {
            (Value::Int(_), Value::Float(_)) => Ordering::Less,
            (Value::Float(_), Value::Int(_)) => Ordering::Greater,
            _ => Ordering::Equal,
        },
        ord => ord,
    }
}

fn num_cmp(a: &Value, b: &Value) -> Ordering {
    let fa = num_as_f64(a);
    let fb = num_as_f64(b);
    fa.partial_cmp(&fb).unwrap_or(Ordering::Equal)
}

fn num_as_f64(v: &Value) -> f64 {
    match v {
        Value::Int(i) => *i as f64,
        Value::Float(f) => *f,
        _ => unreachable!("num_as_f64 on non-numeric"),
    }
}

/// Parse the timestamp spellings accepted in comparisons: RFC 3339 or
/// `MM/DD/YYYY` (midnight UTC).
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(ts) = DateTime::parse_from_rfc3339(s) {
        let micros = ts.with_timezone(&Utc).timestamp_micros();
        return Some(Utc.timestamp_micros(micros).unwrap());
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%m/%d/%Y") {
        let dt = d.and_hms_opt(0, 0, 0).unwrap();
        return Some(Utc.from_utc_datetime(&dt));
    }
    None
}

/// Render a timestamp the way every output format does: RFC 3339, UTC,
/// fractional seconds only when nonzero.
pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    if ts.timestamp_subsec_micros() == 0 {
        ts.to_rfc3339_opts(SecondsFormat::Secs, true)
    } else {
        ts.to_rfc3339_opts(SecondsFormat::Micros, true)
    }
}

/// Evaluate `a op b` under the query comparison rules.
pub fn compare(op: CmpOp, a: &Value, b: &Value) -> Result<bool, ValueError> {
    if a.is_null() || b.is_null() {
        return Ok(false);
    }
    // numeric coercion
    let numeric = matches!(a, Value::Int(_) | Value::Float(_))
        && matches!(b, Value::Int(_) | Value::Float(_));
    if numeric {
        return Ok(apply_ord(op, num_cmp(a, b)));
    }
    // timestamp/string coercion
    let coerced;
    let (a, b) = match (a, b) {
        (Value::Timestamp(_), Value::Str(s)) => match parse_timestamp(s) {
            Some(ts) => {
                coerced = Value::Timestamp(ts);
                (a, &coerced)
            }
            None => return cross_type(op, a, b),
        },
        (Value::Str(s), Value::Timestamp(_)) => match parse_timestamp(s) {
            Some(ts) => {
                coerced = Value::Timestamp(ts);
                (&coerced, b)
            }
            None => return cross_type(op, a, b),
        },
        _ => (a, b),
    };
    if std::mem::discriminant(a) != std::mem::discriminant(b) {
        return cross_type(op, a, b);
    }
    let ord = match (a, b) {
        (Value::Bool(x), Value::Bool(y)) => x.cmp(y),
        (Value::Str(x), Value::Str(y)) => x.cmp(y),
        (Value::Timestamp(x), Value::Timestamp(y)) => x.cmp(y),
        _ => unreachable!(),
    };
    Ok(apply_ord(op, ord))
}

fn cross_type(op: CmpOp, a: &Value, b: &Value) -> Result<bool, ValueError> {
    match op {
        CmpOp::Eq => Ok(false),
        CmpOp::Ne => Ok(true),
        _ => Err(ValueError::Incomparable(a.type_name(), b.type_name())),
    }
}

fn apply_ord(op: CmpOp, ord: Ordering) -> bool {
    match op {
        CmpOp::Eq => ord == Ordering::Equal,
        CmpOp::Ne => ord != Ordering::Equal,
        CmpOp::Lt => ord == Ordering::Less,
        CmpOp::Le => ord != Ordering::Greater,
        CmpOp::Gt => ord == Ordering::Greater,
        CmpOp::Ge => ord != Ordering::Less,
    }
}

/// Arithmetic operators available in expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl fmt::Display for ArithOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        })
    }
}

/// Arithmetic over values. Null propagates; division by zero yields Null;
/// `Int op Int` stays Int except division, which always produces Float.
pub fn arith(op: ArithOp, a: &Value, b: &Value) -> Result<Value, ValueError> {
    if a.is_null() || b.is_null() {
        return Ok(Value::Null);
    }
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Ok(match op {
            ArithOp::Add => Value::Int(x.wrapping_add(*y)),
            ArithOp::Sub => Value::Int(x.wrapping_sub(*y)),
            ArithOp::Mul => Value::Int(x.wrapping_mul(*y)),
            ArithOp::Div => {
                if *y == 0 {
                    Value::Null
                } else {
                    Value::Float(*x as f64 / *y as f64)
                }
            }
        }),
        (Value::Int(_) | Value::Float(_), Value::Int(_) | Value::Float(_)) => {
            let (x, y) = (num_as_f64(a), num_as_f64(b));
            Ok(match op {
                ArithOp::Add => Value::Float(x + y),
                ArithOp::Sub => Value::Float(x - y),
                ArithOp::Mul => Value::Float(x * y),
                ArithOp::Div => {
                    if y == 0.0 {
                        Value::Null
                    } else {
                        Value::Float(x / y)
                    }
                }
            })
        }
        _ => Err(ValueError::NonNumeric(a.type_name(), b.type_name())),
    }
}

/// Absolute value; Null propagates.
pub fn abs(v: &Value) -> Result<Value, ValueError> {
    match v {
        Value::Null => Ok(Value::Null),
        Value::Int(i) => Ok(Value::Int(i.wrapping_abs())),
        Value::Float(f) => Ok(Value::Float(f.abs())),
        _ => Err(ValueError::NonNumeric(v.type_name(), v.type_name())),
    }
}

/// Unary negation; Null propagates.
pub fn neg(v: &Value) -> Result<Value, ValueError> {
    match v {
        Value::Null => Ok(Value::Null),
        Value::Int(i) => Ok(Value::Int(i.wrapping_neg())),
        Value::Float(f) => Ok(Value::Float(-f)),
        _ => Err(ValueError::NonNumeric(v.type_name(), v.type_name())),
    }
}

/// Canonical order over whole field maps, for multiset comparison.
pub fn canon_cmp_fields(a: &BTreeMap<String, Value>, b: &BTreeMap<String, Value>) -> Ordering {
    let mut ia = a.iter();
    let mut ib = b.iter();
    loop {
        match (ia.next(), ib.next()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some((ka, va)), Some((kb, vb))) => {
                let k = ka.cmp(kb);
                if k != Ordering::Equal {
                    return k;
                }
                let v = canon_cmp(va, vb);
                if v != Ordering::Equal {
                    return v;
                }
            }
        }
    }
}

/// JSON encoding shared by the storage layout and the CLI output formats.
/// Timestamps become RFC 3339 strings, so schemaless containers must not
/// store timestamp values (they would not round-trip).
pub fn value_to_json(v: &Value) -> serde_json::Value {
    match v {
        Value::Null => serde_json::Value::Null,
        Value::Bool(b) => serde_json::Value::Bool(*b),
        Value::Int(i) => serde_json::Value::from(*i),
        Value::Float(f) => serde_json::Number::from_f64(*f)
            .map(serde_json::Value::Number)
            .unwrap_or(serde_json::Value::Null),
        Value::Str(s) => serde_json::Value::String(s.clone()),
        Value::Timestamp(t) => serde_json::Value::String(format_timestamp(t)),
    }
}

/// Decode a JSON value without schema information (used for file records):
/// integers stay Int, other numbers become Float, strings stay Str.
pub fn value_from_json(v: &serde_json::Value) -> Option<Value> {
    match v {
        serde_json::Value::Null => Some(Value::Null),
        serde_json::Value::Bool(b) => Some(Value::Bool(*b)),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Some(Value::Int(i))
            } else {
                n.as_f64().filter(|f| f.is_finite()).map(Value::Float)
            }
        }
        serde_json::Value::String(s) => Some(Value::Str(s.clone())),
        _ => None,
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => Ok(()),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Str(s) => f.write_str(s),
            Value::Timestamp(t) => f.write_str(&format_timestamp(t)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> Value {
        Value::Timestamp(parse_timestamp(s).unwrap())
    }

    #[test]
    fn null_never_compares() {
        for op in [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge] {
            assert_eq!(compare(op, &Value::Null, &Value::Null), Ok(false));
            assert_eq!(compare(op, &Value::Int(1), &Value::Null), Ok(false));
            assert_eq!(compare(op, &Value::Null, &Value::Str("x".into())), Ok(false));
        }
    }

    #[test]
    fn int_float_coercion() {
        assert_eq!(compare(CmpOp::Eq, &Value::Int(1), &Value::Float(1.0)), Ok(true));
        assert_eq!(compare(CmpOp::Lt, &Value::Int(1), &Value::Float(1.5)), Ok(true));
        assert_eq!(compare(CmpOp::Ge, &Value::Float(2.0), &Value::Int(3)), Ok(false));
    }

    #[test]
    fn cross_type_eq_false_ne_true_order_errors() {
        let a = Value::Int(1);
        let b = Value::Str("1".into());
        assert_eq!(compare(CmpOp::Eq, &a, &b), Ok(false));
        assert_eq!(compare(CmpOp::Ne, &a, &b), Ok(true));
        assert!(matches!(compare(CmpOp::Lt, &a, &b), Err(ValueError::Incomparable(_, _))));
    }

    #[test]
    fn timestamp_string_coercion() {
        let t = ts("2015-03-15T10:00:00Z");
        assert_eq!(compare(CmpOp::Ge, &t, &Value::Str("01/01/2015".into())), Ok(true));
        assert_eq!(compare(CmpOp::Lt, &Value::Str("01/01/2015".into()), &t), Ok(true));
        // non-timestamp string against timestamp: = false, != true, order errors
        let junk = Value::Str("not a date".into());
        assert_eq!(compare(CmpOp::Eq, &t, &junk), Ok(false));
        assert_eq!(compare(CmpOp::Ne, &t, &junk), Ok(true));
        assert!(compare(CmpOp::Gt, &t, &junk).is_err());
    }

    // Truth table spanning every type pair, frozen by hand.
    #[test]
    fn comparison_truth_table() {
        use CmpOp::*;
        let cases: Vec<(Value, CmpOp, Value, Result<bool, ()>)> = vec![
            (Value::Bool(true), Eq, Value::Bool(true), Ok(true)),
            (Value::Bool(false), Lt, Value::Bool(true), Ok(true)),
            (Value::Bool(true), Eq, Value::Int(1), Ok(false)),
            (Value::Bool(true), Ne, Value::Int(1), Ok(true)),
            (Value::Bool(true), Lt, Value::Int(1), Err(())),
            (Value::Str("a".into()), Lt, Value::Str("b".into()), Ok(true)),
            (Value::Str("a".into()), Eq, Value::Float(1.0), Ok(false)),
            (Value::Str("a".into()), Gt, Value::Float(1.0), Err(())),
            (Value::Int(2), Le, Value::Int(2), Ok(true)),
            (Value::Float(2.5), Ne, Value::Int(2), Ok(true)),
            (ts("2015-01-01T00:00:00Z"), Eq, Value::Str("01/01/2015".into()), Ok(true)),
        ];
        for (a, op, b, want) in cases {
            let got = compare(op, &a, &b).map_err(|_| ());
            assert_eq!(got, want, "{a:?} {op} {b:?}");
        }
    }

    #[test]
    fn arithmetic_rules() {
        assert_eq!(arith(ArithOp::Add, &Value::Int(2), &Value::Int(3)), Ok(Value::Int(5)));
        assert_eq!(arith(ArithOp::Div, &Value::Int(3), &Value::Int(2)), Ok(Value::Float(1.5)));
        assert_eq!(arith(ArithOp::Div, &Value::Int(3), &Value::Int(0)), Ok(Value::Null));
        assert_eq!(arith(ArithOp::Mul, &Value::Null, &Value::Int(2)), Ok(Value::Null));
        assert!(arith(ArithOp::Add, &Value::Str("x".into()), &Value::Int(1)).is_err());
        assert_eq!(abs(&Value::Int(-4)), Ok(Value::Int(4)));
    }

    #[test]
    fn display_and_json_round_trip() {
        let t = ts("2015-03-15T10:00:00Z");
        assert_eq!(t.to_string(), "2015-03-15T10:00:00Z");
        for v in [Value::Int(7), Value::Float(1.25), Value::Bool(true), Value::Str("hi".into()), Value::Null] {
            let back = value_from_json(&value_to_json(&v)).unwrap();
            assert_eq!(back, v);
        }
    }
}
