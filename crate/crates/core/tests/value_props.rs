//! Property tests over value comparison: `<` is transitive and `=` is an
//! equivalence on comparable types, checked with random triples.

use proptest::prelude::*;
use vquel_core::value::{compare, sort_cmp, CmpOp};
use vquel_core::Value;

fn comparable_pair() -> impl Strategy<Value = (Value, Value)> {
    prop_oneof![
        (any::<i64>(), any::<i64>()).prop_map(|(a, b)| (Value::Int(a), Value::Int(b))),
        ((-1e12f64..1e12), (-1e12f64..1e12)).prop_map(|(a, b)| (Value::Float(a), Value::Float(b))),
        (any::<i64>(), -1e12f64..1e12).prop_map(|(a, b)| (Value::Int(a), Value::Float(b))),
        ("[a-z]{0,6}", "[a-z]{0,6}").prop_map(|(a, b)| (Value::Str(a), Value::Str(b))),
    ]
}

fn comparable_triple() -> impl Strategy<Value = (Value, Value, Value)> {
    prop_oneof![
        (any::<i64>(), any::<i64>(), any::<i64>())
            .prop_map(|(a, b, c)| (Value::Int(a), Value::Int(b), Value::Int(c))),
        ((-1e9f64..1e9), any::<i32>(), (-1e9f64..1e9)).prop_map(|(a, b, c)| {
            (Value::Float(a), Value::Int(b as i64), Value::Float(c))
        }),
        ("[a-z]{0,6}", "[a-z]{0,6}", "[a-z]{0,6}")
            .prop_map(|(a, b, c)| (Value::Str(a), Value::Str(b), Value::Str(c))),
    ]
}

proptest! {
    #[test]
    fn lt_is_transitive((a, b, c) in comparable_triple()) {
        let ab = compare(CmpOp::Lt, &a, &b).unwrap();
        let bc = compare(CmpOp::Lt, &b, &c).unwrap();
        if ab && bc {
            prop_assert!(compare(CmpOp::Lt, &a, &c).unwrap());
        }
    }

    #[test]
    fn eq_is_symmetric_and_consistent((a, b) in comparable_pair()) {
        let ab = compare(CmpOp::Eq, &a, &b).unwrap();
        let ba = compare(CmpOp::Eq, &b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(compare(CmpOp::Ne, &a, &b).unwrap(), !ab);
        // reflexivity
        prop_assert!(compare(CmpOp::Eq, &a, &a).unwrap());
        // trichotomy on comparable types
        let lt = compare(CmpOp::Lt, &a, &b).unwrap();
        let gt = compare(CmpOp::Gt, &a, &b).unwrap();
        prop_assert_eq!(ab as u8 + lt as u8 + gt as u8, 1);
    }

    #[test]
    fn sort_order_is_total((a, b) in comparable_pair()) {
        let ord = sort_cmp(&a, &b);
        prop_assert_eq!(ord.reverse(), sort_cmp(&b, &a));
    }
}
