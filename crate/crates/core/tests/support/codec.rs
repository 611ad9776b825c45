//! Codec and ID checks shared by the property tests and the acceptance run.
#![allow(dead_code)]

use fbcomm::commstack::{b64_decode, b64_encode, ber_decode, ber_encode, parse_comm_id, WireFrame};
use fbcomm::value::Value;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

pub fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        any::<bool>().prop_map(Value::Bool),
        any::<i8>().prop_map(Value::Sint),
        any::<i16>().prop_map(Value::Int),
        any::<i32>().prop_map(Value::Dint),
        ".{0,40}".prop_map(Value::String),
        proptest::collection::vec(any::<char>(), 0..300).prop_map(|c| Value::String(c.into_iter().collect())),
    ]
}

pub fn value_list() -> impl Strategy<Value = Vec<Value>> {
    proptest::collection::vec(value(), 0..12)
}

/// Sizes the encoding must have, computed from the tag/length layout.
pub fn encoded_len(values: &[Value]) -> usize {
    values
        .iter()
        .map(|v| match v {
            Value::Bool(_) => 1,
            Value::Sint(_) => 2,
            Value::Int(_) => 3,
            Value::Dint(_) => 5,
            Value::String(s) => 3 + s.len(),
        })
        .sum()
}

pub fn frame() -> impl Strategy<Value = Vec<u8>> {
    prop_oneof![
        4 => proptest::collection::vec(any::<u8>(), 0..512),
        1 => proptest::collection::vec(any::<u8>(), 0..=65536),
    ]
}

pub const RFC4648_VECTORS: [(&str, &str); 7] = [
    ("", ""),
    ("f", "Zg=="),
    ("fo", "Zm8="),
    ("foo", "Zm9v"),
    ("foob", "Zm9vYg=="),
    ("fooba", "Zm9vYmE="),
    ("foobar", "Zm9vYmFy"),
];

pub const PRINTED_IDS: [(&str, &[(&str, usize)]); 6] = [
    ("fbdk[].ip[192.168.20.1:61499]", &[("fbdk", 0), ("ip", 2)]),
    ("fbdk[].xmpp[encryption:publisher full JID:password:XMPP server IP address]", &[("fbdk", 0), ("xmpp", 4)]),
    (
        "fbdk[].xmpp[encryption:subscriber full JID:password:XMPP server IP address:publisher full JID]",
        &[("fbdk", 0), ("xmpp", 5)],
    ),
    ("fbdk[].xmpp[1:cemdsm@localhost/res:***: 192.168.1.210:netop@localhost/res]", &[("fbdk", 0), ("xmpp", 5)]),
    ("xmpp[encryption:client full JID:password:XMPP server IP address:server full JID]", &[("xmpp", 5)]),
    ("xmpp[encryption:server full JID:password:XMPP server IP address:client full JID]", &[("xmpp", 5)]),
];

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

pub fn check_ber(cases: u32) -> Result<(), String> {
    run(cases, value_list(), |values| {
        let frame = ber_encode(&values).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(frame.as_bytes().len(), encoded_len(&values));
        prop_assert_eq!(ber_decode(&frame).map_err(|e| TestCaseError::fail(e.to_string()))?, values);
        Ok(())
    })
}

pub fn check_base64(cases: u32) -> Result<(), String> {
    run(cases, frame(), |bytes| {
        let text = b64_encode(&WireFrame::new(bytes.clone()));
        prop_assert_eq!(text.len(), bytes.len().div_ceil(3) * 4);
        let back = b64_decode(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(back.as_bytes(), &bytes[..]);
        Ok(())
    })
}

pub fn check_rfc4648() -> Result<(), String> {
    for (plain, encoded) in RFC4648_VECTORS {
        let got = b64_encode(&WireFrame::new(plain.as_bytes().to_vec()));
        if got != encoded {
            return Err(format!("encode {plain:?}: {got:?} != {encoded:?}"));
        }
        match b64_decode(encoded) {
            Ok(f) if f.as_bytes() == plain.as_bytes() => {}
            other => return Err(format!("decode {encoded:?}: {other:?}")),
        }
    }
    Ok(())
}

pub fn check_printed_ids() -> Result<(), String> {
    for (text, shape) in PRINTED_IDS {
        let id = parse_comm_id(text).map_err(|e| format!("{text}: {e}"))?;
        let got: Vec<(&str, usize)> = id.layers().iter().map(|l| (l.name.as_str(), l.params.len())).collect();
        if got != shape {
            return Err(format!("{text}: layers {got:?}"));
        }
        if id.to_string() != text {
            return Err(format!("{text}: reserialized as {id}"));
        }
    }
    Ok(())
}
