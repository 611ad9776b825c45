//! Encodes a value list to BER, bridges it to Base64 and back.

use fbcomm::commstack::{b64_decode, b64_encode, ber_decode, ber_encode};
use fbcomm::value::Value;

fn main() {
    let values =
        vec![Value::Bool(true), Value::Sint(-5), Value::Int(1000), Value::Dint(-70_000), Value::String("netop".into())];
    let frame = ber_encode(&values).expect("all values fit");
    let hex: Vec<String> = frame.as_bytes().iter().map(|b| format!("{b:02x}")).collect();
    println!("values  {values:?}");
    println!("ber     {}", hex.join(" "));
    let text = b64_encode(&frame);
    println!("base64  {text}");
    let back = ber_decode(&b64_decode(&text).expect("own output")).expect("own output");
    assert_eq!(back, values);
    println!("decoded {back:?}");
}
