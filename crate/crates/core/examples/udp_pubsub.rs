//! A publisher and a subscriber sharing a multicast group on loopback.

use std::sync::mpsc;
use std::sync::Arc;
use std::time::Duration;

use fbcomm::commstack::{build_stack, parse_comm_id, EndpointHandler, Inbound, Pattern, StackOptions};
use fbcomm::transports::tcp::free_local_port;
use fbcomm::value::Value;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let id = parse_comm_id(&format!("fbdk[].ip[239.0.0.1:{}]", free_local_port()?))?;
    let (tx, rx) = mpsc::channel();
    let handler = EndpointHandler::Indication(Arc::new(move |inbound| {
        let _ = tx.send(inbound);
    }));
    let options = StackOptions::default();
    let _subscriber = build_stack(&id, Pattern::Subscribe, handler, &options)?;
    let publisher = build_stack(&id, Pattern::Publish, EndpointHandler::None, &options)?;
    for i in 0..3 {
        publisher.publish(&[Value::Bool(i % 2 == 0), Value::Dint(i)])?;
        match rx.recv_timeout(Duration::from_secs(1)) {
            Ok(Inbound::Values(values)) => println!("received {values:?}"),
            Ok(Inbound::Malformed(e)) => println!("malformed frame: {e}"),
            Err(_) => println!("nothing received"),
        }
    }
    println!("both endpoints {:?}", options.meter.snapshot());
    Ok(())
}
