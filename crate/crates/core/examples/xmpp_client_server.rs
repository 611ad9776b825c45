//! Request/response over the bundled XMPP broker, run in-process.
//!
//! The server doubles every DINT it receives.

use std::sync::Arc;
use std::time::Duration;

use fbcomm::appcli::ACCOUNTS;
use fbcomm::commstack::{build_stack, parse_comm_id, EndpointHandler, Inbound, Pattern, StackOptions};
use fbcomm::transports::ByteMeter;
use fbcomm::value::Value;
use fbcomm::xmppmini::{broker_start, parse_accounts};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let broker = broker_start(0, parse_accounts(ACCOUNTS)?)?;
    let port = broker.port();
    let server_id = parse_comm_id(&format!(
        "fbdk[].xmpp[0:cemdsm@localhost/res:cemdsm-secret:127.0.0.1:display@localhost/res:{port}]"
    ))?;
    let client_id = parse_comm_id(&format!(
        "fbdk[].xmpp[0:display@localhost/res:display-secret:127.0.0.1:cemdsm@localhost/res:{port}]"
    ))?;
    let doubler = EndpointHandler::Responder(Arc::new(|inbound| match inbound {
        Inbound::Values(values) => Some(
            values
                .into_iter()
                .map(|v| match v {
                    Value::Dint(n) => Value::Dint(n.saturating_mul(2)),
                    other => other,
                })
                .collect(),
        ),
        Inbound::Malformed(_) => None,
    }));
    let _server = build_stack(&server_id, Pattern::Server, doubler, &StackOptions::default())?;
    let meter = Arc::new(ByteMeter::new());
    let options = StackOptions { meter: Arc::clone(&meter), ..StackOptions::default() };
    let client = build_stack(&client_id, Pattern::Client, EndpointHandler::None, &options)?;
    for n in [1, 21, -4] {
        let reply = client.request(&[Value::Dint(n)], Duration::from_secs(2))?;
        println!("{n} -> {reply:?}");
    }
    println!("client {:?}", meter.snapshot());
    println!("broker {:?}", broker.stats());
    Ok(())
}
