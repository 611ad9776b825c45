use std::net::UdpSocket;
use std::time::{Duration, Instant};

use fbcomm::appcli::{parse_netdef, ACCOUNTS};
use fbcomm::fbcore::{instantiate_network, FbNetwork, FiredStep, ResourceRuntime, RuntimeOptions};
use fbcomm::transports::tcp::free_local_port;
use fbcomm::value::Value;
use fbcomm::xmppmini::{broker_start, parse_accounts, Broker};

fn runtime(fbs: &str, events: &str, data: &str) -> ResourceRuntime {
    let text = format!("[devices]\nname=d host=127.0.0.1\n[fbs]\n{fbs}\n[events]\n{events}\n[data]\n{data}\n");
    let doc = parse_netdef(&text).unwrap();
    let options = RuntimeOptions { client_timeout: Duration::from_millis(800), ..RuntimeOptions::default() };
    instantiate_network(&doc.net, "d", options).unwrap()
}

fn status(rt: &ResourceRuntime, fb: &str) -> String {
    match rt.output(fb, "STATUS").unwrap() {
        Value::String(s) => s.clone(),
        other => panic!("{other:?}"),
    }
}

fn qo(rt: &ResourceRuntime, fb: &str) -> bool {
    rt.output(fb, "QO").unwrap() == &Value::Bool(true)
}

fn init(rt: &mut ResourceRuntime) {
    rt.cold_start();
    rt.run_until_idle(usize::MAX);
}

/// Steps until `fb` fires `event` or `timeout` passes.
fn pump_until(rt: &mut ResourceRuntime, fb: &str, event: &str, timeout: Duration) -> Option<FiredStep> {
    let deadline = Instant::now() + timeout;
    while Instant::now() < deadline {
        match rt.step().fired() {
            Some(f) if f.fb == fb && f.emitted.iter().any(|e| e == &format!("{fb}.{event}")) => return Some(f.clone()),
            Some(_) => {}
            None => std::thread::sleep(Duration::from_millis(2)),
        }
    }
    None
}

fn broker() -> Broker {
    broker_start(0, parse_accounts(ACCOUNTS).unwrap()).unwrap()
}

fn xmpp_id(jid: &str, password: &str, peer: Option<&str>, port: u16) -> String {
    match peer {
        Some(peer) => format!("\"fbdk[].xmpp[0:{jid}:{password}:127.0.0.1:{peer}:{port}]\""),
        None => format!("\"fbdk[].xmpp[0:{jid}:{password}:127.0.0.1:{port}]\""),
    }
}

fn publish_and_receive(pub_id: &str, sub_id: &str) {
    let mut sub = runtime(&format!("name=SUB type=SUBSCRIBE_2 device=d ID={sub_id}"), "", "");
    init(&mut sub);
    assert_eq!(status(&sub, "SUB"), "INITIALIZED");
    assert!(qo(&sub, "SUB"));
    let mut publ = runtime(&format!("name=PUB type=PUBLISH_2 device=d ID={pub_id}"), "", "");
    init(&mut publ);
    assert_eq!(status(&publ, "PUB"), "INITIALIZED");
    // an xmpp subscription completes asynchronously
    std::thread::sleep(Duration::from_millis(200));

    for (a, b) in [(true, false), (false, true), (true, true)] {
        publ.set_input("PUB", "SD_1", Value::Bool(a)).unwrap();
        publ.set_input("PUB", "SD_2", Value::Bool(b)).unwrap();
        publ.trigger("PUB", "REQ").unwrap();
        let cnf = pump_until(&mut publ, "PUB", "CNF", Duration::from_secs(1));
        assert!(cnf.is_some());
        assert_eq!(status(&publ, "PUB"), "OK");
        assert!(pump_until(&mut sub, "SUB", "IND", Duration::from_secs(2)).is_some(), "no IND for {a},{b}");
        assert_eq!(sub.output("SUB", "RD_1").unwrap(), &Value::Bool(a));
        assert_eq!(sub.output("SUB", "RD_2").unwrap(), &Value::Bool(b));
        assert_eq!(status(&sub, "SUB"), "OK");
    }
    assert!(pump_until(&mut sub, "SUB", "IND", Duration::from_millis(200)).is_none());
}

#[test]
fn publish_subscribe_over_udp() {
    let port = free_local_port().unwrap();
    let id = format!("fbdk[].ip[127.0.0.1:{port}]");
    publish_and_receive(&id, &id);
}

#[test]
fn publish_subscribe_over_udp_multicast() {
    let port = free_local_port().unwrap();
    let id = format!("fbdk[].ip[239.0.0.1:{port}]");
    publish_and_receive(&id, &id);
}

#[test]
fn publish_subscribe_over_xmpp() {
    let broker = broker();
    let port = broker.port();
    publish_and_receive(
        &xmpp_id("netop@localhost/res", "netop-secret", None, port),
        &xmpp_id("cemdsm@localhost/res", "cemdsm-secret", Some("netop@localhost/res"), port),
    );
}

#[test]
fn subscriber_counts_bad_frames() {
    let port = free_local_port().unwrap();
    let id = format!("fbdk[].ip[127.0.0.1:{port}]");
    let mut sub = runtime(&format!("name=SUB type=SUBSCRIBE_3 device=d ID={id}"), "", "");
    init(&mut sub);
    let sock = UdpSocket::bind("127.0.0.1:0").unwrap();
    // garbage, then two values into three pins
    sock.send_to(&[0xFF, 0x00], ("127.0.0.1", port)).unwrap();
    sock.send_to(&[0x41, 0x40], ("127.0.0.1", port)).unwrap();
    assert!(pump_until(&mut sub, "SUB", "IND", Duration::from_millis(500)).is_none());
    assert_eq!(sub.stats().decode_errors, 2);
    sock.send_to(&[0x41, 0x40, 0x41], ("127.0.0.1", port)).unwrap();
    assert!(pump_until(&mut sub, "SUB", "IND", Duration::from_secs(1)).is_some());
    assert_eq!(sub.output("SUB", "RD_3").unwrap(), &Value::Bool(true));
}

fn echo_server(id: &str, type_name: &str) -> ResourceRuntime {
    let mut rt = runtime(
        &format!("name=SRV type={type_name} device=d ID={id}"),
        "from=SRV.IND to=SRV.RSP",
        "from=SRV.RD_1 to=SRV.SD_1",
    );
    init(&mut rt);
    assert_eq!(status(&rt, "SRV"), "INITIALIZED");
    rt
}

fn client(id: &str, type_name: &str) -> ResourceRuntime {
    let mut rt = runtime(&format!("name=CLI type={type_name} device=d ID={id}"), "", "");
    init(&mut rt);
    assert_eq!(status(&rt, "CLI"), "INITIALIZED");
    rt
}

fn exchange(cli: &mut ResourceRuntime, value: bool) -> FiredStep {
    cli.set_input("CLI", "SD_1", Value::Bool(value)).unwrap();
    cli.trigger("CLI", "REQ").unwrap();
    pump_until(cli, "CLI", "CNF", Duration::from_secs(3)).expect("CNF")
}

fn echo_round_trips(server_id: &str, client_id: &str) {
    let server = echo_server(server_id, "SERVER_1_1").spawn();
    let mut cli = client(client_id, "CLIENT_1_1");
    for value in [true, false, false, true] {
        exchange(&mut cli, value);
        assert_eq!(status(&cli, "CLI"), "OK");
        assert_eq!(cli.output("CLI", "RD_1").unwrap(), &Value::Bool(value));
    }
    drop(server);
}

#[test]
fn client_server_echo_over_tcp() {
    let port = free_local_port().unwrap();
    let id = format!("fbdk[].ip[127.0.0.1:{port}]");
    echo_round_trips(&id, &id);
}

#[test]
fn client_server_echo_over_xmpp() {
    let broker = broker();
    let port = broker.port();
    echo_round_trips(
        &xmpp_id("cemdsm@localhost/res", "cemdsm-secret", Some("display@localhost/res"), port),
        &xmpp_id("display@localhost/res", "display-secret", Some("cemdsm@localhost/res"), port),
    );
}

#[test]
fn wrong_response_arity_is_a_decode_error() {
    let port = free_local_port().unwrap();
    let id = format!("fbdk[].ip[127.0.0.1:{port}]");
    // receives one value, answers two
    let mut server = runtime(
        &format!("name=SRV type=SERVER_1_2 device=d ID={id}"),
        "from=SRV.IND to=SRV.RSP",
        "from=SRV.RD_1 to=SRV.SD_1\nfrom=SRV.RD_1 to=SRV.SD_2",
    );
    init(&mut server);
    let server = server.spawn();
    let mut cli = client(&id, "CLIENT_1_1");
    exchange(&mut cli, true);
    assert_eq!(status(&cli, "CLI"), "DECODE_ERROR");
    assert!(!qo(&cli, "CLI"));
    drop(server);
}

#[test]
fn offline_server_times_out() {
    let broker = broker();
    let port = broker.port();
    let mut cli =
        client(&xmpp_id("display@localhost/res", "display-secret", Some("cemdsm@localhost/res"), port), "CLIENT_1_1");
    exchange(&mut cli, true);
    assert_eq!(status(&cli, "CLI"), "TIMEOUT");
    assert!(!qo(&cli, "CLI"));
}

#[test]
fn silent_server_times_out() {
    let port = free_local_port().unwrap();
    let id = format!("fbdk[].ip[127.0.0.1:{port}]");
    // IND is never answered
    let mut server = runtime(&format!("name=SRV type=SERVER_1_1 device=d ID={id}"), "", "");
    init(&mut server);
    let server = server.spawn();
    let mut cli = client(&id, "CLIENT_1_1");
    let started = Instant::now();
    exchange(&mut cli, true);
    assert_eq!(status(&cli, "CLI"), "TIMEOUT");
    assert!(started.elapsed() >= Duration::from_millis(700));
    drop(server);
}

#[test]
fn second_request_in_flight_is_ignored() {
    let port = free_local_port().unwrap();
    let id = format!("fbdk[].ip[127.0.0.1:{port}]");
    let server = echo_server(&id, "SERVER_1_1").spawn();
    let mut cli = client(&id, "CLIENT_1_1");
    cli.set_input("CLI", "SD_1", Value::Bool(true)).unwrap();
    cli.trigger("CLI", "REQ").unwrap();
    cli.trigger("CLI", "REQ").unwrap();
    assert!(pump_until(&mut cli, "CLI", "CNF", Duration::from_secs(3)).is_some());
    assert!(pump_until(&mut cli, "CLI", "CNF", Duration::from_millis(500)).is_none());
    assert_eq!(cli.stats().ignored_requests, 1);
    drop(server);
}

#[test]
fn rsp_without_request_is_counted() {
    let port = free_local_port().unwrap();
    let mut server = echo_server(&format!("fbdk[].ip[127.0.0.1:{port}]"), "SERVER_1_1");
    server.trigger("SRV", "RSP").unwrap();
    server.run_until_idle(usize::MAX);
    assert_eq!(server.stats().orphan_responses, 1);
}

#[test]
fn encryption_is_unsupported() {
    let mut rt =
        runtime("name=PUB type=PUBLISH_1 device=d ID=\"fbdk[].xmpp[1:netop@localhost/res:pw:127.0.0.1]\"", "", "");
    init(&mut rt);
    assert_eq!(status(&rt, "PUB"), "TLS_UNSUPPORTED");
    assert!(!qo(&rt, "PUB"));
}

#[test]
fn broker_down_fails_to_connect() {
    let port = free_local_port().unwrap();
    let mut rt = runtime(
        &format!("name=PUB type=PUBLISH_1 device=d ID={}", xmpp_id("netop@localhost/res", "netop-secret", None, port)),
        "",
        "",
    );
    init(&mut rt);
    assert_eq!(status(&rt, "PUB"), "CONNECT_FAILED");
}

fn bare_net(id: &str) -> FbNetwork {
    let mut net = parse_netdef(
        "[devices]\nname=d host=127.0.0.1\n[fbs]\nname=PUB type=PUBLISH_1 device=d ID=fbdk[].ip[127.0.0.1:9]",
    )
    .unwrap()
    .net;
    net.fbs[0].params = vec![("ID".into(), id.into())];
    net
}

#[test]
fn invalid_id_and_request_before_init() {
    let mut rt = instantiate_network(&bare_net("fbdk[].tcp[1.2.3.4:5]"), "d", RuntimeOptions::default()).unwrap();
    rt.trigger("PUB", "REQ").unwrap();
    rt.run_until_idle(usize::MAX);
    assert_eq!(status(&rt, "PUB"), "INVALID_ID");
    assert!(!qo(&rt, "PUB"));
    init(&mut rt);
    assert_eq!(status(&rt, "PUB"), "INVALID_ID");
}

#[test]
fn init_without_qi_terminates() {
    let port = free_local_port().unwrap();
    let mut rt =
        instantiate_network(&bare_net(&format!("fbdk[].ip[127.0.0.1:{port}]")), "d", RuntimeOptions::default())
            .unwrap();
    init(&mut rt);
    assert_eq!(status(&rt, "PUB"), "INITIALIZED");
    rt.set_input("PUB", "QI", Value::Bool(false)).unwrap();
    rt.trigger("PUB", "INIT").unwrap();
    rt.run_until_idle(usize::MAX);
    assert_eq!(status(&rt, "PUB"), "TERMINATED");
    assert!(!qo(&rt, "PUB"));
}
