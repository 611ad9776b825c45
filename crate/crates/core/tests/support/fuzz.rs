//! Randomized three-client broker workload checked against a model of
//! rosters, presence fan-out and iq routing.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::net::{Ipv4Addr, SocketAddrV4};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use fbcomm::xmppmini::{
    broker_start, Jid, PresenceType, Session, SessionOptions, Stanza, StanzaKind, SubscriptionReply,
};
use proptest::prelude::*;

pub const CLIENTS: usize = 3;
const NAMES: [&str; CLIENTS] = ["alpha", "beta", "gamma"];

#[derive(Debug, Clone)]
pub enum Op {
    Publish(String),
    Iq { to: usize, payload: Option<String> },
}

#[derive(Debug, Clone)]
pub struct Workload {
    /// (subscriber, publisher)
    pub subscriptions: Vec<(usize, usize)>,
    /// Operations issued concurrently, one list per client.
    pub ops: Vec<Vec<Op>>,
}

impl Workload {
    pub fn stanza_count(&self) -> usize {
        self.subscriptions.len() + self.ops.iter().map(Vec::len).sum::<usize>()
    }
}

fn payload() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9+/=<>&'\" ]{0,24}"
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        payload().prop_map(Op::Publish),
        (0..CLIENTS - 1, proptest::option::of(payload())).prop_map(|(to, payload)| Op::Iq { to, payload }),
    ]
}

/// Workloads of at least `min_ops` concurrent operations.
pub fn workload(min_ops: usize) -> impl Strategy<Value = Workload> {
    let per_client = min_ops.div_ceil(CLIENTS);
    (
        proptest::collection::vec((0..CLIENTS, 0..CLIENTS - 1), 1..8),
        proptest::collection::vec(proptest::collection::vec(op(), per_client..per_client + 20), CLIENTS),
    )
        .prop_map(|(subscriptions, ops)| Workload {
            subscriptions: subscriptions.into_iter().map(|(sub, publ)| (sub, peer(sub, publ))).collect(),
            ops,
        })
}

fn jid(i: usize) -> Jid {
    Jid::new(NAMES[i], "localhost", "r").unwrap()
}

/// Index `to` among the peers of `from`; nothing targets its own sender.
fn peer(from: usize, to: usize) -> usize {
    if to >= from {
        to + 1
    } else {
        to
    }
}

#[derive(Debug, Default)]
pub struct FuzzSummary {
    pub stanzas: usize,
    pub presences_delivered: usize,
    pub iq_exchanges: usize,
}

type Received = Arc<Mutex<Vec<(String, String)>>>;

/// Runs `w` against a fresh broker and checks every delivery.
pub fn run_workload(w: &Workload) -> Result<FuzzSummary, String> {
    let accounts = (0..CLIENTS).map(|i| (jid(i).bare(), format!("pw{i}"))).collect();
    let broker = broker_start(0, accounts).map_err(|e| e.to_string())?;
    let addr = SocketAddrV4::new(Ipv4Addr::LOCALHOST, broker.port());
    let mut sessions = Vec::new();
    let mut presences: Vec<Received> = Vec::new();
    let mut requests: Vec<Received> = Vec::new();
    for i in 0..CLIENTS {
        let mut s = Session::connect(addr, &jid(i), &format!("pw{i}"), SessionOptions::default())
            .map_err(|e| format!("connect {i}: {e}"))?;
        let got: Received = Arc::default();
        let sink = Arc::clone(&got);
        s.set_tap(move |st: &Stanza| {
            if st.kind == StanzaKind::Presence && st.presence_type == Some(PresenceType::Available) {
                if let Some(text) = st.value_text() {
                    let from = st.from.as_ref().map(|j| j.to_string()).unwrap_or_default();
                    sink.lock().unwrap().push((from, text));
                }
            }
        });
        let asked: Received = Arc::default();
        let sink = Arc::clone(&asked);
        let me = jid(i).to_string();
        s.iq_respond(move |from, payload| {
            let from = from.map(|j| j.to_string()).unwrap_or_default();
            let payload = payload.unwrap_or_default();
            sink.lock().unwrap().push((from.clone(), payload.clone()));
            Ok(format!("{me}|{from}|{payload}"))
        })
        .map_err(|e| e.to_string())?;
        sessions.push(s);
        presences.push(got);
        requests.push(asked);
    }

    // rosters: publisher -> subscribers
    let mut rosters: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); CLIENTS];
    for &(sub, publ) in &w.subscriptions {
        sessions[sub].presence_subscribe(&jid(publ)).map_err(|e| e.to_string())?;
        match sessions[sub].wait_subscription(&jid(publ), Duration::from_secs(3)) {
            Some(SubscriptionReply::Subscribed) => {}
            other => return Err(format!("{sub} -> {publ}: {other:?}")),
        }
        rosters[publ].insert(sub);
    }
    for (publ, subs) in rosters.iter().enumerate() {
        let mut on_broker: Vec<String> =
            broker.roster(&jid(publ).bare()).into_iter().map(|(j, _)| j.to_string()).collect();
        on_broker.sort();
        let mut expected: Vec<String> = subs.iter().map(|s| jid(*s).bare().to_string()).collect();
        expected.sort();
        if on_broker != expected {
            return Err(format!("roster of {publ}: {on_broker:?} != {expected:?}"));
        }
    }
    let fanout_before = broker.stats().fanout;

    let sessions = Arc::new(sessions);
    let errors: Arc<Mutex<Vec<String>>> = Arc::default();
    let threads: Vec<_> = (0..CLIENTS)
        .map(|i| {
            let ops = w.ops[i].clone();
            let sessions = Arc::clone(&sessions);
            let errors = Arc::clone(&errors);
            std::thread::spawn(move || {
                let me = &sessions[i];
                for op in ops {
                    let result = match op {
                        Op::Publish(text) => me.presence_publish(&text).map_err(|e| e.to_string()),
                        Op::Iq { to, payload } => {
                            let target = peer(i, to);
                            let expected =
                                format!("{}|{}|{}", jid(target), jid(i), payload.clone().unwrap_or_default());
                            match me.iq_request(&jid(target), payload.as_deref(), Duration::from_secs(5)) {
                                Ok(reply) if reply == expected => Ok(()),
                                Ok(reply) => Err(format!("iq {i}->{target}: got {reply:?}, want {expected:?}")),
                                Err(e) => Err(format!("iq {i}->{target}: {e}")),
                            }
                        }
                    };
                    if let Err(e) = result {
                        errors.lock().unwrap().push(e);
                        return;
                    }
                }
            })
        })
        .collect();
    for t in threads {
        t.join().map_err(|_| "client thread panicked".to_string())?;
    }
    if let Some(e) = errors.lock().unwrap().first() {
        return Err(e.clone());
    }

    // model: per recipient, per publisher, payloads in publish order
    let mut expected: Vec<HashMap<String, Vec<String>>> = vec![HashMap::new(); CLIENTS];
    let mut expected_requests: Vec<Vec<(String, String)>> = vec![Vec::new(); CLIENTS];
    let mut total_presences = 0;
    let mut iq_exchanges = 0;
    for (publ, ops) in w.ops.iter().enumerate() {
        for op in ops {
            match op {
                Op::Publish(text) => {
                    for &sub in &rosters[publ] {
                        expected[sub].entry(jid(publ).to_string()).or_default().push(text.clone());
                        total_presences += 1;
                    }
                }
                Op::Iq { to, payload } => {
                    iq_exchanges += 1;
                    expected_requests[peer(publ, *to)]
                        .push((jid(publ).to_string(), payload.clone().unwrap_or_default()));
                }
            }
        }
    }
    let deadline = Instant::now() + Duration::from_secs(10);
    while Instant::now() < deadline {
        let got: usize = presences.iter().map(|p| p.lock().unwrap().len()).sum();
        if got >= total_presences {
            break;
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    std::thread::sleep(Duration::from_millis(100));

    for i in 0..CLIENTS {
        let mut by_sender: HashMap<String, Vec<String>> = HashMap::new();
        for (from, text) in presences[i].lock().unwrap().iter() {
            by_sender.entry(from.clone()).or_default().push(text.clone());
        }
        if by_sender != expected[i] {
            return Err(format!("presences at {i} differ from the roster model"));
        }
        let mut got = requests[i].lock().unwrap().clone();
        let mut want = expected_requests[i].clone();
        got.sort();
        want.sort();
        if got != want {
            return Err(format!("iq requests at {i}: {} received, {} expected", got.len(), want.len()));
        }
    }
    let fanout = broker.stats().fanout - fanout_before;
    if fanout as usize != total_presences {
        return Err(format!("broker fan-out {fanout} != {total_presences}"));
    }
    Ok(FuzzSummary { stanzas: w.stanza_count(), presences_delivered: total_presences, iq_exchanges })
}
