//! The two demonstration systems as generated networks.
//!
//! TC1: a network operator device latches which of three buttons (over,
//! normal, under voltage) was pressed last and publishes the three flags;
//! the charging device derives "charge" and "discharge" LEDs from them.
//!
//! TC2: the charging device toggles a load flag per button press and
//! serves it; a display device polls it once per second.

use crate::fbcore::{Connection, DeviceDecl, FbDecl, FbNetwork};
use crate::xmppmini::DEFAULT_XMPP_PORT;

pub const NETOP_JID: &str = "netop@localhost/res";
pub const CEM_JID: &str = "cemdsm@localhost/res";
pub const DISPLAY_JID: &str = "display@localhost/res";

/// Accounts file matching the bundled networks.
pub const ACCOUNTS: &str = "\
netop@localhost netop-secret
cemdsm@localhost cemdsm-secret
display@localhost display-secret
";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    Xmpp {
        broker_port: u16,
    },
    /// UDP multicast for TC1, TCP for TC2.
    Ip {
        port: u16,
    },
}

impl LinkKind {
    pub const DEFAULT_XMPP: LinkKind = LinkKind::Xmpp { broker_port: DEFAULT_XMPP_PORT };
    pub const DEFAULT_IP: LinkKind = LinkKind::Ip { port: 61000 };
}

fn xmpp_id(jid: &str, password: &str, peer: Option<&str>, broker_port: u16) -> String {
    let mut id = format!("fbdk[].xmpp[0:{jid}:{password}:127.0.0.1");
    if let Some(peer) = peer {
        id.push(':');
        id.push_str(peer);
    }
    if broker_port != DEFAULT_XMPP_PORT {
        id.push_str(&format!(":{broker_port}"));
    }
    id.push(']');
    id
}

struct Builder {
    net: FbNetwork,
    device: String,
}

impl Builder {
    fn new() -> Self {
        Builder { net: FbNetwork::default(), device: String::new() }
    }

    fn device(&mut self, name: &str) {
        self.net.devices.push(DeviceDecl { name: name.into(), host: "127.0.0.1".into() });
        self.device = name.into();
    }

    fn fb(&mut self, name: &str, type_name: &str, params: &[(&str, &str)]) {
        self.net.fbs.push(FbDecl {
            name: name.into(),
            type_name: type_name.into(),
            device: self.device.clone(),
            params: params.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        });
    }

    fn ev(&mut self, from: &str, to: &str) {
        self.net.events.push(Connection::new(from, to).expect("valid pin"));
    }

    fn data(&mut self, from: &str, to: &str) {
        self.net.data.push(Connection::new(from, to).expect("valid pin"));
    }
}

const FLAGS: [&str; 3] = ["OV", "NV", "UV"];

fn netop(b: &mut Builder) {
    b.fb("CYCLE", "E_CYCLE", &[("DT", "500")]);
    for f in FLAGS {
        b.fb(&format!("I_{f}"), "IX", &[]);
    }
    for f in FLAGS {
        b.fb(&format!("OR_{f}"), "OR2", &[]);
    }
    for f in FLAGS {
        b.fb(&format!("RS_{f}"), "RS", &[]);
    }
    for f in FLAGS {
        b.fb(&format!("Q_{f}"), "QX", &[]);
    }
    for f in FLAGS {
        b.ev("CYCLE.EO", &format!("I_{f}.REQ"));
    }
    for f in FLAGS {
        for g in FLAGS {
            b.ev(&format!("I_{f}.IND"), &format!("OR_{g}.REQ"));
        }
    }
    for f in FLAGS {
        b.ev(&format!("OR_{f}.CNF"), &format!("RS_{f}.REQ"));
        b.ev(&format!("RS_{f}.CNF"), &format!("Q_{f}.REQ"));
    }
    for f in FLAGS {
        b.data(&format!("I_{f}.IN"), &format!("RS_{f}.S"));
        let others: Vec<&str> = FLAGS.iter().copied().filter(|g| *g != f).collect();
        b.data(&format!("I_{}.IN", others[0]), &format!("OR_{f}.IN1"));
        b.data(&format!("I_{}.IN", others[1]), &format!("OR_{f}.IN2"));
        b.data(&format!("OR_{f}.OUT"), &format!("RS_{f}.R"));
        b.data(&format!("RS_{f}.Q"), &format!("Q_{f}.OUT"));
    }
}

/// Charge/discharge logic fed by three flag sources.
fn cem_logic(b: &mut Builder, ov: &str, nv: &str, uv: &str) {
    b.fb("OR_C", "OR2", &[]);
    b.fb("OR_D", "OR2", &[]);
    b.fb("RS_C", "RS", &[]);
    b.fb("RS_D", "RS", &[]);
    b.fb("Q_C", "QX", &[]);
    b.fb("Q_D", "QX", &[]);
    b.ev("OR_C.CNF", "RS_C.REQ");
    b.ev("OR_D.CNF", "RS_D.REQ");
    b.ev("RS_C.CNF", "Q_C.REQ");
    b.ev("RS_D.CNF", "Q_D.REQ");
    b.data(ov, "RS_C.S");
    b.data(nv, "OR_C.IN1");
    b.data(uv, "OR_C.IN2");
    b.data("OR_C.OUT", "RS_C.R");
    b.data(uv, "RS_D.S");
    b.data(nv, "OR_D.IN1");
    b.data(ov, "OR_D.IN2");
    b.data("OR_D.OUT", "RS_D.R");
    b.data("RS_C.Q", "Q_C.OUT");
    b.data("RS_D.Q", "Q_D.OUT");
}

/// TC1 over two devices, `netop` and `cem`.
pub fn tc1_net(link: LinkKind) -> FbNetwork {
    let (pub_id, sub_id) = match link {
        LinkKind::Xmpp { broker_port } => (
            xmpp_id(NETOP_JID, "netop-secret", None, broker_port),
            xmpp_id(CEM_JID, "cemdsm-secret", Some(NETOP_JID), broker_port),
        ),
        LinkKind::Ip { port } => {
            let id = format!("fbdk[].ip[239.0.0.1:{port}]");
            (id.clone(), id)
        }
    };
    let mut b = Builder::new();
    b.device("netop");
    netop(&mut b);
    b.fb("PUB", "PUBLISH_3", &[("ID", &pub_id)]);
    b.ev("RS_UV.CNF", "PUB.REQ");
    for (i, f) in FLAGS.iter().enumerate() {
        b.data(&format!("RS_{f}.Q"), &format!("PUB.SD_{}", i + 1));
    }
    b.device("cem");
    b.fb("SUB", "SUBSCRIBE_3", &[("ID", &sub_id)]);
    cem_logic(&mut b, "SUB.RD_1", "SUB.RD_2", "SUB.RD_3");
    b.ev("SUB.IND", "OR_C.REQ");
    b.ev("SUB.IND", "OR_D.REQ");
    b.net
}

/// TC1 on a single device with the publish/subscribe link replaced by
/// direct connections.
pub fn tc1_local_net() -> FbNetwork {
    let mut b = Builder::new();
    b.device("local");
    netop(&mut b);
    cem_logic(&mut b, "RS_OV.Q", "RS_NV.Q", "RS_UV.Q");
    b.ev("RS_UV.CNF", "OR_C.REQ");
    b.ev("RS_UV.CNF", "OR_D.REQ");
    b.net
}

fn cem_toggle(b: &mut Builder) {
    b.fb("CYCLE", "E_CYCLE", &[("DT", "500")]);
    b.fb("I_LO", "IX", &[]);
    b.fb("AND_LO", "AND2", &[]);
    b.fb("RS_LO", "RS", &[]);
    b.fb("Q_LO", "QX", &[]);
    b.ev("CYCLE.EO", "I_LO.REQ");
    b.ev("I_LO.IND", "AND_LO.REQ");
    b.ev("AND_LO.CNF", "RS_LO.REQ");
    b.ev("RS_LO.CNF", "Q_LO.REQ");
    b.data("I_LO.IN", "AND_LO.IN1");
    b.data("RS_LO.Q", "AND_LO.IN2");
    b.data("I_LO.IN", "RS_LO.S");
    b.data("AND_LO.OUT", "RS_LO.R");
    b.data("RS_LO.Q", "Q_LO.OUT");
}

/// TC2 over two devices, `cem` (server) and `display` (client).
pub fn tc2_net(link: LinkKind) -> FbNetwork {
    let (srv_id, cli_id) = match link {
        LinkKind::Xmpp { broker_port } => (
            xmpp_id(CEM_JID, "cemdsm-secret", Some(DISPLAY_JID), broker_port),
            xmpp_id(DISPLAY_JID, "display-secret", Some(CEM_JID), broker_port),
        ),
        LinkKind::Ip { port } => {
            let id = format!("fbdk[].ip[127.0.0.1:{port}]");
            (id.clone(), id)
        }
    };
    let mut b = Builder::new();
    b.device("cem");
    cem_toggle(&mut b);
    b.fb("SERVER_1", "SERVER_0_1", &[("ID", &srv_id)]);
    b.ev("SERVER_1.IND", "SERVER_1.RSP");
    b.data("RS_LO.Q", "SERVER_1.SD_1");
    b.device("display");
    b.fb("POLL", "E_CYCLE", &[("DT", "1000")]);
    b.fb("CLIENT_1", "CLIENT_0_1", &[("ID", &cli_id)]);
    b.fb("Q_LOD", "QX", &[]);
    b.ev("POLL.EO", "CLIENT_1.REQ");
    b.ev("CLIENT_1.CNF", "Q_LOD.REQ");
    b.data("CLIENT_1.RD_1", "Q_LOD.OUT");
    b.net
}

/// TC2 on a single device, the display LED fed directly by the toggle.
pub fn tc2_local_net() -> FbNetwork {
    let mut b = Builder::new();
    b.device("local");
    cem_toggle(&mut b);
    b.fb("Q_LOD", "QX", &[]);
    b.ev("RS_LO.CNF", "Q_LOD.REQ");
    b.data("RS_LO.Q", "Q_LOD.OUT");
    b.net
}

/// File name, header and network of every bundled description.
pub fn bundled_nets() -> Vec<(&'static str, &'static str, FbNetwork)> {
    vec![
        ("tc1.net", "TC1 over XMPP (broker on 127.0.0.1:5222)", tc1_net(LinkKind::DEFAULT_XMPP)),
        ("tc1_udp.net", "TC1 over UDP multicast", tc1_net(LinkKind::DEFAULT_IP)),
        ("tc1_local.net", "TC1 on one device", tc1_local_net()),
        ("tc2.net", "TC2 over XMPP (broker on 127.0.0.1:5222)", tc2_net(LinkKind::DEFAULT_XMPP)),
        ("tc2_tcp.net", "TC2 over TCP", tc2_net(LinkKind::DEFAULT_IP)),
        ("tc2_local.net", "TC2 on one device", tc2_local_net()),
    ]
}
