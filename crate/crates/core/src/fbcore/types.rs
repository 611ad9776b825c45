use std::collections::HashSet;

use crate::commstack::Pattern;
use crate::value::ValueKind;

/// Largest SD/RD arity accepted in a SIFB type name.
pub const MAX_SIFB_ARITY: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Or2,
    And2,
    Not,
}

/// Shape of a communication SIFB type such as `PUBLISH_3` or `CLIENT_0_1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SifbSpec {
    pub pattern: Pattern,
    pub sd: usize,
    pub rd: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BehaviorKind {
    Rs,
    Gate(GateKind),
    ECycle,
    Ix,
    Qx,
    Sifb(SifbSpec),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FbTypeDecl {
    pub name: String,
    pub event_inputs: Vec<String>,
    pub event_outputs: Vec<String>,
    pub data_inputs: Vec<(String, ValueKind)>,
    pub data_outputs: Vec<(String, ValueKind)>,
    pub behavior: BehaviorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TypeDeclError {
    #[error("pin {0} is declared twice")]
    DuplicatePin(String),
    #[error("declared pins do not match the {0:?} behavior")]
    SignatureMismatch(BehaviorKind),
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn pins(list: &[(&str, ValueKind)]) -> Vec<(String, ValueKind)> {
    list.iter().map(|(n, k)| (n.to_string(), *k)).collect()
}

fn numbered(prefix: &str, count: usize) -> Vec<(String, ValueKind)> {
    (1..=count).map(|i| (format!("{prefix}_{i}"), ValueKind::Bool)).collect()
}

/// Canonical declaration for a behavior under type name `name`.
pub fn declare(name: &str, behavior: BehaviorKind) -> FbTypeDecl {
    use ValueKind::{Bool, Dint, String as Str};
    let (ei, eo, di, dout) = match behavior {
        BehaviorKind::Rs => (names(&["REQ"]), names(&["CNF"]), pins(&[("S", Bool), ("R", Bool)]), pins(&[("Q", Bool)])),
        BehaviorKind::Gate(GateKind::Not) => {
            (names(&["REQ"]), names(&["CNF"]), pins(&[("IN", Bool)]), pins(&[("OUT", Bool)]))
        }
        BehaviorKind::Gate(_) => {
            (names(&["REQ"]), names(&["CNF"]), pins(&[("IN1", Bool), ("IN2", Bool)]), pins(&[("OUT", Bool)]))
        }
        BehaviorKind::ECycle => (names(&["START", "STOP"]), names(&["EO"]), pins(&[("DT", Dint)]), vec![]),
        BehaviorKind::Ix => (names(&["REQ"]), names(&["IND"]), vec![], pins(&[("IN", Bool)])),
        BehaviorKind::Qx => (names(&["REQ"]), names(&["CNF"]), pins(&[("OUT", Bool)]), vec![]),
        BehaviorKind::Sifb(spec) => {
            let (ei, eo) = match spec.pattern {
                Pattern::Publish => (["INIT", "REQ"], ["INITO", "CNF"]),
                Pattern::Subscribe => (["INIT", ""], ["INITO", "IND"]),
                Pattern::Client => (["INIT", "REQ"], ["INITO", "CNF"]),
                Pattern::Server => (["INIT", "RSP"], ["INITO", "IND"]),
            };
            let ei: Vec<&str> = ei.into_iter().filter(|e| !e.is_empty()).collect();
            let mut di = pins(&[("QI", Bool), ("ID", Str)]);
            di.extend(numbered("SD", spec.sd));
            let mut dout = pins(&[("QO", Bool), ("STATUS", Str)]);
            dout.extend(numbered("RD", spec.rd));
            (names(&ei), names(&eo), di, dout)
        }
    };
    FbTypeDecl {
        name: name.to_string(),
        event_inputs: ei,
        event_outputs: eo,
        data_inputs: di,
        data_outputs: dout,
        behavior,
    }
}

fn parse_arity(text: &str) -> Option<usize> {
    let n: usize = text.parse().ok()?;
    // no leading zeros, so the name is canonical
    (n.to_string() == text && n <= MAX_SIFB_ARITY).then_some(n)
}

fn sifb_spec(name: &str) -> Option<SifbSpec> {
    let (pattern, rest) = [
        ("PUBLISH_", Pattern::Publish),
        ("SUBSCRIBE_", Pattern::Subscribe),
        ("CLIENT_", Pattern::Client),
        ("SERVER_", Pattern::Server),
    ]
    .into_iter()
    .find_map(|(prefix, p)| name.strip_prefix(prefix).map(|rest| (p, rest)))?;
    let spec = match pattern {
        Pattern::Publish => SifbSpec { pattern, sd: parse_arity(rest)?, rd: 0 },
        Pattern::Subscribe => SifbSpec { pattern, sd: 0, rd: parse_arity(rest)? },
        Pattern::Client | Pattern::Server => {
            let (a, b) = rest.split_once('_')?;
            let (a, b) = (parse_arity(a)?, parse_arity(b)?);
            // SERVER_m_n mirrors CLIENT_m_n: the server receives m values and answers n
            let (sd, rd) = if pattern == Pattern::Client { (a, b) } else { (b, a) };
            SifbSpec { pattern, sd, rd }
        }
    };
    Some(spec)
}

/// Looks up a built-in type by name.
pub fn resolve_type(name: &str) -> Option<FbTypeDecl> {
    let behavior = match name {
        "RS" => BehaviorKind::Rs,
        "OR2" => BehaviorKind::Gate(GateKind::Or2),
        "AND2" => BehaviorKind::Gate(GateKind::And2),
        "NOT" => BehaviorKind::Gate(GateKind::Not),
        "E_CYCLE" => BehaviorKind::ECycle,
        "IX" => BehaviorKind::Ix,
        "QX" => BehaviorKind::Qx,
        other => BehaviorKind::Sifb(sifb_spec(other)?),
    };
    Some(declare(name, behavior))
}

impl FbTypeDecl {
    /// Checks pin uniqueness and that the pins fit the behavior.
    pub fn validate(&self) -> Result<(), TypeDeclError> {
        let mut seen = HashSet::new();
        let all = self
            .event_inputs
            .iter()
            .chain(&self.event_outputs)
            .chain(self.data_inputs.iter().map(|(n, _)| n))
            .chain(self.data_outputs.iter().map(|(n, _)| n));
        for pin in all {
            if !seen.insert(pin.as_str()) {
                return Err(TypeDeclError::DuplicatePin(pin.clone()));
            }
        }
        let canonical = declare(&self.name, self.behavior);
        let same_names = |a: &[(String, ValueKind)], b: &[(String, ValueKind)]| {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.0 == y.0)
        };
        let generic = matches!(self.behavior, BehaviorKind::Sifb(_));
        let data_ok = if generic {
            same_names(&self.data_inputs, &canonical.data_inputs)
                && same_names(&self.data_outputs, &canonical.data_outputs)
                && self.data_inputs[..2] == canonical.data_inputs[..2]
                && self.data_outputs[..2] == canonical.data_outputs[..2]
        } else {
            self.data_inputs == canonical.data_inputs && self.data_outputs == canonical.data_outputs
        };
        if data_ok && self.event_inputs == canonical.event_inputs && self.event_outputs == canonical.event_outputs {
            Ok(())
        } else {
            Err(TypeDeclError::SignatureMismatch(self.behavior))
        }
    }

    /// SD/RD pins of SIFBs take their kind from the connections.
    pub fn is_generic_pin(&self, pin: &str) -> bool {
        matches!(self.behavior, BehaviorKind::Sifb(_)) && (pin.starts_with("SD_") || pin.starts_with("RD_"))
    }

    pub fn event_input(&self, name: &str) -> Option<usize> {
        self.event_inputs.iter().position(|p| p == name)
    }

    pub fn event_output(&self, name: &str) -> Option<usize> {
        self.event_outputs.iter().position(|p| p == name)
    }

    pub fn data_input(&self, name: &str) -> Option<usize> {
        self.data_inputs.iter().position(|(p, _)| p == name)
    }

    pub fn data_output(&self, name: &str) -> Option<usize> {
        self.data_outputs.iter().position(|(p, _)| p == name)
    }

    pub fn is_sifb(&self) -> bool {
        matches!(self.behavior, BehaviorKind::Sifb(_))
    }
}
