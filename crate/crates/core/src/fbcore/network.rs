use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use super::types::{resolve_type, BehaviorKind, FbTypeDecl};
use crate::value::{Value, ValueKind};

/// `FB.PIN`
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PinRef {
    pub fb: String,
    pub pin: String,
}

impl PinRef {
    pub fn new(fb: &str, pin: &str) -> Self {
        PinRef { fb: fb.to_string(), pin: pin.to_string() }
    }
}

impl fmt::Display for PinRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.fb, self.pin)
    }
}

impl FromStr for PinRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('.') {
            Some((fb, pin)) if !fb.is_empty() && !pin.is_empty() && !pin.contains('.') => Ok(PinRef::new(fb, pin)),
            _ => Err(format!("{s:?} is not FB.PIN")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connection {
    pub from: PinRef,
    pub to: PinRef,
}

impl Connection {
    pub fn new(from: &str, to: &str) -> Result<Self, String> {
        Ok(Connection { from: from.parse()?, to: to.parse()? })
    }
}

impl fmt::Display for Connection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.from, self.to)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceDecl {
    pub name: String,
    pub host: String,
}

/// An FB instance as written in a network description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FbDecl {
    pub name: String,
    pub type_name: String,
    pub device: String,
    /// Initial values of data inputs, as literals.
    pub params: Vec<(String, String)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FbNetwork {
    pub devices: Vec<DeviceDecl>,
    pub fbs: Vec<FbDecl>,
    pub events: Vec<Connection>,
    pub data: Vec<Connection>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetworkError {
    #[error("unknown device {0:?}")]
    UnknownDevice(String),
    #[error("device {0:?} is declared twice")]
    DuplicateDevice(String),
    #[error("FB {0:?} is declared twice")]
    DuplicateFb(String),
    #[error("FB {fb}: unknown type {type_name:?}")]
    UnknownType { fb: String, type_name: String },
    #[error("FB {fb}: unknown device {device:?}")]
    FbDevice { fb: String, device: String },
    #[error("connection {conn}: {reason}")]
    Dangling { conn: String, reason: String },
    #[error("connection {0} crosses devices")]
    CrossDevice(String),
    #[error("data input {0} has more than one source")]
    MultipleSources(String),
    #[error("connection {conn}: {from} output feeds {to} input")]
    KindMismatch { conn: String, from: ValueKind, to: ValueKind },
    #[error("FB {fb}: parameter {param}: {reason}")]
    BadParam { fb: String, param: String, reason: String },
}

/// A validated network with concrete pin kinds for every instance.
#[derive(Debug, Clone)]
pub struct ResolvedNetwork {
    pub net: FbNetwork,
    /// One declaration per entry of `net.fbs`, generic pins resolved.
    pub decls: Vec<FbTypeDecl>,
    /// Parsed parameters per entry of `net.fbs`, as (data input index, value).
    pub params: Vec<Vec<(usize, Value)>>,
}

impl ResolvedNetwork {
    pub fn fb_index(&self, name: &str) -> Option<usize> {
        self.net.fbs.iter().position(|f| f.name == name)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    Event,
    Data,
}

impl FbNetwork {
    pub fn device(&self, name: &str) -> Option<&DeviceDecl> {
        self.devices.iter().find(|d| d.name == name)
    }

    pub fn fb(&self, name: &str) -> Option<&FbDecl> {
        self.fbs.iter().find(|f| f.name == name)
    }

    /// Checks every structural invariant and resolves pin kinds.
    pub fn resolve(&self) -> Result<ResolvedNetwork, NetworkError> {
        let mut device_names = HashSet::new();
        for d in &self.devices {
            if !device_names.insert(d.name.as_str()) {
                return Err(NetworkError::DuplicateDevice(d.name.clone()));
            }
        }
        let mut index = HashMap::new();
        let mut decls = Vec::with_capacity(self.fbs.len());
        for (i, fb) in self.fbs.iter().enumerate() {
            if index.insert(fb.name.as_str(), i).is_some() {
                return Err(NetworkError::DuplicateFb(fb.name.clone()));
            }
            if !device_names.contains(fb.device.as_str()) {
                return Err(NetworkError::FbDevice { fb: fb.name.clone(), device: fb.device.clone() });
            }
            let decl = resolve_type(&fb.type_name)
                .ok_or_else(|| NetworkError::UnknownType { fb: fb.name.clone(), type_name: fb.type_name.clone() })?;
            decls.push(decl);
        }

        let endpoint = |conn: &Connection, dir: Dir| -> Result<(PinIndex, PinIndex), NetworkError> {
            let dangling = |reason: String| NetworkError::Dangling { conn: conn.to_string(), reason };
            let src = *index.get(conn.from.fb.as_str()).ok_or_else(|| dangling(format!("no FB {}", conn.from.fb)))?;
            let dst = *index.get(conn.to.fb.as_str()).ok_or_else(|| dangling(format!("no FB {}", conn.to.fb)))?;
            let (out, inp) = match dir {
                Dir::Event => (decls[src].event_output(&conn.from.pin), decls[dst].event_input(&conn.to.pin)),
                Dir::Data => (decls[src].data_output(&conn.from.pin), decls[dst].data_input(&conn.to.pin)),
            };
            let what = if dir == Dir::Event { "event" } else { "data" };
            let out = out.ok_or_else(|| dangling(format!("{} is not an {what} output", conn.from)))?;
            let inp = inp.ok_or_else(|| dangling(format!("{} is not an {what} input", conn.to)))?;
            if self.fbs[src].device != self.fbs[dst].device {
                return Err(NetworkError::CrossDevice(conn.to_string()));
            }
            Ok(((src, out), (dst, inp)))
        };

        for conn in &self.events {
            endpoint(conn, Dir::Event)?;
        }
        let mut links = Vec::with_capacity(self.data.len());
        let mut driven = HashSet::new();
        for conn in &self.data {
            let link = endpoint(conn, Dir::Data)?;
            if !driven.insert(link.1) {
                return Err(NetworkError::MultipleSources(conn.to.to_string()));
            }
            links.push(link);
        }

        resolve_generic_kinds(&mut decls, &links);
        for (conn, ((src, out), (dst, inp))) in self.data.iter().zip(&links) {
            let from = decls[*src].data_outputs[*out].1;
            let to = decls[*dst].data_inputs[*inp].1;
            if from != to {
                return Err(NetworkError::KindMismatch { conn: conn.to_string(), from, to });
            }
        }

        let mut params = Vec::with_capacity(self.fbs.len());
        for (i, fb) in self.fbs.iter().enumerate() {
            params.push(parse_params(fb, &decls[i], i, &driven)?);
        }
        Ok(ResolvedNetwork { net: self.clone(), decls, params })
    }
}

/// (FB index, pin index)
type PinIndex = (usize, usize);

/// Propagates kinds across data connections into generic SIFB pins until
/// nothing changes; pins left open default to BOOL.
fn resolve_generic_kinds(decls: &mut [FbTypeDecl], links: &[(PinIndex, PinIndex)]) {
    let mut known: HashSet<(bool, usize, usize)> = HashSet::new();
    for (f, decl) in decls.iter().enumerate() {
        for (i, (name, _)) in decl.data_inputs.iter().enumerate() {
            if !decl.is_generic_pin(name) {
                known.insert((true, f, i));
            }
        }
        for (o, (name, _)) in decl.data_outputs.iter().enumerate() {
            if !decl.is_generic_pin(name) {
                known.insert((false, f, o));
            }
        }
    }
    loop {
        let mut changed = false;
        for &((src, out), (dst, inp)) in links {
            let src_known = known.contains(&(false, src, out));
            let dst_known = known.contains(&(true, dst, inp));
            if src_known && !dst_known {
                decls[dst].data_inputs[inp].1 = decls[src].data_outputs[out].1;
                known.insert((true, dst, inp));
                changed = true;
            } else if dst_known && !src_known {
                decls[src].data_outputs[out].1 = decls[dst].data_inputs[inp].1;
                known.insert((false, src, out));
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

fn parse_params(
    fb: &FbDecl,
    decl: &FbTypeDecl,
    fb_index: usize,
    driven: &HashSet<(usize, usize)>,
) -> Result<Vec<(usize, Value)>, NetworkError> {
    let bad =
        |param: &str, reason: String| NetworkError::BadParam { fb: fb.name.clone(), param: param.to_string(), reason };
    let mut seen = HashSet::new();
    let mut values = Vec::new();
    for (name, literal) in &fb.params {
        if !seen.insert(name.as_str()) {
            return Err(bad(name, "given twice".into()));
        }
        let pin = decl.data_input(name).ok_or_else(|| bad(name, "not a data input".into()))?;
        if driven.contains(&(fb_index, pin)) {
            return Err(bad(name, "input is also connected".into()));
        }
        let value = decl.data_inputs[pin].1.parse_literal(literal).map_err(|e| bad(name, e.to_string()))?;
        values.push((pin, value));
    }
    if decl.behavior == BehaviorKind::ECycle {
        let dt = values.iter().find(|(p, _)| *p == 0).and_then(|(_, v)| v.as_i64());
        if !matches!(dt, Some(ms) if ms > 0) {
            return Err(bad("DT", "must be a positive number of milliseconds".into()));
        }
    }
    Ok(values)
}
