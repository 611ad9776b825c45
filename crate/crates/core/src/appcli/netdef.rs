//! The line-oriented network description format.
//!
//! ```text
//! # comment
//! [devices]
//! name=netop host=127.0.0.1
//! [fbs]
//! name=CYCLE type=E_CYCLE device=netop DT=500
//! name=PUB type=PUBLISH_3 device=netop ID="fbdk[].ip[239.0.0.1:61000]"
//! [events]
//! from=CYCLE.EO to=I_OV.REQ
//! [data]
//! from=I_OV.IN to=RS_OV.S
//! ```
//!
//! Values containing whitespace, `"` or `#` are double-quoted, with `\"`
//! and `\\` escapes. Keys other than `name`, `type` and `device` in `[fbs]`
//! set data inputs.

use std::fmt::Write as _;
use std::path::Path;

use crate::commstack::{parse_comm_id, IdError};
use crate::fbcore::{Connection, DeviceDecl, FbDecl, FbNetwork, NetworkError, ResolvedNetwork};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetDefError {
    #[error("line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{0}")]
    Invalid(#[from] NetworkError),
    #[error("line {line}: FB {fb}: invalid ID: {source}")]
    InvalidId { line: usize, fb: String, source: IdError },
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
}

/// A parsed and validated network description.
#[derive(Debug, Clone)]
pub struct NetDefDocument {
    pub net: FbNetwork,
    pub resolved: ResolvedNetwork,
    /// Source line of each entry of `net.fbs`.
    pub fb_lines: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Devices,
    Fbs,
    Events,
    Data,
}

/// Splits a line into `key=value` pairs with their 1-based columns.
fn tokenize(line: &str, line_no: usize) -> Result<Vec<(usize, String, String)>, NetDefError> {
    let syntax = |col: usize, message: &str| NetDefError::Syntax { line: line_no, col, message: message.to_string() };
    let chars: Vec<(usize, char)> = line.char_indices().collect();
    let mut pairs = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (offset, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        let col = line[..offset].chars().count() + 1;
        let mut key = String::new();
        while i < chars.len() && chars[i].1 != '=' && !chars[i].1.is_whitespace() {
            key.push(chars[i].1);
            i += 1;
        }
        if i >= chars.len() || chars[i].1 != '=' {
            return Err(syntax(col, &format!("expected key=value, found {key:?}")));
        }
        if key.is_empty() {
            return Err(syntax(col, "empty key"));
        }
        i += 1;
        let mut value = String::new();
        if i < chars.len() && chars[i].1 == '"' {
            i += 1;
            loop {
                match chars.get(i).map(|c| c.1) {
                    None => return Err(syntax(col, "unterminated quoted value")),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') => match chars.get(i + 1).map(|c| c.1) {
                        Some(e @ ('"' | '\\')) => {
                            value.push(e);
                            i += 2;
                        }
                        _ => return Err(syntax(col, "bad escape in quoted value")),
                    },
                    Some(other) => {
                        value.push(other);
                        i += 1;
                    }
                }
            }
            if i < chars.len() && !chars[i].1.is_whitespace() {
                return Err(syntax(col, "text after closing quote"));
            }
        } else {
            while i < chars.len() && !chars[i].1.is_whitespace() {
                if chars[i].1 == '"' {
                    return Err(syntax(col, "quote inside unquoted value"));
                }
                value.push(chars[i].1);
                i += 1;
            }
        }
        pairs.push((col, key, value));
    }
    Ok(pairs)
}

fn take(pairs: &mut Vec<(usize, String, String)>, key: &str) -> Option<String> {
    let pos = pairs.iter().position(|(_, k, _)| k == key)?;
    Some(pairs.remove(pos).2)
}

/// Parses and validates a network description.
pub fn parse_netdef(text: &str) -> Result<NetDefDocument, NetDefError> {
    let mut net = FbNetwork::default();
    let mut fb_lines = Vec::new();
    let mut section = Section::None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if trimmed.starts_with('[') {
            let col = raw.find('[').unwrap_or(0) + 1;
            section = match trimmed {
                "[devices]" => Section::Devices,
                "[fbs]" => Section::Fbs,
                "[events]" => Section::Events,
                "[data]" => Section::Data,
                other => {
                    return Err(NetDefError::Syntax { line: line_no, col, message: format!("unknown section {other}") })
                }
            };
            continue;
        }
        let mut pairs = tokenize(raw, line_no)?;
        let first_col = pairs.first().map(|p| p.0).unwrap_or(1);
        let missing =
            |key: &str| NetDefError::Syntax { line: line_no, col: first_col, message: format!("missing {key}=") };
        let mut seen = std::collections::HashSet::new();
        for (col, key, _) in &pairs {
            if !seen.insert(key.clone()) {
                return Err(NetDefError::Syntax { line: line_no, col: *col, message: format!("duplicate key {key}") });
            }
        }
        let leftover = |pairs: &[(usize, String, String)]| -> Result<(), NetDefError> {
            match pairs.first() {
                Some((col, key, _)) => {
                    Err(NetDefError::Syntax { line: line_no, col: *col, message: format!("unexpected key {key}") })
                }
                None => Ok(()),
            }
        };
        match section {
            Section::None => {
                return Err(NetDefError::Syntax {
                    line: line_no,
                    col: first_col,
                    message: "entry outside a section".into(),
                })
            }
            Section::Devices => {
                let name = take(&mut pairs, "name").ok_or_else(|| missing("name"))?;
                let host = take(&mut pairs, "host").ok_or_else(|| missing("host"))?;
                leftover(&pairs)?;
                net.devices.push(DeviceDecl { name, host });
            }
            Section::Fbs => {
                let name = take(&mut pairs, "name").ok_or_else(|| missing("name"))?;
                let type_name = take(&mut pairs, "type").ok_or_else(|| missing("type"))?;
                let device = take(&mut pairs, "device").ok_or_else(|| missing("device"))?;
                let params = pairs.into_iter().map(|(_, k, v)| (k, v)).collect();
                net.fbs.push(FbDecl { name, type_name, device, params });
                fb_lines.push(line_no);
            }
            Section::Events | Section::Data => {
                let from = take(&mut pairs, "from").ok_or_else(|| missing("from"))?;
                let to = take(&mut pairs, "to").ok_or_else(|| missing("to"))?;
                leftover(&pairs)?;
                let conn = Connection::new(&from, &to).map_err(|message| NetDefError::Syntax {
                    line: line_no,
                    col: first_col,
                    message,
                })?;
                if section == Section::Events {
                    net.events.push(conn);
                } else {
                    net.data.push(conn);
                }
            }
        }
    }
    let resolved = net.resolve()?;
    for (fb, line) in net.fbs.iter().zip(&fb_lines) {
        if !resolve_is_sifb(&fb.type_name) {
            continue;
        }
        let id = fb.params.iter().find(|(k, _)| k == "ID").map(|(_, v)| v.as_str()).unwrap_or("");
        parse_comm_id(id).map_err(|source| NetDefError::InvalidId { line: *line, fb: fb.name.clone(), source })?;
    }
    Ok(NetDefDocument { net, resolved, fb_lines })
}

fn resolve_is_sifb(type_name: &str) -> bool {
    crate::fbcore::resolve_type(type_name).is_some_and(|d| d.is_sifb())
}

pub fn load_netdef(path: &Path) -> Result<NetDefDocument, NetDefError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| NetDefError::Read { path: path.display().to_string(), message: e.to_string() })?;
    parse_netdef(&text)
}

fn quote(value: &str) -> String {
    let plain = !value.is_empty() && !value.chars().any(|c| c.is_whitespace() || c == '"' || c == '#' || c == '\\');
    if plain {
        return value.to_string();
    }
    let mut out = String::from("\"");
    for c in value.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Canonical text of a network; [`parse_netdef`] reads it back unchanged.
pub fn netdef_to_text(net: &FbNetwork, header: &str) -> String {
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("[devices]\n");
    for d in &net.devices {
        let _ = writeln!(out, "name={} host={}", quote(&d.name), quote(&d.host));
    }
    out.push_str("\n[fbs]\n");
    for fb in &net.fbs {
        let _ = write!(out, "name={} type={} device={}", quote(&fb.name), quote(&fb.type_name), quote(&fb.device));
        for (k, v) in &fb.params {
            let _ = write!(out, " {k}={}", quote(v));
        }
        out.push('\n');
    }
    out.push_str("\n[events]\n");
    for c in &net.events {
        let _ = writeln!(out, "from={} to={}", c.from, c.to);
    }
    out.push_str("\n[data]\n");
    for c in &net.data {
        let _ = writeln!(out, "from={} to={}", c.from, c.to);
    }
    out
}

/// The FBs of `device` and the connections among them.
pub fn slice_for_device(net: &FbNetwork, device: &str) -> Result<FbNetwork, NetworkError> {
    let Some(decl) = net.device(device) else {
        return Err(NetworkError::UnknownDevice(device.to_string()));
    };
    let fbs: Vec<FbDecl> = net.fbs.iter().filter(|f| f.device == device).cloned().collect();
    let local = |c: &&Connection| fbs.iter().any(|f| f.name == c.from.fb) && fbs.iter().any(|f| f.name == c.to.fb);
    Ok(FbNetwork {
        devices: vec![decl.clone()],
        events: net.events.iter().filter(local).cloned().collect(),
        data: net.data.iter().filter(local).cloned().collect(),
        fbs,
    })
}
