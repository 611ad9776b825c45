use std::time::Duration;

use crate::fbcore::RuntimeHandle;

/// How long `press` waits for the input to be sampled.
pub const PRESS_TIMEOUT: Duration = Duration::from_secs(3);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplReply {
    /// Nothing to print (blank line or comment).
    Silent,
    Line(String),
    Quit,
}

/// Executes one command line against a running resource.
///
/// Commands: `press <input>`, `leds`, `stats`, `sleep <ms>`, `quit`.
pub fn repl_execute(handle: &RuntimeHandle, line: &str) -> ReplReply {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return ReplReply::Silent;
    }
    let mut words = line.split_whitespace();
    let command = words.next().unwrap_or_default();
    let args: Vec<&str> = words.collect();
    let reply = match (command, args.as_slice()) {
        ("press", [input]) => match handle.press(input, PRESS_TIMEOUT) {
            Ok(()) => "ok".to_string(),
            Err(e) => format!("error: {e}"),
        },
        ("leds", []) => {
            handle.leds().iter().map(|(name, on)| format!("{name}={}", u8::from(*on))).collect::<Vec<_>>().join(" ")
        }
        ("stats", []) => handle.stats().to_string(),
        ("sleep", [ms]) => match ms.parse::<u64>() {
            Ok(ms) => {
                std::thread::sleep(Duration::from_millis(ms));
                "ok".to_string()
            }
            Err(_) => format!("error: bad duration {ms:?}"),
        },
        ("quit", []) => return ReplReply::Quit,
        ("press" | "leds" | "stats" | "sleep" | "quit", _) => format!("error: wrong arguments for {command}"),
        _ => format!("error: unknown command {command:?}"),
    };
    ReplReply::Line(reply)
}
