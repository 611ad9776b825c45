use std::io::{BufRead, Write};

use crate::fbcore::{instantiate_network, RuntimeOptions};
use crate::value::Value;

use super::netdef::{slice_for_device, NetDefDocument};
use super::repl::{repl_execute, ReplReply};

#[derive(Clone, Default)]
pub struct RunnerOptions {
    pub tolerate_init_errors: bool,
    /// Commands executed before reading the interactive input.
    pub script: Option<String>,
    /// Keep running after the interactive input ends.
    pub stay_on_eof: bool,
    pub runtime: RuntimeOptions,
}

/// Exit status of a runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Quit,
    EndOfInput,
    InitFailed,
    BadNetwork,
}

impl RunOutcome {
    pub fn exit_code(self) -> u8 {
        match self {
            RunOutcome::Quit | RunOutcome::EndOfInput => 0,
            RunOutcome::InitFailed => 1,
            RunOutcome::BadNetwork => 2,
        }
    }
}

/// Runs the resource for `device`: initializes its service blocks, prints
/// `ready <device>` and then serves commands from the script and `input`.
pub fn run_device(
    doc: &NetDefDocument,
    device: &str,
    options: RunnerOptions,
    input: impl BufRead,
    mut out: impl Write,
) -> std::io::Result<RunOutcome> {
    let built = slice_for_device(&doc.net, device)
        .and_then(|slice| instantiate_network(&slice, device, options.runtime.clone()));
    let mut rt = match built {
        Ok(rt) => rt,
        Err(e) => {
            writeln!(out, "error: {e}")?;
            return Ok(RunOutcome::BadNetwork);
        }
    };
    rt.cold_start();
    rt.run_until_idle(usize::MAX);

    let mut failed = false;
    for (i, (name, _)) in rt.fbs().iter().enumerate() {
        if !rt.decl(i).is_sifb() {
            continue;
        }
        if let Ok(Value::String(status)) = rt.output(name, "STATUS") {
            log::info!("{name}: {status}");
            if status != "INITIALIZED" {
                writeln!(out, "init-error {name} {status}")?;
                failed = true;
            }
        }
    }
    if failed && !options.tolerate_init_errors {
        out.flush()?;
        return Ok(RunOutcome::InitFailed);
    }

    let running = rt.spawn();
    let handle = running.handle().clone();
    writeln!(out, "ready {device}")?;
    out.flush()?;

    let script = options.script.unwrap_or_default();
    let script_lines = script.lines().map(|l| Ok(l.to_string()));
    for line in script_lines.chain(input.lines()) {
        let line: String = line?;
        match repl_execute(&handle, &line) {
            ReplReply::Silent => {}
            ReplReply::Line(text) => {
                writeln!(out, "{text}")?;
                out.flush()?;
            }
            ReplReply::Quit => {
                running.stop();
                return Ok(RunOutcome::Quit);
            }
        }
    }
    if options.stay_on_eof {
        log::info!("input closed, running headless");
        loop {
            std::thread::park();
        }
    }
    running.stop();
    Ok(RunOutcome::EndOfInput)
}
