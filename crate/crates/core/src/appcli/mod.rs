//! Network descriptions, the per-device runner and its command loop, and
//! the command-line front ends.

pub mod bundled;
pub mod netdef;
pub mod repl;
pub mod runner;

use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;

pub use bundled::{bundled_nets, tc1_local_net, tc1_net, tc2_local_net, tc2_net, LinkKind, ACCOUNTS};
pub use netdef::{load_netdef, netdef_to_text, parse_netdef, slice_for_device, NetDefDocument, NetDefError};
pub use repl::{repl_execute, ReplReply, PRESS_TIMEOUT};
pub use runner::{run_device, RunOutcome, RunnerOptions};

use crate::fbcore::RuntimeOptions;
use crate::xmppmini::{broker_start, parse_accounts, DEFAULT_XMPP_PORT};

/// Runs one device of a function block network.
#[derive(Debug, Parser)]
#[command(name = "fbrun")]
pub struct FbrunArgs {
    /// Network description file.
    #[arg(long)]
    pub net: PathBuf,
    /// Device to run.
    #[arg(long)]
    pub device: String,
    /// Keep running when a service block fails to initialize.
    #[arg(long)]
    pub tolerate_init_errors: bool,
    /// Commands to execute before reading stdin.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Client response timeout in milliseconds.
    #[arg(long, default_value_t = 1000)]
    pub client_timeout_ms: u64,
}

fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .try_init();
}

pub fn fbrun_main() -> ExitCode {
    init_logging();
    let args = FbrunArgs::parse();
    let doc = match load_netdef(&args.net) {
        Ok(doc) => doc,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(RunOutcome::BadNetwork.exit_code());
        }
    };
    let script = match &args.script {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => Some(text),
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => None,
    };
    let options = RunnerOptions {
        tolerate_init_errors: args.tolerate_init_errors,
        script,
        stay_on_eof: true,
        runtime: RuntimeOptions {
            client_timeout: Duration::from_millis(args.client_timeout_ms),
            ..RuntimeOptions::default()
        },
    };
    let stdin = BufReader::new(std::io::stdin());
    match run_device(&doc, &args.device, options, stdin, std::io::stdout()) {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Minimal XMPP broker.
#[derive(Debug, Parser)]
#[command(name = "xmppd")]
pub struct XmppdArgs {
    /// Port to listen on; 0 picks a free one.
    #[arg(long, default_value_t = DEFAULT_XMPP_PORT)]
    pub port: u16,
    /// Accounts file (`bareJid password` per line); defaults to the
    /// accounts of the bundled networks.
    #[arg(long)]
    pub accounts: Option<PathBuf>,
}

/// Starts the broker, prints `listening <port>` and serves until killed.
pub fn xmppd_run(args: &XmppdArgs) -> Result<(), String> {
    let text = match &args.accounts {
        Some(path) => std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?,
        None => ACCOUNTS.to_string(),
    };
    let accounts = parse_accounts(&text).map_err(|e| e.to_string())?;
    let broker = broker_start(args.port, accounts).map_err(|e| e.to_string())?;
    let mut out = std::io::stdout();
    writeln!(out, "listening {}", broker.port()).map_err(|e| e.to_string())?;
    out.flush().map_err(|e| e.to_string())?;
    loop {
        std::thread::park();
    }
}

pub fn xmppd_main() -> ExitCode {
    init_logging();
    let args = XmppdArgs::parse();
    match xmppd_run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
