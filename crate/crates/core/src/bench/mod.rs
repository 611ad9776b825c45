//! Payload, latency and memory-stability measurements of the transports,
//! and the plain-text report comparing them with the reference testbed.

pub mod fixture;
pub mod measure;
pub mod report;
pub mod soak;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Duration;

use clap::{Parser, ValueEnum};

use crate::commstack::CommError;

pub use fixture::Fixture;
pub use measure::{measure_latency, measure_payload, percentile, LatencyResult, PayloadResult, WARMUP_TRANSFERS};
pub use report::{BenchReport, REFERENCE_LATENCY_MS, REFERENCE_PAYLOAD_BYTES};
pub use soak::{device_trend, linear_slope, read_rss_kb, soak_run, DeviceTrend, SoakConfig, SoakReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum)]
pub enum BenchTransport {
    Xmpp,
    Udp,
    Tcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum)]
pub enum BenchPattern {
    Async,
    Sync,
}

impl BenchTransport {
    pub fn name(self) -> &'static str {
        match self {
            BenchTransport::Xmpp => "xmpp",
            BenchTransport::Udp => "udp",
            BenchTransport::Tcp => "tcp",
        }
    }
}

impl BenchPattern {
    pub fn name(self) -> &'static str {
        match self {
            BenchPattern::Async => "async",
            BenchPattern::Sync => "sync",
        }
    }

    /// The raw IP transport a pattern is compared against.
    pub fn baseline(self) -> BenchTransport {
        match self {
            BenchPattern::Async => BenchTransport::Udp,
            BenchPattern::Sync => BenchTransport::Tcp,
        }
    }
}

impl fmt::Display for BenchTransport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for BenchPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchTransport {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, false)
    }
}

impl FromStr for BenchPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("{0} does not support the {1} pattern")]
    Combination(BenchTransport, BenchPattern),
    #[error("transfer lost")]
    Lost,
    #[error("{0}")]
    Transfer(String),
    #[error(transparent)]
    Comm(#[from] CommError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchCommand {
    Payload,
    Latency,
    Soak,
}

/// Transport benchmarks.
#[derive(Debug, Parser)]
#[command(name = "fbbench")]
pub struct FbbenchArgs {
    pub command: BenchCommand,
    /// Transport under test; the raw IP baseline of the pattern is
    /// measured alongside for the ratio table.
    #[arg(long, value_enum, default_value_t = BenchTransport::Xmpp)]
    pub transport: BenchTransport,
    #[arg(long, value_enum, default_value_t = BenchPattern::Async)]
    pub pattern: BenchPattern,
    /// Latency repetitions.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Soak duration.
    #[arg(long, default_value_t = 10.0)]
    pub minutes: f64,
    /// Soak warmup in seconds.
    #[arg(long, default_value_t = 60)]
    pub warmup_secs: u64,
    /// The fbrun executable; defaults to the one built next to this program.
    #[arg(long)]
    pub fbrun: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn default_fbrun() -> PathBuf {
    let exe = std::env::current_exe().unwrap_or_default();
    let dir = exe.parent().unwrap_or(std::path::Path::new("."));
    // examples live one level below the binaries
    let dir = if dir.ends_with("examples") { dir.parent().unwrap_or(dir) } else { dir };
    dir.join("fbrun")
}

/// Runs the command described by `args` and returns the report.
pub fn run_bench(args: &FbbenchArgs) -> Result<BenchReport, BenchError> {
    let mut report = BenchReport::default();
    let mut transports = vec![args.transport];
    if args.command != BenchCommand::Soak {
        let other = if args.transport == BenchTransport::Xmpp { args.pattern.baseline() } else { BenchTransport::Xmpp };
        transports.push(other);
    }
    for transport in transports {
        match args.command {
            BenchCommand::Payload => report.payload.push(measure_payload(transport, args.pattern)?),
            BenchCommand::Latency => report.latency.push(measure_latency(transport, args.pattern, args.n)?),
            BenchCommand::Soak => {
                let mut config = SoakConfig::new(
                    args.fbrun.clone().unwrap_or_else(default_fbrun),
                    transport,
                    Duration::from_secs_f64(args.minutes.max(0.0) * 60.0),
                );
                config.warmup = Duration::from_secs(args.warmup_secs);
                report.soak.push(soak_run(&config)?);
            }
        }
    }
    Ok(report)
}

pub fn fbbench_main() -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let args = FbbenchArgs::parse();
    let report = match run_bench(&args) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let text = report.render();
    print!("{text}");
    if let Err(e) = std::fs::write(&args.out, &text) {
        eprintln!("error: cannot write {}: {e}", args.out.display());
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
