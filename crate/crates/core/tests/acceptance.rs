//! One PASS/FAIL line per acceptance criterion.
//!
//! The soak (criterion 8) runs for ten minutes in the background while the
//! other criteria execute, so its line comes last. Multi-process criteria
//! run the real `fbrun` binary; the broker process is this executable
//! started again in broker mode.

#[path = "support/codec.rs"]
mod codec;
#[path = "support/fuzz.rs"]
mod fuzz;
#[path = "support/oracles.rs"]
mod oracles;

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, ExitCode, Stdio};
use std::sync::mpsc::{self, Receiver};
use std::time::{Duration, Instant};

use fbcomm::appcli::{netdef_to_text, tc1_net, tc2_net, LinkKind};
use fbcomm::bench::{measure_latency, measure_payload, soak_run, BenchPattern, BenchTransport, SoakConfig};
use fbcomm::fbcore::FbNetwork;
use fbcomm::transports::tcp::free_local_port;
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

const ROLE_VAR: &str = "FBCOMM_ACCEPTANCE_ROLE";
/// Shortens the soak for local runs; anything under ten minutes fails.
const SOAK_SECS_VAR: &str = "FBCOMM_SOAK_SECS";
const FBRUN: &str = env!("CARGO_BIN_EXE_fbrun");

type Verdict = Result<String, String>;
type Criterion = (usize, &'static str, fn() -> Verdict);

struct Proc {
    name: String,
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Proc {
    fn spawn(mut command: Command, name: &str) -> Result<Proc, String> {
        let mut child = command
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| format!("{name}: {e}"))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines().map_while(Result::ok) {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Proc { name: name.to_string(), child, stdin, lines })
    }

    fn broker() -> Result<(Proc, u16), String> {
        let mut command = Command::new(std::env::current_exe().map_err(|e| e.to_string())?);
        command.env(ROLE_VAR, "xmppd").args(["--port", "0"]);
        let mut proc = Proc::spawn(command, "xmppd")?;
        let line = proc.line(Duration::from_secs(10))?;
        let port = line
            .strip_prefix("listening ")
            .and_then(|p| p.parse().ok())
            .ok_or_else(|| format!("xmppd: unexpected {line:?}"))?;
        Ok((proc, port))
    }

    fn device(net: &Path, device: &str) -> Result<Proc, String> {
        let mut command = Command::new(FBRUN);
        command.arg("--net").arg(net).args(["--device", device]);
        let mut proc = Proc::spawn(command, device)?;
        let line = proc.line(Duration::from_secs(15))?;
        if line != format!("ready {device}") {
            return Err(format!("{device}: {line}"));
        }
        Ok(proc)
    }

    fn line(&mut self, timeout: Duration) -> Result<String, String> {
        self.lines.recv_timeout(timeout).map_err(|_| format!("{}: no output", self.name))
    }

    fn command(&mut self, line: &str) -> Result<String, String> {
        writeln!(self.stdin, "{line}").map_err(|e| format!("{}: {e}", self.name))?;
        self.stdin.flush().map_err(|e| format!("{}: {e}", self.name))?;
        self.line(Duration::from_secs(10))
    }

    fn press(&mut self, input: &str) -> Result<(), String> {
        match self.command(&format!("press {input}"))?.as_str() {
            "ok" => Ok(()),
            other => Err(format!("{}: press {input}: {other}", self.name)),
        }
    }

    /// Polls `leds` until `want` holds or `within` elapses; returns the wait.
    fn await_leds(&mut self, want: &[(&str, bool)], within: Duration) -> Result<Duration, String> {
        let start = Instant::now();
        loop {
            let leds = self.command("leds")?;
            if want.iter().all(|(name, on)| led(&leds, name) == Some(*on)) {
                return Ok(start.elapsed());
            }
            if start.elapsed() > within {
                return Err(format!("{}: wanted {want:?} within {within:?}, have {leds}", self.name));
            }
            std::thread::sleep(Duration::from_millis(20));
        }
    }
}

impl Drop for Proc {
    fn drop(&mut self) {
        let _ = writeln!(self.stdin, "quit");
        let _ = self.stdin.flush();
        let deadline = Instant::now() + Duration::from_secs(2);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn led(leds: &str, name: &str) -> Option<bool> {
    leds.split_whitespace().find_map(|kv| match kv.split_once('=') {
        Some((k, "1")) if k == name => Some(true),
        Some((k, "0")) if k == name => Some(false),
        _ => None,
    })
}

struct NetFile(PathBuf);

impl NetFile {
    fn write(net: &FbNetwork, tag: &str) -> Result<NetFile, String> {
        let path = std::env::temp_dir().join(format!("fbcomm-acceptance-{}-{tag}.net", std::process::id()));
        std::fs::write(&path, netdef_to_text(net, tag)).map_err(|e| e.to_string())?;
        Ok(NetFile(path))
    }
}

impl Drop for NetFile {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

fn tc1_xmpp() -> Verdict {
    let start = Instant::now();
    let (_broker, port) = Proc::broker()?;
    let net = NetFile::write(&tc1_net(LinkKind::Xmpp { broker_port: port }), "tc1")?;
    let mut cem = Proc::device(&net.0, "cem")?;
    let mut netop = Proc::device(&net.0, "netop")?;
    let mut worst = Duration::ZERO;
    for (input, c, d) in [("I_OV", true, false), ("I_NV", false, false), ("I_UV", false, true)] {
        let pressed = Instant::now();
        netop.press(input)?;
        cem.await_leds(&[("Q_C", c), ("Q_D", d)], Duration::from_secs(2).saturating_sub(pressed.elapsed()))?;
        worst = worst.max(pressed.elapsed());
    }
    let total = start.elapsed();
    if total > Duration::from_secs(60) {
        return Err(format!("took {total:?}"));
    }
    Ok(format!("slowest press-to-led {} ms, total {:.1} s", worst.as_millis(), total.as_secs_f64()))
}

fn tc2_xmpp() -> Verdict {
    let start = Instant::now();
    let (_broker, port) = Proc::broker()?;
    let net = NetFile::write(&tc2_net(LinkKind::Xmpp { broker_port: port }), "tc2")?;
    let mut cem = Proc::device(&net.0, "cem")?;
    let mut display = Proc::device(&net.0, "display")?;
    display.await_leds(&[("Q_LOD", false)], Duration::from_secs(3))?;
    let mut worst = Duration::ZERO;
    for press in 1..=8 {
        cem.press("I_LO")?;
        let on = press % 2 == 1;
        cem.await_leds(&[("Q_LO", on)], Duration::ZERO)?;
        let waited = display.await_leds(&[("Q_LOD", on)], Duration::from_millis(1500))?;
        worst = worst.max(waited);
    }
    let total = start.elapsed();
    if total > Duration::from_secs(60) {
        return Err(format!("took {total:?}"));
    }
    Ok(format!("8 presses, slowest toggle-to-display {} ms, total {:.1} s", worst.as_millis(), total.as_secs_f64()))
}

/// Presses `inputs` on `source` one at a time and records `leds` of
/// `sink` after a fixed settling time. The cem device starts first.
fn transcript(
    net: &FbNetwork,
    tag: &str,
    source: &str,
    sink: &str,
    inputs: &[&str],
    settle_ms: u64,
) -> Result<String, String> {
    let file = NetFile::write(net, tag)?;
    let (mut sender, mut receiver) = if source == "cem" {
        let sender = Proc::device(&file.0, source)?;
        (sender, Proc::device(&file.0, sink)?)
    } else {
        let receiver = Proc::device(&file.0, sink)?;
        (Proc::device(&file.0, source)?, receiver)
    };
    std::thread::sleep(Duration::from_millis(settle_ms));
    let mut out = format!("start {}\n", receiver.command("leds")?);
    for input in inputs {
        sender.press(input)?;
        std::thread::sleep(Duration::from_millis(settle_ms));
        out.push_str(&format!("press {input} {}\n", receiver.command("leds")?));
    }
    Ok(out)
}

fn transport_equivalence() -> Verdict {
    let tc1_presses = ["I_OV", "I_UV", "I_NV", "I_UV", "I_OV", "I_OV", "I_NV"];
    let tc2_presses = ["I_LO", "I_LO", "I_LO", "I_LO", "I_LO"];
    let udp = transcript(
        &tc1_net(LinkKind::Ip { port: free_local_port().map_err(|e| e.to_string())? }),
        "tc1-udp",
        "netop",
        "cem",
        &tc1_presses,
        1200,
    )?;
    let tc1_over_xmpp = {
        let (_broker, port) = Proc::broker()?;
        transcript(&tc1_net(LinkKind::Xmpp { broker_port: port }), "tc1-xmpp", "netop", "cem", &tc1_presses, 1200)?
    };
    if udp != tc1_over_xmpp {
        return Err(format!("TC1 transcripts differ:\n{udp}---\n{tc1_over_xmpp}"));
    }
    let tcp = transcript(
        &tc2_net(LinkKind::Ip { port: free_local_port().map_err(|e| e.to_string())? }),
        "tc2-tcp",
        "cem",
        "display",
        &tc2_presses,
        2200,
    )?;
    let tc2_over_xmpp = {
        let (_broker, port) = Proc::broker()?;
        transcript(&tc2_net(LinkKind::Xmpp { broker_port: port }), "tc2-xmpp", "cem", "display", &tc2_presses, 2200)?
    };
    if tcp != tc2_over_xmpp {
        return Err(format!("TC2 transcripts differ:\n{tcp}---\n{tc2_over_xmpp}"));
    }
    Ok(format!("TC1 udp == xmpp ({} lines), TC2 tcp == xmpp ({} lines)", udp.lines().count(), tcp.lines().count()))
}

fn codecs() -> Verdict {
    codec::check_ber(10_000)?;
    codec::check_base64(1_000)?;
    codec::check_rfc4648()?;
    Ok("10000 BER lists, 1000 Base64 frames, 7 RFC 4648 vectors".into())
}

fn ids() -> Verdict {
    codec::check_printed_ids()?;
    Ok(format!("{} printed IDs reparsed and reserialized", codec::PRINTED_IDS.len()))
}

fn payload() -> Verdict {
    let bytes = |t, p| measure_payload(t, p).map(|r| r.bytes).map_err(|e| format!("{t} {p}: {e}"));
    let udp = bytes(BenchTransport::Udp, BenchPattern::Async)?;
    let xa = bytes(BenchTransport::Xmpp, BenchPattern::Async)?;
    let tcp = bytes(BenchTransport::Tcp, BenchPattern::Sync)?;
    let xs = bytes(BenchTransport::Xmpp, BenchPattern::Sync)?;
    let summary = format!("udp {udp} B, xmpp async {xa} B, tcp {tcp} B, xmpp sync {xs} B");
    if udp > 100 || udp == 0 || tcp == 0 || xa < 5 * udp || xs < 2 * tcp {
        return Err(summary);
    }
    Ok(format!("{summary}, ratios {:.1} and {:.1}", xa as f64 / udp as f64, xs as f64 / tcp as f64))
}

fn latency() -> Verdict {
    let udp = measure_latency(BenchTransport::Udp, BenchPattern::Async, 100).map_err(|e| format!("udp: {e}"))?;
    let xmpp = measure_latency(BenchTransport::Xmpp, BenchPattern::Async, 100).map_err(|e| format!("xmpp: {e}"))?;
    let (Some(u), Some(x)) = (udp.median(), xmpp.median()) else {
        return Err(format!("no samples: udp lost {}, xmpp lost {}", udp.lost, xmpp.lost));
    };
    let summary = format!("median udp {u:.3} ms, xmpp {x:.3} ms, lost {}/{}", udp.lost, xmpp.lost);
    if udp.flagged() || xmpp.flagged() || u >= 5.0 || x >= 100.0 || x <= u {
        return Err(summary);
    }
    Ok(summary)
}

fn soak() -> Verdict {
    let secs = std::env::var(SOAK_SECS_VAR).ok().and_then(|s| s.parse().ok()).unwrap_or(600);
    let report = soak_run(&SoakConfig::new(PathBuf::from(FBRUN), BenchTransport::Xmpp, Duration::from_secs(secs)))
        .map_err(|e| e.to_string())?;
    if let Some(why) = report.unsupported {
        return Err(why);
    }
    let growth: Vec<String> = report
        .trends
        .iter()
        .map(|t| match t.growth {
            Some(g) => format!("{} {:+.2}%", t.device, g * 100.0),
            None => format!("{} n/a", t.device),
        })
        .collect();
    let summary = format!("{secs} s, {} presses, growth {}", report.presses, growth.join(", "));
    let ok = secs >= 600
        && report.trends.len() == 2
        && report.presses > 0
        && report.trends.iter().all(|t| t.growth.is_some_and(|g| g < 0.10));
    if ok {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn broker_fuzz() -> Verdict {
    let mut runner = TestRunner::default();
    let workload = fuzz::workload(1000).new_tree(&mut runner).map_err(|e| e.to_string())?.current();
    let summary = fuzz::run_workload(&workload)?;
    Ok(format!(
        "{} stanzas, {} presences fanned out, {} iq exchanges",
        summary.stanzas, summary.presences_delivered, summary.iq_exchanges
    ))
}

fn logic() -> Verdict {
    let start = Instant::now();
    oracles::check_rs_table()?;
    let sequences = oracles::check_tc1_sequences()?;
    oracles::check_tc2_parity()?;
    let took = start.elapsed();
    if took >= Duration::from_secs(10) {
        return Err(format!("took {took:?}"));
    }
    Ok(format!("8 RS cases, {sequences} TC1 sequences, parity 0..=8 in {} ms", took.as_millis()))
}

fn report(number: usize, name: &str, verdict: &Verdict) -> bool {
    match verdict {
        Ok(detail) => println!("criterion {number:>2}: PASS {name}: {detail}"),
        Err(detail) => println!("criterion {number:>2}: FAIL {name}: {detail}"),
    }
    verdict.is_ok()
}

fn main() -> ExitCode {
    if std::env::var(ROLE_VAR).as_deref() == Ok("xmppd") {
        return fbcomm::appcli::xmppd_main();
    }
    let soak = std::thread::spawn(soak);
    let criteria: [Criterion; 9] = [
        (1, "TC1 over XMPP", tc1_xmpp),
        (2, "TC2 over XMPP", tc2_xmpp),
        (3, "transport equivalence", transport_equivalence),
        (4, "codec properties", codecs),
        (5, "ID grammar", ids),
        (6, "payload ordering", payload),
        (7, "latency ordering", latency),
        (9, "broker fuzz", broker_fuzz),
        (10, "logic oracles", logic),
    ];
    let mut all = true;
    for (n, name, f) in criteria {
        all &= report(n, name, &f());
    }
    let soak = soak.join().unwrap_or_else(|_| Err("soak thread panicked".into()));
    all &= report(8, "soak stability", &soak);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
