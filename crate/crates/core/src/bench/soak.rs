use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver};
use std::time::{Duration, Instant};

use crate::appcli::{netdef_to_text, tc1_net, LinkKind, ACCOUNTS};
use crate::transports::tcp::free_local_port;
use crate::xmppmini::{broker_start, parse_accounts};

use super::{BenchError, BenchTransport};

#[derive(Debug, Clone)]
pub struct SoakConfig {
    /// The `fbrun` executable.
    pub fbrun: PathBuf,
    pub transport: BenchTransport,
    pub duration: Duration,
    pub warmup: Duration,
    pub sample_every: Duration,
    pub press_every: Duration,
}

impl SoakConfig {
    pub fn new(fbrun: PathBuf, transport: BenchTransport, duration: Duration) -> Self {
        SoakConfig {
            fbrun,
            transport,
            duration,
            warmup: Duration::from_secs(60),
            sample_every: Duration::from_secs(10),
            press_every: Duration::from_secs(2),
        }
    }
}

/// Resident memory of one runner process over time.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceTrend {
    pub device: String,
    /// (seconds since start, resident kB)
    pub samples: Vec<(f64, u64)>,
    /// Least-squares slope over the post-warmup samples, kB per second.
    pub slope_kb_per_s: Option<f64>,
    pub warmup_rss_kb: Option<u64>,
    /// Fitted growth over the post-warmup window relative to `warmup_rss_kb`.
    pub growth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoakReport {
    pub transport: BenchTransport,
    pub duration: Duration,
    pub trends: Vec<DeviceTrend>,
    pub presses: usize,
    /// `leds` of the charging device after the last press.
    pub final_leds: Option<String>,
    /// Why memory could not be sampled.
    pub unsupported: Option<String>,
}

impl SoakReport {
    /// Largest relative growth across the runners.
    pub fn max_growth(&self) -> Option<f64> {
        self.trends.iter().filter_map(|t| t.growth).reduce(f64::max)
    }
}

/// VmRSS of `pid` in kB.
pub fn read_rss_kb(pid: u32) -> Option<u64> {
    let status = std::fs::read_to_string(format!("/proc/{pid}/status")).ok()?;
    let line = status.lines().find(|l| l.starts_with("VmRSS:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

/// Least-squares slope of `points`.
pub fn linear_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

pub fn device_trend(device: &str, samples: Vec<(f64, u64)>, warmup: Duration) -> DeviceTrend {
    let cut = warmup.as_secs_f64();
    let window: Vec<(f64, f64)> = samples.iter().filter(|s| s.0 >= cut).map(|s| (s.0, s.1 as f64)).collect();
    let warmup_rss_kb = samples.iter().find(|s| s.0 >= cut).map(|s| s.1);
    let slope = linear_slope(&window);
    let growth = match (slope, warmup_rss_kb, window.first(), window.last()) {
        (Some(slope), Some(rss), Some(first), Some(last)) if rss > 0 => Some(slope * (last.0 - first.0) / rss as f64),
        _ => None,
    };
    DeviceTrend { device: device.to_string(), samples, slope_kb_per_s: slope, warmup_rss_kb, growth }
}

struct Runner {
    device: String,
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Runner {
    fn spawn(fbrun: &Path, net: &Path, device: &str) -> Result<Runner, BenchError> {
        let mut child = Command::new(fbrun)
            .args(["--net"])
            .arg(net)
            .args(["--device", device])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
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
        let mut runner = Runner { device: device.to_string(), child, stdin, lines };
        let ready = format!("ready {device}");
        match runner.expect_line(Duration::from_secs(15)) {
            Some(line) if line == ready => Ok(runner),
            other => Err(BenchError::Transfer(format!("{device} did not start: {other:?}"))),
        }
    }

    fn expect_line(&mut self, timeout: Duration) -> Option<String> {
        self.lines.recv_timeout(timeout).ok()
    }

    fn command(&mut self, line: &str) -> Option<String> {
        writeln!(self.stdin, "{line}").ok()?;
        self.stdin.flush().ok()?;
        self.expect_line(Duration::from_secs(10))
    }

    fn rss(&self) -> Option<u64> {
        read_rss_kb(self.child.id())
    }
}

impl Drop for Runner {
    fn drop(&mut self) {
        let _ = writeln!(self.stdin, "quit");
        let _ = self.stdin.flush();
        let deadline = Instant::now() + Duration::from_secs(3);
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

struct TempFile(PathBuf);

impl Drop for TempFile {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

const PRESSES: [&str; 3] = ["I_OV", "I_NV", "I_UV"];

/// Runs TC1 as two runner processes, pressing a netop button every
/// `press_every` and sampling both processes' resident memory.
pub fn soak_run(config: &SoakConfig) -> Result<SoakReport, BenchError> {
    let mut report = SoakReport {
        transport: config.transport,
        duration: config.duration,
        trends: Vec::new(),
        presses: 0,
        final_leds: None,
        unsupported: None,
    };
    if read_rss_kb(std::process::id()).is_none() {
        report.unsupported = Some("resident memory is not readable from /proc on this platform".into());
        return Ok(report);
    }
    if config.duration.is_zero() {
        return Ok(report);
    }
    let (_broker, link) = match config.transport {
        BenchTransport::Xmpp => {
            let accounts = parse_accounts(ACCOUNTS).map_err(|e| BenchError::Transfer(e.to_string()))?;
            let broker = broker_start(0, accounts).map_err(|e| BenchError::Transfer(e.to_string()))?;
            let port = broker.port();
            (Some(broker), LinkKind::Xmpp { broker_port: port })
        }
        BenchTransport::Udp => (None, LinkKind::Ip { port: free_local_port()? }),
        BenchTransport::Tcp => return Err(BenchError::Transfer("TC1 has no tcp variant".into())),
    };
    let nanos = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).unwrap_or_default().as_nanos();
    let net = TempFile(std::env::temp_dir().join(format!("fbsoak-{}-{nanos}.net", std::process::id())));
    std::fs::write(&net.0, netdef_to_text(&tc1_net(link), "soak"))?;

    let mut cem = Runner::spawn(&config.fbrun, &net.0, "cem")?;
    let mut netop = Runner::spawn(&config.fbrun, &net.0, "netop")?;
    let mut samples: Vec<Vec<(f64, u64)>> = vec![Vec::new(), Vec::new()];
    let start = Instant::now();
    let mut next_sample = start;
    let mut next_press = start + config.press_every;
    while start.elapsed() < config.duration {
        let now = Instant::now();
        if now >= next_sample {
            let t = now.duration_since(start).as_secs_f64();
            for (i, runner) in [&cem, &netop].into_iter().enumerate() {
                let rss = runner.rss().ok_or_else(|| BenchError::Transfer(format!("{} exited", runner.device)))?;
                samples[i].push((t, rss));
            }
            next_sample += config.sample_every;
        }
        if now >= next_press {
            let input = PRESSES[report.presses % PRESSES.len()];
            match netop.command(&format!("press {input}")) {
                Some(reply) if reply == "ok" => report.presses += 1,
                other => return Err(BenchError::Transfer(format!("press {input}: {other:?}"))),
            }
            next_press += config.press_every;
        }
        let wake = next_sample.min(next_press).min(start + config.duration);
        std::thread::sleep(wake.saturating_duration_since(Instant::now()).min(Duration::from_millis(500)));
    }
    std::thread::sleep(Duration::from_millis(300));
    report.final_leds = cem.command("leds");
    report.trends =
        [&cem, &netop].iter().zip(samples).map(|(r, s)| device_trend(&r.device, s, config.warmup)).collect();
    Ok(report)
}
