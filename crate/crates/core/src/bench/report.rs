use std::fmt::Write as _;

use super::{BenchPattern, BenchTransport, LatencyResult, PayloadResult, SoakReport};

/// Reference testbed payloads in bytes: (transport, pattern, encrypted, bytes).
pub const REFERENCE_PAYLOAD_BYTES: [(&str, &str, bool, u64); 6] = [
    ("udp", "async", false, 45),
    ("xmpp", "async", false, 741),
    ("xmpp", "async", true, 346),
    ("tcp", "sync", false, 202),
    ("xmpp", "sync", false, 535),
    ("xmpp", "sync", true, 378),
];

/// Reference testbed publish/subscribe transmission times in ms.
pub const REFERENCE_LATENCY_MS: [(&str, &str, bool, u64); 3] =
    [("udp", "async", false, 3), ("xmpp", "async", false, 21), ("xmpp", "async", true, 25)];

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub payload: Vec<PayloadResult>,
    pub latency: Vec<LatencyResult>,
    pub soak: Vec<SoakReport>,
}

fn reference_payload(transport: &str, pattern: &str) -> Option<u64> {
    REFERENCE_PAYLOAD_BYTES.iter().find(|r| r.0 == transport && r.1 == pattern && !r.2).map(|r| r.3)
}

fn reference_latency(transport: &str) -> Option<u64> {
    REFERENCE_LATENCY_MS.iter().find(|r| r.0 == transport && !r.2).map(|r| r.3)
}

impl BenchReport {
    pub fn payload_of(&self, transport: BenchTransport, pattern: BenchPattern) -> Option<u64> {
        self.payload.iter().find(|p| p.transport == transport && p.pattern == pattern).map(|p| p.bytes)
    }

    pub fn median_of(&self, transport: BenchTransport, pattern: BenchPattern) -> Option<f64> {
        self.latency.iter().find(|l| l.transport == transport && l.pattern == pattern).and_then(|l| l.median())
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# metric transport pattern value\n");
        for p in &self.payload {
            let _ = writeln!(out, "payload_bytes {} {} {}", p.transport, p.pattern, p.bytes);
            let _ = writeln!(out, "payload_messages {} {} {}", p.transport, p.pattern, p.messages);
        }
        for l in &self.latency {
            let (t, p) = (l.transport, l.pattern);
            match (l.min(), l.median(), l.p95()) {
                (Some(min), Some(median), Some(p95)) => {
                    let _ = writeln!(out, "latency_ms_min {t} {p} {min:.3}");
                    let _ = writeln!(out, "latency_ms_median {t} {p} {median:.3}");
                    let _ = writeln!(out, "latency_ms_p95 {t} {p} {p95:.3}");
                }
                _ => {
                    let _ = writeln!(out, "latency_ms_median {t} {p} none");
                }
            }
            let _ = writeln!(out, "latency_samples {t} {p} {}", l.samples_ms.len());
            let _ = writeln!(out, "latency_lost {t} {p} {}", l.lost);
            if l.flagged() {
                let _ = writeln!(out, "# flagged: {t} {p} lost {} of {} transfers", l.lost, l.requested);
            }
        }
        for s in &self.soak {
            let t = s.transport;
            if let Some(why) = &s.unsupported {
                let _ = writeln!(out, "# soak {t}: unsupported ({why})");
                continue;
            }
            let _ = writeln!(out, "soak_presses {t} async {}", s.presses);
            for trend in &s.trends {
                for (secs, kb) in &trend.samples {
                    let _ = writeln!(out, "mem_kb_{} {t} async {kb} # t={secs:.0}s", trend.device);
                }
                match trend.growth {
                    Some(g) => {
                        let _ = writeln!(out, "mem_growth_{} {t} async {g:.4}", trend.device);
                    }
                    None => {
                        let _ = writeln!(out, "mem_growth_{} {t} async none", trend.device);
                    }
                }
            }
            if let Some(leds) = &s.final_leds {
                let _ = writeln!(out, "# soak {t}: final cem leds {leds}");
            }
        }

        out.push_str("\n# ratios: ours vs reference testbed\n");
        for (pattern, base) in [(BenchPattern::Async, BenchTransport::Udp), (BenchPattern::Sync, BenchTransport::Tcp)] {
            let ours = match (self.payload_of(BenchTransport::Xmpp, pattern), self.payload_of(base, pattern)) {
                (Some(x), Some(b)) if b > 0 => format!("{:.2}", x as f64 / b as f64),
                _ => "n/a".to_string(),
            };
            let reference =
                reference_payload("xmpp", pattern.name()).zip(reference_payload(base.name(), pattern.name()));
            let reference = reference.map(|(x, b)| format!("{:.2}", x as f64 / b as f64)).unwrap_or_default();
            let _ = writeln!(out, "payload {pattern} xmpp/{base} ours {ours} reference {reference}");
        }
        let ours = match (
            self.median_of(BenchTransport::Xmpp, BenchPattern::Async),
            self.median_of(BenchTransport::Udp, BenchPattern::Async),
        ) {
            (Some(x), Some(u)) if u > 0.0 => format!("{:.2}", x / u),
            _ => "n/a".to_string(),
        };
        let reference = reference_latency("xmpp").zip(reference_latency("udp")).map(|(x, u)| x as f64 / u as f64);
        let _ = writeln!(out, "latency_median async xmpp/udp ours {ours} reference {:.2}", reference.unwrap_or(0.0));

        out.push_str("\n# reference testbed (LAN, oscilloscope and packet capture)\n");
        for (t, p, enc, v) in REFERENCE_PAYLOAD_BYTES {
            let t = if enc { format!("{t}+tls") } else { t.to_string() };
            let _ = writeln!(out, "payload_bytes {t} {p} {v}");
        }
        for (t, p, enc, v) in REFERENCE_LATENCY_MS {
            let t = if enc { format!("{t}+tls") } else { t.to_string() };
            let _ = writeln!(out, "latency_ms {t} {p} {v}");
        }

        out.push_str("\n# notes\n");
        out.push_str("# xmpp+tls: unsupported (v1); encrypted rows have no measurement here\n");
        out.push_str("# sync payload is request plus response; there is no separate acknowledgement message\n");
        out.push_str("# payload counts every hop, including both legs through the xmpp broker\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_with_ratios() {
        let report = BenchReport {
            payload: vec![
                PayloadResult {
                    transport: BenchTransport::Udp,
                    pattern: BenchPattern::Async,
                    bytes: 1,
                    messages: 1,
                    sent_bytes: 1,
                },
                PayloadResult {
                    transport: BenchTransport::Xmpp,
                    pattern: BenchPattern::Async,
                    bytes: 300,
                    messages: 2,
                    sent_bytes: 300,
                },
            ],
            latency: vec![],
            soak: vec![],
        };
        let text = report.render();
        assert!(text.contains("payload_bytes udp async 1\n"));
        assert!(text.contains("payload async xmpp/udp ours 300.00 reference 16.47\n"));
        assert!(text.contains("payload sync xmpp/tcp ours n/a reference 2.65\n"));
        assert!(text.contains("payload_bytes xmpp+tls async 346\n"));
        assert!(text.contains("unsupported (v1)"));
    }
}
