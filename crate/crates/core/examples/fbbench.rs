//! Transport benchmarks.
//!
//! ```text
//! cargo build --bin fbrun
//! cargo run --release --example fbbench -- payload --transport xmpp --pattern async --out report.txt
//! cargo run --release --example fbbench -- latency --transport xmpp --pattern async --n 100 --out report.txt
//! cargo run --release --example fbbench -- soak --transport xmpp --minutes 10 --out soak.txt
//! ```

fn main() -> std::process::ExitCode {
    fbcomm::bench::fbbench_main()
}
