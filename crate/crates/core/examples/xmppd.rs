//! Minimal XMPP broker for the bundled networks.
//!
//! ```text
//! cargo run --example xmppd -- --port 5222 --accounts nets/accounts.txt
//! ```

fn main() -> std::process::ExitCode {
    fbcomm::appcli::xmppd_main()
}
