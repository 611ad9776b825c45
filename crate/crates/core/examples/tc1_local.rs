//! Runs the single-device TC1 network with a press script and prints the
//! transcript. Extra arguments are appended to the script.
//!
//! ```text
//! cargo run --example tc1_local -- "press I_NV" leds
//! ```

use std::io::Cursor;

use fbcomm::appcli::{netdef_to_text, parse_netdef, run_device, tc1_local_net, RunnerOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let doc = parse_netdef(&netdef_to_text(&tc1_local_net(), "TC1 on one device"))?;
    let mut script = String::from("leds\npress I_OV\nleds\npress I_UV\nleds\nstats\n");
    for arg in std::env::args().skip(1) {
        script.push_str(&arg);
        script.push('\n');
    }
    let outcome = run_device(&doc, "local", RunnerOptions::default(), Cursor::new(script), std::io::stdout())?;
    eprintln!("{outcome:?}");
    Ok(())
}
