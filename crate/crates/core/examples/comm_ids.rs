//! Parses communication IDs and prints their layers.
//!
//! ```text
//! cargo run --example comm_ids -- 'fbdk[].ip[239.0.0.1:61000]'
//! ```

use fbcomm::commstack::parse_comm_id;

fn main() {
    let mut ids: Vec<String> = std::env::args().skip(1).collect();
    if ids.is_empty() {
        ids = vec![
            "fbdk[].ip[192.168.20.1:61499]".into(),
            "fbdk[].xmpp[1:cemdsm@localhost/res:***: 192.168.1.210:netop@localhost/res]".into(),
            "xmpp[0:display@localhost/res:display-secret:127.0.0.1:cemdsm@localhost/res]".into(),
            "fbdk[].tcp[1.2.3.4:5]".into(),
        ];
    }
    for text in ids {
        println!("{text}");
        match parse_comm_id(&text) {
            Ok(id) => {
                for layer in id.layers() {
                    let role = if layer.is_transport() { "transport" } else { "payload" };
                    println!("  {role:<9} {:<5} {:?}", layer.name, layer.params);
                }
                assert_eq!(id.to_string(), text);
            }
            Err(e) => println!("  error: {e}"),
        }
    }
}
