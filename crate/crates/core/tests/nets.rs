//! The files under nets/ are the generator output; set UPDATE_NETS=1 to
//! rewrite them.

use std::path::PathBuf;

use fbcomm::appcli::{bundled_nets, load_netdef, netdef_to_text, ACCOUNTS};

fn nets_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("nets")
}

#[test]
fn bundled_files_match_generator() {
    let update = std::env::var_os("UPDATE_NETS").is_some();
    let mut files: Vec<(String, String)> = bundled_nets()
        .into_iter()
        .map(|(name, header, net)| (name.to_string(), netdef_to_text(&net, header)))
        .collect();
    files.push(("accounts.txt".into(), ACCOUNTS.to_string()));
    for (name, text) in files {
        let path = nets_dir().join(&name);
        if update {
            std::fs::write(&path, &text).unwrap();
        }
        let on_disk = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(on_disk, text, "{name} is stale; rerun with UPDATE_NETS=1");
    }
}

#[test]
fn bundled_files_load() {
    for (name, _, net) in bundled_nets() {
        let doc = load_netdef(&nets_dir().join(name)).unwrap();
        assert_eq!(doc.net, net);
    }
}
