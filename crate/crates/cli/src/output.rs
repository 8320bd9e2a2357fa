//! Output files and the run manifest.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::commands::Outputs;
use crate::config::RunConfig;

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Writes `<command>.csv`, `<command>.json` and `manifest.json` into `dir`.
///
/// Nothing time- or host-dependent is recorded, so repeated runs with the
/// same configuration produce identical bytes.
pub fn write(dir: &Path, command: &str, cfg: &RunConfig, out: &Outputs) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let json = pretty(&out.json);
    let files = [(format!("{command}.csv"), out.csv.as_bytes()), (format!("{command}.json"), json.as_bytes())];
    let mut hashes = serde_json::Map::new();
    for (name, bytes) in &files {
        fs::write(dir.join(name), bytes)?;
        hashes.insert(name.clone(), json!(sha256_hex(bytes)));
    }
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "config_sha256": sha256_hex(canonical.as_bytes()),
        "config": serde_json::from_str::<Value>(&canonical).expect("round trip"),
        "outputs": hashes,
    });
    fs::write(dir.join("manifest.json"), pretty(&manifest))
}
