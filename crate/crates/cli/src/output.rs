use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use herdtrack_core::io::write_atomic;

use crate::commands::{runtime, CmdResult};
use crate::config::RunConfig;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hashes of every input file plus one digest over all of them in order.
pub fn provenance(command: &str, cfg: &RunConfig, inputs: &[&Path]) -> CmdResult<Value> {
    let mut all = Sha256::new();
    let mut files = Vec::with_capacity(inputs.len());
    for p in inputs {
        let bytes = std::fs::read(p).map_err(|e| runtime(format!("reading {}: {e}", p.display())))?;
        let digest = Sha256::digest(&bytes);
        all.update(digest);
        files.push(json!({ "path": p.display().to_string(), "sha256": hex(&digest) }));
    }
    Ok(json!({
        "tool": concat!("herdtrack ", env!("CARGO_PKG_VERSION")),
        "command": command,
        "config": cfg,
        "inputs": files,
        "inputs_sha256": hex(&all.finalize()),
    }))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CmdResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime)?;
    text.push('\n');
    write_atomic(path, text.as_bytes()).map_err(runtime)
}

pub fn write_text(path: &Path, text: &str) -> CmdResult<()> {
    write_atomic(path, text.as_bytes()).map_err(runtime)
}

