use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use recurrent_causal::{Error, Result};

pub fn read(path: &str) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_string(),
        source,
    })
}

pub fn sha256_file(path: &str) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_string(),
        source,
    })?;
    Ok(hex(&Sha256::digest(&bytes)))
}

pub fn sha256_str(s: &str) -> String {
    hex(&Sha256::digest(s.as_bytes()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn block(command: &str, seed: Option<u64>, hashes: Value, options: Value) -> Value {
    json!({
        "tool": "recurrent-causal",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": seed,
        "sha256": hashes,
        "options": options,
    })
}
