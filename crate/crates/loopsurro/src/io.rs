//! Shared text-format helpers: 17-significant-digit floats, key-value
//! metadata files, and a small content hash for run manifests.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Formats a float with 17 significant digits, which round-trips every
/// finite f64 exactly.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes sorted `key value` lines.
pub fn write_key_values<W: Write>(mut w: W, entries: &BTreeMap<String, String>) -> Result<()> {
    for (k, v) in entries {
        writeln!(w, "{k} {v}")?;
    }
    Ok(())
}

pub fn save_key_values(path: &Path, entries: &BTreeMap<String, String>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_key_values(std::io::BufWriter::new(file), entries)
}

pub fn read_key_values<R: BufRead>(r: R) -> Result<BTreeMap<String, String>> {
    let mut entries = BTreeMap::new();
    for line in r.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match trimmed.split_once(' ') {
            Some((k, v)) => {
                entries.insert(k.to_string(), v.trim().to_string());
            }
            None => return Err(Error::Parse(format!("expected `key value`, got `{trimmed}`"))),
        }
    }
    Ok(entries)
}

pub fn load_key_values(path: &Path) -> Result<BTreeMap<String, String>> {
    let file = std::fs::File::open(path)?;
    read_key_values(std::io::BufReader::new(file))
}

/// FNV-1a 64-bit hash, hex encoded. Stable across runs and platforms.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}
