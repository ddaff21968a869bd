//! Run manifests: a sorted key-value record of everything that shaped an
//! artifact, plus a content hash over those entries.

use std::collections::BTreeMap;
use std::path::Path;

use loopsurro::io::{content_hash, save_key_values};
use loopsurro::Result;

pub struct RunManifest {
    entries: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: u64) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert("tool".to_string(), "loopsurro".to_string());
        entries.insert("version".to_string(), env!("CARGO_PKG_VERSION").to_string());
        entries.insert("subcommand".to_string(), subcommand.to_string());
        entries.insert("seed".to_string(), seed.to_string());
        RunManifest { entries }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Hash over every entry except the hash itself.
    pub fn hash(&self) -> String {
        let mut text = String::new();
        for (k, v) in &self.entries {
            if k != "hash" {
                text.push_str(k);
                text.push(' ');
                text.push_str(v);
                text.push('\n');
            }
        }
        content_hash(text.as_bytes())
    }

    pub fn save(&mut self, path: &Path) -> Result<String> {
        let hash = self.hash();
        self.entries.insert("hash".to_string(), hash.clone());
        save_key_values(path, &self.entries)?;
        Ok(hash)
    }
}

pub fn manifest_path(artifact: &Path) -> std::path::PathBuf {
    let mut os = artifact.as_os_str().to_os_string();
    os.push(".manifest");
    std::path::PathBuf::from(os)
}
