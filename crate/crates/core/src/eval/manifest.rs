use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::GENERATOR;

/// Key–value record of what produced a set of results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub crate_version: String,
    pub generator: String,
    pub command: String,
    pub seeds: Vec<u64>,
    /// Codebook label to hex content hash.
    pub codebooks: BTreeMap<String, String>,
    pub parameters: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            generator: GENERATOR.to_string(),
            command: command.into(),
            seeds: Vec::new(),
            codebooks: BTreeMap::new(),
            parameters: BTreeMap::new(),
        }
    }

    pub fn parameter(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn codebook(mut self, label: &str, hash: u64) -> Self {
        self.codebooks.insert(label.to_string(), format!("{hash:016x}"));
        self
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidInput(format!("manifest: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidInput(format!("manifest: {e}")))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut m = RunManifest::new("bench rd").parameter("d", 64).codebook("k2-n64", 0xdead_beef);
        m.seeds = vec![1, 2, 3];
        let text = m.to_toml().unwrap();
        assert!(text.contains("k2-n64 = \"00000000deadbeef\""));
        assert_eq!(RunManifest::from_toml(&text).unwrap(), m);
    }
}
