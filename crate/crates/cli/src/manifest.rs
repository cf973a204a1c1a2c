use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Record written after every stage; a later run skips the stage when the
/// hash matches and every artifact still exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    pub seed: u64,
    pub config_hash: String,
    /// Wall-clock seconds per step, `total` for the whole stage.
    pub timings: BTreeMap<String, f64>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<PathBuf>,
}

impl RunManifest {
    pub fn path(out_dir: &Path, stage: &str) -> PathBuf {
        out_dir.join("manifests").join(format!("{stage}.json"))
    }

    pub fn load(out_dir: &Path, stage: &str) -> Option<RunManifest> {
        let text = std::fs::read_to_string(Self::path(out_dir, stage)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn save(&self, out_dir: &Path) -> Result<(), CliError> {
        let path = Self::path(out_dir, &self.stage);
        let dir = path.parent().expect("manifest path has a parent");
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        std::fs::write(&path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
    }

    pub fn is_current(&self, out_dir: &Path, hash: &str) -> bool {
        self.config_hash == hash && self.artifacts.iter().all(|a| out_dir.join(a).exists())
    }
}

/// Hex SHA-256 of the JSON form of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}
